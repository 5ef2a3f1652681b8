"""Reading and writing knowledge bases as logic-program facts.

One fact per line, ``%`` starts a comment::

    valphi(0,-inf,0).  valphi(1,0,80).  ...
    concept(horse).    ind(anonymous).
    wti(horse,has_tail,50).
    query(horse,has_tail,geq,2).

Numbers in the alpha positions of ``concept_inclusion``/``assertion``/``query``
and in the bound positions of ``valphi`` are numerators over ``n`` (``2`` with
``n = 4`` means 1/2); ``wti`` weights are taken as they are.  Any number may be
an integer or an exact ``p/q`` literal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .kb import (
    And, Assertion, BOT, Cmp, ConceptExpr, Impl, Inclusion, KBError, KnowledgeBase, Name, Neg,
    Or, PhiRow, PhiTable, Query, TOP, WTI, Bot, Top, names_in, new_kb,
)

ARITY = {
    "valphi": 3, "concept": 1, "ind": 1, "concept_inclusion": 4, "assertion": 4, "wti": 3,
    "query": 4, "crisp": 1, "exactly_one": 1, "exactly_one_element": 2,
}
CONNECTIVES = {"and": 2, "or": 2, "neg": 1, "impl": 2}


class ParseError(KBError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Term:
    """A parsed argument: a constant, a number, or a function term."""

    name: Optional[str] = None
    args: tuple["Term", ...] = ()
    number: Optional[Fraction] = None
    line: int = 0
    col: int = 0

    @property
    def is_number(self) -> bool:
        return self.number is not None

    def __str__(self) -> str:
        if self.is_number:
            return format_number(self.number)
        if self.args:
            return f"{self.name}({','.join(map(str, self.args))})"
        return self.name


@dataclass(frozen=True)
class FactLine:
    predicate: str
    args: tuple[Term, ...]
    line: int
    col: int


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<block>%\*.*?\*%)
  | (?P<comment>%[^\n]*)
  | (?P<num>\d+(?:/\d+)?)
  | (?P<ident>[a-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),.\-])
    """,
    re.VERBOSE | re.DOTALL,
)


def _tokens(text: str):
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind == "block":
            line += value.count("\n")
            if "\n" in value:
                line_start = m.start() + value.rindex("\n") + 1
        elif kind not in ("ws", "comment"):
            yield kind, value, line, col
        pos = m.end()
    yield "eof", "", line, pos - line_start + 1


class _Parser:
    def __init__(self, text: str):
        self.toks = list(_tokens(text))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of input"
            raise ParseError(f"expected {want!r}, found {got!r}", tok[2], tok[3])
        self.i += 1
        return tok

    def facts(self) -> list[FactLine]:
        out = []
        while self.peek()[0] != "eof":
            _, pred, line, col = self.take("ident")
            args: list[Term] = []
            if self.peek()[1] == "(":
                args = self.arglist()
            self.take("punct", ".")
            out.append(FactLine(pred, tuple(args), line, col))
        return out

    def arglist(self) -> list[Term]:
        self.take("punct", "(")
        args = [self.term()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.term())
        self.take("punct", ")")
        return args

    def term(self) -> Term:
        kind, value, line, col = self.peek()
        if value == "-":
            self.take()
            nxt = self.peek()
            if nxt[0] == "num":
                self.take()
                return Term(number=-Fraction(nxt[1]), line=line, col=col)
            if nxt[1] == "inf":
                self.take()
                return Term(name="-inf", line=line, col=col)
            raise ParseError("expected a number or 'inf' after '-'", nxt[2], nxt[3])
        if kind == "num":
            self.take()
            return Term(number=Fraction(value), line=line, col=col)
        if kind == "ident":
            self.take()
            args = tuple(self.arglist()) if self.peek()[1] == "(" else ()
            return Term(name=value, args=args, line=line, col=col)
        raise ParseError(f"expected a term, found {value or 'end of input'!r}", line, col)


def parse_facts(text: str) -> list[FactLine]:
    return _Parser(text).facts()


def format_number(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


# --------------------------------------------------------------------------
# facts -> knowledge base


def _err(t: Union[Term, FactLine], msg: str) -> ParseError:
    return ParseError(msg, t.line, t.col)


def term_to_concept(t: Term) -> ConceptExpr:
    if t.is_number:
        raise _err(t, f"expected a concept, found number {t}")
    if not t.args:
        if t.name == "top":
            return TOP
        if t.name == "bot":
            return BOT
        if t.name.startswith("_") or t.name == "-inf":
            raise _err(t, f"'{t.name}' is not a concept name")
        return Name(t.name)
    if t.name in ("t", "typical"):
        raise _err(t, "typicality may only appear as the subject of wti/query facts")
    arity = CONNECTIVES.get(t.name)
    if arity is None:
        raise _err(t, f"unknown connective '{t.name}' (expected and/or/neg/impl)")
    if len(t.args) != arity:
        raise _err(t, f"'{t.name}' takes {arity} argument(s), got {len(t.args)}")
    parts = [term_to_concept(a) for a in t.args]
    if t.name == "neg":
        return Neg(parts[0])
    return {"and": And, "or": Or, "impl": Impl}[t.name](*parts)


def _constant(t: Term, what: str) -> str:
    if t.is_number:
        if t.number.denominator == 1 and t.number >= 0:
            return str(t.number.numerator)
        raise _err(t, f"expected {what}, found {t}")
    if t.args or t.name == "-inf":
        raise _err(t, f"expected {what}, found {t}")
    return t.name


def _number(t: Term, what: str) -> Fraction:
    if not t.is_number:
        raise _err(t, f"expected a number for {what}, found {t}")
    return t.number


def _cmp(t: Term) -> Cmp:
    try:
        return Cmp(t.name)
    except ValueError:
        raise _err(t, f"expected one of geq, gt, leq, lt; found {t}") from None


def _bound(t: Term, n: int, lower: bool) -> Optional[Fraction]:
    if not t.is_number:
        if lower and t.name == "-inf" and not t.args:
            return None
        if not lower and t.name == "inf" and not t.args:
            return None
        raise _err(t, f"expected a number or {'-inf' if lower else 'inf'}, found {t}")
    return t.number / n


def build_kb(facts: Sequence[FactLine]) -> tuple[KnowledgeBase, Optional[Query]]:
    for f in facts:
        if f.predicate not in ARITY:
            raise _err(f, f"unknown predicate '{f.predicate}'")
        if len(f.args) != ARITY[f.predicate]:
            raise _err(f, f"'{f.predicate}' takes {ARITY[f.predicate]} argument(s), got {len(f.args)}")

    rows_by_v: dict[int, FactLine] = {}
    for f in facts:
        if f.predicate == "valphi":
            v = _number(f.args[0], "valphi degree")
            if v.denominator != 1 or v < 0:
                raise _err(f.args[0], f"valphi degree must be a non-negative integer, got {v}")
            if int(v) in rows_by_v:
                raise _err(f, f"duplicate valphi row for degree {v}")
            rows_by_v[int(v)] = f
    if not rows_by_v:
        raise ParseError("no valphi table")
    n = max(rows_by_v)
    if n < 1:
        raise _err(rows_by_v[0], "valphi table must cover at least degrees 0 and 1")
    missing = [v for v in range(n + 1) if v not in rows_by_v]
    if missing:
        raise _err(rows_by_v[n], f"malformed phi partition: no valphi row for degree(s) {missing}")
    rows = []
    for v in range(n + 1):
        f = rows_by_v[v]
        rows.append(PhiRow(v, _bound(f.args[1], n, True), _bound(f.args[2], n, False)))
    try:
        phi = PhiTable(n, tuple(rows))
    except KBError as e:
        raise _err(rows_by_v[0], f"malformed phi partition: {e}") from None

    concepts: list[str] = []
    extra: list[tuple[ConceptExpr, FactLine]] = []
    individuals: list[str] = []
    for f in facts:
        if f.predicate == "concept":
            c = term_to_concept(f.args[0])
            if isinstance(c, Name):
                if c.id in concepts:
                    raise _err(f, f"duplicate concept '{c.id}'")
                concepts.append(c.id)
            elif isinstance(c, (Top, Bot)):
                continue
            else:
                extra.append((c, f))
        elif f.predicate == "ind":
            a = _constant(f.args[0], "an individual name")
            if a in individuals:
                raise _err(f, f"duplicate individual '{a}'")
            individuals.append(a)
    declared = set(concepts)

    def concept(t: Term) -> ConceptExpr:
        c = term_to_concept(t)
        undeclared = names_in(c) - declared
        if undeclared:
            raise _err(t, f"undeclared concept(s) {', '.join(sorted(undeclared))}")
        return c

    for c, f in extra:
        undeclared = names_in(c) - declared
        if undeclared:
            raise _err(f.args[0], f"undeclared concept(s) {', '.join(sorted(undeclared))}")

    def alpha(t: Term) -> Fraction:
        a = _number(t, "alpha") / n
        if not 0 <= a <= 1:
            raise _err(t, f"alpha {format_number(a * n)} outside [0, {n}]")
        return a

    tbox, abox, dbox, crisp = [], [], [], []
    groups: dict[str, list[str]] = {}
    query = None
    for f in facts:
        p, args = f.predicate, f.args
        if p == "concept_inclusion":
            tbox.append(Inclusion(concept(args[0]), concept(args[1]), _cmp(args[2]), alpha(args[3])))
        elif p == "assertion":
            ind = _constant(args[1], "an individual name")
            if ind not in individuals and ind != "anonymous":
                raise _err(args[1], f"undeclared individual '{ind}'")
            abox.append(Assertion(concept(args[0]), ind, _cmp(args[2]), alpha(args[3])))
        elif p == "wti":
            subject = concept(args[0])
            if not isinstance(subject, Name):
                raise _err(args[0], f"distinguished concept must be a concept name, got {args[0]}")
            dbox.append(WTI(subject, concept(args[1]), _number(args[2], "weight")))
        elif p == "query":
            if query is not None:
                raise _err(f, "more than one query")
            query = Query(concept(args[0]), concept(args[1]), _cmp(args[2]), alpha(args[3]))
        elif p == "crisp":
            c = concept(args[0])
            if not isinstance(c, Name):
                raise _err(args[0], "crisp applies to concept names only")
            if c.id in crisp:
                raise _err(f, f"duplicate crisp '{c.id}'")
            crisp.append(c.id)
        elif p == "exactly_one":
            gid = _constant(args[0], "a group id")
            if gid in groups:
                raise _err(f, f"duplicate exactly_one group '{gid}'")
            groups[gid] = []
    for f in facts:
        if f.predicate == "exactly_one_element":
            gid = _constant(f.args[0], "a group id")
            if gid not in groups:
                raise _err(f.args[0], f"exactly_one_element for undeclared group '{gid}'")
            c = concept(f.args[1])
            if not isinstance(c, Name):
                raise _err(f.args[1], "exactly_one_element members must be concept names")
            groups[gid].append(c.id)

    try:
        kb = new_kb(
            n, phi, concepts, individuals, tbox=tbox, abox=abox, dbox=dbox, crisp=crisp,
            exactly_one=list(groups.items()), extra_concepts=[c for c, _ in extra],
        )
    except ParseError:
        raise
    except KBError as e:
        raise ParseError(str(e)) from None
    return kb, query


def parse_kb(text: str) -> tuple[KnowledgeBase, Optional[Query]]:
    """Parse fact text into a knowledge base and its (optional) query."""
    return build_kb(parse_facts(text))


def load_kb(path) -> tuple[KnowledgeBase, Optional[Query]]:
    with open(path, encoding="utf-8") as fh:
        return parse_kb(fh.read())


# --------------------------------------------------------------------------
# knowledge base -> facts


def _bound_text(b: Optional[Fraction], n: int, lower: bool) -> str:
    if b is None:
        return "-inf" if lower else "inf"
    return format_number(b * n)


def kb_facts(kb: KnowledgeBase, query: Optional[Query] = None) -> list[str]:
    n = kb.n
    a = lambda x: format_number(x * n)
    out = [f"valphi({r.v},{_bound_text(r.lb, n, True)},{_bound_text(r.ub, n, False)})." for r in kb.phi.rows]
    out += [f"concept({c})." for c in kb.concepts]
    out += [f"concept({c})." for c in kb.extra_concepts]
    out += [f"ind({i})." for i in kb.individuals]
    out += [f"crisp({c})." for c in kb.crisp]
    for gid, members in kb.exactly_one:
        out.append(f"exactly_one({gid}).")
        out += [f"exactly_one_element({gid},{m})." for m in members]
    out += [f"concept_inclusion({ax.lhs},{ax.rhs},{ax.cmp.value},{a(ax.alpha)})." for ax in kb.tbox]
    out += [f"assertion({x.concept},{x.individual},{x.cmp.value},{a(x.alpha)})." for x in kb.abox]
    out += [f"wti({w.subject},{w.body},{format_number(w.weight)})." for w in kb.dbox]
    if query is not None:
        out.append(f"query({query.subject},{query.body},{query.cmp.value},{a(query.alpha)}).")
    return out


def serialize_kb(kb: KnowledgeBase, query: Optional[Query] = None, header: Iterable[str] = ()) -> str:
    lines = [f"% {h}" for h in header]
    lines += kb_facts(kb, query)
    return "\n".join(lines) + "\n"


def save_kb(path, kb: KnowledgeBase, query: Optional[Query] = None, header: Iterable[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_kb(kb, query, header))
