"""Export a knowledge base as a logic program for an answer-set solver.

Four variants are available.  ``base`` is the guess-and-check program,
``order`` replaces its degree preference with order-encoded atoms
``eval_ge(C,X,V)`` ("C has degree at least V/n at X"), and the ``-wc``
variants add weight constraints enforcing phi-coherence.  The plain
variants carry no coherence check at all and say so in a warning comment.

Comparison placeholders are expanded into one rule per comparison constant
(``geq``, ``gt``, ``leq``, ``lt``).  Facts are written with integers only:
weights and phi bounds are multiplied by a common factor, and rational alphas
are rounded in the direction that preserves each comparison.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Optional

from .kb import ANONYMOUS, Cmp, ConceptExpr, KnowledgeBase, Name, Query, subexpressions

VARIANTS = ("base", "order", "base-wc", "order-wc")
BEGIN, END = "% BEGIN RULES", "% END RULES"

SCRIPT = """\
#script (python)
from clingo.symbol import Number, SymbolType

N = {n}


def is_named_concept(c):
    named = c.type == SymbolType.Function and not c.arguments and c.name not in ("top", "bot")
    return Number(1 if named else 0)


def min(a, b):
    return a if a.number <= b.number else b


def max(a, b):
    return a if a.number >= b.number else b


def neg(a):
    return Number(N - a.number)


def impl(a, b, n):
    return Number(n.number) if a.number <= b.number else b
#end.
"""

BASE_HEAD = """\
val(0..n).   concept(bot).   eval(bot,X,0) :- ind(X).   concept(top).   eval(top,X,n) :- ind(X).

{eval(C,X,V) : val(V)} = 1 :- concept(C), ind(X), @is_named_concept(C) = 1, not crisp(C).
{eval(C,X,0); eval(C,X,n)} = 1 :- concept(C), ind(X), @is_named_concept(C) = 1, crisp(C).

eval(and(A,B),X,@min(V,V')) :- concept(and(A,B)), eval(A,X,V), eval(B,X,V').
eval(or(A,B),X,@max(V,V')) :- concept(or(A,B)), eval(A,X,V), eval(B,X,V').
eval(neg(A),X,@neg(V)) :- concept(neg(A)), eval(A,X,V).
eval(impl(A,B),X,@impl(V,V',n)) :- concept(impl(A,B)), eval(A,X,V), eval(B,X,V').
:- concept(C), @is_named_concept(C)!=1, crisp(C); ind(X), not eval(C,X,0), not eval(C,X,n).

:- concept_inclusion(C,D,geq,A), eval(impl(C,D),X,V), not V >= A.
:- concept_inclusion(C,D,gt,A), eval(impl(C,D),X,V), not V > A.
ind(ci(C,D,leq,A)) :- concept_inclusion(C,D,leq,A).
ind(ci(C,D,lt,A)) :- concept_inclusion(C,D,lt,A).
:- concept_inclusion(C,D,leq,A), eval(impl(C,D),ci(C,D,leq,A),V), not V <= A.
:- concept_inclusion(C,D,lt,A), eval(impl(C,D),ci(C,D,lt,A),V), not V < A.
:- assertion(C,X,geq,A); eval(C,X,V), not V >= A.
:- assertion(C,X,gt,A); eval(C,X,V), not V > A.
:- assertion(C,X,leq,A); eval(C,X,V), not V <= A.
:- assertion(C,X,lt,A); eval(C,X,V), not V < A.

:- exactly_one(ID), ind(X), #count{C : exactly_one_element(ID,C), eval(C,X,n)} != 1.
"""

BASE_PREFERENCE = """\
:~ query(C,_,_,_), eval(C,X,V), V > 0. [-1@V+1]
"""

BASE_TAIL = """\
typical(C,X) :- query(C,_,_,_), eval(C,X,V), V = #max{V' : eval(C,X',V')}.
witness :- query(C,D,geq,A); typical(C,X), eval(impl(C,D),X,V), not V >= A.
witness :- query(C,D,gt,A); typical(C,X), eval(impl(C,D),X,V), not V > A.
witness :- query(C,D,leq,A); typical(C,X), eval(impl(C,D),X,V), V <= A.
witness :- query(C,D,lt,A); typical(C,X), eval(impl(C,D),X,V), V < A.
:~ witness. [-1@1]

#show witness : witness.
#show eval(C,X,V) : witness, eval(C,X,V), concept(C), @is_named_concept(C) = 1.
"""

# the weak constraint carries V as a term; without it every (C,X,V) tuple
# would collapse into a single penalty
ORDER_RULES = """\
:~ query(C,_,_,_), eval_ge(C,X,V). [-1@2,V]

{eval_ge(C,X,V) : val(V), V > 0} :- concept(C), ind(X).
:- eval_ge(C,X,V), V > 1, not eval_ge(C,X,V-1).

:- concept(C), ind(X); eval(C,X,V), V > 0; not eval_ge(C,X,V).
:- concept(C), ind(X); eval(C,X,V); eval_ge(C,X,V+1).
:- concept(C), ind(X); eval_ge(C,X,V), not eval_ge(C,X,V+1); not eval(C,X,V).

:- concept(and(A,B)), ind(X), eval_ge(and(A,B),X,V); not eval_ge(A,X,V).
:- concept(and(A,B)), ind(X); eval_ge(and(A,B),X,V); not eval_ge(B,X,V).
:- concept(and(A,B)), ind(X); eval_ge(A,X,V), eval_ge(B,X,V); not eval_ge(and(A,B),X,V).

:- concept(or(A,B)), ind(X); eval_ge(or(A,B),X,V); not eval_ge(A,X,V), not eval_ge(B,X,V).
:- concept(or(A,B)), ind(X); eval_ge(A,X,V); not eval_ge(or(A,B),X,V).
:- concept(or(A,B)), ind(X); eval_ge(B,X,V); not eval_ge(or(A,B),X,V).

:- concept(neg(A)), ind(X); eval_ge(neg(A),X,V); eval_ge(A,X,n-V+1).
:- concept(neg(A)), ind(X), val(V), V > 0; not eval_ge(A,X,n-V+1); not eval_ge(neg(A),X,V).

l_gt_r(A,B,X) :- concept(impl(A,B)), ind(X); eval_ge(A,X,V); not eval_ge(B,X,V).
:- concept(impl(A,B)), ind(X); eval_ge(impl(A,B),X,V); l_gt_r(A,B,X); not eval_ge(B,X,V).
:- concept(impl(A,B)), ind(X), val(V), V>0; not l_gt_r(A,B,X); not eval_ge(impl(A,B),X,V).
:- concept(impl(A,B)), ind(X); eval_ge(B,X,V); not eval_ge(impl(A,B),X,V).
"""

WC_BASE = """\
:- val(V), val_phi(V,LB,UB); wti(C,_,_), ind(X); eval(C,X,V);
   not LB < #sum{W*VD, D,VD : wti(C,D,W), eval(D,X,VD)} <= UB.
:- val(V), val_phi(V,LB,UB); wti(C,_,_), ind(X); not eval(C,X,V);
   LB < #sum{W*VD, D,VD : wti(C,D,W), eval(D,X,VD)} <= UB.
"""

# degree >= V exactly when the weight exceeds the lower bound of row V
WC_ORDER = """\
:- val(V), V > 0, val_phi(V,LB,UB); wti(C,_,_), ind(X); eval_ge(C,X,V);
   not #sum{W,D,VD : wti(C,D,W), eval_ge(D,X,VD)} > LB.
:- val(V), V > 0, val_phi(V,LB,UB); wti(C,_,_), ind(X); not eval_ge(C,X,V);
   #sum{W,D,VD : wti(C,D,W), eval_ge(D,X,VD)} > LB.
"""

FREE_INDIVIDUAL = "unconstrained"

BRIDGE = "val_phi(V,LB,UB) :- valphi(V,LB,UB).\n"

WARNING = (
    "% WARNING: this variant does not enforce phi-coherence; the answer-set\n"
    "% system must supply a propagator for it, otherwise answers are unsound.\n"
)


def rule_block(variant: str) -> str:
    """The fixed rule text of ``variant`` (independent of the KB)."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    order = variant.startswith("order")
    parts = [BASE_HEAD, ORDER_RULES if order else BASE_PREFERENCE, BASE_TAIL]
    if variant.endswith("-wc"):
        parts.append(WC_ORDER if order else WC_BASE)
    return "\n".join(parts)


# --------------------------------------------------------------------------
# integer facts


def _int_alpha(alpha: Fraction, n: int, cmp: Cmp) -> int:
    a = alpha * n
    if a.denominator == 1:
        return int(a)
    # v >= a <=> v >= ceil(a); v > a <=> v > floor(a); symmetric for <=, <
    return math.ceil(a) if cmp in (Cmp.GE, Cmp.LT) else math.floor(a)


def _fact_scale(kb: KnowledgeBase) -> int:
    dens = [w.weight.denominator for w in kb.dbox]
    dens += [(b * kb.n).denominator for r in kb.phi.rows for b in (r.lb, r.ub) if b is not None]
    return math.lcm(*dens) if dens else 1


def encoding_facts(kb: KnowledgeBase, query: Optional[Query] = None) -> list[str]:
    n = kb.n
    scale = _fact_scale(kb)
    out = [f"% weights and phi bounds multiplied by {scale}"] if scale != 1 else []

    def bound(b, lower):
        if b is None:
            return "#inf" if lower else "#sup"
        return str(int(b * n * scale))

    out += [f"valphi({r.v},{bound(r.lb, True)},{bound(r.ub, False)})." for r in kb.phi.rows]

    roots: list[ConceptExpr] = [Name(c) for c in kb.concepts]
    roots += list(kb.extra_concepts)
    roots += [ax.impl for ax in kb.tbox]
    roots += [a.concept for a in kb.abox]
    roots += [w.body for w in kb.dbox]
    if query is not None:
        roots += [query.subject, query.impl]
    seen: dict[str, None] = {}
    for r in roots:
        for e in subexpressions(r):
            s = str(e)
            if s not in ("top", "bot"):
                seen.setdefault(s, None)
    out += [f"concept({s})." for s in seen]
    out += [f"ind({i})." for i in kb.individuals]
    if kb.assertions_for(ANONYMOUS):
        # the programs rely on an unconstrained individual to stand for an
        # arbitrary element; add one when anonymous is itself constrained
        free = FREE_INDIVIDUAL
        while free in kb.individuals:
            free += "_"
        out.append(f"ind({free}).")
    out += [f"crisp({c})." for c in kb.crisp]
    for gid, members in kb.exactly_one:
        out.append(f"exactly_one({gid}).")
        out += [f"exactly_one_element({gid},{m})." for m in members]
    out += [
        f"concept_inclusion({ax.lhs},{ax.rhs},{ax.cmp.value},{_int_alpha(ax.alpha, n, ax.cmp)})."
        for ax in kb.tbox
    ]
    out += [
        f"assertion({a.concept},{a.individual},{a.cmp.value},{_int_alpha(a.alpha, n, a.cmp)})."
        for a in kb.abox
    ]
    # the weight constraints aggregate over (body, degree) keys, so repeated
    # (subject, body) pairs must be merged into one weight
    merged: dict[tuple[str, str], Fraction] = {}
    for w in kb.dbox:
        key = (str(w.subject), str(w.body))
        merged[key] = merged.get(key, Fraction(0)) + w.weight
    out += [f"wti({s},{d},{int(w * scale)})." for (s, d), w in merged.items()]
    if query is not None:
        out.append(
            f"query({query.subject},{query.body},{query.cmp.value},{_int_alpha(query.alpha, n, query.cmp)})."
        )
    return out


def export_encoding(kb: KnowledgeBase, query: Optional[Query], variant: str = "order-wc") -> str:
    rules = rule_block(variant)
    lines = [f"% phi-coherent entailment program, variant {variant}, n = {kb.n}"]
    text = "\n".join(lines) + "\n"
    if not variant.endswith("-wc"):
        text += WARNING
    text += "\n" + SCRIPT.format(n=kb.n) + "\n"
    text += f"#const n={kb.n}.\n\n{BEGIN}\n{rules}{END}\n\n{BRIDGE}\n"
    text += "\n".join(encoding_facts(kb, query)) + "\n"
    return text


def extract_rules(program: str) -> str:
    start = program.index(BEGIN) + len(BEGIN)
    return program[start:program.index(END)]


def normalize(text: str) -> str:
    """Drop all whitespace, for comparisons that ignore layout."""
    return re.sub(r"\s+", "", text)


# --------------------------------------------------------------------------
# linting


_PAIRS = {")": "(", "}": "{", "]": "["}


def lint_program(program: str) -> list[str]:
    """Cheap syntax sanity checks: bracket balance and statement terminators.

    Comments and the ``#script ... #end.`` block are skipped.
    """
    problems = []
    body = re.sub(r"#script.*?#end\.", lambda m: "\n" * m.group().count("\n"), program, flags=re.S)
    stack: list[tuple[str, int]] = []
    pending = False
    pending_line = 0
    for lineno, raw in enumerate(body.splitlines(), start=1):
        line = raw.split("%", 1)[0]
        for ch in line:
            if ch in "({[":
                stack.append((ch, lineno))
            elif ch in ")}]":
                if not stack or stack[-1][0] != _PAIRS[ch]:
                    problems.append(f"line {lineno}: unmatched '{ch}'")
                else:
                    stack.pop()
        stripped = line.strip()
        if not stripped:
            continue
        if not pending:
            pending_line = lineno
        # a statement ends at a '.' outside brackets that is not part of '..'
        pending = not re.search(r"(?<!\.)\.(\s*\[[^\]]*\])?\s*$", stripped) or bool(stack)
        if stripped.startswith(":~") and not re.search(r"\]\s*$", stripped):
            problems.append(f"line {lineno}: weak constraint without [weight@level]")
    for ch, lineno in stack:
        problems.append(f"line {lineno}: unclosed '{ch}'")
    if pending:
        problems.append(f"line {pending_line}: statement not terminated by '.'")
    return problems


# --------------------------------------------------------------------------
# optional cross-check with an answer-set solver


class _Context:
    """The @-functions of :data:`SCRIPT`, for solvers built without Python."""

    def __init__(self, n: int):
        from clingo.symbol import Number, SymbolType

        self._number = Number
        self._function = SymbolType.Function
        self.n = n

    def is_named_concept(self, c):
        named = c.type == self._function and not c.arguments and c.name not in ("top", "bot")
        return self._number(1 if named else 0)

    def min(self, a, b):
        return a if a.number <= b.number else b

    def max(self, a, b):
        return a if a.number >= b.number else b

    def neg(self, a):
        return self._number(self.n - a.number)

    def impl(self, a, b, n):
        return self._number(n.number) if a.number <= b.number else b


def clingo_available() -> bool:
    try:
        import clingo  # noqa: F401
    except ImportError:
        return False
    return True


def clingo_witness(program: str, n: int, timeout: Optional[float] = None) -> Optional[bool]:
    """Solve an exported program; return whether the optimum has ``witness``,
    or ``None`` if the program has no answer set."""
    import clingo

    body = re.sub(r"#script.*?#end\.", "", program, flags=re.S)
    ctl = clingo.Control(["--opt-mode=opt", "--warn=none"])
    ctl.add("base", [], body)
    ctl.ground([("base", [])], context=_Context(n))
    best: list = []

    def on_model(m):
        best[:] = [any(s.name == "witness" for s in m.symbols(shown=True))]

    with ctl.solve(on_model=on_model, async_=True) as handle:
        if not handle.wait(timeout if timeout is not None else -1):
            handle.cancel()
            raise TimeoutError("answer-set solver timed out")
        result = handle.get()
    if result.unsatisfiable:
        return None
    return best[0]


def clingo_entails(kb: KnowledgeBase, query: Query, variant: str = "order-wc",
                   timeout: Optional[float] = None) -> tuple[bool, bool]:
    """(entailed, kb_satisfiable) according to the exported program."""
    if not variant.endswith("-wc"):
        raise ValueError("only the -wc variants enforce coherence")
    w = clingo_witness(export_encoding(kb, query, variant), kb.n, timeout)
    if w is None:
        return True, False
    return (not w) if query.cmp.universal else w, True
