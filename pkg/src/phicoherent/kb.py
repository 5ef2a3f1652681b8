"""Core data types for weighted many-valued knowledge bases with typicality.

Truth degrees live in ``{0, 1/n, ..., n/n}`` and are stored as integer
numerators over a KB-wide denominator ``n``.  Weights and thresholds are
:class:`fractions.Fraction` values so that interval membership is exact.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Union

ANONYMOUS = "anonymous"
RESERVED_NAMES = frozenset({"top", "bot"})
IDENT = re.compile(r"[a-z][A-Za-z0-9_]*\Z")

Rational = Fraction


class KBError(ValueError):
    """Raised when a knowledge base (or one of its parts) is malformed."""


def as_rational(value: Union[int, str, Fraction]) -> Fraction:
    if isinstance(value, float):
        raise TypeError("floats are not accepted; use Fraction or 'p/q' strings")
    return Fraction(value)


@dataclass(frozen=True, order=True)
class Degree:
    num: int
    den: int

    def __post_init__(self):
        if self.den < 1:
            raise KBError(f"degree denominator must be >= 1, got {self.den}")
        if not 0 <= self.num <= self.den:
            raise KBError(f"degree {self.num}/{self.den} outside [0, 1]")

    @property
    def value(self) -> Fraction:
        return Fraction(self.num, self.den)

    def __str__(self) -> str:
        return f"{self.num}/{self.den}"


# --------------------------------------------------------------------------
# Concept expressions


@dataclass(frozen=True)
class Name:
    id: str

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Top:
    def __str__(self) -> str:
        return "top"


@dataclass(frozen=True)
class Bot:
    def __str__(self) -> str:
        return "bot"


@dataclass(frozen=True)
class And:
    left: "ConceptExpr"
    right: "ConceptExpr"

    def __str__(self) -> str:
        return f"and({self.left},{self.right})"


@dataclass(frozen=True)
class Or:
    left: "ConceptExpr"
    right: "ConceptExpr"

    def __str__(self) -> str:
        return f"or({self.left},{self.right})"


@dataclass(frozen=True)
class Neg:
    arg: "ConceptExpr"

    def __str__(self) -> str:
        return f"neg({self.arg})"


@dataclass(frozen=True)
class Impl:
    left: "ConceptExpr"
    right: "ConceptExpr"

    def __str__(self) -> str:
        return f"impl({self.left},{self.right})"


ConceptExpr = Union[Name, Top, Bot, And, Or, Neg, Impl]
TOP = Top()
BOT = Bot()


def children(c: ConceptExpr) -> tuple:
    if isinstance(c, (And, Or, Impl)):
        return (c.left, c.right)
    if isinstance(c, Neg):
        return (c.arg,)
    return ()


def subexpressions(c: ConceptExpr) -> Iterator[ConceptExpr]:
    """Post-order walk (children before parents)."""
    for ch in children(c):
        yield from subexpressions(ch)
    yield c


def names_in(c: ConceptExpr) -> set[str]:
    return {e.id for e in subexpressions(c) if isinstance(e, Name)}


# --------------------------------------------------------------------------
# Comparisons and the phi table


class Cmp(enum.Enum):
    GE = "geq"
    GT = "gt"
    LE = "leq"
    LT = "lt"

    @property
    def universal(self) -> bool:
        """>=/> inclusions hold for every element, <=/< for at least one."""
        return self in (Cmp.GE, Cmp.GT)

    @property
    def symbol(self) -> str:
        return {"geq": ">=", "gt": ">", "leq": "<=", "lt": "<"}[self.value]

    def holds(self, lhs, rhs) -> bool:
        if self is Cmp.GE:
            return lhs >= rhs
        if self is Cmp.GT:
            return lhs > rhs
        if self is Cmp.LE:
            return lhs <= rhs
        return lhs < rhs


@dataclass(frozen=True)
class PhiRow:
    """phi(w) = v/n exactly when lb < w <= ub; ``None`` marks an open end."""

    v: int
    lb: Optional[Fraction]
    ub: Optional[Fraction]

    def contains(self, w: Fraction) -> bool:
        return (self.lb is None or self.lb < w) and (self.ub is None or w <= self.ub)


@dataclass(frozen=True)
class PhiTable:
    n: int
    rows: tuple[PhiRow, ...]

    def __post_init__(self):
        n, rows = self.n, self.rows
        if n < 1:
            raise KBError(f"n must be >= 1, got {n}")
        if len(rows) != n + 1:
            raise KBError(f"phi table needs exactly {n + 1} rows (v = 0..{n}), got {len(rows)}")
        for v, row in enumerate(rows):
            if row.v != v:
                raise KBError(f"phi rows must be listed for v = 0..{n} in order; found v={row.v} at position {v}")
            if row.lb is not None and row.ub is not None and row.lb > row.ub:
                raise KBError(f"phi row {v}: lower bound {row.lb} exceeds upper bound {row.ub}")
        if rows[0].lb is not None:
            raise KBError("phi row 0 must start at -inf")
        if rows[-1].ub is not None:
            raise KBError(f"phi row {n} must end at +inf")
        for a, b in zip(rows, rows[1:]):
            if a.ub is None or b.lb is None or a.ub != b.lb:
                kind = "gap" if (a.ub is not None and b.lb is not None and a.ub < b.lb) else "overlap"
                raise KBError(f"phi rows {a.v} and {b.v} do not meet ({kind}: ub={a.ub}, lb={b.lb})")

    @classmethod
    def from_thresholds(cls, n: int, thresholds: Iterable) -> "PhiTable":
        """Build the table whose row v is (t[v-1], t[v]] with open outer ends."""
        ts = [as_rational(t) for t in thresholds]
        if len(ts) != n:
            raise KBError(f"need {n} thresholds for n={n}, got {len(ts)}")
        bounds = [None, *ts, None]
        return cls(n, tuple(PhiRow(v, bounds[v], bounds[v + 1]) for v in range(n + 1)))

    @property
    def thresholds(self) -> tuple[Fraction, ...]:
        return tuple(r.ub for r in self.rows[:-1])

    def apply(self, w) -> int:
        """Numerator v of phi(w)."""
        w = as_rational(w)
        # rows are a monotone partition; the first row whose ub covers w wins
        for row in self.rows[:-1]:
            if w <= row.ub:
                return row.v
        return self.n


def phi_apply(phi: PhiTable, w) -> Degree:
    return Degree(phi.apply(w), phi.n)


# --------------------------------------------------------------------------
# Axioms, queries, knowledge bases


def _check_alpha(alpha: Fraction, what: str) -> Fraction:
    alpha = as_rational(alpha)
    if not 0 <= alpha <= 1:
        raise KBError(f"{what}: alpha {alpha} outside [0, 1]")
    return alpha


@dataclass(frozen=True)
class Inclusion:
    lhs: ConceptExpr
    rhs: ConceptExpr
    cmp: Cmp
    alpha: Fraction

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_alpha(self.alpha, f"inclusion {self.lhs} <= {self.rhs}"))

    @property
    def impl(self) -> Impl:
        return Impl(self.lhs, self.rhs)


@dataclass(frozen=True)
class Assertion:
    concept: ConceptExpr
    individual: str
    cmp: Cmp
    alpha: Fraction

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_alpha(self.alpha, f"assertion {self.concept}({self.individual})"))


@dataclass(frozen=True)
class WTI:
    subject: Name
    body: ConceptExpr
    weight: Fraction

    def __post_init__(self):
        if not isinstance(self.subject, Name):
            raise KBError(
                f"typicality inclusion subject must be a concept name, got {self.subject}; "
                "compound distinguished concepts are not supported"
            )
        object.__setattr__(self, "weight", as_rational(self.weight))


@dataclass(frozen=True)
class Query:
    subject: ConceptExpr
    body: ConceptExpr
    cmp: Cmp
    alpha: Fraction

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_alpha(self.alpha, "query"))

    @property
    def impl(self) -> Impl:
        return Impl(self.subject, self.body)

    def __str__(self) -> str:
        return f"T({self.subject}) <= {self.body} {self.cmp.symbol} {self.alpha}"


@dataclass(frozen=True)
class KnowledgeBase:
    n: int
    phi: PhiTable
    concepts: tuple[str, ...]
    individuals: tuple[str, ...] = (ANONYMOUS,)
    tbox: tuple[Inclusion, ...] = ()
    abox: tuple[Assertion, ...] = ()
    dbox: tuple[WTI, ...] = ()
    crisp: tuple[str, ...] = ()
    exactly_one: tuple[tuple[str, tuple[str, ...]], ...] = ()
    extra_concepts: tuple[ConceptExpr, ...] = ()

    @property
    def distinguished(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for w in self.dbox:
            seen.setdefault(w.subject.id, None)
        return tuple(seen)

    def wtis_for(self, subject: str) -> tuple[WTI, ...]:
        return tuple(w for w in self.dbox if w.subject.id == subject)

    @property
    def existential_inclusions(self) -> tuple[Inclusion, ...]:
        return tuple(ax for ax in self.tbox if not ax.cmp.universal)

    @property
    def universal_inclusions(self) -> tuple[Inclusion, ...]:
        return tuple(ax for ax in self.tbox if ax.cmp.universal)

    def assertions_for(self, individual: str) -> tuple[Assertion, ...]:
        return tuple(a for a in self.abox if a.individual == individual)

    def degree(self, num: int) -> Degree:
        return Degree(num, self.n)

    def check_query(self, query: Query) -> None:
        undeclared = (names_in(query.subject) | names_in(query.body)) - set(self.concepts)
        if undeclared:
            raise KBError(f"query uses undeclared concept(s): {', '.join(sorted(undeclared))}")


def new_kb(
    n: int,
    phi: PhiTable,
    concepts: Iterable[str],
    individuals: Iterable[str] = (),
    tbox: Iterable[Inclusion] = (),
    abox: Iterable[Assertion] = (),
    dbox: Iterable[WTI] = (),
    crisp: Iterable[str] = (),
    exactly_one: Union[Mapping[str, Iterable[str]], Iterable[tuple[str, Iterable[str]]]] = (),
    extra_concepts: Iterable[ConceptExpr] = (),
) -> KnowledgeBase:
    """Validate the parts and assemble a :class:`KnowledgeBase`."""
    if n < 1:
        raise KBError(f"n must be >= 1, got {n}")
    if phi.n != n:
        raise KBError(f"phi table is for n={phi.n}, knowledge base has n={n}")

    concepts = _unique(concepts, "concept")
    for c in concepts:
        if c in RESERVED_NAMES:
            raise KBError(f"'{c}' is reserved and cannot be declared as a concept name")
    individuals = _unique(individuals, "individual")
    if ANONYMOUS not in individuals:
        individuals = (ANONYMOUS, *individuals)
    declared = set(concepts)

    def check(expr: ConceptExpr, where: str) -> None:
        missing = names_in(expr) - declared
        if missing:
            raise KBError(f"{where} uses undeclared concept(s): {', '.join(sorted(missing))}")

    tbox, abox, dbox = tuple(tbox), tuple(abox), tuple(dbox)
    for ax in tbox:
        check(ax.lhs, f"inclusion {ax.lhs} <= {ax.rhs}")
        check(ax.rhs, f"inclusion {ax.lhs} <= {ax.rhs}")
    for a in abox:
        check(a.concept, f"assertion {a.concept}({a.individual})")
        if a.individual not in individuals:
            raise KBError(f"assertion {a.concept}({a.individual}) uses undeclared individual '{a.individual}'")
    for w in dbox:
        if not isinstance(w.subject, Name):
            raise KBError(f"typicality inclusion subject must be a concept name, got {w.subject}")
        check(w.subject, f"typicality inclusion T({w.subject})")
        check(w.body, f"typicality inclusion T({w.subject}) <= {w.body}")
    crisp = _unique(crisp, "crisp concept")
    for c in crisp:
        if c not in declared:
            raise KBError(f"crisp uses undeclared concept '{c}'")

    groups = exactly_one.items() if isinstance(exactly_one, Mapping) else exactly_one
    eo = []
    for gid, members in groups:
        members = _unique(members, f"member of exactly-one group {gid}")
        for m in members:
            if m not in declared:
                raise KBError(f"exactly-one group {gid} uses undeclared concept '{m}'")
        eo.append((gid, members))
    _unique((g for g, _ in eo), "exactly-one group id")

    extra = tuple(extra_concepts)
    for e in extra:
        check(e, f"concept {e}")

    return KnowledgeBase(
        n=n, phi=phi, concepts=concepts, individuals=individuals, tbox=tbox, abox=abox,
        dbox=dbox, crisp=crisp, exactly_one=tuple(eo), extra_concepts=extra,
    )


def _unique(items: Iterable[str], what: str) -> tuple[str, ...]:
    out: dict[str, None] = {}
    for x in items:
        if not isinstance(x, str) or not IDENT.match(x):
            raise KBError(f"{what} '{x}' is not an identifier (lowercase letter, then letters, digits, '_')")
        if x in out:
            raise KBError(f"duplicate {what} '{x}'")
        out[x] = None
    return tuple(out)


# --------------------------------------------------------------------------
# Valuations and verdicts


@dataclass(frozen=True)
class Valuation:
    """Degrees of named concepts, keyed by (element, concept name)."""

    degrees: Mapping[tuple[str, str], Degree] = field(default_factory=dict)

    def __getitem__(self, key: tuple[str, str]) -> Degree:
        return self.degrees[key]

    @classmethod
    def of_element(cls, element: str, numerators: Mapping[str, int], n: int) -> "Valuation":
        return cls({(element, c): Degree(v, n) for c, v in numerators.items()})

    @property
    def elements(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(x for x, _ in self.degrees))

    def element(self, x: str) -> dict[str, int]:
        return {c: d.num for (y, c), d in self.degrees.items() if y == x}


@dataclass(frozen=True)
class Verdict:
    """Outcome of an entailment check.

    ``entailed`` is ``None`` when the search ran out of time; ``witness`` is a
    counterexample for >=/> queries and a confirming element for <=/< ones.
    """

    entailed: Optional[bool]
    typical_degree: Optional[Degree]
    witness: Optional[Valuation]
    kb_satisfiable: Optional[bool]
    info: Mapping[str, object] = field(default_factory=dict, compare=False)

    @property
    def unknown(self) -> bool:
        return self.entailed is None
