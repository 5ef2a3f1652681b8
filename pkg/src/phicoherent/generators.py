"""Instance generators: the parity reduction, network KBs, and random KBs."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .kb import (
    And, Assertion, BOT, Cmp, ConceptExpr, Impl, Inclusion, KBError, KnowledgeBase, Name, Neg,
    Or, PhiRow, PhiTable, Query, TOP, WTI, new_kb,
)
from .kbio import serialize_kb

# --------------------------------------------------------------------------
# MAX-SAT-EVEN reduction


@dataclass(frozen=True)
class ClauseSet:
    """Clauses over positive integer variables; a literal is ``+x`` or ``-x``."""

    clauses: tuple[frozenset, ...]

    def __post_init__(self):
        cs = tuple(frozenset(c) for c in self.clauses)
        for i, c in enumerate(cs):
            if not c:
                raise KBError(f"clause {i + 1} is empty")
            if 0 in c:
                raise KBError(f"clause {i + 1} contains literal 0")
            if any(-lit in c for lit in c):
                raise KBError(f"clause {i + 1} is a tautology")
        object.__setattr__(self, "clauses", cs)

    @classmethod
    def of(cls, *clauses: Iterable[int]) -> "ClauseSet":
        return cls(tuple(frozenset(c) for c in clauses))

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(sorted({abs(lit) for c in self.clauses for lit in c}))

    def __len__(self) -> int:
        return len(self.clauses)


def parse_clauses(text: str) -> ClauseSet:
    """Read DIMACS-style clauses: whitespace separated literals ending in 0.

    ``c`` comment lines and the ``p cnf`` header are skipped.
    """
    lits: list[int] = []
    clauses = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line[0] in "cp%":
            continue
        for tok in line.split():
            x = int(tok)
            if x == 0:
                clauses.append(frozenset(lits))
                lits = []
            else:
                lits.append(x)
    if lits:
        clauses.append(frozenset(lits))
    return ClauseSet(tuple(clauses))


def max_sat(gamma: ClauseSet) -> int:
    """Maximum number of jointly satisfiable clauses, by trying every assignment."""
    xs = gamma.variables
    best = 0
    for bits in itertools.product((False, True), repeat=len(xs)):
        truth = dict(zip(xs, bits))
        k = sum(1 for c in gamma.clauses if any(truth[abs(l)] == (l > 0) for l in c))
        best = max(best, k)
    return best


def reduction_phi(n: int) -> PhiTable:
    """Step function agreeing with min(1, max(0, w/n)) at every integer w."""
    if n == 1:
        return PhiTable(1, (PhiRow(0, None, Fraction(0)), PhiRow(1, Fraction(0), None)))
    rows = [PhiRow(0, None, Fraction(0))]
    rows += [PhiRow(v, Fraction(v - 1), Fraction(v)) for v in range(1, n)]
    rows.append(PhiRow(n, Fraction(n - 1), None))
    return PhiTable(n, tuple(rows))


def gen_maxsat_even(gamma: ClauseSet) -> tuple[KnowledgeBase, Query]:
    """KB whose query is entailed iff the maximum satisfiable clause count is even."""
    n = len(gamma)
    xs = gamma.variables
    a = {x: Name(f"a_{x}") for x in xs}
    c = [Name(f"c_{i}") for i in range(1, n + 1)]
    sat = Name("sat")
    even = [Name(f"even_{i}") for i in range(n + 1)]
    e1 = [Name(f"even_{i}_1") for i in range(1, n + 1)]
    e2 = [Name(f"even_{i}_2") for i in range(1, n + 1)]

    if n == 0:
        # a one-valued truth space cannot exist, so use n = 1 and pin sat to 0
        # with a zero-weight inclusion; even_0 is then 1 and k = 0 is even
        dbox = [WTI(sat, TOP, Fraction(0)), WTI(even[0], TOP, Fraction(1))]
        kb = new_kb(1, reduction_phi(1), [sat.id, even[0].id], dbox=dbox)
        return kb, Query(sat, even[0], Cmp.GE, Fraction(1))

    w = lambda s, d, x: WTI(s, d, Fraction(x))
    dbox = [w(a[x], a[x], n * n) for x in xs]
    for i, clause in enumerate(gamma.clauses):
        negs = sorted(-l for l in clause if l < 0)
        poss = sorted(l for l in clause if l > 0)
        dbox.append(w(c[i], TOP, len(negs) * n))
        dbox += [w(c[i], a[x], n) for x in poss]
        dbox += [w(c[i], a[x], -n) for x in negs]
    dbox += [w(sat, ci, 1) for ci in c]
    dbox.append(w(even[0], TOP, n))
    for i in range(1, n + 1):
        dbox += [w(e1[i - 1], even[i - 1], -n), w(e1[i - 1], c[i - 1], n)]
        dbox += [w(e2[i - 1], even[i - 1], n), w(e2[i - 1], c[i - 1], -n)]
        dbox += [w(even[i], e1[i - 1], n), w(even[i], e2[i - 1], n)]

    names = [a[x].id for x in xs] + [ci.id for ci in c] + [sat.id] + [e.id for e in even]
    names += [nm.id for pair in zip(e1, e2) for nm in pair]
    kb = new_kb(n, reduction_phi(n), names, dbox=dbox)
    return kb, Query(sat, even[n], Cmp.GE, Fraction(1))


def enumerate_clause_sets(max_vars: int, max_clauses: int) -> Iterable[ClauseSet]:
    """Every multiset of non-tautological clauses over variables 1..max_vars.

    Clause sets are generated up to variable renaming only in the sense that
    variables are drawn from a fixed pool; duplicates are kept since a clause
    repeated twice changes k.
    """
    xs = range(1, max_vars + 1)
    all_clauses = []
    for size in range(1, max_vars + 1):
        for vs in itertools.combinations(xs, size):
            for signs in itertools.product((1, -1), repeat=size):
                all_clauses.append(frozenset(s * v for s, v in zip(signs, vs)))
    all_clauses.sort(key=lambda c: (len(c), sorted(c, key=lambda l: (abs(l), l))))
    for k in range(max_clauses + 1):
        for combo in itertools.combinations_with_replacement(range(len(all_clauses)), k):
            yield ClauseSet(tuple(all_clauses[i] for i in combo))


def random_clause_set(rng: random.Random, max_vars: int, max_clauses: int) -> ClauseSet:
    nvars = rng.randint(1, max_vars)
    out = []
    for _ in range(rng.randint(1, max_clauses)):
        vs = rng.sample(range(1, nvars + 1), rng.randint(1, min(3, nvars)))
        out.append(frozenset(v if rng.random() < 0.5 else -v for v in vs))
    return ClauseSet(tuple(out))


# --------------------------------------------------------------------------
# fully connected network KBs


@dataclass(frozen=True)
class NetSpec:
    layers: tuple[int, ...]
    seed: int = 0
    n: int = 4
    weight_den: int = 100
    w_min: Fraction = Fraction(-1)
    w_max: Fraction = Fraction(1)
    crisp_inputs: bool = True

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(int(x) for x in self.layers))
        object.__setattr__(self, "w_min", Fraction(self.w_min))
        object.__setattr__(self, "w_max", Fraction(self.w_max))
        if len(self.layers) < 2:
            raise KBError("a network needs at least two layers")
        if any(x < 1 for x in self.layers):
            raise KBError(f"layer sizes must be positive, got {list(self.layers)}")
        if self.layers[-1] != 1:
            raise KBError("the last layer must be a single output node")
        if self.n < 1 or self.weight_den < 1:
            raise KBError("n and weight_den must be positive")
        if self.w_min >= self.w_max:
            raise KBError("w_min must be below w_max")

    @property
    def nodes(self) -> int:
        return sum(self.layers)

    @property
    def edges(self) -> int:
        return sum(a * b for a, b in zip(self.layers, self.layers[1:]))

    @property
    def edges_excluding_output(self) -> int:
        """Edge count without the edges into the output node."""
        return self.edges - self.layers[-2]

    def describe(self) -> str:
        return (f"mlp layers={','.join(map(str, self.layers))} seed={self.seed} n={self.n} "
                f"weight_den={self.weight_den} w_range=[{self.w_min},{self.w_max}] "
                f"crisp_inputs={self.crisp_inputs}")


def layer_names(layers: Sequence[int]) -> list[list[str]]:
    out = [[f"i{j}" for j in range(1, layers[0] + 1)]]
    for li, size in enumerate(layers[1:-1], start=1):
        out.append([f"h{li}_{j}" for j in range(1, size + 1)])
    out.append(["o"])
    return out


def linear_phi(n: int, w_min: Fraction, w_max: Fraction) -> PhiTable:
    """Truncated-linear φ: n thresholds evenly spaced strictly inside [w_min, w_max]."""
    step = (Fraction(w_max) - Fraction(w_min)) / (n + 1)
    return PhiTable.from_thresholds(n, [w_min + v * step for v in range(1, n + 1)])


def gen_mlp_kb(spec: NetSpec) -> tuple[KnowledgeBase, Query]:
    rng = random.Random(spec.seed)
    layers = layer_names(spec.layers)
    d = spec.weight_den
    dbox = []
    for prev, cur in zip(layers, layers[1:]):
        for target in cur:
            for source in prev:
                dbox.append(WTI(Name(target), Name(source), Fraction(rng.randint(-d, d), d)))
    names = [x for layer in layers for x in layer]
    inputs = layers[0]
    body: ConceptExpr = Name(inputs[0]) if len(inputs) == 1 else Or(Name(inputs[0]), Name(inputs[1]))
    kb = new_kb(
        spec.n, linear_phi(spec.n, spec.w_min, spec.w_max), names, dbox=dbox,
        crisp=inputs if spec.crisp_inputs else (),
    )
    return kb, Query(Name("o"), body, Cmp.GE, Fraction(1, 2))


def mlp_text(spec: NetSpec) -> str:
    kb, q = gen_mlp_kb(spec)
    header = [spec.describe(), f"nodes={spec.nodes} edges={spec.edges} "
              f"edges_excluding_output={spec.edges_excluding_output}"]
    return serialize_kb(kb, q, header)


# --------------------------------------------------------------------------
# random KBs for fuzzing

ALPHAS = (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1))


@dataclass(frozen=True)
class RandomParams:
    names: int = 3
    n: int = 2
    wtis: int = 2
    inclusions: int = 1
    assertions: int = 0
    individuals: int = 0
    depth: int = 2
    crisp_prob: float = 0.15
    exactly_one_prob: float = 0.1
    rational_alpha_prob: float = 0.1
    alphas: tuple[Fraction, ...] = ALPHAS
    seed: int = 0

    def oracle_cost(self) -> int:
        return (self.n + 1) ** self.names


def random_expr(rng: random.Random, names: Sequence[str], depth: int) -> ConceptExpr:
    if depth <= 0 or rng.random() < 0.45:
        r = rng.random()
        if r < 0.06:
            return TOP
        if r < 0.1:
            return BOT
        return Name(rng.choice(names))
    op = rng.choice((And, Or, Neg, Impl))
    if op is Neg:
        return Neg(random_expr(rng, names, depth - 1))
    return op(random_expr(rng, names, depth - 1), random_expr(rng, names, depth - 1))


def _alpha(rng: random.Random, p: RandomParams) -> Fraction:
    if rng.random() < p.rational_alpha_prob:
        return Fraction(rng.randint(0, 7), 7)
    return rng.choice(p.alphas)


def _bound(rng: random.Random, p: RandomParams) -> tuple[Cmp, Fraction]:
    # skip "> 1" and "< 0", which no degree satisfies
    while True:
        cmp, alpha = rng.choice(list(Cmp)), _alpha(rng, p)
        if not ((cmp is Cmp.GT and alpha == 1) or (cmp is Cmp.LT and alpha == 0)):
            return cmp, alpha


def random_phi(rng: random.Random, n: int, lo: Fraction, hi: Fraction) -> PhiTable:
    """Monotone table with thresholds on a 1/2 grid in [lo, hi]; ties give empty rows."""
    grid = [Fraction(k, 2) for k in range(int(2 * lo), int(2 * hi) + 1)]
    return PhiTable.from_thresholds(n, sorted(rng.choice(grid) for _ in range(n)))


def random_query(rng: random.Random, kb: KnowledgeBase, depth: int = 1,
                 alphas: Sequence[Fraction] = ALPHAS) -> Query:
    names = kb.concepts
    subject = random_expr(rng, names, depth)
    body = random_expr(rng, names, depth)
    return Query(subject, body, rng.choice(list(Cmp)), rng.choice(list(alphas)))


def gen_random_kb(p: RandomParams) -> KnowledgeBase:
    rng = random.Random(p.seed)
    names = [chr(ord("a") + i) if i < 26 else f"c{i}" for i in range(p.names)]
    dbox = []
    for _ in range(p.wtis):
        subject = Name(rng.choice(names))
        weight = Fraction(rng.randint(-4, 4), rng.choice((1, 1, 1, 2, 3)))
        dbox.append(WTI(subject, random_expr(rng, names, p.depth - 1), weight))
    span = sum(abs(w.weight) for w in dbox) or Fraction(1)
    phi = random_phi(rng, p.n, -span, span)
    tbox = [
        Inclusion(random_expr(rng, names, p.depth - 1), random_expr(rng, names, p.depth - 1), *_bound(rng, p))
        for _ in range(p.inclusions)
    ]
    inds = [f"p{i}" for i in range(p.individuals)]
    pool = inds + ["anonymous"]
    abox = [
        Assertion(random_expr(rng, names, p.depth - 1), rng.choice(pool), *_bound(rng, p))
        for _ in range(p.assertions)
    ]
    crisp = [c for c in names if rng.random() < p.crisp_prob]
    groups = []
    if len(names) >= 2 and rng.random() < p.exactly_one_prob:
        groups.append(("g1", rng.sample(names, rng.randint(2, len(names)))))
    return new_kb(p.n, phi, names, inds, tbox=tbox, abox=abox, dbox=dbox, crisp=crisp, exactly_one=groups)


def random_instance(seed: int, max_names: int = 4, max_wtis: int = 4,
                    ns: Sequence[int] = (2, 4)) -> tuple[KnowledgeBase, Query]:
    """Draw both the parameters and the KB from one seed (differential fuzzing)."""
    rng = random.Random(seed)
    p = RandomParams(
        names=rng.randint(1, max_names), n=rng.choice(list(ns)), wtis=rng.randint(0, max_wtis),
        inclusions=rng.choice((0, 0, 1, 1, 2)), assertions=rng.choice((0, 0, 1, 2)), individuals=rng.randint(0, 1),
        seed=rng.randrange(2**32),
    )
    kb = gen_random_kb(p)
    return kb, random_query(random.Random(p.seed ^ 0x5EED), kb)
