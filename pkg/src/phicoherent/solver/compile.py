"""Flatten a knowledge base into the array form consumed by the search kernels.

Every concept (sub)expression becomes a node whose domain is a bitmask over
degree numerators ``0..n``.  Nodes ``0..len(concepts)-1`` are the concept
names, in declaration order.  Three constraint kinds link nodes:

* ``NODE``  - a compound node and its children (Goedel connective tables)
* ``PHI``   - phi-coherence of a distinguished name, as an integer weighted sum
* ``EXO``   - an exactly-one group

Phi-coherence is scaled to integers: with ``L`` the lcm of every weight
denominator and every ``n * bound`` denominator, ``S = sum(w * L * d)``
over body numerators ``d`` equals ``n * L * weight``, and row ``v`` holds
exactly when ``lo[v] < S <= hi[v]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from ..kb import (
    And, Bot, Cmp, ConceptExpr, Impl, KnowledgeBase, Name, Neg, Or, Top, children,
)

NAME, TOP_K, BOT_K, AND_K, OR_K, NEG_K, IMPL_K = range(7)
C_NODE, C_PHI, C_EXO = range(3)

_KIND = {And: AND_K, Or: OR_K, Neg: NEG_K, Impl: IMPL_K, Top: TOP_K, Bot: BOT_K}

# int64 headroom for scaled weight sums in the compiled kernel
_I64_SAFE = 1 << 62
MAX_KERNEL_N = 62


def allowed_mask(n: int, cmp: Cmp, alpha: Fraction) -> int:
    """Bitmask of numerators v with ``v/n cmp alpha``."""
    m = 0
    for v in range(n + 1):
        if cmp.holds(Fraction(v, n), alpha):
            m |= 1 << v
    return m


@dataclass
class CompiledProblem:
    n: int
    names: tuple[str, ...]
    kind: list[int] = field(default_factory=list)
    ca: list[int] = field(default_factory=list)
    cb: list[int] = field(default_factory=list)
    root: list[int] = field(default_factory=list)
    con_kind: list[int] = field(default_factory=list)
    con_ref: list[int] = field(default_factory=list)
    watch_ptr: list[int] = field(default_factory=list)
    watch_idx: list[int] = field(default_factory=list)
    phi_subj: list[int] = field(default_factory=list)
    phi_tptr: list[int] = field(default_factory=lambda: [0])
    phi_tnode: list[int] = field(default_factory=list)
    phi_tw: list[int] = field(default_factory=list)
    phi_lo: list[int] = field(default_factory=list)
    phi_hi: list[int] = field(default_factory=list)
    exo_ptr: list[int] = field(default_factory=lambda: [0])
    exo_mem: list[int] = field(default_factory=list)
    order: list[int] = field(default_factory=list)
    scale: int = 1
    kernel_safe: bool = True
    index: dict = field(default_factory=dict, repr=False)
    _arrays: Optional[dict] = field(default=None, repr=False)

    @property
    def full(self) -> int:
        return (1 << (self.n + 1)) - 1

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_nodes(self) -> int:
        return len(self.kind)

    @property
    def num_cons(self) -> int:
        return len(self.con_kind)

    def node(self, expr: ConceptExpr) -> int:
        return self.index[expr]

    def watches(self, node: int) -> list[int]:
        return self.watch_idx[self.watch_ptr[node]:self.watch_ptr[node + 1]]

    def arrays(self) -> dict:
        """int64 copies of the tables for the compiled kernel, each with one
        trailing sentinel so that empty tables still have an address."""
        if self._arrays is None:
            import numpy as np

            i64 = lambda xs: np.array(list(xs) + [0], dtype=np.int64)
            self._arrays = {
                "kind": i64(self.kind), "ca": i64(self.ca), "cb": i64(self.cb),
                "con_kind": i64(self.con_kind), "con_ref": i64(self.con_ref),
                "watch_ptr": i64(self.watch_ptr), "watch_idx": i64(self.watch_idx),
                "phi_subj": i64(self.phi_subj), "phi_tptr": i64(self.phi_tptr),
                "phi_tnode": i64(self.phi_tnode), "phi_tw": i64(self.phi_tw),
                "phi_lo": i64(self.phi_lo), "phi_hi": i64(self.phi_hi),
                "exo_ptr": i64(self.exo_ptr), "exo_mem": i64(self.exo_mem),
                "order": i64(self.order),
            }
        return self._arrays


class _Builder:
    def __init__(self, kb: KnowledgeBase):
        self.kb = kb
        self.p = CompiledProblem(n=kb.n, names=kb.concepts)
        full = self.p.full
        for i, c in enumerate(kb.concepts):
            self.p.index[Name(c)] = i
            self.p.kind.append(NAME)
            self.p.ca.append(-1)
            self.p.cb.append(-1)
            self.p.root.append(full)

    def intern(self, expr: ConceptExpr) -> int:
        p = self.p
        if expr in p.index:
            return p.index[expr]
        if isinstance(expr, Name):
            raise KeyError(f"undeclared concept name '{expr.id}'")
        kids = [self.intern(ch) for ch in children(expr)]
        k = len(p.kind)
        p.index[expr] = k
        p.kind.append(_KIND[type(expr)])
        p.ca.append(kids[0] if kids else -1)
        p.cb.append(kids[1] if len(kids) > 1 else (kids[0] if kids else -1))
        if isinstance(expr, Top):
            p.root.append(1 << p.n)
        elif isinstance(expr, Bot):
            p.root.append(1)
        else:
            p.root.append(p.full)
            p.con_kind.append(C_NODE)
            p.con_ref.append(k)
        return k


def _scale_factor(kb: KnowledgeBase) -> int:
    dens = [w.weight.denominator for w in kb.dbox]
    for row in kb.phi.rows:
        for b in (row.lb, row.ub):
            if b is not None:
                dens.append((b * kb.n).denominator)
    return math.lcm(*dens) if dens else 1


def _branch_order(kb: KnowledgeBase) -> list[int]:
    """Names sorted so that those feeding a distinguished concept come first.

    Concept names that no typicality inclusion defines (inputs) sit at depth
    0; a distinguished concept sits one level above the deepest strongly
    connected component among its bodies.  Once the inputs are fixed the
    phi constraints usually force the rest.
    """
    idx = {c: i for i, c in enumerate(kb.concepts)}
    from ..kb import names_in

    deps: dict[int, set[int]] = {i: set() for i in range(len(kb.concepts))}
    for w in kb.dbox:
        s = idx[w.subject.id]
        deps[s].update(idx[c] for c in names_in(w.body))

    # Tarjan SCC, iterative
    index_of: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    comp: dict[int, int] = {}
    counter = 0
    ncomp = 0
    for root in deps:
        if root in index_of:
            continue
        work = [(root, iter(sorted(deps[root])))]
        index_of[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index_of:
                    index_of[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(deps[w]))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index_of[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index_of[v]:
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
    # Tarjan emits components in reverse topological order of the dependency
    # edges (a component is finished after everything it depends on)
    members: dict[int, list[int]] = {}
    for v, c in comp.items():
        members.setdefault(c, []).append(v)
    depth: dict[int, int] = {}
    for c in range(ncomp):
        d = 0
        for v in members[c]:
            for w in deps[v]:
                if comp[w] != c:
                    d = max(d, depth[comp[w]] + 1)
        depth[c] = d
    return sorted(range(len(kb.concepts)), key=lambda v: (depth[comp[v]], v))


def compile_kb(kb: KnowledgeBase, extra: tuple[ConceptExpr, ...] = ()) -> CompiledProblem:
    """Compile ``kb`` plus any goal expressions that probes will restrict."""
    b = _Builder(kb)
    p = b.p
    n = kb.n

    for ax in kb.universal_inclusions:
        k = b.intern(ax.impl)
        p.root[k] &= allowed_mask(n, ax.cmp, ax.alpha)
    for c in kb.crisp:
        p.root[p.index[Name(c)]] &= 1 | (1 << n)
    for ax in kb.existential_inclusions:
        b.intern(ax.impl)
    for a in kb.abox:
        b.intern(a.concept)
    for e in extra:
        b.intern(e)

    scale = _scale_factor(kb)
    p.scale = scale
    big = 0
    for subj in kb.distinguished:
        terms: dict[int, int] = {}
        for w in kb.wtis_for(subj):
            node = b.intern(w.body)
            terms[node] = terms.get(node, 0) + int(w.weight * scale)
        terms = {k: v for k, v in terms.items() if v != 0}
        smin = sum(min(0, v) for v in terms.values()) * n
        smax = sum(max(0, v) for v in terms.values()) * n
        big = max(big, smax - smin + 2)
        j = len(p.phi_subj)
        p.phi_subj.append(p.index[Name(subj)])
        for node, wt in terms.items():
            p.phi_tnode.append(node)
            p.phi_tw.append(wt)
        p.phi_tptr.append(len(p.phi_tnode))
        for row in kb.phi.rows:
            lo = smin - 1 if row.lb is None else int(row.lb * n * scale)
            hi = smax if row.ub is None else int(row.ub * n * scale)
            p.phi_lo.append(min(max(lo, smin - 1), smax))
            p.phi_hi.append(min(max(hi, smin - 1), smax))
        p.con_kind.append(C_PHI)
        p.con_ref.append(j)
        big = max(big, max(abs(x) for x in terms.values()) * n if terms else 0)

    for g, (_, members) in enumerate(kb.exactly_one):
        p.exo_mem.extend(p.index[Name(m)] for m in members)
        p.exo_ptr.append(len(p.exo_mem))
        p.con_kind.append(C_EXO)
        p.con_ref.append(g)

    # watch lists: node -> constraints to wake when the node's domain shrinks
    watch: list[list[int]] = [[] for _ in range(p.num_nodes)]
    for ci, (ck, ref) in enumerate(zip(p.con_kind, p.con_ref)):
        if ck == C_NODE:
            nodes = {ref, p.ca[ref], p.cb[ref]}
        elif ck == C_PHI:
            nodes = {p.phi_subj[ref], *p.phi_tnode[p.phi_tptr[ref]:p.phi_tptr[ref + 1]]}
        else:
            nodes = set(p.exo_mem[p.exo_ptr[ref]:p.exo_ptr[ref + 1]])
        for node in sorted(nodes):
            watch[node].append(ci)
    p.watch_ptr = [0]
    for lst in watch:
        p.watch_idx.extend(lst)
        p.watch_ptr.append(len(p.watch_idx))

    p.order = _branch_order(kb)
    p.kernel_safe = n <= MAX_KERNEL_N and big < _I64_SAFE
    return p
