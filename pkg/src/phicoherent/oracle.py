"""Exhaustive reference reasoner.

In the role-free logic every element of a model is constrained on its own,
so the element space of a canonical phi-coherent model is exactly the set
of single-element assignments passing the universal inclusions, the
crisp/exactly-one side conditions and phi-coherence.  Everything below is
decided by enumerating that set.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .kb import KnowledgeBase, Query, Valuation, Verdict, ANONYMOUS
from .semantics import (
    assertion_holds_num, compare_num, eval_num, inclusion_holds_num, universal_ok,
)

DEFAULT_BUDGET = 10**7


class OracleBudgetExceeded(RuntimeError):
    """The enumeration space is larger than the configured budget."""


@dataclass(frozen=True)
class AchievableSet:
    names: tuple[str, ...]
    members: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        for m in self.members:
            yield dict(zip(self.names, m))

    def __contains__(self, nu) -> bool:
        return tuple(nu[c] for c in self.names) in set(self.members)


def _domains(kb: KnowledgeBase) -> list[list[int]]:
    crisp = set(kb.crisp)
    return [[0, kb.n] if c in crisp else list(range(kb.n + 1)) for c in kb.concepts]


def _scan(kb: KnowledgeBase, first: list[int]) -> list[tuple[int, ...]]:
    doms = _domains(kb)
    if doms:
        doms[0] = first
    names = kb.concepts
    out = []
    for combo in itertools.product(*doms):
        if universal_ok(kb, dict(zip(names, combo))):
            out.append(combo)
    return out


def enumerate_achievable(kb: KnowledgeBase, budget: int = DEFAULT_BUDGET, workers: int = 1) -> AchievableSet:
    doms = _domains(kb)
    size = 1
    for d in doms:
        size *= len(d)
    if size > budget:
        raise OracleBudgetExceeded(
            f"too large for oracle: {size} assignments over {len(doms)} concepts exceeds budget {budget}"
        )
    if not doms:
        members = _scan(kb, [])
    elif workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_scan, itertools.repeat(kb), ([v] for v in doms[0]))
            members = [m for part in parts for m in part]
    else:
        members = _scan(kb, doms[0])
    return AchievableSet(kb.concepts, tuple(members))


def _satisfiable(kb: KnowledgeBase, achievable: AchievableSet) -> bool:
    n = kb.n
    for ind in kb.individuals:
        asserted = kb.assertions_for(ind)
        if not any(all(assertion_holds_num(a, nu, n) for a in asserted) for nu in achievable):
            return False
    for ax in kb.existential_inclusions:
        if not any(inclusion_holds_num(ax, nu, n) for nu in achievable):
            return False
    return True


def oracle_satisfiable(kb: KnowledgeBase, budget: int = DEFAULT_BUDGET) -> bool:
    return _satisfiable(kb, enumerate_achievable(kb, budget))


def oracle_entails(kb: KnowledgeBase, query: Query, budget: int = DEFAULT_BUDGET, workers: int = 1) -> Verdict:
    kb.check_query(query)
    achievable = enumerate_achievable(kb, budget, workers)
    if not _satisfiable(kb, achievable):
        return Verdict(True, None, None, False)
    n = kb.n
    top = max(eval_num(query.subject, nu, n) for nu in achievable)
    typical = kb.degree(top)
    if top == 0:
        # no typical elements: every element's implication value is 1
        return Verdict(compare_num(n, n, query.cmp, query.alpha), typical, None, True)
    for nu in achievable:
        if eval_num(query.subject, nu, n) != top:
            continue
        value = eval_num(query.impl, nu, n)
        ok = compare_num(value, n, query.cmp, query.alpha)
        if query.cmp.universal and not ok:
            return Verdict(False, typical, Valuation.of_element(ANONYMOUS, nu, n), True)
        if not query.cmp.universal and ok:
            return Verdict(True, typical, Valuation.of_element(ANONYMOUS, nu, n), True)
    return Verdict(query.cmp.universal, typical, None, True)
