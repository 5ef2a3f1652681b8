"""Two-phase entailment on top of the search kernels.

Step one finds the highest degree the query's subject reaches on some
achievable element; step two looks for an element at that degree which
decides the query (a counterexample for >=/>, a confirmation for <=/<).
Each step is a set of independent satisfiability probes, run one after
another or all at once on a thread pool.
"""

from __future__ import annotations

import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from ..kb import (
    ANONYMOUS, Cmp, ConceptExpr, KBError, KnowledgeBase, Name, Query, Valuation, Verdict,
)
from ..semantics import compare_num, eval_num, universal_ok
from . import _pykernel
from .compile import CompiledProblem, allowed_mask, compile_kb

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

UNSAT, SAT, TIMEOUT, STOPPED = _pykernel.UNSAT, _pykernel.SAT, _pykernel.TIMEOUT, _pykernel.STOPPED
MODES = ("descending", "ascending", "parallel")


def available_backends() -> tuple[str, ...]:
    return ("cython", "python") if _ckernel is not None else ("python",)


def default_backend() -> str:
    forced = os.environ.get("PHICOHERENT_BACKEND")
    if forced:
        if forced not in ("cython", "python"):
            raise ValueError(f"PHICOHERENT_BACKEND must be 'cython' or 'python', got {forced!r}")
        return forced
    return available_backends()[0]


class SearchTimeout(Exception):
    def __init__(self, msg: str = "search timed out", lower_bound: Optional[int] = None):
        super().__init__(msg)
        self.lower_bound = lower_bound


class StopFlag:
    """Cancellation flag readable from the compiled kernel without the GIL."""

    def __init__(self):
        self.buf = bytearray(1)

    def set(self) -> None:
        self.buf[0] = 1

    def is_set(self) -> bool:
        return self.buf[0] != 0


# --------------------------------------------------------------------------
# Goals


Constraint = tuple[ConceptExpr, Cmp, Fraction]


@dataclass(frozen=True)
class ExistsWithDegree:
    subject: ConceptExpr
    target: int


@dataclass(frozen=True)
class ExistsWitness:
    query: Query
    typical: int


@dataclass(frozen=True)
class Satisfy:
    constraints: tuple[Constraint, ...]


SearchGoal = Union[ExistsWithDegree, ExistsWitness, Satisfy]


def _as_expr(c) -> ConceptExpr:
    return Name(c) if isinstance(c, str) else c


def _goal_exprs(goal: SearchGoal) -> tuple[ConceptExpr, ...]:
    if isinstance(goal, ExistsWithDegree):
        return (goal.subject,)
    if isinstance(goal, ExistsWitness):
        return (goal.query.subject, goal.query.impl)
    return tuple(e for e, _, _ in goal.constraints)


def _goal_holds(goal: SearchGoal, nu: dict, n: int) -> bool:
    if isinstance(goal, ExistsWithDegree):
        return eval_num(goal.subject, nu, n) == goal.target
    if isinstance(goal, ExistsWitness):
        q = goal.query
        if eval_num(q.subject, nu, n) != goal.typical:
            return False
        ok = compare_num(eval_num(q.impl, nu, n), n, q.cmp, q.alpha)
        return ok != q.cmp.universal
    return all(compare_num(eval_num(e, nu, n), n, cmp, alpha) for e, cmp, alpha in goal.constraints)


class Solver:
    """A compiled knowledge base answering single-element probes."""

    def __init__(self, kb: KnowledgeBase, extra: tuple = (), backend: Optional[str] = None):
        self.kb = kb
        self.backend = backend or default_backend()
        if self.backend not in available_backends():
            raise ValueError(f"backend {self.backend!r} not available (have {available_backends()})")
        self.problem: CompiledProblem = compile_kb(kb, tuple(_as_expr(e) for e in extra))
        self.stats = {"probes": 0, "decisions": 0, "conflicts": 0}
        self._lock = threading.Lock()

    def _ensure(self, exprs) -> None:
        missing = [e for e in exprs if e not in self.problem.index]
        if missing:
            old = [e for e in self.problem.index]
            self.problem = compile_kb(self.kb, tuple(old) + tuple(missing))

    def restrictions(self, goal: SearchGoal) -> list[tuple[int, int]]:
        p, n = self.problem, self.kb.n
        if isinstance(goal, ExistsWithDegree):
            return [(p.node(goal.subject), 1 << goal.target)]
        if isinstance(goal, ExistsWitness):
            q = goal.query
            good = allowed_mask(n, q.cmp, q.alpha)
            want = (p.full & ~good) if q.cmp.universal else good
            return [(p.node(q.subject), 1 << goal.typical), (p.node(q.impl), want)]
        return [(p.node(e), allowed_mask(n, cmp, alpha)) for e, cmp, alpha in goal.constraints]

    def solve(self, goal: SearchGoal, deadline: Optional[float] = None, stop: Optional[StopFlag] = None):
        """Return ``(status, assignment)``; assignment maps names to numerators."""
        if isinstance(goal, ExistsWithDegree):
            goal = ExistsWithDegree(_as_expr(goal.subject), goal.target)
        self._ensure(_goal_exprs(goal))
        p = self.problem
        dom = list(p.root)
        for node, mask in self.restrictions(goal):
            dom[node] &= mask
        use_c = self.backend == "cython" and p.kernel_safe
        if use_c:
            remaining = -1.0 if deadline is None else max(0.0, deadline - time.monotonic())
            status, values, stats = _ckernel.search(p, dom, remaining, (stop or StopFlag()).buf)
        else:
            status, values, stats = _pykernel.search(p, dom, deadline, stop)
        with self._lock:
            self.stats["probes"] += 1
            self.stats["decisions"] += stats["decisions"]
            self.stats["conflicts"] += stats["conflicts"]
        if status != SAT:
            return status, None
        nu = dict(zip(p.names, values))
        if not universal_ok(self.kb, nu) or not _goal_holds(goal, nu, self.kb.n):
            raise RuntimeError(f"search kernel returned an invalid assignment for {goal}: {nu}")
        return SAT, nu


def solve_goal(kb: KnowledgeBase, goal: SearchGoal, timeout: Optional[float] = None,
               backend: Optional[str] = None) -> Optional[dict]:
    """Find an achievable single-element assignment meeting ``goal``.

    Returns the assignment, or ``None`` when none exists.  Raises
    :class:`SearchTimeout` when ``timeout`` seconds elapse first.
    """
    if isinstance(goal, ExistsWithDegree):
        goal = ExistsWithDegree(_as_expr(goal.subject), goal.target)
    solver = Solver(kb, _goal_exprs(goal), backend)
    deadline = None if timeout is None else time.monotonic() + timeout
    status, nu = solver.solve(goal, deadline)
    if status == TIMEOUT:
        raise SearchTimeout(f"probe {goal} timed out")
    return nu


# --------------------------------------------------------------------------
# Probe scheduling


def _degree_probes(solver: Solver, subject: ConceptExpr, mode: str, deadline, workers=None):
    """Return (best degree, witness, complete).  ``complete`` is False if a
    probe above the best success timed out."""
    n = solver.kb.n
    results: dict[int, tuple[int, Optional[dict]]] = {}
    if mode == "descending":
        for v in range(n, 0, -1):
            status, nu = solver.solve(ExistsWithDegree(subject, v), deadline)
            results[v] = (status, nu)
            if status == SAT:
                break
    elif mode == "ascending":
        for v in range(1, n + 1):
            results[v] = solver.solve(ExistsWithDegree(subject, v), deadline)
    elif mode == "parallel":
        flags = {v: StopFlag() for v in range(1, n + 1)}

        def probe(v):
            status, nu = solver.solve(ExistsWithDegree(subject, v), deadline, flags[v])
            if status == SAT:
                for u in range(1, v):
                    flags[u].set()
            return v, status, nu

        with ThreadPoolExecutor(max_workers=workers or n) as pool:
            for v, status, nu in pool.map(probe, range(n, 0, -1)):
                results[v] = (status, nu)
    else:
        raise ValueError(f"unknown probe mode {mode!r}; expected one of {MODES}")

    best, witness = 0, None
    for v in sorted(results, reverse=True):
        status, nu = results[v]
        if status == SAT:
            best, witness = v, nu
            break
    complete = all(results.get(v, (UNSAT,))[0] == UNSAT for v in range(best + 1, n + 1))
    return best, witness, complete


def max_typical_degree(kb: KnowledgeBase, subject, mode: str = "descending", timeout: Optional[float] = None,
                       backend: Optional[str] = None, solver: Optional[Solver] = None):
    """Highest degree of ``subject`` over achievable elements (0 if none is positive).

    The knowledge base is assumed satisfiable; see :func:`entails`.
    """
    subject = _as_expr(subject)
    solver = solver or Solver(kb, (subject,), backend)
    deadline = None if timeout is None else time.monotonic() + timeout
    best, _, complete = _degree_probes(solver, subject, mode, deadline)
    if not complete:
        raise SearchTimeout("typical-degree probes timed out", lower_bound=best)
    return kb.degree(best)


def satisfiability_goals(kb: KnowledgeBase) -> list[Satisfy]:
    """One probe per distinct assertion set of an individual, plus one per
    existential inclusion."""
    goals: dict[Satisfy, None] = {}
    for ind in kb.individuals:
        goals.setdefault(Satisfy(tuple((a.concept, a.cmp, a.alpha) for a in kb.assertions_for(ind))), None)
    for ax in kb.existential_inclusions:
        goals.setdefault(Satisfy(((ax.impl, ax.cmp, ax.alpha),)), None)
    return list(goals)


def _check_sat(solver: Solver, deadline, mode: str) -> Optional[bool]:
    goals = satisfiability_goals(solver.kb)
    if mode == "parallel" and len(goals) > 1:
        with ThreadPoolExecutor(max_workers=len(goals)) as pool:
            statuses = list(pool.map(lambda g: solver.solve(g, deadline)[0], goals))
    else:
        statuses = []
        for g in goals:
            s = solver.solve(g, deadline)[0]
            statuses.append(s)
            if s == UNSAT:
                break
    if any(s == UNSAT for s in statuses):
        return False
    if any(s != SAT for s in statuses):
        return None
    return True


def entails(kb: KnowledgeBase, query: Query, mode: str = "descending", timeout: Optional[float] = None,
            backend: Optional[str] = None) -> Verdict:
    """Decide phi-coherent entailment of ``T(subject) <= body cmp alpha``."""
    kb.check_query(query)
    if mode not in MODES:
        raise ValueError(f"unknown probe mode {mode!r}; expected one of {MODES}")
    start = time.monotonic()
    deadline = None if timeout is None else start + timeout
    solver = Solver(kb, (query.subject, query.impl), backend)
    n = kb.n
    info = {"engine": "solver", "backend": solver.backend, "mode": mode}

    def done(verdict_args, **extra):
        info.update(solver.stats)
        info["seconds"] = time.monotonic() - start
        info.update(extra)
        return Verdict(*verdict_args, info=info)

    sat = _check_sat(solver, deadline, mode)
    if sat is None:
        return done((None, None, None, None), reason="timeout during satisfiability check")
    if not sat:
        return done((True, None, None, False))

    if mode == "parallel":
        best, witness, complete = _speculative(solver, query, deadline)
        if not complete:
            return done((None, None, None, True), reason="timeout during typical-degree probes", lower_bound=best)
        if best == 0:
            return done((compare_num(n, n, query.cmp, query.alpha), kb.degree(0), None, True))
        found = witness
    else:
        best, _, complete = _degree_probes(solver, query.subject, mode, deadline)
        if not complete:
            return done((None, None, None, True), reason="timeout during typical-degree probes", lower_bound=best)
        if best == 0:
            return done((compare_num(n, n, query.cmp, query.alpha), kb.degree(0), None, True))
        status, found = solver.solve(ExistsWitness(query, best), deadline)
        if status == TIMEOUT:
            return done((None, kb.degree(best), None, True), reason="timeout during witness probe")

    wit = Valuation.of_element(ANONYMOUS, found, n) if found is not None else None
    if query.cmp.universal:
        return done((found is None, kb.degree(best), wit, True))
    return done((found is not None, kb.degree(best), wit, True))


def _speculative(solver: Solver, query: Query, deadline):
    """Issue every degree probe and every witness probe at once.

    Returns (best degree, witness at best or None, complete).
    """
    n = solver.kb.n
    flags = {v: StopFlag() for v in range(1, n + 1)}
    wflags = {v: StopFlag() for v in range(1, n + 1)}

    def degree_probe(v):
        status, _ = solver.solve(ExistsWithDegree(query.subject, v), deadline, flags[v])
        if status == SAT:
            for u in range(1, v):
                flags[u].set()
                wflags[u].set()
        return ("a", v, status, None)

    def witness_probe(v):
        status, nu = solver.solve(ExistsWitness(query, v), deadline, wflags[v])
        return ("b", v, status, nu)

    a: dict[int, int] = {}
    b: dict[int, tuple[int, Optional[dict]]] = {}
    with ThreadPoolExecutor(max_workers=2 * n) as pool:
        futures = [pool.submit(degree_probe, v) for v in range(n, 0, -1)]
        futures += [pool.submit(witness_probe, v) for v in range(n, 0, -1)]
        for f in futures:
            kind, v, status, nu = f.result()
            if kind == "a":
                a[v] = status
            else:
                b[v] = (status, nu)
    best = max((v for v, s in a.items() if s == SAT), default=0)
    complete = all(a[v] == UNSAT for v in range(best + 1, n + 1))
    if best == 0 or not complete:
        return best, None, complete
    status, nu = b[best]
    if status not in (SAT, UNSAT):
        # a witness probe can only be cut short by a timeout at this degree
        return best, None, False
    return best, nu, True
