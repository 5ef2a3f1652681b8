from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from phicoherent import Bot, Cmp, Degree, Inclusion, Name, PhiTable, Query, SearchTimeout, Top, new_kb
from phicoherent.generators import (
    ClauseSet, NetSpec, enumerate_clause_sets, gen_maxsat_even, gen_mlp_kb, random_instance,
)
from phicoherent.oracle import enumerate_achievable, oracle_entails
from phicoherent.solver import (
    ExistsWithDegree, ExistsWitness, Solver, available_backends, compile_kb, entails, max_typical_degree,
    solve_goal,
)
from phicoherent.solver import _pykernel
from phicoherent.solver.engine import StopFlag, satisfiability_goals

BACKENDS = available_backends()
needs_cython = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernel not built")


def verdict_key(v):
    return v.entailed, v.typical_degree, v.kb_satisfiable


# examples

def test_solve_goal_horse(horse_kb, horse_query):
    nu = solve_goal(horse_kb, ExistsWithDegree("horse", 4))
    assert nu["horse"] == 4
    nu = solve_goal(horse_kb, ExistsWitness(horse_query(Fraction(3, 4)), 4))
    assert nu["horse"] == 4 and nu["has_tail"] == 2


def test_solve_goal_unsat():
    kb = new_kb(4, PhiTable.from_thresholds(4, [0, 1, 2, 3]), ["a"],
                tbox=[Inclusion(Name("a"), Bot(), Cmp.GE, Fraction(1))])
    for v in range(1, 5):
        assert solve_goal(kb, ExistsWithDegree("a", v)) is None


def test_max_typical_degree_examples(horse_kb):
    assert max_typical_degree(horse_kb, "horse") == Degree(4, 4)
    kb, q = gen_maxsat_even(ClauseSet.of([1], [-1]))
    assert max_typical_degree(kb, q.subject) == Degree(1, 2)
    fresh = new_kb(3, PhiTable.from_thresholds(3, [0, 1, 2]), ["z"])
    assert max_typical_degree(fresh, "z") == Degree(3, 3)


@pytest.mark.parametrize("mode", ["descending", "ascending", "parallel"])
def test_horse_entails(horse_kb, horse_query, mode):
    v = entails(horse_kb, horse_query(Fraction(1, 2)), mode=mode)
    assert v.entailed and v.typical_degree == Degree(4, 4)
    v = entails(horse_kb, horse_query(Fraction(3, 4)), mode=mode)
    assert v.entailed is False
    assert v.witness[("anonymous", "has_tail")] == Degree(2, 4)


def test_parity_examples():
    kb, q = gen_maxsat_even(ClauseSet.of([1], [-1]))
    assert entails(kb, q).entailed is False
    kb, q = gen_maxsat_even(ClauseSet.of([1, 2], [-1], [-2]))
    assert entails(kb, q).entailed is True
    kb, q = gen_maxsat_even(ClauseSet(()))
    v = entails(kb, q)
    assert v.entailed is True and v.typical_degree.num == 0


def test_unsat_kb_vacuous(unsat_kb):
    v = entails(unsat_kb, Query(Name("a"), Bot(), Cmp.GE, Fraction(1)))
    assert v.entailed is True and v.kb_satisfiable is False


def test_unknown_mode(horse_kb, horse_query):
    with pytest.raises(ValueError, match="probe mode"):
        entails(horse_kb, horse_query(1), mode="sideways")


def test_unknown_backend(horse_kb):
    with pytest.raises(ValueError, match="backend"):
        Solver(horse_kb, backend="fortran")


# propagation

def test_crisp_after_first_branch():
    kb = new_kb(4, PhiTable.from_thresholds(4, [0, 1, 2, 3]), ["a"], crisp=["a"])
    p = compile_kb(kb)
    dom = list(p.root)
    assert _pykernel.root_propagate(p, dom)
    assert dom[0] == 0b10001
    dom[0] &= ~1
    assert _pykernel.root_propagate(p, dom)
    assert dom[0] == 1 << 4


def test_reduction_gadget_forces_crisp():
    kb, _ = gen_maxsat_even(ClauseSet.of([1], [1]))
    p = compile_kb(kb)
    dom = list(p.root)
    a = p.node(Name("a_1"))
    dom[a] &= ~1  # a_1 >= 1/n
    assert _pykernel.root_propagate(p, dom)
    assert dom[a] == 1 << kb.n
    # the oracle agrees on the gadget alone: only 0 and n are achievable
    gadget = new_kb(kb.n, kb.phi, ["a_1"], dbox=[w for w in kb.dbox if w.subject.id == "a_1"])
    assert {nu["a_1"] for nu in enumerate_achievable(gadget)} == {0, kb.n}


def test_top_inclusion_pins_without_branching():
    kb = new_kb(4, PhiTable.from_thresholds(4, [0, 1, 2, 3]), ["a", "b"],
                tbox=[Inclusion(Top(), Name("a"), Cmp.GE, Fraction(1))])
    p = compile_kb(kb)
    dom = list(p.root)
    assert _pykernel.root_propagate(p, dom)
    assert dom[p.node(Name("a"))] == 1 << 4


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_propagation_is_sound(seed):
    # every achievable element survives root propagation, both with the root
    # domains and with the element's own degrees fixed
    kb, q = random_instance(seed)
    p = compile_kb(kb, (q.subject, q.impl))
    dom = list(p.root)
    ok = _pykernel.root_propagate(p, dom)
    members = list(enumerate_achievable(kb))
    if members:
        assert ok
    for nu in members:
        for i, c in enumerate(kb.concepts):
            assert dom[i] >> nu[c] & 1
        fixed = list(p.root)
        for i, c in enumerate(kb.concepts):
            fixed[i] &= 1 << nu[c]
        assert _pykernel.root_propagate(p, fixed)


# agreement with the oracle

@pytest.mark.parametrize("seed", range(120))
def test_matches_oracle(seed):
    kb, q = random_instance(seed)
    expected = verdict_key(oracle_entails(kb, q))
    for mode in ("descending", "ascending", "parallel"):
        assert verdict_key(entails(kb, q, mode=mode)) == expected


def test_parity_small_family():
    for gamma in enumerate_clause_sets(2, 1):
        kb, q = gen_maxsat_even(gamma)
        assert verdict_key(entails(kb, q)) == verdict_key(oracle_entails(kb, q))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([Fraction(k, 8) for k in range(9)]))
def test_monotone_in_alpha(seed, lower):
    kb, q = random_instance(seed)
    q = Query(q.subject, q.body, Cmp.GE, Fraction(1))
    for alpha in (Fraction(1), Fraction(3, 4), Fraction(1, 2), Fraction(1, 4)):
        q = Query(q.subject, q.body, Cmp.GE, alpha)
        if entails(kb, q).entailed:
            break
    else:
        return
    if lower <= q.alpha:
        assert entails(kb, Query(q.subject, q.body, Cmp.GE, lower)).entailed


@pytest.mark.parametrize("seed", range(30))
def test_probe_order_invariance(seed):
    kb, q = random_instance(seed)
    if not all(Solver(kb).solve(g)[0] == 1 for g in satisfiability_goals(kb)):
        return
    degrees = {m: max_typical_degree(kb, q.subject, mode=m) for m in ("descending", "ascending", "parallel")}
    assert len(set(degrees.values())) == 1


# backends

@needs_cython
@pytest.mark.parametrize("seed", range(150))
def test_backends_return_identical_searches(seed):
    from phicoherent.solver import _ckernel

    kb, q = random_instance(seed)
    p = compile_kb(kb, (q.subject, q.impl))
    for v in range(kb.n + 1):
        dom = list(p.root)
        dom[p.node(q.subject)] &= 1 << v
        assert _pykernel.search(p, dom) == _ckernel.search(p, dom, -1.0, StopFlag().buf)


@needs_cython
@pytest.mark.parametrize("seed", range(3))
def test_backends_agree_on_networks(seed):
    kb, q = gen_mlp_kb(NetSpec((4, 5, 5, 1), seed=seed))
    a = entails(kb, q, backend="python")
    b = entails(kb, q, backend="cython")
    assert verdict_key(a) == verdict_key(b)
    assert a.info["decisions"] == b.info["decisions"]


def test_large_n_falls_back_to_python():
    kb = new_kb(70, PhiTable.from_thresholds(70, range(70)), ["a", "b"])
    s = Solver(kb)
    assert not s.problem.kernel_safe
    v = entails(kb, Query(Name("a"), Name("b"), Cmp.GE, Fraction(1, 2)))
    assert v.entailed is False and v.typical_degree == Degree(70, 70)


# timeouts and cancellation

@pytest.mark.parametrize("backend", BACKENDS)
def test_timeout_is_unknown(backend):
    kb, q = gen_mlp_kb(NetSpec((20, 40, 40, 1), seed=0))
    v = entails(kb, q, timeout=0.05, backend=backend)
    assert v.entailed is None
    assert "timeout" in v.info["reason"]
    with pytest.raises(SearchTimeout):
        max_typical_degree(kb, q.subject, timeout=0.05, backend=backend)


@pytest.mark.parametrize("backend", BACKENDS)
def test_stop_flag(backend):
    kb, q = gen_mlp_kb(NetSpec((20, 40, 40, 1), seed=0))
    s = Solver(kb, (q.subject,), backend)
    flag = StopFlag()
    flag.set()
    status, nu = s.solve(ExistsWithDegree(q.subject, 4), None, flag)
    assert status in (0, 1, 3)
    if status == 3:
        assert nu is None


def test_backend_from_environment(monkeypatch):
    from phicoherent.solver import default_backend

    monkeypatch.setenv("PHICOHERENT_BACKEND", "python")
    assert default_backend() == "python"
    monkeypatch.setenv("PHICOHERENT_BACKEND", "nope")
    with pytest.raises(ValueError, match="PHICOHERENT_BACKEND"):
        default_backend()
    monkeypatch.delenv("PHICOHERENT_BACKEND")
    assert default_backend() == BACKENDS[0]


def test_fallback_without_extension():
    # a fresh interpreter with the compiled module hidden still works
    import subprocess
    import sys

    code = (
        "import sys; sys.modules['phicoherent.solver._ckernel'] = None\n"
        "from phicoherent.solver import available_backends, max_typical_degree\n"
        "from phicoherent.generators import NetSpec, gen_mlp_kb\n"
        "kb, q = gen_mlp_kb(NetSpec((3, 3, 1), seed=1))\n"
        "print(available_backends(), max_typical_degree(kb, q.subject))\n"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
    assert out.startswith("('python',)")
