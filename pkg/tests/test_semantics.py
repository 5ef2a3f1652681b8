import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from phicoherent import Bot, Cmp, Degree, KBError, Inclusion, Name, Query, Top, Valuation, WTI
from phicoherent.generators import gen_maxsat_even, ClauseSet, RandomParams, gen_random_kb, random_expr
from phicoherent.kb import And, Impl, Neg, Or
from phicoherent.semantics import (
    axiom_satisfied, eval_concept, eval_num, implies, is_coherent, negate, query_impl_value, snorm, tnorm,
    weight_of,
)

D = lambda v: Degree(v, 4)


def val(**degrees):
    return Valuation.of_element("anonymous", degrees, 4)


def test_connective_examples():
    assert tnorm(D(2), D(3)) == D(2)
    assert snorm(D(2), D(3)) == D(3)
    assert negate(negate(D(1))) == D(1)
    assert implies(D(3), D(1)) == D(1)
    assert implies(D(1), D(3)) == D(4)


def test_mixed_denominators_rejected():
    with pytest.raises(KBError):
        tnorm(Degree(1, 2), Degree(1, 4))


@pytest.mark.parametrize("n", range(1, 9))
def test_de_morgan_exhaustive(n):
    for a, b in itertools.product(range(n + 1), repeat=2):
        x, y = Degree(a, n), Degree(b, n)
        assert negate(tnorm(x, y)) == snorm(negate(x), negate(y))
        assert negate(snorm(x, y)) == tnorm(negate(x), negate(y))


@pytest.mark.parametrize("n", range(1, 9))
def test_implies_is_one_iff_le(n):
    for a, b in itertools.product(range(n + 1), repeat=2):
        assert (implies(Degree(a, n), Degree(b, n)) == Degree(n, n)) == (a <= b)


def test_eval_concept_examples(horse_kb):
    v = val(tall=4, small=0, has_tail=3, horse=4, has_stripes=0)
    assert eval_concept(horse_kb, v, "anonymous", And(Name("tall"), Name("small"))) == D(0)
    assert eval_concept(horse_kb, v, "anonymous", Impl(Name("horse"), Name("has_tail"))) == D(3)
    assert eval_concept(horse_kb, v, "anonymous", Neg(Top())) == D(0)
    assert eval_concept(horse_kb, v, "anonymous", Or(Bot(), Name("has_tail"))) == D(3)


def test_eval_unknown_name():
    with pytest.raises(KBError, match="ghost"):
        eval_num(Name("ghost"), {"a": 1}, 4)


def test_weight_of_horse(horse_kb):
    v = val(horse=4, has_tail=4, tall=4, has_stripes=0, small=0)
    assert weight_of(horse_kb, v, "anonymous", "horse") == 90
    assert weight_of(horse_kb, v, "anonymous", "tall") == 0


@pytest.mark.parametrize("assignment,k", [({1: True}, 1), ({1: False}, 1)])
def test_weight_of_sat_counts_true_clauses(assignment, k):
    kb, _ = gen_maxsat_even(ClauseSet.of([1], [-1]))
    n = kb.n
    a = n if assignment[1] else 0
    # clause degrees under the crisp assignment: c_1 = x, c_2 = not x
    nu = {c: 0 for c in kb.concepts}
    nu.update(a_1=a, c_1=a, c_2=n - a)
    v = Valuation.of_element("anonymous", nu, n)
    assert weight_of(kb, v, "anonymous", "sat") == k


def test_is_coherent_horse(horse_kb):
    good = val(horse=4, has_tail=4, tall=4, has_stripes=0, small=0)
    assert is_coherent(horse_kb, good)
    assert not is_coherent(horse_kb, val(horse=2, has_tail=4, tall=4, has_stripes=0, small=0))


def test_empty_dbox_is_vacuously_coherent():
    kb = gen_random_kb(RandomParams(names=3, n=2, wtis=0, seed=5))
    for degrees in itertools.product(range(3), repeat=3):
        nu = dict(zip(kb.concepts, degrees))
        if all(nu[c] in (0, 2) for c in kb.crisp) and not kb.exactly_one:
            assert is_coherent(kb, Valuation.of_element("anonymous", nu, 2))


def test_axiom_satisfied(horse_kb):
    ax = horse_kb.tbox[0]
    assert not axiom_satisfied(horse_kb, val(tall=4, small=1, horse=0, has_tail=0, has_stripes=0), ax)
    assert axiom_satisfied(horse_kb, val(tall=4, small=0, horse=0, has_tail=0, has_stripes=0), ax)


def test_query_impl_value_non_typical_is_one(horse_kb, horse_query):
    v = val(horse=2, has_tail=0, tall=0, small=0, has_stripes=0)
    assert query_impl_value(horse_kb, v, "anonymous", D(4), horse_query(1)) == D(4)
    v = val(horse=4, has_tail=1, tall=0, small=0, has_stripes=0)
    assert query_impl_value(horse_kb, v, "anonymous", D(4), horse_query(1)) == D(1)


# coherence against a second implementation in numerator units

def coherent_numerator_units(kb, nu):
    n = kb.n
    for c in kb.distinguished:
        # weights times degree numerators, compared with thresholds scaled by n
        total = sum(w.weight * eval_num(w.body, nu, n) for w in kb.dbox if w.subject.id == c)
        v = next((r.v for r in kb.phi.rows[:-1] if total <= r.ub * n), n)
        if nu[c] != v:
            return False
    if any(nu[c] not in (0, n) for c in kb.crisp):
        return False
    return all(sum(nu[m] == n for m in ms) == 1 for _, ms in kb.exactly_one)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.data())
def test_coherence_units_reimplementation(seed, data):
    kb = gen_random_kb(RandomParams(names=3, n=data.draw(st.sampled_from([2, 3, 4])), wtis=3, seed=seed))
    degrees = data.draw(st.lists(st.integers(0, kb.n), min_size=3, max_size=3))
    nu = dict(zip(kb.concepts, degrees))
    assert is_coherent(kb, Valuation.of_element("anonymous", nu, kb.n)) == coherent_numerator_units(kb, nu)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.data())
def test_eval_ignores_unrelated_names(seed, data):
    import random

    rng = random.Random(seed)
    names = ["a", "b", "c", "d"]
    expr = random_expr(rng, names[:2], 3)
    n = data.draw(st.integers(1, 6))
    nu = {c: data.draw(st.integers(0, n)) for c in names}
    mutated = dict(nu, c=data.draw(st.integers(0, n)), d=data.draw(st.integers(0, n)))
    assert eval_num(expr, nu, n) == eval_num(expr, mutated, n)


def test_inclusion_single_element_reading():
    ax = Inclusion(Name("a"), Name("b"), Cmp.LE, Fraction(1, 2))
    assert eval_num(ax.impl, {"a": 3, "b": 1}, 4) == 1
    q = Query(Name("a"), Name("b"), Cmp.GE, Fraction(1))
    assert eval_num(q.impl, {"a": 1, "b": 3}, 4) == 4


def test_wti_weight_is_true_units():
    # a WTI of weight 40 on a body at 2/4 contributes 20, not 80
    w = WTI(Name("h"), Name("t"), Fraction(40))
    assert w.weight * Fraction(eval_num(w.body, {"t": 2}, 4), 4) == 20
