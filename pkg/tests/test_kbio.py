from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from phicoherent import WTI, Cmp, Name, ParseError, load_kb, parse_kb, save_kb, serialize_kb
from phicoherent.generators import (
    ClauseSet, NetSpec, RandomParams, gen_maxsat_even, gen_mlp_kb, gen_random_kb, random_instance,
)
from phicoherent.kb import And, new_kb
from phicoherent.kbio import format_number, parse_facts

from conftest import HORSE_TEXT, make_horse_kb

HEAD = "valphi(0,-inf,0). valphi(1,0,inf).\n"


def test_horse_text_matches_constructed_kb():
    kb, q = parse_kb(HORSE_TEXT)
    assert kb == make_horse_kb()
    assert q.cmp is Cmp.GE and q.alpha == Fraction(1, 2)


def test_wti_fact():
    kb, _ = parse_kb(HEAD + "concept(horse). concept(has_tail). wti(horse, has_tail, 50).")
    assert kb.dbox == (WTI(Name("horse"), Name("has_tail"), Fraction(50)),)


def test_composed_concept_registered():
    kb, _ = parse_kb(HEAD + "concept(a). concept(b). concept(and(a,b)).")
    assert kb.concepts == ("a", "b")
    assert kb.extra_concepts == (And(Name("a"), Name("b")),)


def test_numbers_and_bounds():
    text = "valphi(0,-inf,-3/2). valphi(1,-3/2,2). valphi(2,2,inf).\nconcept(a).\nwti(a,a,-1/3).\n"
    kb, q = parse_kb(text)
    assert q is None
    # bounds are numerators over n = 2
    assert kb.phi.thresholds == (Fraction(-3, 4), Fraction(1))
    assert kb.dbox[0].weight == Fraction(-1, 3)


def test_alpha_is_numerator_over_n():
    kb, q = parse_kb(HEAD.replace("1,0,inf", "1,0,1). valphi(2,1,inf") + "concept(a). query(a,a,gt,1/2).")
    assert kb.n == 2 and q.alpha == Fraction(1, 4) and q.cmp is Cmp.GT


def test_comments():
    text = "% header\n" + HEAD + "concept(a). % trailing\n%* block\n comment *%\nconcept(b).\n"
    kb, _ = parse_kb(text)
    assert kb.concepts == ("a", "b")


def test_exactly_one_and_crisp():
    text = HEAD + ("concept(a). concept(b). crisp(a). exactly_one(g). "
                   "exactly_one_element(g,a). exactly_one_element(g,b).")
    kb, _ = parse_kb(text)
    assert kb.crisp == ("a",)
    assert kb.exactly_one == (("g", ("a", "b")),)


def test_individuals_and_assertions():
    text = HEAD + "concept(a). ind(pippo). assertion(a,pippo,geq,1)."
    kb, _ = parse_kb(text)
    assert kb.individuals == ("anonymous", "pippo")
    assert kb.abox[0].individual == "pippo"


@pytest.mark.parametrize("text,message", [
    ("", "no valphi"),
    (HEAD + "colour(a).", "unknown predicate"),
    (HEAD + "concept(a,b).", "argument"),
    (HEAD + "concept(a). wti(a,b,1).", "undeclared"),
    (HEAD + "concept(a). assertion(a,bob,geq,1).", "undeclared individual"),
    (HEAD + "concept(a). concept(b). wti(and(a,b),a,1).", "concept name"),
    (HEAD + "concept(a). concept_inclusion(t(a),a,geq,1).", "typicality"),
    (HEAD + "concept(a). query(a,a,approx,1).", "geq"),
    (HEAD + "concept(a). query(a,a,geq,3).", "outside"),
    ("valphi(0,-inf,0). valphi(1,1,inf).", "malformed phi"),
    ("valphi(0,-inf,0). valphi(2,0,inf).", "malformed phi"),
    (HEAD + "concept(a). concept(a).", "duplicate"),
    (HEAD + "concept(a)", "expected"),
    (HEAD + "concept(a). $", "unexpected character"),
])
def test_parse_errors(text, message):
    with pytest.raises(ParseError, match=message):
        parse_kb(text)


def test_error_positions():
    with pytest.raises(ParseError) as info:
        parse_kb(HEAD + "concept(a).\n  wti(a, zz, 1).")
    assert (info.value.line, info.value.col) == (3, 10)
    assert str(info.value).startswith("3:10:")


def test_fact_lines():
    facts = parse_facts("wti(a, and(b, neg(c)), -1/2).")
    assert facts[0].predicate == "wti"
    assert len(facts[0].args) == 3


@pytest.mark.parametrize("x,text", [(Fraction(3), "3"), (Fraction(-1, 3), "-1/3"), (Fraction(0), "0")])
def test_format_number(x, text):
    assert format_number(x) == text


# round trips

def round_trip(kb, q):
    kb2, q2 = parse_kb(serialize_kb(kb, q))
    assert kb2 == kb
    assert q2 == q


def test_round_trip_examples():
    round_trip(*parse_kb(HORSE_TEXT))
    round_trip(*gen_maxsat_even(ClauseSet.of([1, -2], [2])))
    round_trip(*gen_mlp_kb(NetSpec((3, 4, 1), seed=2)))


def test_rational_weight_round_trip():
    phi = make_horse_kb().phi
    kb = new_kb(4, phi, ["a"], dbox=[WTI(Name("a"), Name("a"), Fraction(1, 3))])
    text = serialize_kb(kb)
    assert "wti(a,a,1/3)." in text
    round_trip(kb, None)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_random(seed):
    round_trip(*random_instance(seed))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 5))
def test_round_trip_random_wider(seed, names, n):
    kb = gen_random_kb(RandomParams(names=names, n=n, wtis=4, inclusions=2, assertions=2, individuals=2,
                                    seed=seed, depth=3))
    round_trip(kb, None)


def test_canonical_order():
    kb, q = parse_kb(HEAD + "ind(p). wti(a,a,1). crisp(a). concept(a). query(a,a,geq,1).")
    preds = [line.split("(")[0] for line in serialize_kb(kb, q).splitlines() if line and line[0] != "%"]
    order = ["valphi", "concept", "ind", "crisp", "wti", "query"]
    assert [p for p in preds if p in order] == sorted((p for p in preds if p in order), key=order.index)


def test_header_and_files(tmp_path):
    kb, q = parse_kb(HORSE_TEXT)
    path = tmp_path / "h.kb"
    save_kb(path, kb, q, ["made by a test"])
    assert path.read_text().startswith("% made by a test\n")
    assert load_kb(path) == (kb, q)
