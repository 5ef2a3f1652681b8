from fractions import Fraction

import pytest

from phicoherent import (
    WTI, Assertion, Bot, Cmp, Inclusion, Name, PhiRow, PhiTable, Query, Top, new_kb,
)
from phicoherent.kb import And

HORSE_TEXT = """\
% horse example, n = 4
valphi(0,-inf,0).
valphi(1,0,80).
valphi(2,80,160).
valphi(3,160,240).
valphi(4,240,inf).
concept(horse). concept(has_tail). concept(tall). concept(has_stripes). concept(small).
ind(anonymous).
concept_inclusion(and(tall,small),bot,geq,4).
wti(horse,has_tail,50). wti(horse,tall,40). wti(horse,has_stripes,-50).
query(horse,has_tail,geq,2).
"""


def horse_phi() -> PhiTable:
    # (-inf,0], (0,20], (20,40], (40,60], (60,inf) in true weight units
    cuts = [None, 0, 20, 40, 60, None]
    return PhiTable(4, tuple(
        PhiRow(v, None if cuts[v] is None else Fraction(cuts[v]),
               None if cuts[v + 1] is None else Fraction(cuts[v + 1]))
        for v in range(5)
    ))


def make_horse_kb(**extra):
    names = ["horse", "has_tail", "tall", "has_stripes", "small"]
    tbox = [Inclusion(And(Name("tall"), Name("small")), Bot(), Cmp.GE, Fraction(1))]
    dbox = [
        WTI(Name("horse"), Name("has_tail"), Fraction(50)),
        WTI(Name("horse"), Name("tall"), Fraction(40)),
        WTI(Name("horse"), Name("has_stripes"), Fraction(-50)),
    ]
    return new_kb(4, horse_phi(), names, tbox=tbox, dbox=dbox, **extra)


@pytest.fixture
def horse_kb():
    return make_horse_kb()


@pytest.fixture
def horse_query():
    def q(alpha, cmp=Cmp.GE):
        return Query(Name("horse"), Name("has_tail"), cmp, Fraction(alpha))
    return q


@pytest.fixture
def unsat_kb():
    phi = PhiTable.from_thresholds(4, [0, 1, 2, 3])
    return new_kb(4, phi, ["a"], tbox=[Inclusion(Top(), Bot(), Cmp.GE, Fraction(1))])


@pytest.fixture
def horse_file(tmp_path):
    path = tmp_path / "horse.kb"
    path.write_text(HORSE_TEXT)
    return path


def pippo_kb(reachable: bool):
    """Horse KB plus assertion horse(pippo) >= 1; the phi top cut decides reachability."""
    top = 60 if reachable else 1000
    phi = PhiTable.from_thresholds(4, [0, 20, 40, top])
    base = make_horse_kb()
    return new_kb(4, phi, base.concepts, ["pippo"], tbox=base.tbox, dbox=base.dbox,
                  abox=[Assertion(Name("horse"), "pippo", Cmp.GE, Fraction(1))])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
