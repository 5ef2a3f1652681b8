"""Goedel connectives with involutive negation, and evaluation over valuations.

Everything here works on a single domain element at a time.  The
``*_num`` helpers operate on integer numerators (``0..n``) and back the
exhaustive oracle; the :class:`~phicoherent.kb.Degree` wrappers are the
public surface.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Optional, Union

from .kb import (
    And, Assertion, Bot, Cmp, ConceptExpr, Degree, Impl, Inclusion, KBError,
    KnowledgeBase, Name, Neg, Or, Query, Top, Valuation,
)


def _same_den(a: Degree, b: Degree) -> int:
    if a.den != b.den:
        raise KBError(f"degrees {a} and {b} use different truth spaces")
    return a.den


def tnorm(a: Degree, b: Degree) -> Degree:
    return Degree(min(a.num, b.num), _same_den(a, b))


def snorm(a: Degree, b: Degree) -> Degree:
    return Degree(max(a.num, b.num), _same_den(a, b))


def negate(a: Degree) -> Degree:
    return Degree(a.den - a.num, a.den)


def implies(a: Degree, b: Degree) -> Degree:
    n = _same_den(a, b)
    return Degree(n if a.num <= b.num else b.num, n)


def implies_num(a: int, b: int, n: int) -> int:
    return n if a <= b else b


def eval_num(c: ConceptExpr, nu: Mapping[str, int], n: int) -> int:
    """Numerator of ``c`` at an element whose named degrees are ``nu``."""
    if isinstance(c, Name):
        try:
            return nu[c.id]
        except KeyError:
            raise KBError(f"unknown concept name '{c.id}'") from None
    if isinstance(c, And):
        return min(eval_num(c.left, nu, n), eval_num(c.right, nu, n))
    if isinstance(c, Or):
        return max(eval_num(c.left, nu, n), eval_num(c.right, nu, n))
    if isinstance(c, Neg):
        return n - eval_num(c.arg, nu, n)
    if isinstance(c, Impl):
        return implies_num(eval_num(c.left, nu, n), eval_num(c.right, nu, n), n)
    if isinstance(c, Top):
        return n
    if isinstance(c, Bot):
        return 0
    raise TypeError(f"not a concept expression: {c!r}")


def compare_num(v: int, n: int, cmp: Cmp, alpha: Fraction) -> bool:
    """Decide ``v/n cmp alpha`` over the rationals."""
    return cmp.holds(Fraction(v, n), alpha)


def eval_concept(kb: KnowledgeBase, val: Valuation, x: str, c: ConceptExpr) -> Degree:
    return Degree(eval_num(c, val.element(x), kb.n), kb.n)


def weight_num(kb: KnowledgeBase, nu: Mapping[str, int], subject: str) -> Fraction:
    """weight_C of an element, in true units (degrees as v/n)."""
    total = Fraction(0)
    for w in kb.dbox:
        if w.subject.id == subject:
            total += w.weight * Fraction(eval_num(w.body, nu, kb.n), kb.n)
    return total


def weight_of(kb: KnowledgeBase, val: Valuation, x: str, subject: Union[str, Name]) -> Fraction:
    subject = subject.id if isinstance(subject, Name) else subject
    return weight_num(kb, val.element(x), subject)


def element_violations(kb: KnowledgeBase, nu: Mapping[str, int]) -> list[str]:
    """Structural problems of one element: phi-coherence, crisp, exactly-one."""
    n = kb.n
    out = []
    for c in kb.distinguished:
        expected = kb.phi.apply(weight_num(kb, nu, c))
        if nu[c] != expected:
            out.append(f"{c}: degree {nu[c]}/{n} but phi(weight)={expected}/{n}")
    for c in kb.crisp:
        if nu[c] not in (0, n):
            out.append(f"{c}: crisp concept at {nu[c]}/{n}")
    for gid, members in kb.exactly_one:
        full = [m for m in members if nu[m] == n]
        if len(full) != 1:
            out.append(f"exactly-one group {gid}: {len(full)} members at degree 1")
    return out


def coherence_violations(kb: KnowledgeBase, val: Valuation) -> list[str]:
    out = []
    for x in val.elements:
        out.extend(f"{x}: {msg}" for msg in element_violations(kb, val.element(x)))
    return out


def is_coherent(kb: KnowledgeBase, val: Valuation) -> bool:
    return not coherence_violations(kb, val)


def inclusion_holds_num(ax: Inclusion, nu: Mapping[str, int], n: int) -> bool:
    return compare_num(eval_num(ax.impl, nu, n), n, ax.cmp, ax.alpha)


def assertion_holds_num(a: Assertion, nu: Mapping[str, int], n: int) -> bool:
    return compare_num(eval_num(a.concept, nu, n), n, a.cmp, a.alpha)


def axiom_satisfied(
    kb: KnowledgeBase, val: Valuation, axiom: Union[Inclusion, Assertion], x: Optional[str] = None
) -> bool:
    """Single-element check.

    An inclusion is checked at element ``x`` (every element of ``val`` when
    omitted); an assertion at its own individual.
    """
    if isinstance(axiom, Assertion):
        return assertion_holds_num(axiom, val.element(axiom.individual), kb.n)
    xs = [x] if x is not None else list(val.elements)
    return all(inclusion_holds_num(axiom, val.element(y), kb.n) for y in xs)


def query_impl_num(nu: Mapping[str, int], n: int, typical: int, query: Query) -> int:
    c = eval_num(query.subject, nu, n)
    t = c if (c == typical and typical > 0) else 0
    return implies_num(t, eval_num(query.body, nu, n), n)


def query_impl_value(kb: KnowledgeBase, val: Valuation, x: str, typical_degree: Degree, query: Query) -> Degree:
    return Degree(query_impl_num(val.element(x), kb.n, typical_degree.num, query), kb.n)


def universal_ok(kb: KnowledgeBase, nu: Mapping[str, int]) -> bool:
    """Element passes every >=/> inclusion and every structural constraint."""
    n = kb.n
    return all(inclusion_holds_num(ax, nu, n) for ax in kb.universal_inclusions) and not element_violations(kb, nu)
