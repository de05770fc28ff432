"""Exact multivariate polynomial arithmetic."""

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from pistab.poly import (
    MatPoly,
    Polynomial,
    PolyParseError,
    evar,
    kron,
    parse_poly,
    poly_to_str,
    svar,
    tvar,
    var_axis,
    var_kind,
)

s1, t1 = svar(1), tvar(1)
s2, t2 = svar(2), tvar(2)


def P(text: str) -> Polynomial:
    return parse_poly(text)


# ---------------------------------------------------------------------------
# variable encoding
# ---------------------------------------------------------------------------

def test_variable_encoding_roundtrip():
    for axis in (1, 2, 3, 7):
        assert var_axis(svar(axis)) == axis
        assert var_axis(tvar(axis)) == axis
        assert var_axis(evar(axis)) == axis
    assert var_kind(svar(3)) != var_kind(tvar(3))
    assert len({svar(1), tvar(1), evar(1), svar(2)}) == 4


# ---------------------------------------------------------------------------
# ring operations
# ---------------------------------------------------------------------------

def test_constructors():
    assert Polynomial.zero().is_zero()
    assert Polynomial.const(Fraction(3, 2)).constant_value() == Fraction(3, 2)
    p = Polynomial.var(s1, 2)
    assert p.degree(s1) == 2
    assert not p.is_constant()


def test_add_sub_mul():
    p = P("s1 + 2")
    q = P("s1 - 2")
    assert p * q == P("s1^2 - 4")
    assert p + q == P("2*s1")
    assert p - p == Polynomial.zero()


def test_mul_cross_axis():
    p = P("s1*t1") * P("s2 + 1")
    assert p == P("s1*t1*s2 + s1*t1")
    assert p.total_degree() == 3


def test_pow():
    p = P("s1 + 1")
    assert p ** 0 == Polynomial.const(Fraction(1))
    assert p ** 3 == P("s1^3 + 3*s1^2 + 3*s1 + 1")
    with pytest.raises(ValueError):
        p ** -1


def test_coefficients_stay_exact():
    p = Polynomial.const(Fraction(1, 3)) * Polynomial.const(Fraction(3, 7))
    assert p.constant_value() == Fraction(1, 7)


def test_scale():
    assert P("2*s1").scale(Fraction(1, 2)) == P("s1")


# ---------------------------------------------------------------------------
# calculus
# ---------------------------------------------------------------------------

def test_diff():
    p = P("s1^3 + s1*t1 + 4")
    assert p.diff(s1) == P("3*s1^2 + t1")
    assert p.diff(s1, 2) == P("6*s1")
    assert p.diff(s2) == Polynomial.zero()


def test_antiderivative_then_diff_is_identity():
    p = P("5*s1^4 + 2*s1*s2 - 1/3")
    assert p.antiderivative(s1).diff(s1) == p


def test_definite_integral_constant_bounds():
    # int_0^1 s^2 ds = 1/3
    p = Polynomial.var(s1, 2)
    assert p.integrate(s1, 0, 1) == Polynomial.const(Fraction(1, 3))


def test_definite_integral_variable_bounds():
    # int_t^s 1 dx = s - t, taking x on a scratch axis
    e = evar(1)
    one = Polynomial.const(Fraction(1))
    assert one.integrate(e, t1, s1) == P("s1 - t1")
    # int_a^s t dt with the kernel variable as bound
    q = Polynomial.var(t1).rename({t1: e})
    assert q.integrate(e, Fraction(0), s1) == P("1/2*s1^2")


def test_substitute_polynomial():
    p = P("s1^2 + 1")
    assert p.substitute(s1, P("t1 + 1")) == P("t1^2 + 2*t1 + 2")


def test_rename_swap_is_safe():
    p = P("s1^2*t1")
    swapped = p.rename({s1: t1, t1: s1})
    assert swapped == P("t1^2*s1")
    assert swapped.rename({s1: t1, t1: s1}) == p


def test_evaluate():
    p = P("s1^2*t1 - 1/2")
    val = p.evaluate({s1: Fraction(2), t1: Fraction(3)})
    assert val == Fraction(23, 2)


# ---------------------------------------------------------------------------
# parsing / printing
# ---------------------------------------------------------------------------

def test_parse_rejects_garbage():
    with pytest.raises(PolyParseError):
        parse_poly("s1 +")
    with pytest.raises(PolyParseError):
        parse_poly("x9z")


def test_str_roundtrip():
    p = P("3/4*s1^2*t2 - s2 + 5")
    assert parse_poly(poly_to_str(p)) == p


def test_str_of_zero():
    assert poly_to_str(Polynomial.zero()) == "0"


# ---------------------------------------------------------------------------
# hypothesis: ring laws
# ---------------------------------------------------------------------------

coeffs = st.fractions(
    min_value=-10, max_value=10, max_denominator=8
)


@st.composite
def polys(draw, nvars=3, max_terms=4, max_exp=3):
    vs = [svar(1), t1, s2][:nvars]
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        mono = []
        for v in vs:
            e = draw(st.integers(0, max_exp))
            if e:
                mono.append((v, e))
        terms[tuple(sorted(mono))] = draw(coeffs)
    return Polynomial(terms)


@given(polys(), polys(), polys())
@settings(max_examples=60, deadline=None)
def test_ring_axioms(p, q, r):
    assert p + q == q + p
    assert p * q == q * p
    assert (p + q) + r == p + (q + r)
    assert (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r


@given(polys(), polys())
@settings(max_examples=40, deadline=None)
def test_diff_is_derivation(p, q):
    assert (p * q).diff(s1) == p.diff(s1) * q + p * q.diff(s1)


@given(polys())
@settings(max_examples=40, deadline=None)
def test_integral_splits_at_midpoint(p):
    lo, mid, hi = Fraction(0), Fraction(1, 2), Fraction(1)
    whole = p.integrate(s1, lo, hi)
    split = p.integrate(s1, lo, mid) + p.integrate(s1, mid, hi)
    assert whole == split


# ---------------------------------------------------------------------------
# matrix polynomials
# ---------------------------------------------------------------------------

def test_matpoly_identity_mul():
    m = MatPoly([[P("s1"), P("1")], [P("0"), P("t1")]])
    assert MatPoly.identity(2) * m == m
    assert m * MatPoly.identity(2) == m


def test_matpoly_shapes_checked():
    a = MatPoly.zeros(2, 3)
    b = MatPoly.zeros(2, 3)
    with pytest.raises(ValueError):
        a * b  # 2x3 times 2x3 does not conform
    assert (a + b).shape == (2, 3)


def test_matpoly_transpose_product():
    a = MatPoly([[P("s1"), P("2")]])           # 1x2
    b = MatPoly([[P("t1")], [P("s1 + 1")]])    # 2x1
    assert (a * b).transpose() == b.transpose() * a.transpose()


def test_matpoly_from_const_and_scale():
    m = MatPoly.from_const([[1, 2], [3, 4]])
    assert m[0, 1].constant_value() == Fraction(2)
    assert m.scale(Fraction(2))[1, 0].constant_value() == Fraction(6)


def test_kron_matches_manual_expansion():
    a = MatPoly([[P("s1"), P("0")], [P("0"), P("1")]])
    b = MatPoly([[P("t1")]])
    k = kron(a, b)
    assert k.shape == (2, 2)
    assert k[0, 0] == P("s1*t1")
    assert k[1, 1] == P("t1")
    assert k[0, 1].is_zero()


def test_matpoly_calculus_entrywise():
    m = MatPoly([[P("s1^2")]])
    assert m.diff(s1)[0, 0] == P("2*s1")
    assert m.integrate(s1, 0, 1)[0, 0] == P("1/3")
