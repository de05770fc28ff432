"""The *-algebra of ND partial-integral operators: composition, adjoints,
canonical cells, and serialization.  All identities here are coefficient
exact in rational arithmetic."""

import json
import random
from fractions import Fraction

import pytest

from conftest import exact_inner, rand_ndpi, rand_polyvec
from pistab.pialg import (
    LOWER,
    MULT,
    UPPER,
    NDPIOperator,
    PI1Params,
    SumOfProducts,
    adjoint_nd,
    canonicalize,
    compose_nd,
    from_semiseparable,
    op_from_doc,
    op_to_doc,
)
from pistab.poly import MatPoly, parse_poly
from pistab.verify import apply_exact

BOX1 = ((Fraction(0), Fraction(1)),)
BOX2 = ((Fraction(0), Fraction(1)), (Fraction(0), Fraction(1)))


def mp(text: str) -> MatPoly:
    return MatPoly([[parse_poly(text)]])


def volterra(kernel: str = "1") -> NDPIOperator:
    """The 1D lower-triangular integral operator with the given kernel."""
    return NDPIOperator(BOX1, (1, 1), {(LOWER,): mp(kernel)})


# ---------------------------------------------------------------------------
# construction and linear structure
# ---------------------------------------------------------------------------

def test_identity_cells():
    op = NDPIOperator.identity(BOX2, 3)
    assert op.cell((MULT, MULT)) == MatPoly.identity(3)
    assert op.cell((LOWER, UPPER)).is_zero()


def test_zero_operators_compare_equal():
    assert NDPIOperator.zero(BOX2, 2, 2) == NDPIOperator(BOX2, (2, 2), {})


def test_multiplier_cell_rejects_kernel_variable():
    with pytest.raises(ValueError):
        NDPIOperator(BOX1, (1, 1), {(MULT,): mp("t1")})


def test_cell_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        NDPIOperator(BOX1, (2, 2), {(MULT,): mp("s1")})


def test_addition_merges_cells():
    a = volterra("s1")
    b = NDPIOperator(BOX1, (1, 1), {(UPPER,): mp("t1")})
    c = a + b
    assert c.cell((LOWER,)) == mp("s1")
    assert c.cell((UPPER,)) == mp("t1")
    assert a + (-a) == NDPIOperator.zero(BOX1, 1, 1)


# ---------------------------------------------------------------------------
# application oracle: the Volterra operator and friends
# ---------------------------------------------------------------------------

def test_volterra_applied_to_monomial():
    # integral_0^s theta^2 dtheta = s^3/3
    v = MatPoly([[parse_poly("s1^2")]])
    assert apply_exact(volterra(), v) == MatPoly([[parse_poly("1/3*s1^3")]])


def test_upper_integral_applied():
    op = NDPIOperator(BOX1, (1, 1), {(UPPER,): mp("1")})
    v = MatPoly([[parse_poly("s1")]])
    # integral_s^1 theta dtheta = 1/2 - s^2/2
    assert apply_exact(op, v) == MatPoly([[parse_poly("1/2 - 1/2*s1^2")]])


def test_multiplier_application():
    op = NDPIOperator(BOX1, (1, 1), {(MULT,): mp("s1")})
    v = MatPoly([[parse_poly("s1 + 1")]])
    assert apply_exact(op, v) == MatPoly([[parse_poly("s1^2 + s1")]])


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------

def test_volterra_square_kernel():
    # (V^2 u)(s) = integral_0^s (s - theta) u(theta) dtheta
    sq = compose_nd(volterra(), volterra())
    assert sq.cell((LOWER,)) == mp("s1 - t1")
    assert sq.cell((MULT,)).is_zero()


def test_compose_matches_application_1d():
    rng = random.Random(11)
    for _ in range(10):
        q = rand_ndpi(rng, 1, 2, 2)
        r = rand_ndpi(rng, 1, 2, 2)
        v = rand_polyvec(rng, 1, 2)
        lhs = apply_exact(compose_nd(q, r), v)
        rhs = apply_exact(q, apply_exact(r, v))
        assert lhs == rhs


def test_compose_matches_application_2d():
    rng = random.Random(12)
    for _ in range(6):
        q = rand_ndpi(rng, 2, 2, 2, n_cells=2)
        r = rand_ndpi(rng, 2, 2, 2, n_cells=2)
        v = rand_polyvec(rng, 2, 2, max_deg=2)
        assert apply_exact(compose_nd(q, r), v) == \
            apply_exact(q, apply_exact(r, v))


def test_compose_associative():
    rng = random.Random(13)
    for ndim in (1, 2):
        a = rand_ndpi(rng, ndim, 2, 2, n_cells=2)
        b = rand_ndpi(rng, ndim, 2, 2, n_cells=2)
        c = rand_ndpi(rng, ndim, 2, 2, n_cells=2)
        assert compose_nd(compose_nd(a, b), c) == \
            compose_nd(a, compose_nd(b, c))


def test_compose_identity_neutral():
    rng = random.Random(14)
    op = rand_ndpi(rng, 2, 2, 3)
    eye_l = NDPIOperator.identity(BOX2, 2)
    eye_r = NDPIOperator.identity(BOX2, 3)
    assert compose_nd(eye_l, op) == op
    assert compose_nd(op, eye_r) == op


def test_compose_bilinear():
    rng = random.Random(15)
    a = rand_ndpi(rng, 1, 2, 2)
    b = rand_ndpi(rng, 1, 2, 2)
    c = rand_ndpi(rng, 1, 2, 2)
    assert compose_nd(a, b + c) == compose_nd(a, b) + compose_nd(a, c)
    assert compose_nd(a + b, c) == compose_nd(a, c) + compose_nd(b, c)


def test_compose_shape_mismatch():
    a = NDPIOperator.zero(BOX1, 2, 3)
    b = NDPIOperator.zero(BOX1, 2, 3)
    with pytest.raises(ValueError):
        compose_nd(a, b)


# ---------------------------------------------------------------------------
# adjoints
# ---------------------------------------------------------------------------

def test_adjoint_flips_volterra():
    adj = adjoint_nd(volterra("s1 - t1"))
    assert adj.cell((UPPER,)) == mp("t1 - s1")
    assert adj.cell((LOWER,)).is_zero()


def test_adjoint_involution():
    rng = random.Random(21)
    for ndim in (1, 2):
        for _ in range(6):
            op = rand_ndpi(rng, ndim, 2, 3)
            assert adjoint_nd(adjoint_nd(op)) == op


def test_adjoint_antihomomorphism():
    # (Q o R)* = R* o Q*
    rng = random.Random(22)
    for ndim in (1, 2):
        q = rand_ndpi(rng, ndim, 2, 2, n_cells=2)
        r = rand_ndpi(rng, ndim, 2, 2, n_cells=2)
        assert adjoint_nd(compose_nd(q, r)) == \
            compose_nd(adjoint_nd(r), adjoint_nd(q))


def test_adjoint_linear():
    rng = random.Random(23)
    a = rand_ndpi(rng, 2, 2, 2)
    b = rand_ndpi(rng, 2, 2, 2)
    assert adjoint_nd(a + b) == adjoint_nd(a) + adjoint_nd(b)
    assert adjoint_nd(a.scale(Fraction(3, 2))) == \
        adjoint_nd(a).scale(Fraction(3, 2))


def test_adjoint_inner_product_exact():
    # <Q u, v> = <u, Q* v> with exact integration over the box
    rng = random.Random(24)
    for ndim in (1, 2):
        for _ in range(5):
            q = rand_ndpi(rng, ndim, 2, 2, n_cells=2)
            u = rand_polyvec(rng, ndim, 2, max_deg=2)
            v = rand_polyvec(rng, ndim, 2, max_deg=2)
            box = q.box
            lhs = exact_inner(apply_exact(q, u), v, box)
            rhs = exact_inner(u, apply_exact(adjoint_nd(q), v), box)
            assert lhs == rhs


# ---------------------------------------------------------------------------
# separable terms -> canonical cells
# ---------------------------------------------------------------------------

def test_canonicalize_product_of_axis_integrals():
    one = mp("1")
    zero = mp("0")
    lower = PI1Params(0, 1, zero, one, zero, axis=1)
    sop = SumOfProducts([[lower, lower]])
    op = canonicalize(sop)
    assert set(op.cells) == {(LOWER, LOWER)}
    assert op.cell((LOWER, LOWER)) == MatPoly.identity(1)


def test_canonicalize_matches_application():
    rng = random.Random(31)
    zero = mp("0")
    for _ in range(5):
        def axis_params(axis):
            r0 = mp(str(rng.randint(-2, 2)))
            r1 = MatPoly([[parse_poly(f"s{axis}")]])
            r2 = MatPoly([[parse_poly(f"t{axis}")]])
            return PI1Params(0, 1, r0, r1, r2, axis=axis)

        sop = SumOfProducts([[axis_params(1), axis_params(2)]])
        op = canonicalize(sop)
        v = rand_polyvec(rng, 2, 1, max_deg=2)
        # reference: apply axis factors one at a time as lifted operators
        f1 = canonicalize(SumOfProducts([[sop.terms[0][0],
                                          PI1Params(0, 1, mp("1"), zero, zero,
                                                    axis=2)]]))
        f2 = canonicalize(SumOfProducts([[PI1Params(0, 1, mp("1"), zero, zero,
                                                    axis=1),
                                          sop.terms[0][1]]]))
        assert apply_exact(op, v) == apply_exact(f1, apply_exact(f2, v))


def test_from_semiseparable_orthants():
    k_lo = mp("s1*t1")
    k_hi = mp("t1")
    op = from_semiseparable(BOX1, {(-1,): k_lo, (1,): k_hi}, mp("2"))
    assert op.cell((MULT,)) == mp("2")
    assert op.cell((LOWER,)) == k_lo
    assert op.cell((UPPER,)) == k_hi
    with pytest.raises(ValueError):
        from_semiseparable(BOX1, {(0,): k_lo}, mp("1"))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_doc_roundtrip_exact():
    rng = random.Random(41)
    for ndim in (1, 2):
        op = rand_ndpi(rng, ndim, 2, 2)
        doc = op_to_doc(op)
        # must survive real JSON, not just the dict
        back = op_from_doc(json.loads(json.dumps(doc)))
        assert back == op


def test_doc_preserves_rationals():
    op = volterra("1/3*s1")
    doc = json.loads(json.dumps(op_to_doc(op)))
    assert op_from_doc(doc).cell((LOWER,)) == mp("1/3*s1")


def test_dump_is_readable():
    text = volterra("s1 - t1").dump()
    assert "cell (L)" in text
    assert "s1" in text and "t1" in text
