"""Numeric verification layer: quadrature application, discretization,
operator norm estimation — cross-checked against the exact algebra."""

import math
import random
from fractions import Fraction

import numpy as np
import pytest

from conftest import rand_ndpi, rand_polyvec
from pistab.pialg import LOWER, MULT, NDPIOperator, adjoint_nd
from pistab.poly import MatPoly, parse_poly, svar
from pistab.verify import (
    QuadGrid,
    apply_exact,
    apply_quadrature,
    diff_multi,
    discretize,
    opnorm_estimate,
    poly_eval,
    polyvec_fn,
)

BOX1 = ((Fraction(0), Fraction(1)),)
BOX2 = ((Fraction(0), Fraction(1)), (Fraction(0), Fraction(1)))


def test_grid_integrates_polynomials_exactly():
    # q-point Gauss rule is exact through degree 2q-1
    g = QuadGrid.build(BOX1, q=4)
    u = g.sample(polyvec_fn(MatPoly([[parse_poly("s1^3")]])))
    v = g.sample(polyvec_fn(MatPoly([[parse_poly("s1^4")]])))
    assert math.isclose(g.inner(u, v), 1.0 / 8.0, rel_tol=1e-14)


def test_grid_2d_inner():
    g = QuadGrid.build(BOX2, q=5)
    u = g.sample(polyvec_fn(MatPoly([[parse_poly("s1*s2")]])))
    assert math.isclose(g.inner(u, u), 1.0 / 9.0, rel_tol=1e-13)


def test_poly_eval_broadcasts():
    p = parse_poly("s1^2 + 2")
    xs = np.linspace(0.0, 1.0, 7)
    got = poly_eval(p, {svar(1): xs})
    assert np.allclose(got, xs ** 2 + 2)


def test_quadrature_application_matches_exact():
    rng = random.Random(9)
    for ndim in (1, 2):
        grid = QuadGrid.build(
            tuple((Fraction(0), Fraction(1)) for _ in range(ndim)), q=8
        )
        for _ in range(4):
            op = rand_ndpi(rng, ndim, 2, 2, n_cells=2)
            v = rand_polyvec(rng, ndim, 2, max_deg=2)
            exact = grid.sample(polyvec_fn(apply_exact(op, v)))
            numeric = apply_quadrature(op, polyvec_fn(v), grid)
            assert np.max(np.abs(exact - numeric)) < 1e-10


def test_discretize_matches_application():
    rng = random.Random(10)
    for ndim in (1, 2):
        grid = QuadGrid.build(
            tuple((Fraction(0), Fraction(1)) for _ in range(ndim)), q=8
        )
        op = rand_ndpi(rng, ndim, 2, 2, n_cells=2)
        v = rand_polyvec(rng, ndim, 2, max_deg=2)
        mat = discretize(op, grid)
        vals = grid.sample(polyvec_fn(v)).reshape(-1)
        direct = apply_quadrature(op, polyvec_fn(v), grid).reshape(-1)
        assert np.max(np.abs(mat @ vals - direct)) < 1e-9


def test_adjoint_inner_product_on_grid():
    # <Qu, v> == <u, Q* v>, both sides computed by grid quadrature
    rng = random.Random(11)
    grid = QuadGrid.build(BOX1, q=10)
    op = rand_ndpi(rng, 1, 2, 2)
    u = rand_polyvec(rng, 1, 2, max_deg=2)
    v = rand_polyvec(rng, 1, 2, max_deg=2)
    lhs = grid.inner(
        grid.sample(polyvec_fn(apply_exact(op, u))), grid.sample(polyvec_fn(v))
    )
    rhs = grid.inner(
        grid.sample(polyvec_fn(u)),
        grid.sample(polyvec_fn(apply_exact(adjoint_nd(op), v))),
    )
    assert math.isclose(lhs, rhs, abs_tol=1e-11)


def test_opnorm_of_multiplier():
    # multiplication by s on [0,1] has operator norm 1
    op = NDPIOperator(BOX1, (1, 1), {(MULT,): MatPoly([[parse_poly("s1")]])})
    # clustered top singular values: power iteration is slow, so don't
    # require the convergence flag here
    norm, _ = opnorm_estimate(op, q=20)
    assert abs(norm - 1.0) < 5e-2


def test_opnorm_of_volterra():
    # the Volterra operator on L2[0,1] has norm 2/pi
    op = NDPIOperator(BOX1, (1, 1), {(LOWER,): MatPoly([[parse_poly("1")]])})
    norm, converged = opnorm_estimate(op, q=24)
    assert converged
    assert abs(norm - 2.0 / math.pi) < 1e-3


def test_diff_multi():
    u = MatPoly([[parse_poly("s1^2*s2^3")]])
    got = diff_multi(u, (1, 2))
    assert got == MatPoly([[parse_poly("12*s1*s2")]])


def test_sample_shape_guard():
    g = QuadGrid.build(BOX1, q=5)
    with pytest.raises(ValueError):
        g.sample(lambda pts: np.zeros((3, 1)))
