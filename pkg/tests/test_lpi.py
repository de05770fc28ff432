"""Stability-certificate compilation: operator bases, Gram forms, the full
pipeline on a 1D diffusion model, and certificate replay."""

import math
from fractions import Fraction

import numpy as np
import pytest

from pistab.lpi import (
    DegreeError,
    StabilityCompiler,
    bisect_rate,
    build_basis,
    mu_size,
    replay_certificate,
)
from pistab.pdemodel import parse_spec
from pistab.pialg import NDPIOperator, adjoint_nd, compose_nd, MULT
from pistab.pieconvert import build_pie
from pistab.poly import MatPoly, parse_poly
from pistab.sdpsolve import solve
from pistab.verify import QuadGrid, apply_quadrature, discretize, polyvec_fn

BOX1 = ((Fraction(0), Fraction(1)),)

HEAT_1D = """\
dim 1
n 1
box 0 1
delta 2
term 2 : [1]
bc 1 0 0 a : [1]
bc 1 1 0 b : [1]
"""


@pytest.fixture(scope="module")
def heat():
    return build_pie(parse_spec(HEAT_1D))


def test_mu_size():
    assert [mu_size(d) for d in range(4)] == [3, 8, 15, 24]


def test_basis_size_matches_mu():
    assert build_basis(0, BOX1).size == mu_size(0)
    assert build_basis(1, BOX1).size == mu_size(1)
    box2 = BOX1 * 2
    assert build_basis(1, box2).size == mu_size(1) ** 2


def test_basis_trims():
    full = build_basis(1, BOX1).size
    assert build_basis(1, BOX1, multiplier_only=True).size == 2
    assert build_basis(1, BOX1, kernel_only=True).size == full - 2
    assert build_basis(1, BOX1, drop_pure_multiplier=True).size == full - 2


def _numeric_gram(M):
    """Z* M Z with a constant coefficient matrix, as a 1x1 PI operator."""
    z = build_basis(1, BOX1).operator()
    size = z.shape[0]
    mid = NDPIOperator(
        BOX1, (size, size), {(MULT,): MatPoly.from_const(M)}
    )
    return z, compose_nd(compose_nd(adjoint_nd(z), mid), z)


def test_gram_form_is_psd():
    rng = np.random.default_rng(5)
    grid = QuadGrid.build(BOX1, q=14)
    size = build_basis(1, BOX1).size
    for _ in range(3):
        B = rng.integers(-2, 3, size=(size, size))
        _, op = _numeric_gram(B @ B.T)
        G = discretize(op, grid)
        w = np.sqrt(grid.weights[0])
        sym = (w[:, None] * G) / w[None, :]
        eig = np.linalg.eigvalsh(0.5 * (sym + sym.T))
        assert eig.min() > -1e-8


def test_gram_form_matches_quadratic_form():
    # <v, (Z* M Z) v> == sum_q w_q (Zv)_q' M (Zv)_q
    rng = np.random.default_rng(6)
    grid = QuadGrid.build(BOX1, q=14)
    size = build_basis(1, BOX1).size
    B = rng.integers(-2, 3, size=(size, size))
    M = B @ B.T
    z, op = _numeric_gram(M)
    v = MatPoly([[parse_poly("1/2 + s1 - s1^2")]])
    fn = polyvec_fn(v)
    lhs = grid.inner(grid.sample(fn), apply_quadrature(op, fn, grid))
    flat = apply_quadrature(z, fn, grid)
    rhs = float(np.einsum("qi,ij,qj,q->", flat, M.astype(float), flat,
                          grid.weights[0]))
    assert math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-9)


def test_heat_1d_certifies_near_pi_squared(heat):
    res = bisect_rate(heat.T, heat.A, d=1, k_lo=8.0, k_hi=11.0, tol=1e-3)
    assert abs(res.k_max - math.pi ** 2) < 0.05
    assert not res.inaccurate
    assert res.k_infeasible - res.k_max <= 1e-3


def test_bisect_endpoint_handling(heat):
    # infeasible at the bottom of the bracket: no certified rate
    res = bisect_rate(heat.T, heat.A, d=1, k_lo=15.0, k_hi=20.0, tol=0.5)
    assert math.isnan(res.k_max)
    # feasible at the top: the bracket was too low, report it as such
    res = bisect_rate(heat.T, heat.A, d=1, k_lo=0.5, k_hi=1.0, tol=0.5)
    assert res.k_max == 1.0
    assert math.isinf(res.k_infeasible)


def test_contraction_semigroup_unit_rate(heat):
    # with A = -T the dynamics decay at exactly rate 1
    res = bisect_rate(heat.T, -heat.T, d=1, k_lo=0.5, k_hi=1.5, tol=1e-3)
    assert abs(res.k_max - 1.0) < 5e-3


def test_replay_certificate(heat):
    comp = StabilityCompiler(heat.T, heat.A, d=1, eps=0.1)
    k = 9.0
    sol = solve(comp.problem(k))
    assert sol.status == "Feasible"
    report = replay_certificate(comp, k, sol, n_vectors=20, seed=1)
    assert report.ok()
    assert report.gain > 0.0


def test_infeasible_above_true_rate(heat):
    comp = StabilityCompiler(heat.T, heat.A, d=1, eps=0.1)
    sol = solve(comp.problem(10.5))
    assert sol.status == "Infeasible"


def test_trim_guards():
    ident = NDPIOperator.identity(BOX1, 1)
    with pytest.raises(ValueError):
        StabilityCompiler(ident, ident, d=0, trim_r_kernel_only=True)
    with pytest.raises(ValueError):
        StabilityCompiler(ident, ident, d=0, trim_q_drop_multiplier=True)


def test_degree_error(heat):
    with pytest.raises(DegreeError):
        StabilityCompiler(heat.T, heat.A, d=2, dprime=0)


def test_materialized_certificate_operator(heat):
    comp = StabilityCompiler(heat.T, heat.A, d=1, eps=0.1)
    sol = solve(comp.problem(5.0))
    assert sol.status == "Feasible"
    P = comp.materialize_P(sol.free)
    assert P.shape == heat.T.shape
    # P*T restricted to quadrature must be coercive (it dominates eps^2 T*T)
    grid = QuadGrid.build(BOX1, q=10)
    pt = compose_nd(adjoint_nd(P), heat.T)
    G = discretize(pt, grid)
    w = grid.weights[0]
    sym = 0.5 * ((w[:, None] * G) + (w[:, None] * G).T)
    assert np.linalg.eigvalsh(sym).min() > -1e-8
