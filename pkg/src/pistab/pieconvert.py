"""Conversion of a boundary-constrained PDE into its PIE form d/dt T v = A v.

The fundamental state is v = D^delta u.  Per axis, the order-d differential
operator restricted to the boundary-condition domain has an explicit inverse:
a Volterra term plus a low-rank boundary correction parameterized by the K
matrix.  Products of those per-axis inverses give T; the operators recovering
lower-order derivatives give the building blocks of A.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Tuple

from .pdemodel import (
    Matrix,
    PDESpec,
    check_consistent,
    compute_K,
)
from .pialg import (
    LOWER,
    MULT,
    NDPIOperator,
    PI1Params,
    UPPER,
    compose_nd,
)
from .poly import MatPoly, Polynomial, svar, tvar


def _shifted_power(v, shift: Fraction, exp: int, scale: Fraction) -> Polynomial:
    """scale * (v - shift)^exp as a Polynomial."""
    base = Polynomial.var(v) - Polynomial.const(Fraction(shift))
    return (base ** exp).scale(scale)


def _e_lead(axis: int, a: Fraction, d: int, n: int, j: int = 0) -> MatPoly:
    """The j-th derivative of the Taylor column e1(s-a): block r holds
    (s-a)^(r-j)/(r-j)! I_n for r >= j, zero otherwise (shape nd x n)."""
    s = svar(axis)
    rows = []
    for r in range(d):
        if r >= j:
            p = _shifted_power(s, a, r - j, Fraction(1, math.factorial(r - j)))
        else:
            p = Polynomial.zero()
        for i in range(n):
            rows.append(
                [p if i == c else Polynomial.zero() for c in range(n)]
            )
    return MatPoly(rows)


def _e_trail(axis: int, b: Fraction, d: int, n: int) -> MatPoly:
    """The reversed Taylor column e_d(b-theta): block r holds
    (b-theta)^(d-1-r)/(d-1-r)! I_n (shape nd x n)."""
    t = tvar(axis)
    rows = []
    for r in range(d):
        exp = d - 1 - r
        p = _shifted_power(t, b, exp, Fraction((-1) ** exp, math.factorial(exp)))
        for i in range(n):
            rows.append([p if i == c else Polynomial.zero() for c in range(n)])
    return MatPoly(rows)


def build_Aij(
    axis: int,
    K: Matrix,
    d: int,
    interval: Tuple[Fraction, Fraction],
    n: int,
    j: int,
) -> PI1Params:
    """The operator recovering the j-th derivative from the d-th on one axis:
    apply it to v = u^(d) to get u^(j) on the boundary-condition domain."""
    if not (0 <= j <= d):
        raise ValueError(f"derivative order {j} out of range 0..{d}")
    a, b = Fraction(interval[0]), Fraction(interval[1])
    if d == 0 or j == d:
        return PI1Params(
            a, b, MatPoly.identity(n), MatPoly.zeros(n, n), MatPoly.zeros(n, n),
            axis,
        )
    kmat = MatPoly.from_const(K)
    correction = (
        _e_lead(axis, a, d, n, j).transpose() * kmat * _e_trail(axis, b, d, n)
    )
    s, t = svar(axis), tvar(axis)
    volterra = (
        (Polynomial.var(s) - Polynomial.var(t)) ** (d - j - 1)
    ).scale(Fraction(1, math.factorial(d - j - 1)))
    r1 = MatPoly.identity(n).scale_poly(volterra) - correction
    return PI1Params(a, b, MatPoly.zeros(n, n), r1, -correction, axis)


def build_T1(
    axis: int, K: Matrix, d: int, interval: Tuple[Fraction, Fraction], n: int
) -> PI1Params:
    """Per-axis inverse of the order-d derivative on its BC domain."""
    return build_Aij(axis, K, d, interval, n, 0)


def lift_axis(params: PI1Params, box) -> NDPIOperator:
    """Embed a univariate triple as an ND operator acting on one axis."""
    box = tuple(box)
    ndim = len(box)
    i = params.axis - 1
    cells = {}
    for kind, mat in ((MULT, params.R0), (LOWER, params.R1), (UPPER, params.R2)):
        if not mat.is_zero():
            idx = tuple(kind if k == i else MULT for k in range(ndim))
            cells[idx] = mat
    return NDPIOperator(box, params.shape, cells)


class InconsistentSpec(ValueError):
    def __init__(self, witness):
        super().__init__(f"inconsistent boundary conditions: {witness}")
        self.witness = witness


@dataclass(frozen=True)
class PIESystem:
    """The pair (T, A) with d/dt (T v) = A v on the fundamental state."""

    T: NDPIOperator
    A: NDPIOperator
    spec: PDESpec
    Ks: Tuple[Optional[Matrix], ...]

    @property
    def delta(self):
        return self.spec.delta


def build_pie(spec: PDESpec, *, check: bool = True) -> PIESystem:
    """Build T and A from an admissible, consistent PDE spec."""
    if check:
        ok, witness = check_consistent(spec)  # also raises if inadmissible
        if not ok:
            raise InconsistentSpec(witness)
    ks = tuple(
        compute_K(bc) if bc is not None else None for bc in spec.bcs
    )
    box = spec.box
    n = spec.n
    ndim = spec.ndim

    def axis_op(i: int, j: int) -> NDPIOperator:
        d = spec.delta[i - 1]
        params = build_Aij(i, ks[i - 1], d, box[i - 1], n, j)
        return lift_axis(params, box)

    t_op = NDPIOperator.identity(box, n)
    for i in range(1, ndim + 1):
        if spec.delta[i - 1] > 0:
            t_op = compose_nd(t_op, axis_op(i, 0))

    a_op = NDPIOperator.zero(box, n, n)
    for alpha in sorted(spec.terms):
        coef = spec.terms[alpha]
        term = NDPIOperator(box, (n, n), {(MULT,) * ndim: coef})
        for i in range(1, ndim + 1):
            if spec.delta[i - 1] > 0:
                term = compose_nd(term, axis_op(i, alpha[i - 1]))
        a_op = a_op + term
    return PIESystem(t_op, a_op, spec, ks)
