"""Shared randomized generators and exact oracles for the test suite."""

import random
from fractions import Fraction

from pistab.pdemodel import AxisBC, PDESpec, check_admissible
from pistab.pialg import LOWER, MULT, UPPER, NDPIOperator
from pistab.poly import MatPoly, Polynomial, svar, tvar


def rand_frac(rng: random.Random, lo=-3, hi=3, den=4) -> Fraction:
    return Fraction(rng.randint(lo * den, hi * den), rng.choice([1, 2, den]))


def rand_poly(rng: random.Random, variables, max_deg=2, n_terms=3) -> Polynomial:
    """Random polynomial with exact rational coefficients."""
    terms = {}
    for _ in range(rng.randint(1, n_terms)):
        mono = []
        for v in variables:
            e = rng.randint(0, max_deg)
            if e:
                mono.append((v, e))
        terms[tuple(sorted(mono))] = rand_frac(rng)
    return Polynomial(terms)


def rand_matpoly(rng, m, n, variables, max_deg=2) -> MatPoly:
    return MatPoly(
        [[rand_poly(rng, variables, max_deg) for _ in range(n)] for _ in range(m)]
    )


def rand_ndpi(rng: random.Random, ndim: int, m: int, n: int,
              box=None, max_deg=2, n_cells=3) -> NDPIOperator:
    """Random canonical-cell operator; multiplier axes avoid their kernel
    variable, as the canonical form requires."""
    if box is None:
        box = tuple((Fraction(0), Fraction(1)) for _ in range(ndim))
    cells = {}
    for _ in range(n_cells):
        idx = tuple(rng.choice([MULT, LOWER, UPPER]) for _ in range(ndim))
        variables = []
        for axis in range(1, ndim + 1):
            variables.append(svar(axis))
            if idx[axis - 1] != MULT:
                variables.append(tvar(axis))
        mat = rand_matpoly(rng, m, n, variables, max_deg)
        cells[idx] = cells[idx] + mat if idx in cells else mat
    return NDPIOperator(box, (m, n), cells)


def rand_polyvec(rng: random.Random, ndim: int, n: int, max_deg=3) -> MatPoly:
    """Random n-vector of polynomials in the position variables only."""
    variables = [svar(i) for i in range(1, ndim + 1)]
    return MatPoly([[rand_poly(rng, variables, max_deg)] for _ in range(n)])


def exact_inner(u: MatPoly, v: MatPoly, box) -> Fraction:
    """<u, v> = integral over the box of u'v, exact."""
    p = Polynomial.zero()
    for r in range(u.m):
        p = p + u[r, 0] * v[r, 0]
    for axis, (a, b) in enumerate(box, start=1):
        p = p.integrate(svar(axis), a, b)
    assert p.is_constant()
    return p.constant_value()


def rand_axis_bc(rng: random.Random, a, b, d: int, n: int) -> AxisBC:
    """Random admissible BC with diagonal n x n blocks (diagonal blocks
    always commute across axes, so the resulting spec is consistent)."""
    while True:
        B, C = {}, {}
        for j in range(d):
            k = rng.randint(0, d - 1)
            diag = [rng.choice([1, 2, Fraction(1, 2), -1]) for _ in range(n)]
            mat = tuple(
                tuple(Fraction(diag[r]) if r == c else Fraction(0)
                      for c in range(n))
                for r in range(n)
            )
            (B if rng.random() < 0.5 else C)[(j, k)] = mat
        bc = AxisBC(a, b, d, n, B, C)
        if check_admissible(bc):
            return bc


def rand_consistent_spec(rng: random.Random, ndim=None, n=None,
                         delta=None) -> PDESpec:
    """Random consistent PDE spec with diagonal-block admissible BCs."""
    ndim = ndim if ndim is not None else rng.randint(1, 2)
    n = n if n is not None else rng.randint(1, 2)
    if delta is None:
        delta = tuple(rng.randint(0, 2) for _ in range(ndim))
        if all(d == 0 for d in delta):
            delta = (1,) + delta[1:]
    box = tuple(
        (Fraction(0), Fraction(rng.choice([1, 2]))) for _ in range(ndim)
    )
    bcs = tuple(
        rand_axis_bc(rng, a, b, d, n) if d else None
        for (a, b), d in zip(box, delta)
    )
    alpha = tuple(rng.randint(0, d) for d in delta)
    svars = [svar(i) for i in range(1, ndim + 1)]
    terms = {alpha: rand_matpoly(rng, n, n, svars, max_deg=1)}
    return PDESpec(box, n, delta, terms, bcs)
