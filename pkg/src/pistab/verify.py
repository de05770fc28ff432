"""Independent oracles for the operator algebra and the SDP certificates.

Exact checks run on rational polynomials (symbolic application of PI
operators, boundary residuals); numeric checks discretize operators with
tensor Gauss-Legendre quadrature.  Kernel integrals over [a_i, s] and
[s, b_i] are re-quadratured per output node on the subinterval itself, so
polynomial data within the rule's degree is integrated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .pdemodel import PDESpec
from .pialg import LOWER, MULT, NDPIOperator, UPPER
from .poly import MatPoly, Polynomial, evar, svar, tvar, var_axis, var_kind
from .poly import KIND_S, KIND_T


def as_polyvec(v) -> MatPoly:
    """Coerce a list of polynomials (or an n x 1 MatPoly) into a column."""
    if isinstance(v, MatPoly):
        if v.n != 1:
            raise ValueError("polynomial vector must be a column")
        return v
    return MatPoly([[p] for p in v])


def apply_exact(op: NDPIOperator, v) -> MatPoly:
    """Apply a PI operator to a polynomial column, exactly."""
    v = as_polyvec(v)
    if v.m != op.shape[1]:
        raise ValueError(f"operator expects length {op.shape[1]}, got {v.m}")
    for var in v.max_degrees():
        if var_kind(var) != KIND_S:
            raise ValueError("input vector must depend on position variables only")
    out = MatPoly.zeros(op.shape[0], 1)
    for idx, mat in op.cells.items():
        ren = {
            svar(i + 1): tvar(i + 1)
            for i, kind in enumerate(idx)
            if kind != MULT
        }
        term = mat * (v.rename(ren) if ren else v)
        for i, kind in enumerate(idx):
            if kind == MULT:
                continue
            axis = i + 1
            a, b = op.box[i]
            if kind == LOWER:
                term = term.integrate(tvar(axis), a, svar(axis))
            else:
                term = term.integrate(tvar(axis), svar(axis), b)
        out = out + term
    return out


def diff_multi(v: MatPoly, alpha: Sequence[int]) -> MatPoly:
    """Mixed derivative D^alpha in the position variables."""
    out = v
    for i, k in enumerate(alpha):
        if k:
            out = out.diff(svar(i + 1), k)
    return out


def bc_residual(spec: PDESpec, u) -> List[Tuple[int, int, MatPoly]]:
    """All boundary rows of the spec evaluated on u; each entry is
    (axis, row, residual column).  Zero residuals mean u satisfies the BCs."""
    u = as_polyvec(u)
    out = []
    for i, bc in enumerate(spec.bcs):
        if bc is None:
            continue
        axis = i + 1
        s = svar(axis)
        derivs = [u.diff(s, k) for k in range(bc.d)]
        for j in range(bc.d):
            row = MatPoly.zeros(spec.n, 1)
            for k in range(bc.d):
                bm = bc.B.get((j, k))
                cm = bc.C.get((j, k))
                if bm is not None:
                    row = row + MatPoly.from_const(bm) * derivs[k].substitute(s, bc.a)
                if cm is not None:
                    row = row + MatPoly.from_const(cm) * derivs[k].substitute(s, bc.b)
            out.append((axis, j, row))
    return out


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadGrid:
    """Tensor Gauss-Legendre grid over a box; nodes[i], weights[i] per axis."""

    box: Tuple[Tuple[float, float], ...]
    nodes: Tuple[np.ndarray, ...]
    weights: Tuple[np.ndarray, ...]

    @staticmethod
    def build(box, q: int = 10) -> "QuadGrid":
        x, w = np.polynomial.legendre.leggauss(q)
        nodes, weights = [], []
        fbox = []
        for a, b in box:
            a, b = float(a), float(b)
            fbox.append((a, b))
            nodes.append(0.5 * (b - a) * (x + 1.0) + a)
            weights.append(0.5 * (b - a) * w)
        return QuadGrid(tuple(fbox), tuple(nodes), tuple(weights))

    @property
    def ndim(self) -> int:
        return len(self.nodes)

    @property
    def q(self) -> int:
        return len(self.nodes[0])

    def points(self) -> np.ndarray:
        """All grid points, shape (q,)*N + (N,)."""
        mesh = np.meshgrid(*self.nodes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def sample(self, fn) -> np.ndarray:
        """Sample a vectorized function of (..., N) points -> (..., n)."""
        vals = np.asarray(fn(self.points()))
        if vals.shape[: self.ndim] != (self.q,) * self.ndim:
            raise ValueError("function must preserve the leading grid shape")
        return vals

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """L2 inner product of two sample grids with shape grid + (n,)."""
        w = self.weights[0]
        for wi in self.weights[1:]:
            w = np.multiply.outer(w, wi)
        return float(np.sum(w[..., None] * u * v))


def poly_eval(p: Polynomial, arrays: dict) -> np.ndarray:
    """Evaluate a polynomial on numpy arrays var -> ndarray (broadcasting)."""
    total = None
    for mono, c in p.terms.items():
        val = np.full((), float(c))
        for v, e in mono:
            val = val * arrays[v] ** e
        total = val if total is None else total + val
    if total is None:
        return np.zeros(())
    return total


def polyvec_fn(v, box=None) -> Callable:
    """Wrap a polynomial column as a vectorized numeric function."""
    v = as_polyvec(v)

    def fn(points: np.ndarray) -> np.ndarray:
        arrays = {
            svar(i + 1): points[..., i] for i in range(points.shape[-1])
        }
        cols = [
            np.broadcast_to(poly_eval(p, arrays), points.shape[:-1])
            for (p,) in v.rows
        ]
        return np.stack(cols, axis=-1)

    return fn


def apply_quadrature(op: NDPIOperator, fn, grid: QuadGrid) -> np.ndarray:
    """Apply a PI operator numerically: multiplier terms pointwise, kernel
    terms by a fresh Gauss rule on [a_i, s_i] or [s_i, b_i] per output node.
    ``fn`` maps point arrays (..., N) -> (..., n).  Returns grid + (m,)."""
    ndim = op.ndim
    q = grid.q
    m, n = op.shape
    gx, gw = np.polynomial.legendre.leggauss(q)
    out_shape = (q,) * ndim
    out_pts = grid.points()  # shape out_shape + (N,)
    result = np.zeros(out_shape + (m,))
    for idx, mat in op.cells.items():
        kern_axes = [i for i, kind in enumerate(idx) if kind != MULT]
        k = len(kern_axes)
        inner_shape = (q,) * k
        full = out_shape + inner_shape
        arrays = {}
        weight = np.ones(full)
        # positions s_i broadcast over inner axes
        for i in range(ndim):
            shape = [1] * (ndim + k)
            shape[i] = q
            arrays[svar(i + 1)] = grid.nodes[i].reshape(shape)
        # integration nodes t_i on the split subinterval per output node
        eval_coords = []
        for slot, i in enumerate(kern_axes):
            a, b = float(op.box[i][0]), float(op.box[i][1])
            s_i = grid.nodes[i].reshape(
                [q if ax == i else 1 for ax in range(ndim)] + [1] * k
            )
            lo, hi = (a, s_i) if idx[i] == LOWER else (s_i, b)
            xshape = [1] * (ndim + k)
            xshape[ndim + slot] = q
            xs = gx.reshape(xshape)
            ws = gw.reshape(xshape)
            t_i = 0.5 * (hi - lo) * (xs + 1.0) + lo
            weight = weight * (0.5 * (hi - lo) * ws)
            arrays[tvar(i + 1)] = t_i
        # sample the input at (s on mult axes, t on kernel axes)
        coord_list = []
        for i in range(ndim):
            if idx[i] == MULT:
                coord_list.append(
                    np.broadcast_to(arrays[svar(i + 1)], full)
                )
            else:
                coord_list.append(np.broadcast_to(arrays[tvar(i + 1)], full))
        pts = np.stack(coord_list, axis=-1)
        fvals = np.asarray(fn(pts))  # full + (n,)
        kvals = np.zeros(full + (m,))
        for r in range(m):
            acc = np.zeros(full)
            for c in range(n):
                p = mat[r, c]
                if p.terms:
                    acc = acc + np.broadcast_to(
                        poly_eval(p, arrays), full
                    ) * fvals[..., c]
            kvals[..., r] = acc
        if k:
            contrib = np.sum(
                (weight[..., None] * kvals).reshape(
                    out_shape + (q ** k, m)
                ),
                axis=-2,
            )
        else:
            contrib = kvals
        result = result + contrib
    return result


def discretize(op: NDPIOperator, grid: QuadGrid) -> np.ndarray:
    """Dense matrix acting on tensor-grid samples (exact for polynomial data
    below the rule's degree, via barycentric interpolation onto the split
    quadrature nodes)."""
    ndim = op.ndim
    q = grid.q
    m, n = op.shape
    npts = q ** ndim
    big = np.zeros((npts * m, npts * n))

    # barycentric weights per axis
    barys = []
    for i in range(ndim):
        x = grid.nodes[i]
        wb = np.ones(q)
        for j in range(q):
            wb[j] = 1.0 / np.prod(x[j] - np.delete(x, j))
        barys.append(wb)

    def interp_matrix(axis: int, targets: np.ndarray) -> np.ndarray:
        """L[p, ...target shape...] = Lagrange basis p evaluated at targets."""
        x = grid.nodes[axis]
        wb = barys[axis]
        diff = targets[None, ...] - x.reshape((q,) + (1,) * targets.ndim)
        # exact-hit handling
        hit = diff == 0.0
        diff = np.where(hit, 1.0, diff)
        terms = wb.reshape((q,) + (1,) * targets.ndim) / diff
        denom = np.sum(terms, axis=0)
        L = terms / denom
        anyhit = np.any(hit, axis=0)
        L = np.where(anyhit[None, ...], hit.astype(float), L)
        return L

    gx, gw = np.polynomial.legendre.leggauss(q)
    out_pts = [grid.nodes[i] for i in range(ndim)]
    for idx, mat in op.cells.items():
        kern_axes = [i for i, kind in enumerate(idx) if kind != MULT]
        k = len(kern_axes)
        full = (q,) * (ndim + k)
        arrays = {}
        weight = np.ones(full)
        for i in range(ndim):
            shape = [1] * (ndim + k)
            shape[i] = q
            arrays[svar(i + 1)] = out_pts[i].reshape(shape)
        interp = []  # per kernel axis: (p, out_i, inner_slot) tensor
        for slot, i in enumerate(kern_axes):
            a, b = float(op.box[i][0]), float(op.box[i][1])
            s_i = out_pts[i]
            lo, hi = (a * np.ones(q), s_i) if idx[i] == LOWER else (s_i, b * np.ones(q))
            t = 0.5 * (hi[:, None] - lo[:, None]) * (gx[None, :] + 1.0) + lo[:, None]
            w = 0.5 * (hi[:, None] - lo[:, None]) * gw[None, :]
            shape = [1] * (ndim + k)
            shape[i] = q
            shape[ndim + slot] = q
            arrays[tvar(i + 1)] = t.reshape(shape)
            weight = weight * w.reshape(shape)
            interp.append(interp_matrix(i, t))  # (q, q_out, q_inner)
        letters = "abcdefgh"[:ndim]  # output grid axes
        inner = "ijklmnop"[:k]
        caps = "ABCDEFGH"[:ndim]  # input grid axes
        srcs = [letters + inner]
        extra_args = []
        eye = np.eye(q)
        for i in range(ndim):
            if i in kern_axes:
                slot = kern_axes.index(i)
                srcs.append(caps[i] + letters[i] + inner[slot])
                extra_args.append(interp[slot])
            else:
                srcs.append(caps[i] + letters[i])
                extra_args.append(eye)
        expr = ",".join(srcs) + "->" + letters + caps
        big4 = big.reshape(npts, m, npts, n)
        for r in range(m):
            for c in range(n):
                p = mat[r, c]
                if not p.terms:
                    continue
                kv = np.broadcast_to(poly_eval(p, arrays), full) * weight
                coeffs = np.einsum(expr, kv, *extra_args)
                big4[:, r, :, c] += coeffs.reshape(npts, npts)
    return big


def opnorm_estimate(
    op: NDPIOperator,
    q: int = 10,
    iters: int = 200,
    tol: float = 1e-12,
    seed: int = 0,
):
    """L2 operator-norm estimate: power iteration on G* G where G is the
    weight-conjugated quadrature discretization.  Returns (norm, converged)."""
    grid = QuadGrid.build(op.box, q)
    G = discretize(op, grid)
    w = grid.weights[0]
    for wi in grid.weights[1:]:
        w = np.multiply.outer(w, wi)
    m, n = op.shape
    wout = np.sqrt(np.repeat(w.reshape(-1), m))
    win = np.sqrt(np.repeat(w.reshape(-1), n))
    A = (G * (1.0 / win)[None, :]) * wout[:, None]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[1])
    x /= np.linalg.norm(x)
    sigma2 = 0.0
    converged = False
    for _ in range(iters):
        y = A.T @ (A @ x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0, True
        newx = y / norm
        if abs(norm - sigma2) <= tol * max(1.0, norm):
            sigma2 = norm
            converged = True
            break
        sigma2 = norm
        x = newx
    return float(np.sqrt(sigma2)), converged
