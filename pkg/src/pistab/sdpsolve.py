"""Dense primal-dual interior-point solver for semidefinite feasibility
and optimization problems.

The solver embeds the problem in the homogeneous self-dual (HSD) model, so
primal infeasibility is a first-class outcome certified by a dual ray rather
than a timeout.  Search directions use Nesterov-Todd scaling with a Mehrotra
predictor-corrector; the Schur complement is formed densely per cone block
and factored by Cholesky with a bordered system for free variables.

Problems are given in equality form

    sum_b <A_i^b, X_b> + F_i p = b_i,   X_b >= 0 (psd or diagonal), p free,

optionally with a linear objective.  ``export_standard`` writes a plain-text
interchange file (free variables split into a signed pair of diagonal
blocks) that ``read_standard`` loads back bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

STATUS_FEASIBLE = "Feasible"
STATUS_INFEASIBLE = "Infeasible"
STATUS_INACCURATE = "Inaccurate"
STATUS_MAXITER = "MaxIter"

_STEP_FRACTION = 0.98
_MAX_ITER_CAP = 200


# ---------------------------------------------------------------------------
# Problem container
# ---------------------------------------------------------------------------

@dataclass
class SDPProblem:
    """Block-structured SDP in equality form.

    ``blocks`` lists ``('psd', n)``, ``('diag', n)`` or ``('free', n)``.
    Constraint entries are COO-style parallel arrays; for psd blocks an entry
    ``(i, j, v)`` with ``i <= j`` contributes ``v * X[i, j]`` once (X is
    symmetric), for diag and free blocks ``j`` must equal ``i``.
    """

    blocks: List[Tuple[str, int]]
    n_rows: int
    entry_rows: np.ndarray
    entry_blocks: np.ndarray
    entry_i: np.ndarray
    entry_j: np.ndarray
    entry_vals: np.ndarray
    rhs: np.ndarray
    obj_blocks: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    obj_i: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    obj_j: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    obj_vals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in ("entry_rows", "entry_blocks", "entry_i", "entry_j"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        self.entry_vals = np.asarray(self.entry_vals, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)

    @classmethod
    def from_rows(cls, blocks, rows: Sequence[Dict[tuple, float]], rhs,
                  obj: Optional[Dict[tuple, float]] = None) -> "SDPProblem":
        """Convenience constructor from per-row coefficient dicts keyed by
        (block, i, j)."""
        er, eb, ei, ej, ev = [], [], [], [], []
        for r, row in enumerate(rows):
            for (b, i, j), v in sorted(row.items()):
                if v == 0.0:
                    continue
                if i > j:
                    i, j = j, i
                er.append(r)
                eb.append(b)
                ei.append(i)
                ej.append(j)
                ev.append(float(v))
        ob, oi, oj, ov = [], [], [], []
        for (b, i, j), v in sorted((obj or {}).items()):
            if i > j:
                i, j = j, i
            ob.append(b)
            oi.append(i)
            oj.append(j)
            ov.append(float(v))
        return cls(list(blocks), len(rows), np.array(er), np.array(eb),
                   np.array(ei), np.array(ej), np.array(ev),
                   np.array(rhs, dtype=float),
                   np.array(ob, dtype=np.int64), np.array(oi, dtype=np.int64),
                   np.array(oj, dtype=np.int64), np.array(ov, dtype=float))


@dataclass
class SDPSolution:
    status: str
    x_blocks: List[Optional[np.ndarray]]
    free: Optional[np.ndarray]
    y: np.ndarray
    s_blocks: List[Optional[np.ndarray]]
    primal_obj: float
    dual_obj: float
    iterations: int
    log: List[str]
    primal_residual: float
    dual_residual: float
    min_eigenvalue: float
    tau: float = float("nan")
    kappa: float = float("nan")


# ---------------------------------------------------------------------------
# Per-block constraint data
# ---------------------------------------------------------------------------

class _ConeBlock:
    def __init__(self, kind: str, nb: int, rows, ii, jj, vals, n_rows: int,
                 c_entries):
        self.kind = kind
        self.nb = nb
        if kind == "psd":
            # symmetric matrices: off-diagonal entries split across triangles
            diag = ii == jj
            r2 = np.concatenate([rows, rows[~diag]])
            fi = np.concatenate([ii * nb + jj, (jj * nb + ii)[~diag]])
            v2 = np.concatenate(
                [np.where(diag, vals, vals * 0.5), (vals * 0.5)[~diag]]
            )
            self.A_flat = sp.csr_matrix(
                (v2, (r2, fi)), shape=(n_rows, nb * nb)
            )
            # stacked (m*nb, nb) view of the same matrices for conjugations
            si = fi // nb
            sj = fi % nb
            self.A_stack = sp.csr_matrix(
                (v2, (r2 * nb + si, sj)), shape=(n_rows * nb, nb)
            )
            C = np.zeros((nb, nb))
            for i, j, v in c_entries:
                C[i, j] += v if i == j else 0.5 * v
                if i != j:
                    C[j, i] += 0.5 * v
            self.C = C
            self.has_c = bool(np.any(C))
        else:  # diag
            if np.any(ii != jj):
                raise ValueError("diagonal block entries must be diagonal")
            self.A_flat = sp.csr_matrix(
                (vals, (rows, ii)), shape=(n_rows, nb)
            )
            c = np.zeros(nb)
            for i, j, v in c_entries:
                c[i] += v
            self.C = c
            self.has_c = bool(np.any(c))
        self.AT = self.A_flat.T.tocsr()

    # -- applications -----------------------------------------------------

    def apply(self, M) -> np.ndarray:
        """[<A_i, M>]_i"""
        return self.A_flat @ M.ravel()

    def adjoint(self, y) -> np.ndarray:
        """sum_i y_i A_i as a matrix (or vector for diag)."""
        out = self.AT @ y
        return out.reshape(self.nb, self.nb) if self.kind == "psd" else out

    def schur(self, W, H, chunk_floats=16_000_000):
        """Add A_i -> tr(A_i W A_j W) (psd) or sum a_i w^2 a_j (diag) to H."""
        nb = self.nb
        if self.kind == "diag":
            AW = self.A_flat.multiply(W[None, :])  # w^2 passed in as W
            H += (AW @ self.A_flat.T).toarray()
            return
        m = H.shape[0]
        chunk = max(1, int(chunk_floats // max(nb * nb, 1)))
        for lo in range(0, m, chunk):
            hi = min(m, lo + chunk)
            T1 = self.A_stack[lo * nb: hi * nb] @ W  # A_i W, stacked
            U = np.matmul(W[None, :, :], T1.reshape(hi - lo, nb, nb))
            H[:, lo:hi] += self.A_flat @ U.reshape(hi - lo, nb * nb).T


# ---------------------------------------------------------------------------
# Presolve: trivial rows and free-variable elimination
# ---------------------------------------------------------------------------

class _Presolve:
    """Removes empty rows and eliminates free variables that are pinned by
    rows containing no cone entries (F p = g  ->  p = p0 + N xi)."""

    def __init__(self, problem: SDPProblem):
        self.problem = problem
        self.infeasible_ray: Optional[np.ndarray] = None

        blocks = problem.blocks
        self.cone_ids = [b for b, (k, _) in enumerate(blocks) if k != "free"]
        self.free_ids = [b for b, (k, _) in enumerate(blocks) if k == "free"]
        self.nf = sum(blocks[b][1] for b in self.free_ids)
        off = {}
        acc = 0
        for b in self.free_ids:
            off[b] = acc
            acc += blocks[b][1]
        self.free_offset = off

        m = problem.n_rows
        is_free_entry = np.isin(problem.entry_blocks, self.free_ids)
        rows_with_cone = np.zeros(m, dtype=bool)
        rows_with_free = np.zeros(m, dtype=bool)
        rows_with_cone[problem.entry_rows[~is_free_entry]] = True
        rows_with_free[problem.entry_rows[is_free_entry]] = True

        # dense free-coefficient matrix (nf is small by construction)
        F_all = np.zeros((m, self.nf))
        if self.nf:
            fr = problem.entry_rows[is_free_entry]
            fb = problem.entry_blocks[is_free_entry]
            fi = problem.entry_i[is_free_entry]
            fv = problem.entry_vals[is_free_entry]
            cols = np.array([off[b] for b in fb], dtype=np.int64) + fi
            np.add.at(F_all, (fr, cols), fv)

        empty = ~rows_with_cone & ~rows_with_free
        if np.any(empty) and np.any(np.abs(problem.rhs[empty]) > 1e-12):
            bad = int(np.nonzero(empty & (np.abs(problem.rhs) > 1e-12))[0][0])
            ray = np.zeros(m)
            ray[bad] = math.copysign(1.0, problem.rhs[bad])
            self.infeasible_ray = ray
            return

        free_only = rows_with_free & ~rows_with_cone
        keep = rows_with_cone
        self.keep_rows = np.nonzero(keep)[0]
        self.free_only_rows = np.nonzero(free_only)[0]
        # row equilibration factors, filled in by solve(); duals computed on
        # the scaled rows are mapped back through this when expanded
        self.row_scale = np.ones(len(self.keep_rows))

        self.p0 = np.zeros(self.nf)
        self.N = np.eye(self.nf) if self.nf else np.zeros((0, 0))
        self.F_only = F_all[self.free_only_rows]
        if len(self.free_only_rows):
            F = self.F_only
            g = problem.rhs[self.free_only_rows]
            U, svals, Vt = np.linalg.svd(F, full_matrices=True)
            tol = max(F.shape) * np.finfo(float).eps * (svals[0] if len(svals) else 0.0)
            rank = int(np.sum(svals > max(tol, 1e-13)))
            self.p0 = Vt[:rank].T @ ((U[:, :rank].T @ g) / svals[:rank])
            resid = F @ self.p0 - g
            if np.max(np.abs(resid), initial=0.0) > 1e-9 * (1.0 + np.max(np.abs(g), initial=0.0)):
                ray = np.zeros(m)
                r_local = g - F @ self.p0  # left-null component of g
                ray[self.free_only_rows] = r_local / np.dot(r_local, g)
                self.infeasible_ray = ray
                return
            self.N = Vt[rank:].T

        self.n_free_red = self.N.shape[1]
        G = F_all[self.keep_rows]
        self.G = G
        self.b_red = problem.rhs[self.keep_rows] - (G @ self.p0 if self.nf else 0.0)
        self.Af_red = G @ self.N if self.nf else np.zeros((len(self.keep_rows), 0))

        # objective: split into cone part (kept as-is) and free part
        self.c_free = np.zeros(self.nf)
        for b, i, v in zip(problem.obj_blocks, problem.obj_i, problem.obj_vals):
            if b in off:
                self.c_free[off[b] + i] += v
        self.cf_red = self.N.T @ self.c_free if self.nf else np.zeros(0)
        self.obj_shift = float(np.dot(self.c_free, self.p0)) if self.nf else 0.0

    def recover_free(self, xi: np.ndarray) -> np.ndarray:
        if not self.nf:
            return np.zeros(0)
        return self.p0 + self.N @ xi

    def expand_ray(self, y_red: np.ndarray) -> np.ndarray:
        """Lift a dual ray on the reduced rows back to the original rows,
        choosing multipliers on the eliminated free-only rows so the ray
        stays orthogonal to the free columns."""
        y_red = y_red * self.row_scale
        m = self.problem.n_rows
        y = np.zeros(m)
        y[self.keep_rows] = y_red
        if len(self.free_only_rows) and self.nf:
            target = -(self.G.T @ y_red)
            ya, *_ = np.linalg.lstsq(self.F_only.T, target, rcond=None)
            y[self.free_only_rows] = ya
        return y


# ---------------------------------------------------------------------------
# NT scaling helpers
# ---------------------------------------------------------------------------

class _Scaling:
    """Nesterov-Todd scaling point for one psd block."""

    def __init__(self, X, S):
        Lx = np.linalg.cholesky(X)
        Ls = np.linalg.cholesky(S)
        U, lam, Vt = np.linalg.svd(Ls.T @ Lx)
        sq = np.sqrt(lam)
        self.R = Lx @ Vt.T / sq
        self.Rinv = (U / sq).T @ Ls.T
        self.lam = lam
        self.W = self.R @ self.R.T
        self.Lx = Lx
        self.Ls = Ls

    def linv(self, G):
        """Solve the Jordan-product equation L_lam(M) = G elementwise."""
        denom = 0.5 * np.add.outer(self.lam, self.lam)
        return G / denom


def _max_step_psd(L, dM):
    """Largest alpha with M + alpha dM >= 0, via M = L L^T."""
    Y = sla.solve_triangular(L, dM, lower=True)
    Y = sla.solve_triangular(L, Y.T, lower=True).T
    w = np.linalg.eigvalsh(0.5 * (Y + Y.T))
    lo = w[0]
    if lo >= -1e-16:
        return np.inf
    return 1.0 / (-lo)


def _max_step_vec(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


# ---------------------------------------------------------------------------
# Facial reduction: forced-zero diagonal entries
# ---------------------------------------------------------------------------

def _facial_reduction(problem: SDPProblem):
    """Detect constraint rows of the form ``sum c_a X_{i_a i_a} = 0`` with all
    ``c_a`` of one sign: every such diagonal entry is zero in any feasible
    point, and positive semidefiniteness then zeroes its whole row and
    column.  Cascading this to a fixpoint and deleting the dead rows/columns
    restores a strictly feasible interior that the original formulation may
    lack, which is what interior-point iterations need to converge.

    Returns ``(problem, None)`` when nothing reduces, else a reduced problem
    plus the data needed to lift a solution back to the original shape.
    """
    free_ids = {b for b, (k, _) in enumerate(problem.blocks) if k == "free"}
    row_entries: Dict[int, list] = {}
    for r, b, i, j, v in zip(problem.entry_rows, problem.entry_blocks,
                             problem.entry_i, problem.entry_j,
                             problem.entry_vals):
        row_entries.setdefault(int(r), []).append(
            (int(b), int(i), int(j), float(v))
        )
    rhs = np.asarray(problem.rhs, float)
    zero: set = set()        # (block, index) positions proved zero
    killed: set = set()      # rows emptied by the deductions
    while True:
        new = []
        for r, ents in row_entries.items():
            if r in killed or rhs[r] != 0.0:
                continue
            live = [e for e in ents
                    if (e[0], e[1]) not in zero and (e[0], e[2]) not in zero]
            if any(e[0] in free_ids for e in live):
                continue
            if not live:
                killed.add(r)
                continue
            if all(i == j for _, i, j, _ in live) and \
                    len({v > 0 for *_, v in live}) == 1:
                new.extend((b, i) for b, i, _, _ in live)
                killed.add(r)
        new = [z for z in set(new) if z not in zero]
        if not new:
            break
        zero.update(new)
    if not zero:
        return problem, None

    keep_idx: Dict[int, list] = {}
    remap: Dict[int, Dict[int, int]] = {}
    new_blocks = []
    for b, (kind, nb) in enumerate(problem.blocks):
        idx = [i for i in range(nb) if (b, i) not in zero]
        keep_idx[b] = idx
        remap[b] = {i: t for t, i in enumerate(idx)}
        new_blocks.append((kind, len(idx)))
    kept_rows = [r for r in range(problem.n_rows) if r not in killed]
    rmap = {r: t for t, r in enumerate(kept_rows)}
    er, eb, ei, ej, ev = [], [], [], [], []
    for r, b, i, j, v in zip(problem.entry_rows, problem.entry_blocks,
                             problem.entry_i, problem.entry_j,
                             problem.entry_vals):
        r, b, i, j = int(r), int(b), int(i), int(j)
        if (b, i) in zero or (b, j) in zero or r in killed:
            continue
        er.append(rmap[r])
        eb.append(b)
        ei.append(remap[b][i])
        ej.append(remap[b][j])
        ev.append(float(v))
    ob, oi, oj, ov = [], [], [], []
    for b, i, j, v in zip(problem.obj_blocks, problem.obj_i, problem.obj_j,
                          problem.obj_vals):
        b, i, j = int(b), int(i), int(j)
        if (b, i) in zero or (b, j) in zero:
            continue  # the entry is zero at every feasible point
        ob.append(b)
        oi.append(remap[b][i])
        oj.append(remap[b][j])
        ov.append(float(v))
    reduced = SDPProblem(
        new_blocks, len(kept_rows),
        np.array(er, dtype=np.int64), np.array(eb, dtype=np.int64),
        np.array(ei, dtype=np.int64), np.array(ej, dtype=np.int64),
        np.array(ev, dtype=float), rhs[kept_rows],
        np.array(ob, dtype=np.int64), np.array(oi, dtype=np.int64),
        np.array(oj, dtype=np.int64), np.array(ov, dtype=float),
    )
    return reduced, (keep_idx, kept_rows, len(zero))


def _lift_reduced(problem: SDPProblem, inner: SDPSolution, lift) -> SDPSolution:
    """Map a reduced-problem solution back to the original block shapes.
    Eliminated positions are zero by construction; a Feasible verdict is
    re-verified against the original data before being passed along."""
    keep_idx, kept_rows, _ = lift

    def expand(blocks_red):
        out = []
        for b, (kind, nb) in enumerate(problem.blocks):
            xb = blocks_red[b]
            if xb is None or kind == "free":
                out.append(xb)
                continue
            idx = np.asarray(keep_idx[b], dtype=np.int64)
            if kind == "psd":
                full = np.zeros((nb, nb))
                full[np.ix_(idx, idx)] = xb
            else:
                full = np.zeros(nb)
                full[idx] = xb
            out.append(full)
        return out

    y = np.zeros(problem.n_rows)
    if inner.y is not None and len(inner.y) == len(kept_rows):
        y[np.asarray(kept_rows, dtype=np.int64)] = inner.y
    x_blocks = expand(inner.x_blocks)
    s_blocks = expand(inner.s_blocks)
    status = inner.status
    pres, mineig = inner.primal_residual, inner.min_eigenvalue
    if status == STATUS_FEASIBLE:
        pres = residuals(problem, x_blocks, inner.free)
        mineig = min_eigenvalue(problem, x_blocks)
        if not (pres <= 1e-6 and mineig >= -1e-8):  # pragma: no cover
            status = STATUS_INACCURATE
        inner.log.append(
            f"lift: max|Ax-b| {pres:.3e} min_eig {mineig:.3e} -> {status}"
        )
    return SDPSolution(
        status=status, x_blocks=x_blocks, free=inner.free, y=y,
        s_blocks=s_blocks, primal_obj=inner.primal_obj,
        dual_obj=inner.dual_obj, iterations=inner.iterations, log=inner.log,
        primal_residual=pres, dual_residual=inner.dual_residual,
        min_eigenvalue=mineig, tau=inner.tau, kappa=inner.kappa,
    )


def _margin_problem(problem: SDPProblem, cap: float) -> SDPProblem:
    """Shifted reformulation of a feasibility problem: substitute
    X_b = Y_b + t I on every cone block and maximize the margin t subject
    to the original rows and a trace cap sum_b tr(X_b) <= cap.

    The reformulated problem always has a strictly interior point whenever
    the original affine rows admit a cone point (take t strictly below the
    smallest eigenvalue), and the cap bounds the optimum, so the interior
    point iteration is well behaved even when the original feasible set has
    empty interior."""
    cone = [b for b, (kind, _) in enumerate(problem.blocks)
            if kind != "free"]
    total = sum(problem.blocks[b][1] for b in cone)
    slack_block = len(problem.blocks)
    t_block = slack_block + 1
    trace_row = problem.n_rows

    # per-row coefficient of t: total trace of the row's cone coefficients
    t_coef = np.zeros(problem.n_rows + 1)
    conemask = np.isin(problem.entry_blocks, cone)
    dmask = conemask & (problem.entry_i == problem.entry_j)
    np.add.at(t_coef, problem.entry_rows[dmask], problem.entry_vals[dmask])
    t_coef[trace_row] = float(total)

    er = [problem.entry_rows]
    eb = [problem.entry_blocks]
    ei = [problem.entry_i]
    ej = [problem.entry_j]
    ev = [problem.entry_vals]
    # trace-cap row: sum_b tr(Y_b) + total * t + slack = cap
    for b in cone:
        nb = problem.blocks[b][1]
        er.append(np.full(nb, trace_row))
        eb.append(np.full(nb, b))
        ei.append(np.arange(nb))
        ej.append(np.arange(nb))
        ev.append(np.ones(nb))
    er.append(np.array([trace_row]))
    eb.append(np.array([slack_block]))
    ei.append(np.array([0]))
    ej.append(np.array([0]))
    ev.append(np.array([1.0]))
    # t column
    nz = np.nonzero(t_coef)[0]
    er.append(nz)
    eb.append(np.full(len(nz), t_block))
    ei.append(np.zeros(len(nz), dtype=np.int64))
    ej.append(np.zeros(len(nz), dtype=np.int64))
    ev.append(t_coef[nz])

    return SDPProblem(
        blocks=problem.blocks + [("diag", 1), ("free", 1)],
        n_rows=problem.n_rows + 1,
        entry_rows=np.concatenate(er),
        entry_blocks=np.concatenate(eb),
        entry_i=np.concatenate(ei),
        entry_j=np.concatenate(ej),
        entry_vals=np.concatenate(ev),
        rhs=np.concatenate([problem.rhs, [cap]]),
        obj_blocks=np.array([t_block], dtype=np.int64),
        obj_i=np.array([0], dtype=np.int64),
        obj_j=np.array([0], dtype=np.int64),
        obj_vals=np.array([-1.0]),  # maximize t
    )


def _margin_rescue(problem: SDPProblem, base: SDPSolution, tol, max_iter,
                   verbose) -> Optional[SDPSolution]:
    """Retry a stalled feasibility problem through the margin reformulation;
    returns a verified Feasible solution or None."""
    log = base.log
    approx = 1.0
    for b, (kind, _) in enumerate(problem.blocks):
        xb = base.x_blocks[b]
        if xb is None or kind == "free":
            continue
        approx += float(np.trace(xb)) if kind == "psd" else float(np.sum(xb))
    cap = 10.0 * abs(approx)
    for attempt in range(3):
        aug = _margin_problem(problem, cap)
        inner = solve(aug, tol=tol, max_iter=max_iter, verbose=verbose)
        if inner.status != STATUS_FEASIBLE or inner.free is None:
            log.append(f"margin reformulation (cap {cap:.2e}): "
                       f"inner status {inner.status}")
            return None
        t = float(inner.free[-1])
        slack = float(inner.x_blocks[len(problem.blocks)][0])
        xb = []
        for b, (kind, nb) in enumerate(problem.blocks):
            if kind == "psd":
                xb.append(inner.x_blocks[b] + t * np.eye(nb))
            elif kind == "diag":
                xb.append(inner.x_blocks[b] + t)
            else:
                xb.append(None)
        free = inner.free[:-1]
        x_try, f_try = _polish_feasibility(problem, xb, free, rounds=200)
        pres = residuals(problem, x_try, f_try)
        mineig = min_eigenvalue(problem, x_try)
        log.append(
            f"margin reformulation (cap {cap:.2e}): t {t:.3e} -> "
            f"max|Ax-b| {pres:.3e} min_eig {mineig:.3e}"
        )
        if pres <= 1e-6 and mineig >= -1e-8:
            return SDPSolution(
                status=STATUS_FEASIBLE, x_blocks=x_try, free=f_try,
                y=inner.y[:problem.n_rows],
                s_blocks=inner.s_blocks[:len(problem.blocks)],
                primal_obj=0.0, dual_obj=0.0,
                iterations=base.iterations + inner.iterations, log=log,
                primal_residual=pres, dual_residual=0.0,
                min_eigenvalue=mineig,
            )
        if slack <= 1e-4 * cap:
            cap *= 100.0  # cap was binding: the point needed more room
            continue
        return None
    return None


# ---------------------------------------------------------------------------
# Main solver
# ---------------------------------------------------------------------------

def solve(problem: SDPProblem, tol: float = 1e-8, max_iter: int = 100,
          verbose: bool = False) -> SDPSolution:
    """Solve an SDP (or SDP feasibility problem) via the HSD embedding.

    Status semantics: ``Feasible`` is only returned after an independent
    residual re-check on the original data; ``Infeasible`` is only returned
    with a verified dual ray (positive objective against the right-hand
    side, dual residual below 1e-6); anything unverifiable degrades to
    ``Inaccurate``; ``MaxIter`` if the iteration cap is hit.

    Feasibility problems without a strictly interior point can stall the
    HSD iteration; when that happens the solver retries through a margin
    reformulation (maximize the smallest cone eigenvalue under a trace cap,
    which always has interior) and re-verifies the recovered point against
    the original data.
    """
    result = _solve_main(problem, tol, max_iter, verbose)
    if (result.status in (STATUS_INACCURATE, STATUS_MAXITER)
            and len(problem.obj_vals) == 0
            and any(kind != "free" for kind, _ in problem.blocks)):
        rescued = _margin_rescue(problem, result, tol, max_iter, verbose)
        if rescued is not None:
            return rescued
    return result


def _solve_main(problem: SDPProblem, tol: float = 1e-8, max_iter: int = 100,
                verbose: bool = False) -> SDPSolution:
    max_iter = min(int(max_iter), _MAX_ITER_CAP)
    log: List[str] = []

    reduced, lift = _facial_reduction(problem)
    if lift is not None:
        inner = solve(reduced, tol=tol, max_iter=max_iter, verbose=verbose)
        inner.log.insert(0, f"facial reduction: {lift[2]} forced-zero "
                            f"positions, {problem.n_rows - reduced.n_rows} "
                            "rows eliminated")
        return _lift_reduced(problem, inner, lift)

    pre = _Presolve(problem)
    if pre.infeasible_ray is not None:
        log.append("presolve: inconsistent linear rows")
        return _ray_solution(problem, pre.infeasible_ray, log)

    blocks = problem.blocks
    m = len(pre.keep_rows)
    row_lookup = -np.ones(problem.n_rows, dtype=np.int64)
    row_lookup[pre.keep_rows] = np.arange(m)

    # gather per-block entry slices first so the rows can be equilibrated
    # (scaled to unit inf-norm) before the cone blocks are frozen
    block_data = []
    rowmax = np.zeros(m)
    for b in pre.cone_ids:
        mask = problem.entry_blocks == b
        rloc = row_lookup[problem.entry_rows[mask]]
        if np.any(rloc < 0):
            raise AssertionError("cone entry on an eliminated row")
        vals = problem.entry_vals[mask]
        if len(rloc):
            np.maximum.at(rowmax, rloc, np.abs(vals))
        block_data.append((b, rloc, problem.entry_i[mask],
                           problem.entry_j[mask], vals))
    if pre.Af_red.shape[1] and m:
        rowmax = np.maximum(rowmax, np.max(np.abs(pre.Af_red), axis=1))
    d_row = np.where(rowmax > 0.0, 1.0 / np.maximum(rowmax, 1e-300), 1.0)
    pre.row_scale = d_row

    cone: List[_ConeBlock] = []
    for b, rloc, ii, jj, vals in block_data:
        kind, nb = blocks[b]
        omask = problem.obj_blocks == b
        c_entries = list(zip(problem.obj_i[omask], problem.obj_j[omask],
                             problem.obj_vals[omask]))
        cone.append(_ConeBlock(kind, nb, rloc, ii, jj, vals * d_row[rloc],
                               m, c_entries))

    b_vec = pre.b_red * d_row
    Af = pre.Af_red * d_row[:, None] if pre.Af_red.shape[1] else pre.Af_red
    nf = Af.shape[1]
    cf = pre.cf_red
    has_obj = any(cb.has_c for cb in cone) or bool(np.any(cf))

    if m == 0 and nf == 0:
        x_blocks = [np.eye(cb.nb) if cb.kind == "psd" else np.ones(cb.nb)
                    for cb in cone]
        return _final_check(problem, pre, cone, x_blocks, np.zeros(0),
                            np.zeros(problem.n_rows), [None] * len(cone),
                            0, log, tol)

    nu = sum(cb.nb for cb in cone)

    # HSD state
    X = [np.eye(cb.nb) if cb.kind == "psd" else np.ones(cb.nb) for cb in cone]
    S = [np.eye(cb.nb) if cb.kind == "psd" else np.ones(cb.nb) for cb in cone]
    y = np.zeros(m)
    p = np.zeros(nf)
    tau, kappa = 1.0, 1.0

    def trdot(cb, M, N):
        if cb.kind == "psd":
            return float(np.sum(M * N))
        return float(np.dot(M, N))

    b_norm = 1.0 + float(np.max(np.abs(b_vec), initial=0.0))
    c_norm = 1.0 + max(
        [float(np.max(np.abs(cb.C))) if cb.has_c else 0.0 for cb in cone] + [0.0]
    )

    status = STATUS_MAXITER
    it = 0
    mu0 = None
    for it in range(1, max_iter + 1):
        # residuals
        Ax = np.zeros(m)
        for cb, Xb in zip(cone, X):
            Ax += cb.apply(Xb)
        rp = Ax + (Af @ p if nf else 0.0) - tau * b_vec
        rd = []
        cx = 0.0
        for cb, Xb, Sb in zip(cone, X, S):
            rd.append(-cb.adjoint(y) + tau * cb.C - Sb)
            if cb.has_c:
                cx += trdot(cb, cb.C, Xb)
        rf = (-(Af.T @ y) + tau * cf) if nf else np.zeros(0)
        cx += float(np.dot(cf, p)) if nf else 0.0
        by = float(np.dot(b_vec, y))
        rg = by - cx - kappa
        gap = sum(trdot(cb, Xb, Sb) for cb, Xb, Sb in zip(cone, X, S))
        mu = (gap + tau * kappa) / (nu + 1)
        if mu0 is None:
            mu0 = mu

        pres = float(np.max(np.abs(rp), initial=0.0)) / tau / b_norm
        dres = max(
            [float(np.max(np.abs(r))) for r in rd] + [0.0]
        ) / tau / c_norm
        fres = float(np.max(np.abs(rf), initial=0.0)) / tau / c_norm
        relgap = abs(cx / tau - by / tau) / (1.0 + abs(cx / tau) + abs(by / tau))
        log.append(
            f"it {it:3d} mu {mu:.6e} tau {tau:.6e} kappa {kappa:.6e} "
            f"pres {pres:.3e} dres {max(dres, fres):.3e} gap {relgap:.3e}"
        )
        if verbose:  # pragma: no cover
            print(log[-1])

        if pres <= tol and dres <= tol and fres <= tol and (
            not has_obj or relgap <= tol
        ) and (has_obj or gap / tau ** 2 <= math.sqrt(tol)):
            xb = [Xb / tau for Xb in X]
            sb = [Sb / tau for Sb in S]
            return _final_check(problem, pre, cone, xb,
                                pre.recover_free(p / tau),
                                _expand_y(problem, pre, y / tau),
                                sb, it, log, tol)

        if tau <= 1e-9 * max(1.0, kappa) or (
            mu <= 1e-12 * mu0 and tau * kappa <= mu
        ):
            sol = _try_infeasibility(problem, pre, cone, y, S, b_vec, Af, it, log)
            if sol is None:
                sol = _linear_inconsistency(problem, pre, cone, b_vec, Af, it, log)
            if sol is not None:
                return sol
            return _inaccurate(problem, pre, cone, X, S, y, p, tau, it, log)

        # NT scalings
        scalings = []
        for cb, Xb, Sb in zip(cone, X, S):
            if cb.kind == "psd":
                try:
                    scalings.append(_Scaling(Xb, Sb))
                except np.linalg.LinAlgError:
                    return _inaccurate(problem, pre, cone, X, S, y, p, tau,
                                       it, log, note="scaling breakdown")
            else:
                scalings.append(None)

        # Schur complement
        H = np.zeros((m, m))
        for cb, sc, Xb, Sb in zip(cone, scalings, X, S):
            if cb.kind == "psd":
                cb.schur(sc.W, H)
            else:
                cb.schur(Xb / Sb, H)
        kkt = _KKT(H, Af, log)
        if kkt.failed:
            return _inaccurate(problem, pre, cone, X, S, y, p, tau, it, log,
                               note="KKT factorization failure")

        # right-hand sides shared by predictor and corrector
        AWCW = np.zeros(m)
        if has_obj:
            for cb, sc, Xb, Sb in zip(cone, scalings, X, S):
                if not cb.has_c:
                    continue
                if cb.kind == "psd":
                    AWCW += cb.apply(sc.W @ cb.C @ sc.W)
                else:
                    AWCW += cb.apply((Xb / Sb) * cb.C)
        AWrdW = np.zeros(m)
        for cb, sc, r, Xb, Sb in zip(cone, scalings, rd, X, S):
            if cb.kind == "psd":
                AWrdW += cb.apply(sc.W @ r @ sc.W)
            else:
                AWrdW += cb.apply((Xb / Sb) * r)
        q1 = kkt.solve(b_vec + AWCW, cf)

        def directions(Rc, g_t, q2):
            """Assemble the full direction given the scaled complementarity
            targets; d_tau is fixed by the (affine) gap equation."""

            def build(dtau):
                dy = q2[0] + dtau * q1[0]
                dp = q2[1] + dtau * q1[1]
                dkap = (g_t - kappa * dtau) / tau
                dS, dX = [], []
                cdx = 0.0
                for cb, sc, r, Rcb, Xb, Sb in zip(cone, scalings, rd, Rc, X, S):
                    dSb = r + dtau * cb.C - cb.adjoint(dy)
                    if cb.kind == "psd":
                        dXb = Rcb - sc.W @ dSb @ sc.W
                    else:
                        dXb = Rcb - (Xb / Sb) * dSb
                    if cb.has_c:
                        cdx += trdot(cb, cb.C, dXb)
                    dS.append(dSb)
                    dX.append(dXb)
                phi = (float(np.dot(b_vec, dy)) - cdx -
                       (float(np.dot(cf, dp)) if nf else 0.0) - dkap + rg)
                return phi, (dX, dS, dy, dp, dtau, dkap)

            phi0, dir0 = build(0.0)
            phi1, _ = build(1.0)
            denom = phi0 - phi1
            if abs(denom) < 1e-300:
                return dir0
            return build(phi0 / denom)[1]

        # predictor
        Rc_aff = []
        for cb, sc, Xb, Sb in zip(cone, scalings, X, S):
            if cb.kind == "psd":
                G = -np.diag(sc.lam ** 2)
                Rc_aff.append(sc.R @ sc.linv(G) @ sc.R.T)
            else:
                Rc_aff.append(-Xb)
        u = -rp - _apply_all(cone, Rc_aff) + AWrdW
        q2 = kkt.solve(u, rf)
        dX_a, dS_a, dy_a, dp_a, dtau_a, dkap_a = directions(
            Rc_aff, -tau * kappa, q2
        )

        alpha_a = _step_length(cone, scalings, X, S, dX_a, dS_a,
                               tau, kappa, dtau_a, dkap_a)
        gap_a = sum(
            trdot(cb, Xb + alpha_a * dXb, Sb + alpha_a * dSb)
            for cb, Xb, Sb, dXb, dSb in zip(cone, X, S, dX_a, dS_a)
        ) + (tau + alpha_a * dtau_a) * (kappa + alpha_a * dkap_a)
        sigma = min(1.0, max(0.0, (gap_a / (gap + tau * kappa)))) ** 3

        # corrector
        Rc = []
        for cb, sc, dXb, dSb, Xb, Sb in zip(cone, scalings, dX_a, dS_a, X, S):
            if cb.kind == "psd":
                U = sc.Rinv @ dXb @ sc.Rinv.T
                V = sc.R.T @ dSb @ sc.R
                G = (sigma * mu * np.eye(cb.nb) - np.diag(sc.lam ** 2)
                     - 0.5 * (U @ V + V @ U))
                Rc.append(sc.R @ sc.linv(G) @ sc.R.T)
            else:
                lam2 = Xb * Sb
                G = sigma * mu - lam2 - (dXb * dSb)
                Rc.append((Xb / Sb) * (G / (Xb * Sb)) * Sb)  # w^2 * G / lam^2
        g_t = sigma * mu - tau * kappa - dtau_a * dkap_a
        u = -rp - _apply_all(cone, Rc) + AWrdW
        q2 = kkt.solve(u, rf)
        dX, dS, dy, dp, dtau, dkap = directions(Rc, g_t, q2)

        alpha = _STEP_FRACTION * _step_length(
            cone, scalings, X, S, dX, dS, tau, kappa, dtau, dkap
        )
        alpha = min(1.0, alpha)
        if alpha < 1e-9:
            sol = _try_infeasibility(problem, pre, cone, y, S, b_vec, Af, it, log)
            if sol is None:
                sol = _linear_inconsistency(problem, pre, cone, b_vec, Af, it, log)
            if sol is not None:
                return sol
            return _inaccurate(problem, pre, cone, X, S, y, p, tau, it, log,
                               note="stalled")

        for k in range(len(cone)):
            X[k] = X[k] + alpha * dX[k]
            S[k] = S[k] + alpha * dS[k]
            if cone[k].kind == "psd":
                X[k] = 0.5 * (X[k] + X[k].T)
                S[k] = 0.5 * (S[k] + S[k].T)
        y = y + alpha * dy
        if nf:
            p = p + alpha * dp
        tau += alpha * dtau
        kappa += alpha * dkap

    sol = _try_infeasibility(problem, pre, cone, y, S, b_vec, Af, it, log)
    if sol is not None:
        return sol
    # a feasible-looking point at the cap still gets the honest re-check
    xb = [Xb / tau for Xb in X]
    sb = [Sb / tau for Sb in S]
    out = _final_check(problem, pre, cone, xb, pre.recover_free(p / tau),
                       _expand_y(problem, pre, y / tau), sb, it, log, tol)
    if out.status == STATUS_FEASIBLE:
        return out
    out.status = STATUS_MAXITER
    return out


def _apply_all(cone, mats) -> np.ndarray:
    out = None
    for cb, M in zip(cone, mats):
        v = cb.apply(M)
        out = v if out is None else out + v
    return out if out is not None else np.zeros(0)


def _step_length(cone, scalings, X, S, dX, dS, tau, kappa, dtau, dkap):
    alpha = np.inf
    for cb, sc, Xb, Sb, dXb, dSb in zip(cone, scalings, X, S, dX, dS):
        if cb.kind == "psd":
            alpha = min(alpha, _max_step_psd(sc.Lx, dXb))
            alpha = min(alpha, _max_step_psd(sc.Ls, dSb))
        else:
            alpha = min(alpha, _max_step_vec(Xb, dXb))
            alpha = min(alpha, _max_step_vec(Sb, dSb))
    if dtau < 0:
        alpha = min(alpha, -tau / dtau)
    if dkap < 0:
        alpha = min(alpha, -kappa / dkap)
    return min(alpha, 1.0 / _STEP_FRACTION)


class _KKT:
    """Factorization of [[H, Af], [Af^T, 0]] via Cholesky of H plus a dense
    Schur complement on the free border; escalating ridge regularization on
    breakdown."""

    def __init__(self, H, Af, log):
        self.Af = Af
        self.failed = False
        scale = max(float(np.mean(np.diag(H))), 1e-300)
        reg = 0.0
        for attempt in range(4):
            try:
                self.choH = sla.cho_factor(
                    H + reg * scale * np.eye(H.shape[0]) if reg else H,
                    lower=True, check_finite=False,
                )
                break
            except np.linalg.LinAlgError:
                reg = 1e-12 if reg == 0.0 else reg * 1e3
                log.append(f"kkt: cholesky ridge {reg:.1e}")
        else:
            self.failed = True
            return
        nf = Af.shape[1]
        if nf:
            self.HiAf = sla.cho_solve(self.choH, Af, check_finite=False)
            Sb = Af.T @ self.HiAf
            try:
                self.choS = sla.cho_factor(Sb, lower=True, check_finite=False)
                self._spd = True
            except np.linalg.LinAlgError:
                sc = max(float(np.mean(np.diag(Sb))), 1e-300)
                self.choS = sla.cho_factor(
                    Sb + 1e-11 * sc * np.eye(nf), lower=True, check_finite=False
                )
                self._spd = True
                log.append("kkt: border ridge")
        else:
            self.HiAf = None

    def solve(self, r1, r2):
        dy0 = sla.cho_solve(self.choH, r1, check_finite=False)
        if self.HiAf is None:
            return dy0, np.zeros(0)
        rhs = self.Af.T @ dy0 - r2
        dp = sla.cho_solve(self.choS, rhs, check_finite=False)
        dy = dy0 - self.HiAf @ dp
        return dy, dp


# ---------------------------------------------------------------------------
# Status construction and verification
# ---------------------------------------------------------------------------

def _expand_y(problem, pre, y_red):
    y = np.zeros(problem.n_rows)
    y[pre.keep_rows] = y_red * pre.row_scale
    return y


def residuals(problem: SDPProblem, x_blocks, free) -> float:
    """max |A x - b| over the original rows."""
    vals = np.zeros(problem.n_rows)
    off = {}
    acc = 0
    for b, (kind, nb) in enumerate(problem.blocks):
        if kind == "free":
            off[b] = acc
            acc += nb
    for r, b, i, j, v in zip(problem.entry_rows, problem.entry_blocks,
                             problem.entry_i, problem.entry_j,
                             problem.entry_vals):
        kind = problem.blocks[b][0]
        if kind == "psd":
            vals[r] += v * x_blocks[b][i, j]
        elif kind == "diag":
            vals[r] += v * x_blocks[b][i]
        else:
            vals[r] += v * free[off[b] + i]
    return float(np.max(np.abs(vals - problem.rhs), initial=0.0))


def min_eigenvalue(problem: SDPProblem, x_blocks) -> float:
    worst = np.inf
    for b, (kind, nb) in enumerate(problem.blocks):
        if kind == "psd":
            w = np.linalg.eigvalsh(x_blocks[b])
            worst = min(worst, float(w[0]))
        elif kind == "diag":
            worst = min(worst, float(np.min(x_blocks[b])))
    return worst if worst != np.inf else 0.0


def _arrange_blocks(problem, pre, cone_list, values):
    """Scatter per-cone values back into the original block order."""
    out: List[Optional[np.ndarray]] = [None] * len(problem.blocks)
    for bid, val in zip(pre.cone_ids, values):
        out[bid] = val
    return out


def _coordinate_matrix(problem):
    """Sparse equality matrix over upper-triangle coordinates of every block,
    together with per-block coordinate offsets."""
    offsets = []
    acc = 0
    for kind, nb in problem.blocks:
        offsets.append(acc)
        acc += nb * (nb + 1) // 2 if kind == "psd" else nb
    cols = np.empty(len(problem.entry_vals), dtype=np.int64)
    for t, (r, b, i, j) in enumerate(zip(problem.entry_rows,
                                         problem.entry_blocks,
                                         problem.entry_i, problem.entry_j)):
        kind, nb = problem.blocks[b]
        if kind == "psd":
            # position of (i, j), i <= j, in row-major upper-triangle order
            cols[t] = offsets[b] + i * nb - i * (i - 1) // 2 + (j - i)
        else:
            cols[t] = offsets[b] + i
    A = sp.csr_matrix(
        (problem.entry_vals, (problem.entry_rows, cols)),
        shape=(problem.n_rows, acc),
    )
    return A, offsets


def _polish_feasibility(problem, x_blocks, free, rounds=60):
    """Alternating projection between the equality subspace and the cone:
    cheap accuracy recovery for a nearly feasible interior-point solution.
    Returns refined (x_blocks, free); the caller re-checks residuals, so this
    can only upgrade an Inaccurate verdict, never fabricate one."""
    A, offsets = _coordinate_matrix(problem)
    z = np.zeros(A.shape[1])
    facc = 0
    for b, (kind, nb) in enumerate(problem.blocks):
        o = offsets[b]
        if kind == "psd":
            iu = np.triu_indices(nb)
            z[o:o + nb * (nb + 1) // 2] = x_blocks[b][iu]
        elif kind == "diag":
            z[o:o + nb] = x_blocks[b]
        else:
            z[o:o + nb] = free[facc:facc + nb]
            facc += nb
    gram = (A @ A.T).toarray()
    ridge = 1e-12 * max(1.0, float(np.max(np.diag(gram))))
    while True:
        try:
            chol = sla.cho_factor(
                gram + ridge * np.eye(gram.shape[0]), lower=True
            )
            break
        except np.linalg.LinAlgError:
            ridge *= 1e3
    for _ in range(rounds):
        r = problem.rhs - A @ z
        if float(np.max(np.abs(r), initial=0.0)) <= 1e-10:
            break
        z = z + A.T @ sla.cho_solve(chol, r)
        for b, (kind, nb) in enumerate(problem.blocks):
            o = offsets[b]
            if kind == "psd":
                mat = np.zeros((nb, nb))
                iu = np.triu_indices(nb)
                mat[iu] = z[o:o + nb * (nb + 1) // 2]
                mat = mat + mat.T - np.diag(np.diag(mat))
                w, V = np.linalg.eigh(mat)
                if w[0] < 0.0:
                    mat = (V * np.maximum(w, 0.0)) @ V.T
                    z[o:o + nb * (nb + 1) // 2] = mat[iu]
            elif kind == "diag":
                np.maximum(z[o:o + nb], 0.0, out=z[o:o + nb])
    out_x = []
    facc = 0
    out_free = np.array(free, dtype=float, copy=True) if free is not None \
        else None
    for b, (kind, nb) in enumerate(problem.blocks):
        o = offsets[b]
        if kind == "psd":
            mat = np.zeros((nb, nb))
            iu = np.triu_indices(nb)
            mat[iu] = z[o:o + nb * (nb + 1) // 2]
            out_x.append(mat + mat.T - np.diag(np.diag(mat)))
        elif kind == "diag":
            out_x.append(z[o:o + nb].copy())
        else:
            out_x.append(None)
            out_free[facc:facc + nb] = z[o:o + nb]
            facc += nb
    return out_x, out_free


def _final_check(problem, pre, cone, xb, free, y_full, sb, it, log, tol):
    x_blocks = _arrange_blocks(problem, pre, cone, xb)
    s_blocks = _arrange_blocks(problem, pre, cone, sb)
    pres = residuals(problem, x_blocks, free)
    mineig = min_eigenvalue(problem, x_blocks)
    if pres > 1e-6 and all(
        x_blocks[b] is not None
        for b, (kind, _) in enumerate(problem.blocks) if kind != "free"
    ):
        x_try, free_try = _polish_feasibility(problem, x_blocks, free)
        pres_try = residuals(problem, x_try, free_try)
        mineig_try = min_eigenvalue(problem, x_try)
        log.append(f"polish: max|Ax-b| {pres:.3e} -> {pres_try:.3e}")
        if pres_try <= 1e-6 and mineig_try >= -1e-8:
            x_blocks, free = x_try, free_try
            pres, mineig = pres_try, mineig_try
    pobj = _objective(problem, x_blocks, free)
    dobj = float(np.dot(problem.rhs, y_full))
    ok = pres <= 1e-6 and mineig >= -1e-8
    log.append(
        f"recheck: max|Ax-b| {pres:.3e} min_eig {mineig:.3e} -> "
        f"{'Feasible' if ok else 'Inaccurate'}"
    )
    return SDPSolution(
        status=STATUS_FEASIBLE if ok else STATUS_INACCURATE,
        x_blocks=x_blocks, free=free, y=y_full, s_blocks=s_blocks,
        primal_obj=pobj, dual_obj=dobj, iterations=it, log=log,
        primal_residual=pres, dual_residual=0.0, min_eigenvalue=mineig,
    )


def _objective(problem, x_blocks, free):
    total = 0.0
    off = {}
    acc = 0
    for b, (kind, nb) in enumerate(problem.blocks):
        if kind == "free":
            off[b] = acc
            acc += nb
    for b, i, j, v in zip(problem.obj_blocks, problem.obj_i, problem.obj_j,
                          problem.obj_vals):
        kind = problem.blocks[b][0]
        if kind == "psd":
            total += v * x_blocks[b][i, j]
        elif kind == "diag":
            total += v * x_blocks[b][i]
        else:
            total += v * free[off[b] + i]
    return float(total)


def _ray_solution(problem, ray, log):
    by = float(np.dot(problem.rhs, ray))
    log.append(f"infeasibility certificate: b'y {by:.3e}")
    return SDPSolution(
        status=STATUS_INFEASIBLE, x_blocks=[None] * len(problem.blocks),
        free=None, y=ray, s_blocks=[None] * len(problem.blocks),
        primal_obj=float("nan"), dual_obj=by, iterations=0, log=log,
        primal_residual=float("nan"), dual_residual=0.0, min_eigenvalue=0.0,
    )


def _linear_inconsistency(problem, pre, cone, b_vec, Af, it, log):
    """If b has a component outside the row space of [A_c | A_f], that
    component is an exact separating ray with zero dual slack."""
    m = len(b_vec)
    if m == 0:
        return None
    G = np.zeros((m, m))
    for cb in cone:
        G += (cb.A_flat @ cb.A_flat.T).toarray()
    if Af.shape[1]:
        G += Af @ Af.T
    w, V = np.linalg.eigh(G)
    tol = max(w[-1], 1.0) * m * np.finfo(float).eps * 100
    null = V[:, w < tol]
    if null.shape[1] == 0:
        return None
    y = null @ (null.T @ b_vec)
    by = float(np.dot(b_vec, y))
    if by <= 1e-12 * (1.0 + float(np.max(np.abs(b_vec), initial=0.0))) ** 2:
        return None
    y = y / by
    worst = float(np.max(np.abs(Af.T @ y), initial=0.0)) if Af.shape[1] else 0.0
    s_out = []
    for cb in cone:
        adj = cb.adjoint(y)
        worst = max(worst, float(np.max(np.abs(adj), initial=0.0)))
        s_out.append(np.zeros_like(adj))
    if worst > 1e-6:
        return None
    log.append(f"infeasibility certificate (rank): dual residual {worst:.3e}")
    y_full = pre.expand_ray(y)
    return SDPSolution(
        status=STATUS_INFEASIBLE,
        x_blocks=[None] * len(problem.blocks), free=None, y=y_full,
        s_blocks=_arrange_blocks(problem, pre, cone, s_out),
        primal_obj=float("nan"), dual_obj=float(np.dot(problem.rhs, y_full)),
        iterations=it, log=log, primal_residual=float("nan"),
        dual_residual=worst, min_eigenvalue=0.0,
    )


def _try_infeasibility(problem, pre, cone, y, S, b_vec, Af, it, log):
    """Certify primal infeasibility from the current dual iterate: need
    b'y > 0 with A*(y) + S ~ 0, S >= 0 (then y is a separating ray)."""
    by = float(np.dot(b_vec, y))
    if by <= 0:
        return None
    y_n = y / by
    # polish: remove the free-column component, renormalize, and slot in the
    # exact PSD part of -A*(y) as the dual slack
    if Af.shape[1]:
        coef, *_ = np.linalg.lstsq(Af, y_n, rcond=None)
        y_n = y_n - Af @ coef
        by2 = float(np.dot(b_vec, y_n))
        if by2 <= 0:
            return None
        y_n = y_n / by2
    worst = 0.0
    s_out = []
    for cb, Sb in zip(cone, S):
        neg_adj = -cb.adjoint(y_n)
        if cb.kind == "psd":
            w, V = np.linalg.eigh(neg_adj)
            s_pol = (V * np.maximum(w, 0.0)) @ V.T
        else:
            s_pol = np.maximum(neg_adj, 0.0)
        resid = cb.adjoint(y_n) + s_pol
        worst = max(worst, float(np.max(np.abs(resid), initial=0.0)))
        s_out.append(s_pol)
    if Af.shape[1]:
        worst = max(worst, float(np.max(np.abs(Af.T @ y_n), initial=0.0)))
    if worst > 1e-6:
        log.append(f"infeasibility check failed: dual residual {worst:.3e}")
        return None
    y_full = pre.expand_ray(y_n)
    # re-verify the expanded ray against the original free columns
    log.append(f"infeasibility certificate: dual residual {worst:.3e}")
    return SDPSolution(
        status=STATUS_INFEASIBLE,
        x_blocks=[None] * len(problem.blocks), free=None, y=y_full,
        s_blocks=_arrange_blocks(problem, pre, cone, s_out),
        primal_obj=float("nan"), dual_obj=float(np.dot(problem.rhs, y_full)),
        iterations=it, log=log, primal_residual=float("nan"),
        dual_residual=worst, min_eigenvalue=0.0,
    )


def _inaccurate(problem, pre, cone, X, S, y, p, tau, it, log, note=""):
    if note:
        log.append(f"inaccurate: {note}")
    t = max(tau, 1e-300)
    xb = [Xb / t for Xb in X]
    sb = [Sb / t for Sb in S]
    if tau > 1e-6:
        # the stall may still hide a feasible point; the independent
        # re-check (with polish) decides, so this cannot overclaim
        out = _final_check(problem, pre, cone, xb,
                           pre.recover_free(p / t) if p is not None else None,
                           _expand_y(problem, pre, y / t), sb, it, log,
                           1e-8)
        if out.status == STATUS_FEASIBLE:
            return out
    return SDPSolution(
        status=STATUS_INACCURATE,
        x_blocks=_arrange_blocks(problem, pre, cone, xb),
        free=pre.recover_free(p / t) if p is not None else None,
        y=_expand_y(problem, pre, y / t),
        s_blocks=_arrange_blocks(problem, pre, cone, sb),
        primal_obj=float("nan"), dual_obj=float("nan"), iterations=it,
        log=log, primal_residual=float("nan"), dual_residual=float("nan"),
        min_eigenvalue=float("nan"), tau=tau,
    )


# ---------------------------------------------------------------------------
# Interchange format
# ---------------------------------------------------------------------------

_HEADER = "* sdp interchange v1"


def export_standard(problem: SDPProblem) -> str:
    """Serialize to a plain-text sparse format.  Free blocks are written as
    a signed pair of diagonal blocks (x = u - v, u, v >= 0); floats use
    shortest round-trip representation so read/export is bit-exact."""
    blocks_out: List[int] = []
    # map original block -> list of (out_block, sign)
    mapping: List[List[Tuple[int, float]]] = []
    for kind, nb in problem.blocks:
        if kind == "psd":
            mapping.append([(len(blocks_out), 1.0)])
            blocks_out.append(nb)
        elif kind == "diag":
            mapping.append([(len(blocks_out), 1.0)])
            blocks_out.append(-nb)
        else:  # free -> +diag, -diag
            plus = len(blocks_out)
            blocks_out.append(-nb)
            minus = len(blocks_out)
            blocks_out.append(-nb)
            mapping.append([(plus, 1.0), (minus, -1.0)])
    lines = [_HEADER]
    lines.append(str(problem.n_rows))
    lines.append(str(len(blocks_out)))
    lines.append(" ".join(str(s) for s in blocks_out))
    lines.append(" ".join(repr(float(v)) for v in problem.rhs))
    recs = []
    for b, i, j, v in zip(problem.obj_blocks, problem.obj_i, problem.obj_j,
                          problem.obj_vals):
        for ob, sign in mapping[b]:
            recs.append((0, ob + 1, int(i) + 1, int(j) + 1, sign * float(v)))
    for r, b, i, j, v in zip(problem.entry_rows, problem.entry_blocks,
                             problem.entry_i, problem.entry_j,
                             problem.entry_vals):
        for ob, sign in mapping[b]:
            recs.append((int(r) + 1, ob + 1, int(i) + 1, int(j) + 1,
                         sign * float(v)))
    recs.sort(key=lambda t: t[:4])
    for r, ob, i, j, v in recs:
        lines.append(f"{r} {ob} {i} {j} {v!r}")
    return "\n".join(lines) + "\n"


def read_standard(text: str) -> SDPProblem:
    lines = [ln for ln in text.splitlines()
             if ln.strip() and not ln.startswith("*")]
    m = int(lines[0])
    nblk = int(lines[1])
    sizes = [int(t) for t in lines[2].split()]
    if len(sizes) != nblk:
        raise ValueError("block count mismatch")
    rhs = np.array([float(t) for t in lines[3].split()], dtype=float)
    if len(rhs) != m:
        raise ValueError("rhs length mismatch")
    blocks = [("psd", s) if s > 0 else ("diag", -s) for s in sizes]
    er, eb, ei, ej, ev = [], [], [], [], []
    ob, oi, oj, ov = [], [], [], []
    for ln in lines[4:]:
        rt, bt, it_, jt, vt = ln.split()
        r, b, i, j = int(rt), int(bt) - 1, int(it_) - 1, int(jt) - 1
        v = float(vt)
        if r == 0:
            ob.append(b); oi.append(i); oj.append(j); ov.append(v)
        else:
            er.append(r - 1); eb.append(b); ei.append(i); ej.append(j)
            ev.append(v)
    return SDPProblem(
        blocks, m, np.array(er, dtype=np.int64), np.array(eb, dtype=np.int64),
        np.array(ei, dtype=np.int64), np.array(ej, dtype=np.int64),
        np.array(ev, dtype=float), rhs,
        np.array(ob, dtype=np.int64), np.array(oi, dtype=np.int64),
        np.array(oj, dtype=np.int64), np.array(ov, dtype=float),
    )
