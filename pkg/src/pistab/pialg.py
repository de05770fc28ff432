"""The *-algebra of partial-integral (3-PI) operators on hyper-rectangles.

A univariate 3-PI operator acts as

    (P u)(s) = R0(s) u(s) + int_a^s R1(s,t) u(t) dt + int_s^b R2(s,t) u(t) dt.

The N-dimensional generalization is stored in *canonical cell form*: one
matrix-polynomial kernel per cell index c in {MULT, LOWER, UPPER}^N, where the
axis entry selects multiplier action, integration over t_i in (a_i, s_i), or
integration over (s_i, b_i).  Composition, adjoint and addition are closed on
this representation and are implemented exactly (rational coefficients).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from .poly import MatPoly, Polynomial, Var, evar, svar, tvar, var_axis, var_kind
from .poly import KIND_E, KIND_S, KIND_T

MULT = "m"
LOWER = "l"
UPPER = "u"

CELL_KINDS = (MULT, LOWER, UPPER)

CellIndex = Tuple[str, ...]
Interval = Tuple[Fraction, Fraction]


def _as_frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class PI1Params:
    """Univariate 3-PI parameter triple on [a, b].

    Kernels are written in the variables of ``axis`` (default 1); variables of
    other axes may appear as symbolic bystanders.
    """

    a: Fraction
    b: Fraction
    R0: MatPoly
    R1: MatPoly
    R2: MatPoly
    axis: int = 1

    def __post_init__(self):
        object.__setattr__(self, "a", _as_frac(self.a))
        object.__setattr__(self, "b", _as_frac(self.b))
        if not (self.R0.shape == self.R1.shape == self.R2.shape):
            raise ValueError("R0, R1, R2 must share one shape")
        t = tvar(self.axis)
        if t in self.R0.max_degrees():
            raise ValueError("R0 must not depend on the kernel variable")

    @property
    def shape(self):
        return self.R0.shape

    def relabel(self, axis: int) -> "PI1Params":
        """Move the triple onto another axis's variable pair."""
        if axis == self.axis:
            return self
        mapping = {
            svar(self.axis): svar(axis),
            tvar(self.axis): tvar(axis),
        }
        return PI1Params(
            self.a,
            self.b,
            self.R0.rename(mapping),
            self.R1.rename(mapping),
            self.R2.rename(mapping),
            axis,
        )


class SumOfProducts:
    """A sum of separable terms; each term lists one PI1Params per axis."""

    def __init__(self, terms: Iterable[Sequence[PI1Params]]):
        self.terms: List[Tuple[PI1Params, ...]] = [tuple(t) for t in terms]
        if not self.terms:
            raise ValueError("need at least one term")
        ndim = len(self.terms[0])
        for t in self.terms:
            if len(t) != ndim:
                raise ValueError("terms must have equal axis counts")
        self.ndim = ndim

    def box(self) -> Tuple[Interval, ...]:
        first = self.terms[0]
        box = tuple((f.a, f.b) for f in first)
        for t in self.terms:
            if tuple((f.a, f.b) for f in t) != box:
                raise ValueError("interval mismatch between terms")
        return box


class NDPIOperator:
    """N-dimensional 3-PI operator in canonical cell form."""

    __slots__ = ("box", "shape", "cells")

    def __init__(
        self,
        box: Sequence[Interval],
        shape: Tuple[int, int],
        cells: Mapping[CellIndex, MatPoly],
        *,
        validate: bool = True,
    ):
        self.box = tuple((_as_frac(a), _as_frac(b)) for a, b in box)
        self.shape = tuple(shape)
        pruned: Dict[CellIndex, MatPoly] = {}
        for idx, mat in cells.items():
            idx = tuple(idx)
            if len(idx) != len(self.box):
                raise ValueError("cell index length must match dimension")
            if mat.shape != self.shape:
                raise ValueError(
                    f"cell {idx} has shape {mat.shape}, expected {self.shape}"
                )
            if not mat.is_zero():
                if idx in pruned:
                    mat = pruned[idx] + mat
                pruned[idx] = mat
        self.cells = pruned
        if validate:
            self._check_variables()

    # -- construction ---------------------------------------------------

    @staticmethod
    def zero(box, m: int, n: int) -> "NDPIOperator":
        return NDPIOperator(box, (m, n), {})

    @staticmethod
    def identity(box, n: int) -> "NDPIOperator":
        idx = (MULT,) * len(tuple(box))
        return NDPIOperator(box, (n, n), {idx: MatPoly.identity(n)})

    @property
    def ndim(self) -> int:
        return len(self.box)

    def _check_variables(self):
        for idx, mat in self.cells.items():
            for v in mat.max_degrees():
                axis, kind = var_axis(v), var_kind(v)
                if kind == KIND_E:
                    raise ValueError(f"cell {idx}: dummy variable {v!r} leaked")
                if axis < 1 or axis > self.ndim:
                    raise ValueError(f"cell {idx}: variable axis {axis} out of range")
                if kind == KIND_T and idx[axis - 1] == MULT:
                    raise ValueError(
                        f"cell {idx}: multiplier axis {axis} must not use its "
                        "kernel variable"
                    )

    def cell(self, idx: CellIndex) -> MatPoly:
        mat = self.cells.get(tuple(idx))
        if mat is None:
            return MatPoly.zeros(*self.shape)
        return mat

    # -- linear structure -------------------------------------------------

    def __add__(self, other: "NDPIOperator") -> "NDPIOperator":
        if self.box != other.box or self.shape != other.shape:
            raise ValueError("operator shape/box mismatch")
        cells = dict(self.cells)
        for idx, mat in other.cells.items():
            cells[idx] = cells[idx] + mat if idx in cells else mat
        return NDPIOperator(self.box, self.shape, cells, validate=False)

    def __neg__(self) -> "NDPIOperator":
        return self.scale(Fraction(-1))

    def __sub__(self, other: "NDPIOperator") -> "NDPIOperator":
        return self + (-other)

    def scale(self, c) -> "NDPIOperator":
        return NDPIOperator(
            self.box,
            self.shape,
            {idx: mat.scale(c) for idx, mat in self.cells.items()},
            validate=False,
        )

    def map_cells(self, fn) -> "NDPIOperator":
        return NDPIOperator(
            self.box,
            self.shape,
            {idx: fn(mat) for idx, mat in self.cells.items()},
            validate=False,
        )

    def is_zero(self) -> bool:
        return not self.cells

    def __eq__(self, other):
        if not isinstance(other, NDPIOperator):
            return NotImplemented
        return (
            self.box == other.box
            and self.shape == other.shape
            and self.cells == other.cells
        )

    def __hash__(self):  # pragma: no cover - rarely used
        return hash((self.box, self.shape, frozenset(self.cells.items())))

    def dump(self) -> str:
        """Human-readable listing, one line per nonzero cell."""
        names = {MULT: "M", LOWER: "L", UPPER: "U"}
        lines = [f"PI operator {self.shape[0]}x{self.shape[1]} on "
                 + " x ".join(f"[{a},{b}]" for a, b in self.box)]
        for idx in sorted(self.cells):
            lines.append(
                f"cell ({','.join(names[k] for k in idx)}): {self.cells[idx]}"
            )
        if len(lines) == 1:
            lines.append("zero operator")
        return "\n".join(lines)

    def __repr__(self):
        return self.dump()


def add_nd(q: NDPIOperator, r: NDPIOperator) -> NDPIOperator:
    return q + r


def scale_nd(r: NDPIOperator, c) -> NDPIOperator:
    return r.scale(c)


def op_equal(q: NDPIOperator, r: NDPIOperator) -> bool:
    if q.box != r.box or q.shape != r.shape:
        raise ValueError("operator shape/box mismatch")
    return q.cells == r.cells


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

# Axis-local interaction of cell kinds under composition, derived once from
# the five integral terms of the univariate composition formula.  Each entry
# maps (kind of Q's cell, kind of R's cell) to a list of contributions
# (result kind, eta-integration bounds); bounds use the tokens below and are
# resolved against the axis interval, None meaning no eta integration.
_A, _B, _S, _T = "a", "b", "s", "t"

_COMPOSE_TABLE = {
    (MULT, MULT): [(MULT, None)],
    (MULT, LOWER): [(LOWER, None)],
    (MULT, UPPER): [(UPPER, None)],
    (LOWER, MULT): [(LOWER, None)],
    (UPPER, MULT): [(UPPER, None)],
    (LOWER, LOWER): [(LOWER, (_T, _S))],
    (LOWER, UPPER): [(LOWER, (_A, _T)), (UPPER, (_A, _S))],
    (UPPER, LOWER): [(LOWER, (_S, _B)), (UPPER, (_T, _B))],
    (UPPER, UPPER): [(UPPER, (_S, _T))],
}


def _bound_value(token: str, axis: int, interval: Interval):
    if token == _A:
        return interval[0]
    if token == _B:
        return interval[1]
    if token == _S:
        return svar(axis)
    return tvar(axis)


def compose_nd(q: NDPIOperator, r: NDPIOperator) -> NDPIOperator:
    """Exact composition q o r, returning canonical cells."""
    if q.box != r.box:
        raise ValueError("operator box mismatch")
    if q.shape[1] != r.shape[0]:
        raise ValueError(f"inner shape mismatch {q.shape} x {r.shape}")
    ndim = q.ndim
    out_cells: Dict[CellIndex, MatPoly] = {}
    shape = (q.shape[0], r.shape[1])
    for cq, mq in q.cells.items():
        for cr, mr in r.cells.items():
            qmap: Dict[Var, Var] = {}
            rmap: Dict[Var, Var] = {}
            axis_plans = []
            for i in range(ndim):
                axis = i + 1
                kq, kr = cq[i], cr[i]
                if kq != MULT and kr != MULT:
                    # both kernels share the eta_i integration variable
                    qmap[tvar(axis)] = evar(axis)
                    rmap[svar(axis)] = evar(axis)
                elif kq != MULT:
                    # Q integrates; the multiplier R is evaluated at t_i
                    rmap[svar(axis)] = tvar(axis)
                axis_plans.append(_COMPOSE_TABLE[(kq, kr)])
            prod = (mq.rename(qmap) if qmap else mq) * (
                mr.rename(rmap) if rmap else mr
            )
            for combo in itertools.product(*axis_plans):
                kernel = prod
                for i, (kind, bounds) in enumerate(combo):
                    if bounds is not None:
                        axis = i + 1
                        lo = _bound_value(bounds[0], axis, q.box[i])
                        hi = _bound_value(bounds[1], axis, q.box[i])
                        kernel = kernel.integrate(evar(axis), lo, hi)
                idx = tuple(kind for kind, _ in combo)
                if idx in out_cells:
                    out_cells[idx] = out_cells[idx] + kernel
                else:
                    out_cells[idx] = kernel
    return NDPIOperator(q.box, shape, out_cells, validate=False)


def compose1d(
    q: PI1Params, r: PI1Params, bystanders: Iterable[Var] = ()
) -> PI1Params:
    """Univariate composition; bystander variables pass through untouched."""
    if (q.a, q.b) != (r.a, r.b):
        raise ValueError("interval mismatch")
    if q.axis != r.axis:
        raise ValueError("axis mismatch")
    if q.shape[1] != r.shape[0]:
        raise ValueError("inner shape mismatch")
    del bystanders  # symbolic spectators need no special handling
    box = [(q.a, q.b)]
    qop = NDPIOperator(
        box,
        q.shape,
        {(MULT,): q.R0, (LOWER,): q.R1, (UPPER,): q.R2},
        validate=False,
    )
    rop = NDPIOperator(
        box,
        r.shape,
        {(MULT,): r.R0, (LOWER,): r.R1, (UPPER,): r.R2},
        validate=False,
    )
    if q.axis != 1:
        # the cell machinery is axis-agnostic; fake a 1-axis box on q.axis
        raise ValueError("compose1d expects axis-1 parameters; use relabel")
    comp = compose_nd(qop, rop)
    shape = (q.shape[0], r.shape[1])
    return PI1Params(
        q.a,
        q.b,
        comp.cell((MULT,)),
        comp.cell((LOWER,)),
        comp.cell((UPPER,)),
        q.axis,
    )


# ---------------------------------------------------------------------------
# Adjoint
# ---------------------------------------------------------------------------

_ADJ_KIND = {MULT: MULT, LOWER: UPPER, UPPER: LOWER}


def adjoint_nd(r: NDPIOperator) -> NDPIOperator:
    """L2 adjoint: swap LOWER/UPPER per axis, swap s_i <-> t_i on kernel axes,
    transpose the matrix parameter."""
    cells: Dict[CellIndex, MatPoly] = {}
    for idx, mat in r.cells.items():
        new_idx = tuple(_ADJ_KIND[k] for k in idx)
        mapping: Dict[Var, Var] = {}
        for i, kind in enumerate(idx):
            if kind != MULT:
                axis = i + 1
                mapping[svar(axis)] = tvar(axis)
                mapping[tvar(axis)] = svar(axis)
        new_mat = mat.rename(mapping).transpose() if mapping else mat.transpose()
        if new_idx in cells:
            cells[new_idx] = cells[new_idx] + new_mat
        else:
            cells[new_idx] = new_mat
    return NDPIOperator(
        r.box, (r.shape[1], r.shape[0]), cells, validate=False
    )


def adjoint1d(r: PI1Params) -> PI1Params:
    s, t = svar(r.axis), tvar(r.axis)
    swap = {s: t, t: s}
    return PI1Params(
        r.a,
        r.b,
        r.R0.transpose(),
        r.R2.rename(swap).transpose(),
        r.R1.rename(swap).transpose(),
        r.axis,
    )


# ---------------------------------------------------------------------------
# Input formats
# ---------------------------------------------------------------------------

_KIND_OF_SLOT = (MULT, LOWER, UPPER)


def canonicalize(sop: SumOfProducts) -> NDPIOperator:
    """Expand a sum of separable per-axis terms into canonical cells."""
    box = sop.box()
    ndim = sop.ndim
    cells: Dict[CellIndex, MatPoly] = {}
    shape = None
    for term in sop.terms:
        factors = [f.relabel(i + 1) for i, f in enumerate(term)]
        tshape = (factors[0].shape[0], factors[-1].shape[1])
        if shape is None:
            shape = tshape
        elif shape != tshape:
            raise ValueError("terms disagree on operator shape")
        for slots in itertools.product(range(3), repeat=ndim):
            mat = None
            for f, slot in zip(factors, slots):
                param = (f.R0, f.R1, f.R2)[slot]
                mat = param if mat is None else mat * param
            if mat.is_zero():
                continue
            idx = tuple(_KIND_OF_SLOT[s] for s in slots)
            cells[idx] = cells[idx] + mat if idx in cells else mat
    if shape is None:  # pragma: no cover - SumOfProducts guarantees >=1 term
        raise ValueError("empty sum of products")
    return NDPIOperator(box, shape, cells)


def from_semiseparable(
    box,
    kernels: Mapping[Tuple[int, ...], MatPoly],
    mult: MatPoly,
) -> NDPIOperator:
    """Build an operator from a multiplier and per-orthant kernels K_alpha,
    alpha in {-1,+1}^N (-1 selects LOWER, +1 UPPER on that axis)."""
    box = tuple(box)
    ndim = len(box)
    cells: Dict[CellIndex, MatPoly] = {}
    if not mult.is_zero():
        cells[(MULT,) * ndim] = mult
    for alpha, mat in kernels.items():
        if len(alpha) != ndim or any(a not in (-1, 1) for a in alpha):
            raise ValueError(f"bad orthant label {alpha}")
        idx = tuple(LOWER if a < 0 else UPPER for a in alpha)
        if not mat.is_zero():
            cells[idx] = cells[idx] + mat if idx in cells else mat
    return NDPIOperator(box, mult.shape, cells)


# ---------------------------------------------------------------------------
# Machine-readable serialization
# ---------------------------------------------------------------------------

def _coeff_to_doc(c):
    if isinstance(c, Fraction):
        return str(c)
    return float(c)


def _coeff_from_doc(v):
    if isinstance(v, str):
        return Fraction(v)
    return float(v)


def op_to_doc(op: NDPIOperator) -> dict:
    """JSON-ready document: exact rational coefficients as 'p/q' strings,
    float coefficients (from numeric certificates) as numbers."""
    cells = []
    for idx in sorted(op.cells):
        mat = op.cells[idx]
        entries = []
        for r in range(mat.m):
            for c in range(mat.n):
                p = mat[r, c]
                if p.is_zero():
                    continue
                terms = [
                    [[[int(v), int(e)] for v, e in mono], _coeff_to_doc(coef)]
                    for mono, coef in sorted(p.terms.items())
                ]
                entries.append([r, c, terms])
        cells.append({"kinds": "".join(idx), "entries": entries})
    return {
        "box": [[str(a), str(b)] for a, b in op.box],
        "shape": list(op.shape),
        "cells": cells,
    }


def op_from_doc(doc: dict) -> NDPIOperator:
    box = tuple((Fraction(a), Fraction(b)) for a, b in doc["box"])
    m, n = doc["shape"]
    cells: Dict[CellIndex, MatPoly] = {}
    for cell in doc["cells"]:
        idx = tuple(cell["kinds"])
        rows = [[Polynomial.zero() for _ in range(n)] for _ in range(m)]
        for r, c, terms in cell["entries"]:
            rows[r][c] = Polynomial({
                tuple((Var(v), e) for v, e in mono): _coeff_from_doc(coef)
                for mono, coef in terms
            })
        cells[idx] = MatPoly(rows)
    return NDPIOperator(box, (m, n), cells, validate=False)
