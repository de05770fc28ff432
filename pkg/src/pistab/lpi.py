"""Compile the exponential-stability linear PI inequality into an SDP.

The decision operator is P = M[P](I_n (x) Z_d) with Z_d the monomial operator
basis of degree d, and positivity is imposed through Gram operators
(I (x) Z_d')* M[R] (I (x) Z_d') with R, Q >= 0.  The constraint groups are

    (a)  P* T - T* P = 0
    (b)  T* P - eps^2 T* T - Gram(R) = 0
    (c)  P* A + A* P + 2k P* T + Gram(Q) = 0

matched cell-by-cell, entry-by-entry, monomial-by-monomial.  All symbolic
work runs over exact rationals; the compiler caches every k-independent part
so a bisection step only rescales the 2k P*T columns.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .pialg import (
    LOWER,
    MULT,
    NDPIOperator,
    UPPER,
    adjoint_nd,
    compose_nd,
)
from .poly import MatPoly, Polynomial, kron, svar, tvar, var_axis
from .sdpsolve import SDPProblem


# ---------------------------------------------------------------------------
# Sparse affine forms over decision variables
# ---------------------------------------------------------------------------

class AffineForm:
    """const + sum coeff_v * x_v with exact rational coefficients."""

    __slots__ = ("const", "lin")

    def __init__(self, const=0, lin: Optional[Dict[int, Fraction]] = None):
        self.const = Fraction(const)
        self.lin = lin or {}

    @staticmethod
    def variable(v: int) -> "AffineForm":
        return AffineForm(0, {v: Fraction(1)})

    def __bool__(self):
        return bool(self.const) or bool(self.lin)

    def _coerce(self, other) -> Optional["AffineForm"]:
        if isinstance(other, AffineForm):
            return other
        if isinstance(other, (int, Fraction)):
            return AffineForm(other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        lin = dict(self.lin)
        for v, c in o.lin.items():
            acc = lin.get(v)
            acc = c if acc is None else acc + c
            if acc:
                lin[v] = acc
            else:
                del lin[v]
        return AffineForm(self.const + o.const, lin)

    __radd__ = __add__

    def __neg__(self):
        return AffineForm(-self.const, {v: -c for v, c in self.lin.items()})

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        if isinstance(other, AffineForm):
            if not other.lin:
                other = other.const
            elif not self.lin:
                return other * self.const
            else:
                raise ValueError("product of two non-constant affine forms")
        if not isinstance(other, (int, Fraction)):
            return NotImplemented
        c = Fraction(other)
        if not c:
            return AffineForm(0)
        return AffineForm(self.const * c, {v: x * c for v, x in self.lin.items()})

    __rmul__ = __mul__

    def evaluate(self, assignment) -> float:
        total = float(self.const)
        for v, c in self.lin.items():
            total += float(c) * assignment[v]
        return total

    def __repr__(self):  # pragma: no cover - debugging aid
        parts = [str(self.const)] if self.const else []
        parts += [f"{c}*x{v}" for v, c in sorted(self.lin.items())]
        return " + ".join(parts) or "0"


def affine_const(c) -> AffineForm:
    return AffineForm(c)


# ---------------------------------------------------------------------------
# Monomial operator basis
# ---------------------------------------------------------------------------

def mu_size(d: int) -> int:
    """Size of the univariate operator basis: d^2 + 4d + 3."""
    return d * d + 4 * d + 3


def _mult_monomials(axis: int, d: int) -> List[Polynomial]:
    s = svar(axis)
    return [Polynomial.var(s, e) if e else Polynomial.const(Fraction(1))
            for e in range(d + 1)]


def _kernel_monomials(axis: int, d: int) -> List[Polynomial]:
    """Bivariate monomials in (s, t) of total degree <= d, graded-lex order."""
    s, t = svar(axis), tvar(axis)
    out = []
    for total in range(d + 1):
        for es in range(total, -1, -1):
            et = total - es
            mono = []
            if es:
                mono.append((s, es))
            if et:
                mono.append((t, et))
            out.append(Polynomial({tuple(mono): Fraction(1)}))
    return out


@dataclass(frozen=True)
class BasisElement:
    """One column of the ND operator basis: per-axis (cell kind, monomial)."""

    kinds: Tuple[str, ...]
    monos: Tuple[Polynomial, ...]

    def poly(self) -> Polynomial:
        p = Polynomial.const(Fraction(1))
        for m in self.monos:
            p = p * m
        return p


@dataclass(frozen=True)
class MonomialBasis:
    """Operator basis Z_d on a box: elements are per-axis choices of
    (multiplier monomial | lower-kernel monomial | upper-kernel monomial)."""

    d: int
    box: tuple
    elements: Tuple[BasisElement, ...]

    @property
    def size(self) -> int:
        return len(self.elements)

    def operator(self) -> NDPIOperator:
        """Z as a (size x 1) PI operator."""
        cells: Dict[tuple, list] = {}
        for r, el in enumerate(self.elements):
            cells.setdefault(el.kinds, []).append((r, el.poly()))
        out = {}
        for kinds, entries in cells.items():
            rows = [[Polynomial.zero()] for _ in range(self.size)]
            for r, p in entries:
                rows[r][0] = p
            out[kinds] = MatPoly(rows)
        return NDPIOperator(self.box, (self.size, 1), out)


def build_basis(
    d: int,
    box,
    *,
    multiplier_only: bool = False,
    kernel_only: bool = False,
    drop_pure_multiplier: bool = False,
    symmetric_kernels: bool = False,
) -> MonomialBasis:
    """The degree-d operator basis; per-axis size mu(d) = d^2+4d+3 untrimmed.

    Trimming flags: ``multiplier_only`` keeps only the multiplier block per
    axis; ``kernel_only`` drops every element with a multiplier axis;
    ``drop_pure_multiplier`` removes only the all-axes-multiplier elements;
    ``symmetric_kernels`` is handled by the caller (ties variables) and is
    accepted here for signature stability.
    """
    del symmetric_kernels
    box = tuple(box)
    ndim = len(box)
    degrees = (d,) * ndim if isinstance(d, int) else tuple(d)
    if len(degrees) != ndim:
        raise ValueError("per-axis degree tuple must match the box dimension")
    per_axis: List[List[Tuple[str, Polynomial]]] = []
    for i in range(1, ndim + 1):
        opts: List[Tuple[str, Polynomial]] = []
        if not kernel_only:
            opts += [(MULT, m) for m in _mult_monomials(i, degrees[i - 1])]
        if not multiplier_only:
            kerns = _kernel_monomials(i, degrees[i - 1])
            opts += [(LOWER, m) for m in kerns]
            opts += [(UPPER, m) for m in kerns]
        per_axis.append(opts)
    elements = []
    for combo in itertools.product(*per_axis):
        kinds = tuple(k for k, _ in combo)
        if drop_pure_multiplier and all(k == MULT for k in kinds):
            continue
        elements.append(BasisElement(kinds, tuple(m for _, m in combo)))
    return MonomialBasis(d, box, tuple(elements))


def _i_kron_z(basis: MonomialBasis, n: int) -> NDPIOperator:
    """I_n (x) Z as a PI operator of shape (n*size, n)."""
    z = basis.operator()
    eye = MatPoly.identity(n)
    cells = {idx: kron(eye, mat) for idx, mat in z.cells.items()}
    return NDPIOperator(basis.box, (n * basis.size, n), cells)


def parameterize_P(
    basis: MonomialBasis, n: int, var_base: int = 0
) -> Tuple[NDPIOperator, int]:
    """P = M[P](I_n (x) Z_d) with fresh decision variables; returns the
    operator (affine-coefficient cells) and the number of variables used.
    Variable (r, c) of the n x (n*size) matrix gets id var_base + r*(n*size)+c.
    """
    width = n * basis.size
    rows = []
    for r in range(n):
        row = []
        for c in range(width):
            row.append(
                Polynomial.const(AffineForm.variable(var_base + r * width + c))
            )
        rows.append(row)
    mp = MatPoly(rows)
    mult_op = NDPIOperator(
        basis.box, (n, width), {(MULT,) * len(basis.box): mp}, validate=False
    )
    return compose_nd(mult_op, _i_kron_z(basis, n)), n * width


def gram_operator(
    basis: MonomialBasis,
    n: int,
    var_of_entry,
    weight: Optional[Polynomial] = None,
) -> NDPIOperator:
    """(I (x) Z)* M[w R] (I (x) Z) with R symmetric; ``var_of_entry(i, j)``
    maps an upper-triangle index pair (i <= j) to a decision-variable id.

    An optional polynomial ``weight`` w(s), nonnegative on the box, scales the
    middle multiplier so the result stays positive semidefinite whenever the
    coefficient matrix is."""
    width = n * basis.size
    rows = []
    for i in range(width):
        row = []
        for j in range(width):
            a, b = (i, j) if i <= j else (j, i)
            entry = Polynomial.const(AffineForm.variable(var_of_entry(a, b)))
            if weight is not None:
                entry = entry * weight
            row.append(entry)
        rows.append(row)
    block = NDPIOperator(
        basis.box, (width, width), {(MULT,) * len(basis.box): MatPoly(rows)},
        validate=False,
    )
    iz = _i_kron_z(basis, n)
    return compose_nd(compose_nd(adjoint_nd(iz), block), iz)


# ---------------------------------------------------------------------------
# Constraint slots
# ---------------------------------------------------------------------------

def _mirror_slot(idx, entry, mono):
    """The slot hit by the adjoint: flip lower/upper, transpose the entry,
    swap s_i <-> t_i on kernel axes."""
    flip = {MULT: MULT, LOWER: UPPER, UPPER: LOWER}
    new_idx = tuple(flip[k] for k in idx)
    swap = {}
    for i, k in enumerate(idx):
        if k != MULT:
            swap[svar(i + 1)] = tvar(i + 1)
            swap[tvar(i + 1)] = svar(i + 1)
    new_mono = tuple(sorted((swap.get(v, v), e) for v, e in mono))
    return new_idx, (entry[1], entry[0]), new_mono


def _iter_slots(op: NDPIOperator):
    for idx, mat in op.cells.items():
        for r in range(mat.m):
            for c in range(mat.n):
                p = mat[r, c]
                for mono, coeff in p.terms.items():
                    yield (idx, (r, c), mono), coeff


def _op_degrees(op: NDPIOperator) -> int:
    """Max per-variable degree over all cells."""
    best = 0
    for mat in op.cells.values():
        for v, e in mat.max_degrees().items():
            if e > best:
                best = e
    return best


def _min_gram_degree(op: NDPIOperator) -> int:
    """Smallest d' whose Gram basis can reach every monomial of ``op``:
    kernel axes produce per-axis total degree up to 2d'+1, multiplier axes
    up to 2d'."""
    ndim = len(op.box)
    needed = 0
    for idx, mat in op.cells.items():
        for r in range(mat.m):
            for c in range(mat.n):
                for mono, _ in mat[r, c].terms.items():
                    per_axis = [0] * ndim
                    for v, e in mono:
                        per_axis[var_axis(v) - 1] += e
                    for ax, deg in enumerate(per_axis):
                        if idx[ax] == MULT:
                            need = -(-deg // 2)  # ceil(deg / 2)
                        else:
                            need = -(-max(deg - 1, 0) // 2)
                        if need > needed:
                            needed = need
    return needed


def _box_weight(box, axes) -> Polynomial:
    """prod_{i in axes} (s_i - a_i)(b_i - s_i), nonnegative on the box."""
    w = Polynomial.const(Fraction(1))
    for i in axes:
        a, b = box[i - 1]
        s = Polynomial.var(svar(i))
        w = w * (s - Polynomial.const(a)) * (Polynomial.const(b) - s)
    return w


@dataclass
class GramPiece:
    """One summand of a positive-operator parameterization: the quadratic
    form (I (x) Z)* M[w R] (I (x) Z) with its own PSD coefficient block."""

    axes: Tuple[int, ...]
    basis: MonomialBasis
    weight: Optional[Polynomial]
    base: int
    size: int
    index: Dict[Tuple[int, int], int]

    def operator(self, n: int) -> NDPIOperator:
        return gram_operator(
            self.basis, n, lambda i, j: self.index[(i, j)], self.weight
        )


class DegreeError(ValueError):
    def __init__(self, dprime: int, needed: int):
        super().__init__(
            f"Gram basis degree d'={dprime} too small for the constraint "
            f"left-hand sides; minimal sufficient d' is {needed}"
        )
        self.minimal_sufficient = needed


@dataclass
class StabilitySDP:
    """An assembled stability SDP for a fixed decay rate k."""

    problem: SDPProblem
    k: float
    eps: float
    d: int
    dprime: int
    n_p: int
    basis_p: MonomialBasis
    r_pieces: Tuple[GramPiece, ...]
    q_pieces: Tuple[GramPiece, ...]
    compiler: "StabilityCompiler"


class StabilityCompiler:
    """Caches every k-independent piece of the stability SDP for one PIE.

    Trimming flags (all default off, i.e. full basis):
      * ``trim_p_multiplier_only``  - multiplier-only decision operator P
      * ``trim_r_kernel_only``      - Gram basis for (b) without multiplier
                                      axes (sound when T has no multiplier)
      * ``trim_q_drop_multiplier``  - Gram basis for (c) without the pure
                                      multiplier element (sound when neither
                                      A nor T has an all-axes multiplier cell)
      * ``trim_symmetric_kernels``  - tie each lower-kernel basis variable to
                                      its upper-kernel mirror in P

    ``weighted_gram`` (default on) augments each positive-operator
    parameterization with one extra PSD block per nonempty subset S of axes,
    weighted by prod_{i in S} (s_i - a_i)(b_i - s_i) and built at basis degree
    d' - 1 on the weighted axes.  The weights are nonnegative on the box, so
    positivity of the coefficient blocks still certifies operator positivity,
    while the enlarged cone admits far lower-degree certificates (the plain
    single-block cone typically cannot express operators whose positivity
    holds only on the box).
    """

    def __init__(
        self,
        T: NDPIOperator,
        A: NDPIOperator,
        d: int,
        eps: float = 0.1,
        dprime: Optional[int] = None,
        *,
        trim_p_multiplier_only: bool = False,
        trim_r_kernel_only: bool = False,
        trim_q_drop_multiplier: bool = False,
        trim_symmetric_kernels: bool = False,
        weighted_gram: bool = True,
        mirror_reduce: bool = True,
    ):
        if T.box != A.box or T.shape != A.shape:
            raise ValueError("T and A must share box and shape")
        n = T.shape[0]
        self.n = n
        self.box = T.box
        self.d = d
        self.eps = float(eps)
        self.T = T
        self.A = A
        self.mirror_reduce = mirror_reduce

        self.basis_p = build_basis(
            d, T.box, multiplier_only=trim_p_multiplier_only
        )
        p_op, n_p = parameterize_P(self.basis_p, n, var_base=0)
        if trim_symmetric_kernels:
            p_op, n_p = self._tie_symmetric(p_op, n_p)
        self.n_p = n_p
        p_adj = adjoint_nd(p_op)
        self.p_op = p_op

        self.PT = compose_nd(p_adj, T)
        self.TP = adjoint_nd(self.PT)
        self.PA = compose_nd(p_adj, A)
        self.AP = adjoint_nd(self.PA)
        self.TT = compose_nd(adjoint_nd(T), T)

        needed = max(
            _min_gram_degree(self.PT), _min_gram_degree(self.TT),
            _min_gram_degree(self.PA), _min_gram_degree(self.AP),
        )
        if dprime is None:
            dprime = needed
        elif dprime < needed:
            raise DegreeError(dprime, needed)
        self.dprime = dprime

        ndim = len(T.box)
        if trim_r_kernel_only and any(
            MULT in idx for idx in T.cells
        ):
            raise ValueError(
                "trim_r_kernel_only requires T with purely integral cells"
            )
        if trim_q_drop_multiplier and any(
            set(idx) == {MULT} for op in (T, A) for idx in op.cells
        ):
            raise ValueError(
                "trim_q_drop_multiplier requires that neither T nor A "
                "has an all-axes multiplier cell"
            )
        self.weighted_gram = weighted_gram
        subsets: List[Tuple[int, ...]] = [()]
        if weighted_gram and dprime >= 1:
            for r in range(1, ndim + 1):
                subsets += list(
                    itertools.combinations(range(1, ndim + 1), r)
                )

        # decision-variable id layout: P vars, then svec of each R piece,
        # then svec of each Q piece
        var_base = n_p

        def make_pieces(**basis_kw) -> Tuple[GramPiece, ...]:
            nonlocal var_base
            pieces = []
            for axes in subsets:
                degs = tuple(
                    dprime - 1 if i in axes else dprime
                    for i in range(1, ndim + 1)
                )
                basis = build_basis(degs, T.box, **basis_kw)
                size = n * basis.size
                index = {}
                for i in range(size):
                    for j in range(i, size):
                        index[(i, j)] = var_base + len(index)
                weight = _box_weight(T.box, axes) if axes else None
                pieces.append(
                    GramPiece(axes, basis, weight, var_base, size, index)
                )
                var_base += len(index)
            return tuple(pieces)

        self.r_pieces = make_pieces(kernel_only=trim_r_kernel_only)
        self.q_pieces = make_pieces(
            drop_pure_multiplier=trim_q_drop_multiplier
        )
        self.n_vars = var_base

        gram_r = [p.operator(n) for p in self.r_pieces]
        gram_q = [p.operator(n) for p in self.q_pieces]
        self._build_rows(gram_r, gram_q)

    # -- helpers ---------------------------------------------------------

    def _tie_symmetric(self, p_op: NDPIOperator, n_p: int):
        """Replace each upper-kernel P variable with its lower mirror."""
        n = self.n
        size = self.basis_p.size
        width = n * size
        remap: Dict[int, int] = {}
        el_index = {el: i for i, el in enumerate(self.basis_p.elements)}
        flip = {MULT: MULT, LOWER: UPPER, UPPER: LOWER}
        for zi, el in enumerate(self.basis_p.elements):
            kinds = tuple(flip[k] for k in el.kinds)
            if kinds == el.kinds:
                continue
            mirror = BasisElement(kinds, el.monos)
            zj = el_index.get(mirror)
            if zj is None or zj >= zi:
                continue
            for r in range(n):
                for c in range(n):
                    remap[r * width + c * size + zi] = r * width + c * size + zj

        def subst(form: AffineForm) -> AffineForm:
            if not any(v in remap for v in form.lin):
                return form
            lin: Dict[int, Fraction] = {}
            for v, coef in form.lin.items():
                tgt = remap.get(v, v)
                lin[tgt] = lin.get(tgt, Fraction(0)) + coef
            return AffineForm(form.const, {v: c for v, c in lin.items() if c})

        new_op = p_op.map_cells(
            lambda mat: mat.map(lambda p: p.map_coeffs(subst))
        )
        return new_op, n_p

    def _collect(self, ops_signs) -> Dict[tuple, AffineForm]:
        acc: Dict[tuple, AffineForm] = {}
        for op, sign in ops_signs:
            for slot, coeff in _iter_slots(op):
                cur = acc.get(slot)
                term = coeff * sign if sign != 1 else coeff
                if not isinstance(term, AffineForm):
                    term = AffineForm(term)
                acc[slot] = term if cur is None else cur + term
        return {s: f for s, f in acc.items() if f}

    @staticmethod
    def _canonical(slot) -> bool:
        idx, entry, mono = slot
        return slot <= _mirror_slot(idx, entry, mono)

    def _build_rows(self, gram_r, gram_q):
        """Produce the sparse constraint structure.  Each row is stored as
        (columns, base data, k-linear data, rhs)."""
        # snap the float eps to its shortest rational so eps^2 stays exact
        eps2 = Fraction(self.eps).limit_denominator(10 ** 12) ** 2

        rows: List[Tuple[Dict[int, Fraction], Dict[int, Fraction], Fraction]] = []
        group_sizes = [0, 0, 0]

        # (a) P*T - T*P = 0
        diff = self._collect([(self.PT, 1), (self.TP, -1)])
        seen = set()
        for slot, form in diff.items():
            mirror = _mirror_slot(*slot)
            if self.mirror_reduce and mirror in seen:
                continue
            seen.add(slot)
            rows.append(({v: c for v, c in form.lin.items()}, {}, -form.const))
            group_sizes[0] += 1

        # (b) T*P - eps^2 T*T - Gram(R) = 0
        comb = self._collect(
            [(self.TP, 1), (self.TT, -eps2)] + [(g, -1) for g in gram_r]
        )
        for slot, form in comb.items():
            if self.mirror_reduce and not self._canonical(slot):
                continue
            if not form.lin and form.const:
                raise DegreeError(self.dprime, self.dprime + 1)
            rows.append(({v: c for v, c in form.lin.items()}, {}, -form.const))
            group_sizes[1] += 1

        # (c) P*A + A*P + Gram(Q) + k * (2 P*T) = 0
        base = self._collect(
            [(self.PA, 1), (self.AP, 1)] + [(g, 1) for g in gram_q]
        )
        ksens = self._collect([(self.PT, 2)])
        for slot in set(base) | set(ksens):
            if self.mirror_reduce and not self._canonical(slot):
                continue
            b = base.get(slot)
            kf = ksens.get(slot)
            blin = dict(b.lin) if b is not None else {}
            klin = dict(kf.lin) if kf is not None else {}
            const = b.const if b is not None else Fraction(0)
            if kf is not None and kf.const:
                raise AssertionError("k-column with constant part")
            rows.append((blin, klin, -const))
            group_sizes[2] += 1

        self.group_sizes = tuple(group_sizes)
        self._freeze(rows)

    def _freeze(self, rows):
        """Convert symbolic rows into CSR-like float arrays with the
        k-dependence isolated in a second data vector."""
        n_rows = len(rows)
        cols, d0, d1, ptr = [], [], [], [0]
        rhs = np.zeros(n_rows)
        for ridx, (blin, klin, const) in enumerate(rows):
            allvars = sorted(set(blin) | set(klin))
            for v in allvars:
                cols.append(v)
                d0.append(float(blin.get(v, 0)))
                d1.append(float(klin.get(v, 0)))
            ptr.append(len(cols))
            rhs[ridx] = float(const)
        self.row_ptr = np.array(ptr, dtype=np.int64)
        self.row_cols = np.array(cols, dtype=np.int64)
        self.row_d0 = np.array(d0)
        self.row_d1 = np.array(d1)
        self.rhs = rhs
        self.n_rows = n_rows

    # -- emission ----------------------------------------------------------

    def _column_map(self):
        """Map global variable id -> (block, i, j) in the SDP problem; block
        order is R pieces, Q pieces, then the free P block."""
        if hasattr(self, "_colmap"):
            return self._colmap
        blk = np.zeros(self.n_vars, dtype=np.int64)
        ii = np.zeros(self.n_vars, dtype=np.int64)
        jj = np.zeros(self.n_vars, dtype=np.int64)
        pieces = list(self.r_pieces) + list(self.q_pieces)
        blk[: self.n_p] = len(pieces)  # free block comes last
        ii[: self.n_p] = np.arange(self.n_p)
        jj[: self.n_p] = np.arange(self.n_p)
        for b, piece in enumerate(pieces):
            for (i, j), v in piece.index.items():
                blk[v], ii[v], jj[v] = b, i, j
        self._colmap = (blk, ii, jj)
        return self._colmap

    def problem(self, k: float) -> SDPProblem:
        blk, ii, jj = self._column_map()
        data = self.row_d0 + float(k) * self.row_d1
        nz = data != 0.0
        rowids = np.repeat(
            np.arange(self.n_rows), np.diff(self.row_ptr)
        )[nz]
        cols = self.row_cols[nz]
        blocks = [
            ("psd", p.size) for p in list(self.r_pieces) + list(self.q_pieces)
        ] + [("free", self.n_p)]
        problem = SDPProblem(
            blocks=blocks,
            n_rows=self.n_rows,
            entry_rows=rowids,
            entry_blocks=blk[cols],
            entry_i=ii[cols],
            entry_j=jj[cols],
            entry_vals=data[nz],
            rhs=self.rhs.copy(),
        )
        return problem

    def assemble(self, k: float) -> StabilitySDP:
        return StabilitySDP(
            problem=self.problem(k),
            k=float(k),
            eps=self.eps,
            d=self.d,
            dprime=self.dprime,
            n_p=self.n_p,
            basis_p=self.basis_p,
            r_pieces=self.r_pieces,
            q_pieces=self.q_pieces,
            compiler=self,
        )

    # -- certificate reconstruction ----------------------------------------

    def materialize_P(self, p_values: np.ndarray) -> NDPIOperator:
        """Numeric decision operator from the free-variable values."""
        assign = np.asarray(p_values, dtype=float)

        def conv(poly: Polynomial) -> Polynomial:
            out = {}
            for mono, c in poly.terms.items():
                val = c.evaluate(assign) if isinstance(c, AffineForm) else float(c)
                if val != 0.0:
                    out[mono] = val
            return Polynomial(out, _trusted=True)

        return self.p_op.map_cells(lambda mat: mat.map(conv))


@dataclass
class ReplayReport:
    """Independent re-validation of a feasible stability certificate."""

    equality_residual: float
    min_block_eigenvalue: float
    coercivity_margin: float
    decay_margin: float
    gain: float

    def ok(self, eq_tol: float = 1e-6, eig_tol: float = 1e-8,
           quad_tol: float = 1e-6) -> bool:
        return (
            self.equality_residual <= eq_tol
            and self.min_block_eigenvalue >= -eig_tol
            and self.coercivity_margin >= -quad_tol
            and self.decay_margin <= quad_tol
        )


def replay_certificate(
    compiler: StabilityCompiler,
    k: float,
    solution,
    *,
    n_vectors: int = 50,
    quad_points: int = 8,
    seed: int = 0,
) -> ReplayReport:
    """Re-validate a Feasible verdict without trusting the solver: replay the
    equality rows and PSD blocks on the returned values, then check the two
    Lyapunov quadratic forms by quadrature on random state vectors, and
    estimate the certified gain sqrt(||P*T||_op) / eps."""
    from .sdpsolve import min_eigenvalue, residuals
    from .verify import QuadGrid, discretize, opnorm_estimate

    problem = compiler.problem(k)
    eq_res = residuals(problem, solution.x_blocks, solution.free)
    min_eig = min_eigenvalue(problem, solution.x_blocks)

    p_num = compiler.materialize_P(solution.free)
    pt = compose_nd(adjoint_nd(p_num), compiler.T)
    pa = compose_nd(adjoint_nd(p_num), compiler.A)
    tt = compose_nd(adjoint_nd(compiler.T), compiler.T)

    grid = QuadGrid.build(compiler.box, quad_points)
    m_pt = discretize(pt, grid)
    m_pa = discretize(pa, grid)
    m_tt = discretize(tt, grid)
    # the quadrature inner product weights each grid point
    w = np.ones(1)
    for axis_w in grid.weights:
        w = np.kron(w, axis_w)
    w = np.repeat(w, compiler.n)

    rng = np.random.default_rng(seed)
    coercivity = np.inf
    decay = -np.inf
    eps2 = compiler.eps ** 2
    for _ in range(n_vectors):
        v = rng.standard_normal(m_pt.shape[0])
        v /= np.sqrt(float(np.dot(w * v, v)))
        quad_pt = float(np.dot(w * v, m_pt @ v))
        quad_tt = float(np.dot(w * v, m_tt @ v))
        quad_pa = 2.0 * float(np.dot(w * v, m_pa @ v))
        coercivity = min(coercivity, quad_pt - eps2 * quad_tt)
        decay = max(decay, quad_pa + 2.0 * float(k) * quad_pt)
    norm, _ = opnorm_estimate(pt, quad_points)
    gain = float(np.sqrt(max(norm, 0.0)) / compiler.eps)
    return ReplayReport(
        equality_residual=float(eq_res),
        min_block_eigenvalue=float(min_eig),
        coercivity_margin=float(coercivity),
        decay_margin=float(decay),
        gain=gain,
    )


def assemble(
    T: NDPIOperator,
    A: NDPIOperator,
    k: float,
    eps: float = 0.1,
    d: int = 1,
    dprime: Optional[int] = None,
    **trim_flags,
) -> StabilitySDP:
    """One-shot assembly (builds a compiler and emits the SDP for this k)."""
    comp = StabilityCompiler(T, A, d, eps, dprime, **trim_flags)
    return comp.assemble(k)


@dataclass
class BisectionResult:
    k_max: float
    k_infeasible: float
    history: List[Tuple[float, str]] = field(default_factory=list)
    inaccurate: bool = False


class NonMonotoneFeasibility(RuntimeError):
    pass


def bisect_rate(
    T: NDPIOperator,
    A: NDPIOperator,
    eps: float = 0.1,
    d: int = 1,
    k_lo: float = 0.0,
    k_hi: float = 10.0,
    tol: float = 1e-3,
    dprime: Optional[int] = None,
    solver_opts: Optional[dict] = None,
    compiler: Optional[StabilityCompiler] = None,
    verbose: bool = False,
    **trim_flags,
) -> BisectionResult:
    """Largest k (within tol) with a feasible stability SDP.

    Feasibility must be monotone decreasing in k; if a feasible point is seen
    above a certified infeasible one the search aborts loudly.
    """
    from .sdpsolve import solve

    if compiler is None:
        compiler = StabilityCompiler(T, A, d, eps, dprime, **trim_flags)
    opts = solver_opts or {}
    history: List[Tuple[float, str]] = []
    inaccurate = False

    def probe(k: float) -> bool:
        sol = solve(compiler.problem(k), **opts)
        history.append((k, sol.status))
        if verbose:  # pragma: no cover
            print(f"  k={k:.6f}: {sol.status}")
        nonlocal inaccurate
        if sol.status == "Feasible":
            return True
        if sol.status != "Infeasible":
            inaccurate = True
        return False

    lo_ok = probe(k_lo)
    if not lo_ok:
        return BisectionResult(float("nan"), k_lo, history, inaccurate)
    if probe(k_hi):
        return BisectionResult(k_hi, float("inf"), history, inaccurate)
    lo, hi = k_lo, k_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            lo = mid
        else:
            hi = mid
    # monotonicity audit over the whole history
    feas_ks = [k for k, s in history if s == "Feasible"]
    infeas_ks = [k for k, s in history if s == "Infeasible"]
    if feas_ks and infeas_ks and max(feas_ks) > min(infeas_ks):
        raise NonMonotoneFeasibility(
            f"feasible at k={max(feas_ks)} above infeasible k={min(infeas_ks)}"
        )
    return BisectionResult(lo, hi, history, inaccurate)
