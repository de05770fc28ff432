"""PDE specifications on hyper-rectangles with per-axis boundary conditions.

A PDE  du/dt = sum_{0<=alpha<=delta} A_alpha(s) D^alpha u  is posed on a box
with boundary conditions, one family per axis:

    sum_k [ B_{j,k} (d/ds)^k u |_{s_i=a_i} + C_{j,k} (d/ds)^k u |_{s_i=b_i} ] = 0

for rows j = 0..delta_i-1.  This module checks admissibility (the boundary
operator pins down an invertible correction) and cross-axis consistency (the
n x n blocks of the K matrices commute pairwise), both exactly over rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .poly import MatPoly, Polynomial, parse_poly

Matrix = Tuple[Tuple[Fraction, ...], ...]


# ---------------------------------------------------------------------------
# Exact dense matrices over Fraction
# ---------------------------------------------------------------------------

def frac_matrix(rows) -> Matrix:
    return tuple(tuple(Fraction(x) for x in r) for r in rows)


def mat_identity(n: int) -> Matrix:
    return tuple(
        tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)
    )


def mat_zeros(m: int, n: int) -> Matrix:
    return tuple((Fraction(0),) * n for _ in range(m))


def mat_add(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    bt = tuple(zip(*b))
    return tuple(
        tuple(sum(x * y for x, y in zip(ra, cb)) for cb in bt) for ra in a
    )


def mat_scale(a: Matrix, c: Fraction) -> Matrix:
    return tuple(tuple(c * x for x in r) for r in a)


def mat_solve(a: Matrix, b: Matrix) -> Optional[Matrix]:
    """Solve a X = b exactly by Gauss-Jordan; None if a is singular."""
    n = len(a)
    w = [list(ra) + list(rb) for ra, rb in zip(a, b)]
    cols = len(w[0])
    for col in range(n):
        piv = None
        for r in range(col, n):
            if w[r][col] != 0:
                piv = r
                break
        if piv is None:
            return None
        if piv != col:
            w[col], w[piv] = w[piv], w[col]
        inv = Fraction(1) / w[col][col]
        w[col] = [x * inv for x in w[col]]
        for r in range(n):
            if r != col and w[r][col] != 0:
                f = w[r][col]
                w[r] = [x - f * y for x, y in zip(w[r], w[col])]
    return tuple(tuple(r[n:cols]) for r in w)


def mat_inv(a: Matrix) -> Optional[Matrix]:
    return mat_solve(a, mat_identity(len(a)))


def mat_block(grid) -> Matrix:
    """Assemble a matrix from a 2D grid of equally-sized blocks."""
    rows = []
    for brow in grid:
        height = len(brow[0])
        for r in range(height):
            row = []
            for blk in brow:
                row.extend(blk[r])
            rows.append(tuple(row))
    return tuple(rows)


# ---------------------------------------------------------------------------
# Boundary conditions for one axis
# ---------------------------------------------------------------------------

def build_Q(z: Fraction, d: int, n: int) -> Matrix:
    """The block upper-triangular Taylor-shift matrix: block (j,k) equals
    z^(k-j)/(k-j)! I_n for k >= j, zero below (size nd x nd)."""
    if d < 1:
        raise ValueError("order must be >= 1")
    z = Fraction(z)
    grid = []
    for j in range(d):
        brow = []
        for k in range(d):
            if k >= j:
                c = z ** (k - j) / math.factorial(k - j)
                brow.append(mat_scale(mat_identity(n), Fraction(c)))
            else:
                brow.append(mat_zeros(n, n))
        grid.append(brow)
    return mat_block(grid)


@dataclass(frozen=True)
class AxisBC:
    """Boundary data for one axis: interval, order d, state size n, and the
    block matrices B (values at a) and C (values at b) keyed by (row j,
    derivative k), absent entries zero."""

    a: Fraction
    b: Fraction
    d: int
    n: int
    B: Dict[Tuple[int, int], Matrix] = field(default_factory=dict)
    C: Dict[Tuple[int, int], Matrix] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "a", Fraction(self.a))
        object.__setattr__(self, "b", Fraction(self.b))
        if self.a >= self.b:
            raise ValueError("interval must satisfy a < b")
        for key in list(self.B) + list(self.C):
            j, k = key
            if not (0 <= j < self.d and 0 <= k < self.d):
                raise ValueError(f"BC index {key} out of range for order {self.d}")

    def _h(self, table) -> Matrix:
        grid = []
        for j in range(self.d):
            grid.append(
                [
                    frac_matrix(table.get((j, k), mat_zeros(self.n, self.n)))
                    for k in range(self.d)
                ]
            )
        return mat_block(grid)

    @property
    def H_a(self) -> Matrix:
        return self._h(self.B)

    @property
    def H_b(self) -> Matrix:
        return self._h(self.C)

    def system_matrix(self) -> Matrix:
        return mat_add(
            self.H_a, mat_mul(self.H_b, build_Q(self.b - self.a, self.d, self.n))
        )


def check_admissible(bc: AxisBC, mode: str = "rational") -> bool:
    """True iff H_a + H_b Q(b-a) is invertible.  Rational mode is an exact
    singularity test; float mode uses a reciprocal-condition threshold."""
    m = bc.system_matrix()
    if mode == "rational":
        return mat_inv(m) is not None
    if mode == "float":
        import numpy as np

        arr = np.array([[float(x) for x in row] for row in m])
        sv = np.linalg.svd(arr, compute_uv=False)
        if sv[0] == 0:
            return False
        return float(sv[-1] / sv[0]) > 1e-10
    raise ValueError(f"unknown mode {mode!r}")


class InadmissibleBC(ValueError):
    pass


def compute_K(bc: AxisBC) -> Matrix:
    """K = (H_a + H_b Q(b-a))^(-1) H_b, exact."""
    sol = mat_solve(bc.system_matrix(), bc.H_b)
    if sol is None:
        raise InadmissibleBC(
            "boundary conditions are inadmissible: H_a + H_b Q(b-a) singular"
        )
    return sol


# ---------------------------------------------------------------------------
# Full PDE specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConsistencyWitness:
    axis_i: int
    axis_j: int
    block_i: Tuple[int, int]
    block_j: Tuple[int, int]
    Ki_block: Matrix
    Kj_block: Matrix

    def __str__(self):
        return (
            f"K^{self.axis_i} block {self.block_i} = {self.Ki_block} does not "
            f"commute with K^{self.axis_j} block {self.block_j} = {self.Kj_block}"
        )


@dataclass(frozen=True)
class PDESpec:
    box: Tuple[Tuple[Fraction, Fraction], ...]
    n: int
    delta: Tuple[int, ...]
    terms: Dict[Tuple[int, ...], MatPoly]
    bcs: Tuple[Optional[AxisBC], ...]  # None on axes with delta_i = 0
    name: str = ""

    def __post_init__(self):
        ndim = len(self.box)
        if len(self.delta) != ndim or len(self.bcs) != ndim:
            raise ValueError("delta/bcs length must match dimension")
        for alpha, mat in self.terms.items():
            if len(alpha) != ndim:
                raise ValueError(f"term index {alpha} has wrong length")
            if any(a < 0 or a > d for a, d in zip(alpha, self.delta)):
                raise ValueError(f"term index {alpha} exceeds delta {self.delta}")
            if mat.shape != (self.n, self.n):
                raise ValueError(f"term {alpha} must be {self.n}x{self.n}")
        for i, (bc, d) in enumerate(zip(self.bcs, self.delta)):
            if d == 0:
                if bc is not None:
                    raise ValueError(f"axis {i+1} has order 0 but carries BCs")
            else:
                if bc is None:
                    raise ValueError(f"axis {i+1} needs boundary conditions")
                if (bc.a, bc.b) != self.box[i] or bc.d != d or bc.n != self.n:
                    raise ValueError(f"axis {i+1} BC data inconsistent with spec")

    @property
    def ndim(self) -> int:
        return len(self.box)

    def axis_K(self, i: int) -> Optional[Matrix]:
        """K matrix of axis i (1-based); None for order-0 axes."""
        bc = self.bcs[i - 1]
        return None if bc is None else compute_K(bc)


def _blocks(mat: Matrix, n: int):
    d = len(mat) // n
    out = {}
    for j in range(d):
        for k in range(d):
            out[(j + 1, k + 1)] = tuple(
                tuple(mat[j * n + r][k * n + c] for c in range(n))
                for r in range(n)
            )
    return out


def check_consistent(spec: PDESpec):
    """Pairwise commutation of the n x n blocks of the K matrices across
    distinct axes.  Returns (True, None) or (False, witness)."""
    ks = []
    for i in range(1, spec.ndim + 1):
        k = spec.axis_K(i)
        ks.append(None if k is None else _blocks(k, spec.n))
    for i in range(spec.ndim):
        if ks[i] is None:
            continue
        for j in range(i + 1, spec.ndim):
            if ks[j] is None:
                continue
            for bi, Bi in sorted(ks[i].items()):
                for bj, Bj in sorted(ks[j].items()):
                    if mat_mul(Bi, Bj) != mat_mul(Bj, Bi):
                        return False, ConsistencyWitness(
                            i + 1, j + 1, bi, bj, Bi, Bj
                        )
    return True, None


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

class SpecParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _parse_matrix(text: str, n_entries_poly: bool, line: int):
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise SpecParseError("matrix must be wrapped in [ ... ]", line)
    body = text[1:-1].strip()
    rows = [r.strip() for r in body.split(";")]
    out = []
    for r in rows:
        entries = [e.strip() for e in r.split(",")]
        row = []
        for e in entries:
            if not e:
                raise SpecParseError("empty matrix entry", line)
            try:
                if n_entries_poly:
                    row.append(parse_poly(e))
                else:
                    row.append(Fraction(e))
            except (ValueError, ZeroDivisionError) as exc:
                raise SpecParseError(f"bad entry {e!r}: {exc}", line) from None
        out.append(row)
    return out


def parse_spec(text: str, name: str = "") -> PDESpec:
    """Parse the line-based PDE spec format.

    Directives (one per line, '#' comments):
        dim N
        n SIZE
        box a1 b1 a2 b2 ...            (rationals like 1/2 accepted)
        delta d1 d2 ...
        term a1 a2 ... : [p11, p12; p21, p22]   (polynomial entries)
        bc AXIS ROW DERIV a|b : [m11, ...; ...] (rational entries)
    """
    ndim = None
    n = None
    box = None
    delta = None
    terms: Dict[Tuple[int, ...], MatPoly] = {}
    bc_entries: List[Tuple[int, int, int, str, list, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        try:
            if head == "dim":
                ndim = int(rest)
            elif head == "n":
                n = int(rest)
            elif head == "box":
                vals = [Fraction(tok) for tok in rest.split()]
                if len(vals) % 2:
                    raise SpecParseError("box needs an even number of endpoints", lineno)
                box = tuple(
                    (vals[2 * i], vals[2 * i + 1]) for i in range(len(vals) // 2)
                )
                if any(a >= b for a, b in box):
                    raise SpecParseError("box intervals need a < b", lineno)
            elif head == "delta":
                delta = tuple(int(tok) for tok in rest.split())
            elif head == "term":
                idx_part, sep, mat_part = rest.partition(":")
                if not sep:
                    raise SpecParseError("term needs ':' before the matrix", lineno)
                alpha = tuple(int(tok) for tok in idx_part.split())
                entries = _parse_matrix(mat_part, True, lineno)
                mp = MatPoly(entries)
                if alpha in terms:
                    terms[alpha] = terms[alpha] + mp
                else:
                    terms[alpha] = mp
            elif head == "bc":
                idx_part, sep, mat_part = rest.partition(":")
                if not sep:
                    raise SpecParseError("bc needs ':' before the matrix", lineno)
                toks = idx_part.split()
                if len(toks) != 4 or toks[3] not in ("a", "b"):
                    raise SpecParseError(
                        "bc expects: axis row deriv a|b : [matrix]", lineno
                    )
                axis, row, deriv = int(toks[0]), int(toks[1]), int(toks[2])
                entries = _parse_matrix(mat_part, False, lineno)
                bc_entries.append((axis, row, deriv, toks[3], entries, lineno))
            else:
                raise SpecParseError(f"unknown directive {head!r}", lineno)
        except SpecParseError:
            raise
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecParseError(str(exc), lineno) from None

    for fieldname, value in (
        ("dim", ndim), ("n", n), ("box", box), ("delta", delta)
    ):
        if value is None:
            raise SpecParseError(f"missing '{fieldname}' directive", 0)
    if len(box) != ndim or len(delta) != ndim:
        raise SpecParseError("box/delta length disagrees with dim", 0)

    bdicts = [({}, {}) for _ in range(ndim)]
    for axis, row, deriv, side, entries, lineno in bc_entries:
        if not (1 <= axis <= ndim):
            raise SpecParseError(f"bc axis {axis} out of range", lineno)
        d = delta[axis - 1]
        if d == 0:
            raise SpecParseError(f"axis {axis} has order 0, no BCs allowed", lineno)
        if not (0 <= row < d and 0 <= deriv < d):
            raise SpecParseError(
                f"bc row/deriv ({row},{deriv}) out of range for order {d}", lineno
            )
        mat = frac_matrix(entries)
        if len(mat) != n or len(mat[0]) != n:
            raise SpecParseError(f"bc matrix must be {n}x{n}", lineno)
        target = bdicts[axis - 1][0 if side == "a" else 1]
        if (row, deriv) in target:
            raise SpecParseError(f"duplicate bc entry ({row},{deriv})", lineno)
        target[(row, deriv)] = mat

    bcs = []
    for i in range(ndim):
        if delta[i] == 0:
            bcs.append(None)
        else:
            a, b = box[i]
            bcs.append(AxisBC(a, b, delta[i], n, bdicts[i][0], bdicts[i][1]))
    try:
        return PDESpec(tuple(box), n, tuple(delta), terms, tuple(bcs), name)
    except ValueError as exc:
        raise SpecParseError(str(exc), 0) from None


def load_spec(path: str) -> PDESpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_spec(fh.read(), name=path)
