"""Exact multivariate polynomial arithmetic with matrix coefficients.

Polynomials live in the variables ``s_i`` (position), ``t_i`` (the kernel
variable, printed ``t`` but read as the Greek theta) and ``e_i`` (a dummy
integration variable), one triple per spatial axis ``i >= 1``.  Coefficients
are exact rationals (`fractions.Fraction`), floats, or any object supporting
ring arithmetic (the LPI compiler substitutes sparse affine forms).

The representation is a sparse map from monomials to coefficients; a monomial
is a sorted tuple of ``(variable, exponent)`` pairs and the zero polynomial is
the empty map, so equality is map equality.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Mapping

KIND_S = 0
KIND_T = 1
KIND_E = 2

_KIND_NAMES = {KIND_S: "s", KIND_T: "t", KIND_E: "e"}
_NAME_KINDS = {"s": KIND_S, "t": KIND_T, "e": KIND_E}


class Var(int):
    """A variable identifier.  Subclassing int keeps monomial keys light
    while letting bound arguments distinguish variables from constants."""

    __slots__ = ()

    def __repr__(self):  # pragma: no cover - debugging aid
        return var_name(self)


def make_var(axis: int, kind: int) -> Var:
    if axis < 1:
        raise ValueError("axis index must be >= 1")
    return Var(axis * 4 + kind)


def svar(axis: int) -> Var:
    """Position variable s_axis."""
    return make_var(axis, KIND_S)


def tvar(axis: int) -> Var:
    """Kernel variable theta_axis (printed t_axis)."""
    return make_var(axis, KIND_T)


def evar(axis: int) -> Var:
    """Dummy integration variable eta_axis (printed e_axis)."""
    return make_var(axis, KIND_E)


def var_axis(v: int) -> int:
    return v // 4


def var_kind(v: int) -> int:
    return v % 4


def var_name(v: int) -> str:
    return _KIND_NAMES[var_kind(v)] + str(var_axis(v))


def _is_zero(c) -> bool:
    return not c


def _mono_mul(a, b):
    """Merge two sorted (var, exp) tuples."""
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    na, nb = len(a), len(b)
    while i < na and j < nb:
        va, ea = a[i]
        vb, eb = b[j]
        if va == vb:
            out.append((va, ea + eb))
            i += 1
            j += 1
        elif va < vb:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


def _mono_degree(mono) -> int:
    return sum(e for _, e in mono)


def _mono_key(mono):
    """Graded lexicographic sort key: total degree, then exponents in the
    fixed (axis, kind) variable order."""
    return (_mono_degree(mono), tuple((v, -e) for v, e in mono))


class Polynomial:
    """Immutable sparse multivariate polynomial."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping | None = None, *, _trusted: bool = False):
        if terms is None:
            self.terms = {}
        elif _trusted:
            self.terms = dict(terms)
        else:
            clean = {}
            for mono, c in terms.items():
                if not _is_zero(c):
                    key = tuple(sorted((v, e) for v, e in mono if e))
                    acc = clean.get(key)
                    acc = c if acc is None else acc + c
                    if _is_zero(acc):
                        clean.pop(key, None)
                    else:
                        clean[key] = acc
            self.terms = clean

    # -- constructors ------------------------------------------------

    @staticmethod
    def zero() -> "Polynomial":
        return _ZERO

    @staticmethod
    def const(c) -> "Polynomial":
        if _is_zero(c):
            return _ZERO
        return Polynomial({(): c}, _trusted=True)

    @staticmethod
    def var(v: Var, exp: int = 1) -> "Polynomial":
        if exp == 0:
            return Polynomial.const(Fraction(1))
        return Polynomial({((v, exp),): Fraction(1)}, _trusted=True)

    # -- predicates ---------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and () in self.terms)

    def constant_value(self):
        if not self.terms:
            return Fraction(0)
        if len(self.terms) == 1 and () in self.terms:
            return self.terms[()]
        raise ValueError("polynomial is not constant")

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    # -- ring operations ----------------------------------------------

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if not self.terms:
            return other
        if not other.terms:
            return self
        out = dict(self.terms)
        for mono, c in other.terms.items():
            acc = out.get(mono)
            if acc is None:
                out[mono] = c
            else:
                acc = acc + c
                if _is_zero(acc):
                    del out[mono]
                else:
                    out[mono] = acc
        return Polynomial(out, _trusted=True)

    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self.terms.items()}, _trusted=True)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        if not self.terms or not other.terms:
            return _ZERO
        out: dict = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                c = ca * cb
                if _is_zero(c):
                    continue
                mono = _mono_mul(ma, mb)
                acc = out.get(mono)
                if acc is None:
                    out[mono] = c
                else:
                    acc = acc + c
                    if _is_zero(acc):
                        del out[mono]
                    else:
                        out[mono] = acc
        return Polynomial(out, _trusted=True)

    def scale(self, c) -> "Polynomial":
        if _is_zero(c):
            return _ZERO
        return Polynomial(
            {m: c * v for m, v in self.terms.items()}, _trusted=False
        )

    def __pow__(self, n: int) -> "Polynomial":
        if n < 0:
            raise ValueError("negative power")
        result = Polynomial.const(Fraction(1))
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def map_coeffs(self, fn: Callable) -> "Polynomial":
        return Polynomial({m: fn(c) for m, c in self.terms.items()})

    # -- calculus -----------------------------------------------------

    def diff(self, v: Var, order: int = 1) -> "Polynomial":
        p = self
        for _ in range(order):
            out = {}
            for mono, c in p.terms.items():
                for idx, (mv, me) in enumerate(mono):
                    if mv == v:
                        newc = c * me
                        if me == 1:
                            newm = mono[:idx] + mono[idx + 1:]
                        else:
                            newm = mono[:idx] + ((mv, me - 1),) + mono[idx + 1:]
                        acc = out.get(newm)
                        out[newm] = newc if acc is None else acc + newc
                        break
            p = Polynomial(out)
        return p

    def antiderivative(self, v: Var) -> "Polynomial":
        out = {}
        for mono, c in self.terms.items():
            placed = False
            newm = []
            for mv, me in mono:
                if mv == v:
                    newm.append((mv, me + 1))
                    c = c * Fraction(1, me + 1)
                    placed = True
                else:
                    newm.append((mv, me))
            if not placed:
                newm.append((v, 1))
                newm.sort()
            out[tuple(newm)] = c
        return Polynomial(out, _trusted=True)

    def integrate(self, v: Var, lo, hi) -> "Polynomial":
        """Definite integral over ``v`` from ``lo`` to ``hi``; each bound is a
        constant or a ``Var``.  The result no longer contains ``v``."""
        anti = self.antiderivative(v)
        return anti.substitute(v, hi) - anti.substitute(v, lo)

    # -- substitution ---------------------------------------------------

    def substitute(self, v: Var, value) -> "Polynomial":
        """Substitute ``value`` (a constant, a Var, or a Polynomial) for ``v``."""
        if isinstance(value, Polynomial):
            vpoly = value
        elif isinstance(value, Var):
            vpoly = Polynomial.var(value)
        else:
            vpoly = Polynomial.const(
                value if not isinstance(value, int) else Fraction(value)
            )
        out = _ZERO
        powers = {0: Polynomial.const(Fraction(1))}
        for mono, c in self.terms.items():
            rest = []
            deg = 0
            for mv, me in mono:
                if mv == v:
                    deg = me
                else:
                    rest.append((mv, me))
            piece = Polynomial({tuple(rest): c}, _trusted=True)
            if deg:
                p = powers.get(deg)
                if p is None:
                    p = vpoly ** deg
                    powers[deg] = p
                piece = piece * p
            out = out + piece
        return out

    def rename(self, mapping: Mapping[Var, Var]) -> "Polynomial":
        """Simultaneous variable renaming (safe for swaps)."""
        out = {}
        for mono, c in self.terms.items():
            newm = tuple(sorted((mapping.get(mv, mv), me) for mv, me in mono))
            acc = out.get(newm)
            out[newm] = c if acc is None else acc + c
        return Polynomial(out)

    # -- queries -------------------------------------------------------

    def variables(self) -> set:
        vs = set()
        for mono in self.terms:
            for mv, _ in mono:
                vs.add(mv)
        return vs

    def degree(self, v: Var) -> int:
        best = 0
        for mono in self.terms:
            for mv, me in mono:
                if mv == v and me > best:
                    best = me
        return best

    def max_degrees(self) -> dict:
        out: dict = {}
        for mono in self.terms:
            for mv, me in mono:
                if out.get(mv, 0) < me:
                    out[mv] = me
        return out

    def total_degree(self) -> int:
        return max((_mono_degree(m) for m in self.terms), default=0)

    def evaluate(self, assignment: Mapping[Var, object]):
        """Evaluate at a full assignment of every variable present."""
        total = None
        for mono, c in self.terms.items():
            val = c
            for mv, me in mono:
                val = val * assignment[mv] ** me
            total = val if total is None else total + val
        return Fraction(0) if total is None else total

    def to_float(self) -> "Polynomial":
        return Polynomial({m: float(c) for m, c in self.terms.items()})

    # -- formatting -----------------------------------------------------

    def __str__(self):
        return poly_to_str(self)

    def __repr__(self):
        return f"Polynomial({poly_to_str(self)})"


_ZERO = Polynomial({}, _trusted=True)


def _coeff_str(c) -> str:
    if isinstance(c, Fraction):
        return str(c)
    return repr(c)


def poly_to_str(p: Polynomial) -> str:
    """Serialize in the textual form ``c * s1^a * t1^b + ...`` with terms in
    graded-lex order."""
    if not p.terms:
        return "0"
    parts = []
    for mono in sorted(p.terms, key=_mono_key):
        c = p.terms[mono]
        factors = [_coeff_str(c)]
        for mv, me in mono:
            factors.append(var_name(mv) if me == 1 else f"{var_name(mv)}^{me}")
        parts.append(" * ".join(factors))
    return " + ".join(parts).replace("+ -", "- ")


class PolyParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


def parse_poly(text: str) -> Polynomial:
    """Parse the textual polynomial form: terms separated by + or -, each a
    ``*``-separated product of a rational coefficient and variable powers like
    ``s1^2`` or ``t2``.  Parenthesised expressions are not supported."""
    out = Polynomial.zero()
    i = 0
    n = len(text)

    def skip_ws(j):
        while j < n and text[j].isspace():
            j += 1
        return j

    i = skip_ws(i)
    if i == n:
        raise PolyParseError("empty polynomial", 0)
    sign = 1
    first = True
    while i < n:
        i = skip_ws(i)
        if i >= n:
            break
        if text[i] == "+":
            sign = 1
            i = skip_ws(i + 1)
        elif text[i] == "-":
            sign = -1
            i = skip_ws(i + 1)
        elif not first:
            raise PolyParseError("expected + or - between terms", i)
        first = False
        coeff = Fraction(sign)
        mono: dict = {}
        saw_factor = False
        while True:
            i = skip_ws(i)
            if i < n and (text[i].isdigit() or text[i] == "."):
                j = i
                while j < n and (text[j].isdigit() or text[j] in "./"):
                    j += 1
                tok = text[i:j]
                try:
                    coeff *= Fraction(tok)
                except (ValueError, ZeroDivisionError):
                    raise PolyParseError(f"bad coefficient {tok!r}", i) from None
                i = j
                saw_factor = True
            elif i < n and text[i] in "ste":
                kind = _NAME_KINDS[text[i]]
                j = i + 1
                while j < n and text[j].isdigit():
                    j += 1
                if j == i + 1:
                    raise PolyParseError("variable needs an axis index", i)
                axis = int(text[i + 1:j])
                i = j
                exp = 1
                if i < n and text[i] == "^":
                    j = i + 1
                    while j < n and text[j].isdigit():
                        j += 1
                    if j == i + 1:
                        raise PolyParseError("missing exponent after ^", i)
                    exp = int(text[i + 1:j])
                    i = j
                v = make_var(axis, kind)
                mono[v] = mono.get(v, 0) + exp
                saw_factor = True
            else:
                raise PolyParseError("expected coefficient or variable", i)
            i = skip_ws(i)
            if i < n and text[i] == "*":
                i += 1
                continue
            break
        if not saw_factor:
            raise PolyParseError("empty term", i)
        key = tuple(sorted((v, e) for v, e in mono.items() if e))
        out = out + Polynomial({key: coeff})
    return out


class MatPoly:
    """Immutable rectangular matrix of polynomials."""

    __slots__ = ("rows", "m", "n")

    def __init__(self, rows: Iterable[Iterable[Polynomial]]):
        rows = tuple(tuple(r) for r in rows)
        if not rows or not rows[0]:
            raise ValueError("MatPoly must be non-empty")
        width = len(rows[0])
        for r in rows:
            if len(r) != width:
                raise ValueError("ragged MatPoly rows")
        self.rows = rows
        self.m = len(rows)
        self.n = width

    # -- constructors ------------------------------------------------

    @staticmethod
    def zeros(m: int, n: int) -> "MatPoly":
        z = Polynomial.zero()
        return MatPoly([[z] * n for _ in range(m)])

    @staticmethod
    def identity(n: int) -> "MatPoly":
        one = Polynomial.const(Fraction(1))
        z = Polynomial.zero()
        return MatPoly([[one if i == j else z for j in range(n)] for i in range(n)])

    @staticmethod
    def from_scalar(p: Polynomial) -> "MatPoly":
        return MatPoly([[p]])

    @staticmethod
    def from_const(mat) -> "MatPoly":
        """Build from a nested sequence of numbers."""
        return MatPoly(
            [
                [
                    Polynomial.const(
                        c if not isinstance(c, int) else Fraction(c)
                    )
                    for c in row
                ]
                for row in mat
            ]
        )

    # -- structure -----------------------------------------------------

    @property
    def shape(self):
        return (self.m, self.n)

    def __getitem__(self, idx):
        i, j = idx
        return self.rows[i][j]

    def __eq__(self, other):
        if not isinstance(other, MatPoly):
            return NotImplemented
        return self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def is_zero(self) -> bool:
        return all(p.is_zero() for row in self.rows for p in row)

    def map(self, fn: Callable[[Polynomial], Polynomial]) -> "MatPoly":
        return MatPoly([[fn(p) for p in row] for row in self.rows])

    def transpose(self) -> "MatPoly":
        return MatPoly(
            [[self.rows[i][j] for i in range(self.m)] for j in range(self.n)]
        )

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other: "MatPoly") -> "MatPoly":
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        return MatPoly(
            [
                [a + b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.rows, other.rows)
            ]
        )

    def __neg__(self) -> "MatPoly":
        return self.map(lambda p: -p)

    def __sub__(self, other: "MatPoly") -> "MatPoly":
        return self + (-other)

    def __mul__(self, other: "MatPoly") -> "MatPoly":
        if self.n != other.m:
            raise ValueError(
                f"inner dimensions disagree: {self.shape} x {other.shape}"
            )
        out = []
        bt = other.transpose().rows
        for ra in self.rows:
            row = []
            for cb in bt:
                acc = Polynomial.zero()
                for a, b in zip(ra, cb):
                    if a.terms and b.terms:
                        acc = acc + a * b
                row.append(acc)
            out.append(row)
        return MatPoly(out)

    def scale(self, c) -> "MatPoly":
        return self.map(lambda p: p.scale(c))

    def scale_poly(self, p: Polynomial) -> "MatPoly":
        return self.map(lambda q: q * p)

    def diff(self, v: Var, order: int = 1) -> "MatPoly":
        return self.map(lambda p: p.diff(v, order))

    def integrate(self, v: Var, lo, hi) -> "MatPoly":
        return self.map(lambda p: p.integrate(v, lo, hi))

    def substitute(self, v: Var, value) -> "MatPoly":
        return self.map(lambda p: p.substitute(v, value))

    def rename(self, mapping: Mapping[Var, Var]) -> "MatPoly":
        return self.map(lambda p: p.rename(mapping))

    def max_degrees(self) -> dict:
        out: dict = {}
        for row in self.rows:
            for p in row:
                for v, d in p.max_degrees().items():
                    if out.get(v, 0) < d:
                        out[v] = d
        return out

    def to_float(self) -> "MatPoly":
        return self.map(lambda p: p.to_float())

    def __str__(self):
        return "[" + "; ".join(
            ", ".join(poly_to_str(p) for p in row) for row in self.rows
        ) + "]"

    def __repr__(self):
        return f"MatPoly({self})"


def hstack(blocks: Iterable[MatPoly]) -> MatPoly:
    blocks = list(blocks)
    m = blocks[0].m
    rows = []
    for i in range(m):
        row = []
        for b in blocks:
            if b.m != m:
                raise ValueError("hstack row mismatch")
            row.extend(b.rows[i])
        rows.append(row)
    return MatPoly(rows)


def vstack(blocks: Iterable[MatPoly]) -> MatPoly:
    rows = []
    width = None
    for b in blocks:
        if width is None:
            width = b.n
        elif b.n != width:
            raise ValueError("vstack column mismatch")
        rows.extend(b.rows)
    return MatPoly(rows)


def kron(a: MatPoly, b: MatPoly) -> MatPoly:
    rows = []
    for i in range(a.m):
        for k in range(b.m):
            row = []
            for j in range(a.n):
                p = a.rows[i][j]
                for l in range(b.n):
                    row.append(p * b.rows[k][l])
            rows.append(row)
    return MatPoly(rows)
