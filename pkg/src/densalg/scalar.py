"""Graded-commutative scalar algebra over a coordinate chart.

A :class:`ScalarExpr` is a finite sum ``f_I(x) * xi^I`` where ``xi^I`` runs over
sorted square-free words in the odd coordinates and ``f_I`` is an exact
rational function of the even coordinates.  Odd coordinates anticommute and
square to zero; derivatives are *left* derivatives, so
``d/dxi (xi * m) = m`` whenever ``m`` does not contain ``xi``.
"""
from __future__ import annotations

from enum import IntEnum
from fractions import Fraction
from typing import Mapping, Sequence

from sympy import QQ
from sympy.polys.fields import field


class Parity(IntEnum):
    EVEN = 0
    ODD = 1

    @classmethod
    def parse(cls, value) -> "Parity":
        if isinstance(value, str):
            v = value.strip().lower()
            if v in ("even", "0", "e"):
                return cls.EVEN
            if v in ("odd", "1", "o"):
                return cls.ODD
            raise ValueError(f"unknown parity {value!r}")
        return cls(int(value) % 2)

    def __add__(self, other):
        return Parity((int(self) + int(other)) % 2)

    __radd__ = __add__

    def __str__(self):
        return self.name.lower()


class ChartError(ValueError):
    """Operands live on different charts or refer to unknown coordinates."""


class ParityError(ValueError):
    """A construction violates the parity bookkeeping."""


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        raise TypeError("floating point values are not accepted; use Fraction or str")
    return Fraction(value)


def _merge_odd(left: tuple, right: tuple):
    """Concatenate two sorted odd words; return (sign, sorted word) or None."""
    if not left:
        return 1, right
    if not right:
        return 1, left
    if set(left) & set(right):
        return None
    # sign of the shuffle = parity of the number of inversions
    inversions = sum(1 for b in right for a in left if a > b)
    merged = tuple(sorted(left + right))
    return (-1 if inversions % 2 else 1), merged


class GrassmannRing:
    """Rational functions in the even generators tensored with a Grassmann algebra."""

    def __init__(self, even_names: Sequence[str], odd_names: Sequence[str]):
        self.even_names = tuple(even_names)
        self.odd_names = tuple(odd_names)
        # sympy needs at least one generator; a private dummy never appears in data
        names = self.even_names or ("_nogen_",)
        self.field, *gens = field(",".join(names), QQ)
        self.gens = dict(zip(self.even_names, gens))
        self.odd_index = {n: i for i, n in enumerate(self.odd_names)}

    def const(self, value):
        value = as_fraction(value)
        return self.field(QQ(value.numerator, value.denominator))


class Chart:
    """Ordered coordinates with parities; the differentiation context for scalars."""

    def __init__(self, names: Sequence[str], parities: Sequence, ring: GrassmannRing | None = None):
        names = tuple(names)
        parities = tuple(Parity.parse(p) for p in parities)
        if not names:
            raise ChartError("a chart needs at least one coordinate")
        if len(set(names)) != len(names):
            raise ChartError(f"duplicate coordinate names in {names}")
        if len(parities) != len(names):
            raise ChartError("one parity per coordinate is required")
        self.names = names
        self.parities = parities
        self.index = {n: i for i, n in enumerate(names)}
        if ring is None:
            ring = GrassmannRing(
                [n for n, p in zip(names, parities) if p == Parity.EVEN],
                [n for n, p in zip(names, parities) if p == Parity.ODD],
            )
        self.ring = ring

    # -- construction helpers -------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.names)

    def parity_of(self, name: str) -> Parity:
        return self.parities[self._idx(name)]

    def _idx(self, name) -> int:
        if isinstance(name, int):
            if not 0 <= name < self.dim:
                raise ChartError(f"coordinate index {name} out of range")
            return name
        try:
            return self.index[name]
        except KeyError:
            raise ChartError(f"unknown coordinate {name!r} on chart {self.names}") from None

    def zero(self) -> "ScalarExpr":
        return ScalarExpr(self, {})

    def one(self) -> "ScalarExpr":
        return self.const(1)

    def const(self, value) -> "ScalarExpr":
        c = self.ring.const(value)
        return ScalarExpr(self, {(): c} if c else {})

    def coordinate(self, name) -> "ScalarExpr":
        i = self._idx(name)
        n = self.names[i]
        if self.parities[i] == Parity.EVEN:
            return ScalarExpr(self, {(): self.ring.gens[n]})
        return ScalarExpr(self, {(self.ring.odd_index[n],): self.ring.field.one})

    def coords(self) -> list:
        return [self.coordinate(n) for n in self.names]

    def parse(self, text: str) -> "ScalarExpr":
        from .parser import parse_expression

        return parse_expression(text, self)

    def __call__(self, value) -> "ScalarExpr":
        """Coerce a number, string or ScalarExpr into this chart."""
        if isinstance(value, ScalarExpr):
            if value.chart is not self:
                raise ChartError("expression belongs to a different chart")
            return value
        if isinstance(value, str):
            return self.parse(value)
        return self.const(value)

    # -- differentiation ----------------------------------------------------------
    def differentiate(self, expr: "ScalarExpr", name) -> "ScalarExpr":
        return ScalarExpr(self, _base_diff(self.ring, expr.terms, self.names[self._idx(name)]))

    def __repr__(self):
        body = ", ".join(f"{n}:{p}" for n, p in zip(self.names, self.parities))
        return f"Chart({body})"


class PullbackChart(Chart):
    """New coordinates whose functions are stored as pullbacks to a base chart.

    Every expression on this chart is kept as a function of the *base*
    coordinates; ``differentiate`` applies the chain rule through the inverse
    Jacobian.  This lets a change of variables with no rational inverse (such
    as ``y = x^2``) stay inside exact rational arithmetic.
    """

    def __init__(self, base: Chart, names, parities, forward: Mapping[str, "ScalarExpr"], inverse_jacobian):
        super().__init__(names, parities, ring=base.ring)
        self.base = base
        self.forward = {n: forward[n] for n in self.names}
        # inverse_jacobian[a'][a] = d x^a / d x^{a'}  (base-chart scalars)
        self.inverse_jacobian = inverse_jacobian

    def coordinate(self, name) -> "ScalarExpr":
        n = self.names[self._idx(name)]
        return self.forward[n].relabel(self)

    def differentiate(self, expr: "ScalarExpr", name) -> "ScalarExpr":
        i = self._idx(name)
        out = {}
        for a, bname in enumerate(self.base.names):
            factor = self.inverse_jacobian[i][a]
            if factor.is_zero():
                continue
            d = _base_diff(self.ring, expr.terms, bname)
            if not d:
                continue
            prod = _mul_terms(factor.terms, d)
            _accumulate(out, prod)
        return ScalarExpr(self, out)

    def __repr__(self):
        return "Pullback" + super().__repr__()


# -- term-level kernels ---------------------------------------------------------

def _accumulate(out: dict, terms: Mapping):
    for k, v in terms.items():
        s = out.get(k)
        s = v if s is None else s + v
        if s:
            out[k] = s
        else:
            out.pop(k, None)


def _mul_terms(a: Mapping, b: Mapping) -> dict:
    out: dict = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            m = _merge_odd(ka, kb)
            if m is None:
                continue
            sign, key = m
            v = va * vb
            if sign < 0:
                v = -v
            s = out.get(key)
            s = v if s is None else s + v
            if s:
                out[key] = s
            else:
                out.pop(key, None)
    return out


def _base_diff(ring: GrassmannRing, terms: Mapping, name: str) -> dict:
    out: dict = {}
    if name in ring.gens:
        g = ring.gens[name]
        for k, v in terms.items():
            d = v.diff(g)
            if d:
                out[k] = d
        return out
    j = ring.odd_index[name]
    for k, v in terms.items():
        if j in k:
            pos = k.index(j)
            key = k[:pos] + k[pos + 1:]
            out[key] = -v if pos % 2 else v
    return out


class ScalarExpr:
    """Immutable graded-commutative rational expression on a chart."""

    __slots__ = ("chart", "terms", "_hash")

    def __init__(self, chart: Chart, terms: Mapping):
        self.chart = chart
        self.terms = {k: v for k, v in terms.items() if v}
        self._hash = None

    # -- structure ----------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    @property
    def parity(self):
        """Parity of a homogeneous expression (zero counts as even); None if mixed."""
        ps = {len(k) % 2 for k in self.terms}
        if not ps:
            return Parity.EVEN
        if len(ps) > 1:
            return None
        return Parity(ps.pop())

    def split_parity(self) -> tuple:
        even = {k: v for k, v in self.terms.items() if len(k) % 2 == 0}
        odd = {k: v for k, v in self.terms.items() if len(k) % 2 == 1}
        return ScalarExpr(self.chart, even), ScalarExpr(self.chart, odd)

    def homogeneous_parts(self):
        """Yield (parity, part) for the nonzero homogeneous components."""
        even, odd = self.split_parity()
        if even:
            yield Parity.EVEN, even
        if odd:
            yield Parity.ODD, odd

    def body(self):
        """The soul-free part (a rational function of the even coordinates)."""
        return self.terms.get((), self.chart.ring.field.zero)

    def relabel(self, chart: Chart) -> "ScalarExpr":
        if chart.ring is not self.chart.ring:
            raise ChartError("relabel needs charts over the same ring")
        return ScalarExpr(chart, self.terms)

    def is_constant(self) -> bool:
        if not self.terms:
            return True
        if set(self.terms) != {()}:
            return False
        v = self.terms[()]
        return v.numer.is_ground and v.denom.is_ground

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not a constant")
        if not self.terms:
            return Fraction(0)
        v = self.terms[()]
        return _qq(v.numer.LC) / _qq(v.denom.LC)

    def is_polynomial(self) -> bool:
        return all(v.denom.is_ground for v in self.terms.values())

    # -- arithmetic -----------------------------------------------------------------
    def _coerce(self, other) -> "ScalarExpr":
        if isinstance(other, ScalarExpr):
            if other.chart is not self.chart:
                raise ChartError(f"mismatched charts {self.chart!r} and {other.chart!r}")
            return other
        if isinstance(other, (int, Fraction)):
            return self.chart.const(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        _accumulate(out, other.terms)
        return ScalarExpr(self.chart, out)

    __radd__ = __add__

    def __neg__(self):
        return ScalarExpr(self.chart, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = self.chart.ring.const(other)
            return ScalarExpr(self.chart, {k: v * c for k, v in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return ScalarExpr(self.chart, _mul_terms(self.terms, other.terms))

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * other
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other * self

    def inverse(self) -> "ScalarExpr":
        """Multiplicative inverse; requires an even element with nonzero body."""
        even, odd = self.split_parity()
        if odd:
            raise ZeroDivisionError("cannot invert an expression with an odd part")
        b = self.body()
        if not b:
            raise ZeroDivisionError(f"cannot invert {self}: body is identically zero")
        binv = ScalarExpr(self.chart, {(): 1 / b})
        nil = self - ScalarExpr(self.chart, {(): b})
        # (b + n)^{-1} = b^{-1} sum_k (-n b^{-1})^k, finite since n is nilpotent
        q = -(nil * binv)
        out = binv
        power = binv
        while True:
            power = power * q
            if power.is_zero():
                break
            out = out + power
        return out

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return self * (Fraction(1) / as_fraction(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        if n < 0:
            return self.inverse() ** (-n)
        out = self.chart.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- calculus -------------------------------------------------------------------
    def diff(self, name) -> "ScalarExpr":
        return self.chart.differentiate(self, name)

    def substitute(self, mapping: Mapping) -> "ScalarExpr":
        return substitute(self, mapping)

    # -- comparison / display -------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.chart.const(other)
        if not isinstance(other, ScalarExpr):
            return NotImplemented
        if other.chart is not self.chart:
            return False
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset((k, hash(v)) for k, v in self.terms.items()))
        return self._hash

    def __str__(self):
        return format_scalar(self)

    def __repr__(self):
        return f"ScalarExpr({format_scalar(self)!r})"


def _qq(c) -> Fraction:
    return Fraction(int(c.numerator), int(c.denominator))


def format_scalar(e: ScalarExpr) -> str:
    """Render in the scenario expression grammar (round-trips through the parser)."""
    if not e.terms:
        return "0"
    odd_names = e.chart.ring.odd_names
    parts = []
    for key in sorted(e.terms, key=lambda k: (len(k), k)):
        coeff = e.terms[key]
        num = str(coeff.numer).replace("**", "^")
        den = str(coeff.denom).replace("**", "^")
        cstr = num if den == "1" else f"({num})/({den})"
        word = "*".join(odd_names[i] for i in key)
        if not word:
            parts.append(cstr)
        elif cstr == "1":
            parts.append(word)
        elif cstr == "-1":
            parts.append("-" + word)
        else:
            parts.append(f"({cstr})*{word}")
    return " + ".join(parts).replace("+ -", "- ")


def differentiate(a: ScalarExpr, coord) -> ScalarExpr:
    return a.diff(coord)


def multiply(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr:
    return a * b


def equals(a: ScalarExpr, b: ScalarExpr) -> bool:
    return (a - b).is_zero()


def _poly_eval(poly, images: dict, chart: Chart) -> ScalarExpr:
    """Evaluate a sympy PolyElement with ScalarExpr images of its generators."""
    ring_syms = [str(s) for s in poly.ring.symbols]
    out = chart.zero()
    cache: dict = {}
    for monom, coeff in poly.terms():
        term = chart.const(_qq(coeff))
        for sym, e in zip(ring_syms, monom):
            if e:
                key = (sym, e)
                if key not in cache:
                    cache[key] = images[sym] ** e
                term = term * cache[key]
        out = out + term
    return out


def substitute(a: ScalarExpr, mapping: Mapping, target: Chart | None = None) -> ScalarExpr:
    """Simultaneous substitution of coordinates by expressions of equal parity.

    ``mapping`` may omit coordinates (they map to themselves when the target
    chart is the source chart).  The images live on ``target`` (default: the
    chart of the first image, or the source chart).
    """
    src = a.chart
    images = {}
    for name, img in mapping.items():
        if name not in src.index:
            raise ChartError(f"unknown coordinate {name!r}")
        images[name] = img
    if target is None:
        target = next(iter(images.values())).chart if images else src
    for name in src.names:
        if name not in images:
            if target is not src:
                raise ChartError(f"no image supplied for coordinate {name!r}")
            images[name] = src.coordinate(name)
        img = images[name]
        if isinstance(img, (int, Fraction, str)):
            img = target(img)
            images[name] = img
        if img.chart is not target:
            raise ChartError("all images must live on the same chart")
        p = img.parity
        if p is None or (not img.is_zero() and p != src.parity_of(name)):
            raise ParityError(f"substitution for {name!r} does not preserve parity")
    ring = src.ring
    out = target.zero()
    even_images = {n: images[n] for n in ring.even_names}
    if not ring.even_names:
        even_images = {"_nogen_": target.zero()}
    for key, coeff in a.terms.items():
        num = _poly_eval(coeff.numer, even_images, target)
        den = _poly_eval(coeff.denom, even_images, target)
        if not den.body():
            raise ZeroDivisionError("denominator vanishes identically after substitution")
        val = num * den.inverse()
        for i in key:
            val = val * images[ring.odd_names[i]]
        out = out + val
    return out


# -- small matrix algebra over the graded ring -----------------------------------

def left_inverse(matrix: Sequence[Sequence[ScalarExpr]]) -> list:
    """Gauss-Jordan left inverse N with N*M = 1 (row operations act from the left).

    Pivots must be even with an invertible body; raises ``ZeroDivisionError``
    for a degenerate matrix.
    """
    n = len(matrix)
    if n == 0:
        return []
    chart = matrix[0][0].chart
    m = [list(row) + [chart.one() if i == j else chart.zero() for j in range(n)] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = None
        for r in range(col, n):
            e = m[r][col]
            even, odd = e.split_parity()
            if not odd and even.body():
                pivot = r
                break
        if pivot is None:
            raise ZeroDivisionError("matrix is degenerate (no invertible even pivot)")
        m[col], m[pivot] = m[pivot], m[col]
        inv = m[col][col].inverse()
        m[col] = [inv * e for e in m[col]]
        for r in range(n):
            if r != col and not m[r][col].is_zero():
                f = m[r][col]
                m[r] = [e - f * p for e, p in zip(m[r], m[col])]
    return [row[n:] for row in m]


def determinant(matrix: Sequence[Sequence[ScalarExpr]]) -> ScalarExpr:
    """Determinant of a matrix with even entries (Laplace expansion)."""
    n = len(matrix)
    if n == 0:
        raise ValueError("empty matrix")
    for row in matrix:
        for e in row:
            if e.parity != Parity.EVEN:
                raise ParityError("determinant requires even entries")
    if n == 1:
        return matrix[0][0]
    out = matrix[0][0].chart.zero()
    for j in range(n):
        if matrix[0][j].is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in matrix[1:]]
        term = matrix[0][j] * determinant(minor)
        out = out + term if j % 2 == 0 else out - term
    return out


def berezinian(matrix: Sequence[Sequence[ScalarExpr]], row_parities: Sequence, col_parities: Sequence | None = None) -> ScalarExpr:
    """Ber = det(A - B D^-1 C) / det(D) for an even supermatrix.

    Rows are graded by ``row_parities`` and columns by ``col_parities``
    (defaults to the row grading).
    """
    col_parities = row_parities if col_parities is None else col_parities
    rev = [i for i, p in enumerate(row_parities) if Parity.parse(p) == Parity.EVEN]
    rod = [i for i, p in enumerate(row_parities) if Parity.parse(p) == Parity.ODD]
    cev = [i for i, p in enumerate(col_parities) if Parity.parse(p) == Parity.EVEN]
    cod = [i for i, p in enumerate(col_parities) if Parity.parse(p) == Parity.ODD]
    if len(rev) != len(cev) or len(rod) != len(cod):
        raise ValueError("row and column gradings have different dimensions")
    chart = matrix[0][0].chart
    A = [[matrix[i][j] for j in cev] for i in rev]
    if not rod:
        return determinant(A)
    B = [[matrix[i][j] for j in cod] for i in rev]
    C = [[matrix[i][j] for j in cev] for i in rod]
    D = [[matrix[i][j] for j in cod] for i in rod]
    detD = determinant(D)
    if not rev:
        return detD.inverse()
    Dinv = left_inverse(D)
    k = len(rod)
    BDinv = [[sum((B[i][m] * Dinv[m][j] for m in range(k)), chart.zero()) for j in range(k)] for i in range(len(rev))]
    schur = [
        [A[i][j] - sum((BDinv[i][m] * C[m][j] for m in range(k)), chart.zero()) for j in range(len(cev))]
        for i in range(len(rev))
    ]
    return determinant(schur) * detD.inverse()
