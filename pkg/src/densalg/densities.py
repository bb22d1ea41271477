"""Weighted densities, the residue pairing, and derivations of the density algebra.

A :class:`Density` is a finite sum ``psi_w(x) t^w`` over rational weights
``w``; ``t`` stands for the coordinate volume element and is even.  A
:class:`Derivation` of weight ``lam`` acts as ``t^lam (X^a d_a + X_0 w)``
where ``w`` is the weight operator ``t d/dt``.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

from .scalar import Chart, Parity, ParityError, ScalarExpr, as_fraction


class Density:
    """Immutable finite map weight -> ScalarExpr coefficient."""

    __slots__ = ("chart", "parts")

    def __init__(self, chart: Chart, parts: Mapping):
        self.chart = chart
        out = {}
        for w, c in parts.items():
            c = chart(c)
            if not c.is_zero():
                out[as_fraction(w)] = c
        self.parts = out

    @classmethod
    def of(cls, c, weight=0, chart: Chart | None = None) -> "Density":
        chart = chart or c.chart
        return cls(chart, {as_fraction(weight): c})

    @classmethod
    def zero(cls, chart: Chart) -> "Density":
        return cls(chart, {})

    @classmethod
    def one(cls, chart: Chart) -> "Density":
        return cls(chart, {Fraction(0): chart.one()})

    # -- structure ----------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.parts

    def __bool__(self):
        return bool(self.parts)

    def weights(self) -> list:
        return sorted(self.parts)

    def component(self, w) -> ScalarExpr:
        return self.parts.get(as_fraction(w), self.chart.zero())

    def weight(self) -> Fraction:
        """The single weight of a homogeneous density (zero counts as weight 0)."""
        ws = self.weights()
        if len(ws) > 1:
            raise ValueError("density is not weight-homogeneous")
        return ws[0] if ws else Fraction(0)

    @property
    def parity(self):
        ps = set()
        for c in self.parts.values():
            p = c.parity
            if p is None:
                return None
            ps.add(p)
        if not ps:
            return Parity.EVEN
        return ps.pop() if len(ps) == 1 else None

    def split_parity(self) -> tuple:
        ev, od = {}, {}
        for w, c in self.parts.items():
            e, o = c.split_parity()
            ev[w], od[w] = e, o
        return Density(self.chart, ev), Density(self.chart, od)

    def homogeneous_parts(self):
        """Yield (weight, parity, part) pieces that are homogeneous in both gradings."""
        for w in self.weights():
            for p, part in self.parts[w].homogeneous_parts():
                yield w, p, Density(self.chart, {w: part})

    def map(self, fn) -> "Density":
        return Density(self.chart, {w: fn(c) for w, c in self.parts.items()})

    def shift(self, lam) -> "Density":
        lam = as_fraction(lam)
        return Density(self.chart, {w + lam: c for w, c in self.parts.items()})

    # -- arithmetic -----------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Density):
            if other.chart is not self.chart:
                raise ValueError("mismatched charts")
            return other
        if isinstance(other, ScalarExpr):
            return Density(self.chart, {Fraction(0): other})
        if isinstance(other, (int, Fraction)):
            return Density(self.chart, {Fraction(0): self.chart.const(other)})
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.parts)
        for w, c in other.parts.items():
            out[w] = out[w] + c if w in out else c
        return Density(self.chart, out)

    __radd__ = __add__

    def __neg__(self):
        return self.map(lambda c: -c)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.map(lambda c: c * other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict = {}
        for w1, c1 in self.parts.items():
            for w2, c2 in other.parts.items():
                w = w1 + w2
                c = c1 * c2
                out[w] = out[w] + c if w in out else c
        return Density(self.chart, out)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * other
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other * self

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    def diff(self, name) -> "Density":
        return self.map(lambda c: c.diff(name))

    def __str__(self):
        if not self.parts:
            return "0"
        return " + ".join(f"({c})*t^({w})" if w else f"({c})" for w, c in sorted(self.parts.items()))

    def __repr__(self):
        return f"Density({self})"


def density_multiply(psi: Density, chi: Density) -> Density:
    return psi * chi


def residue_pairing(psi: Density, chi: Density) -> Density:
    """The weight-1 component of psi*chi, i.e. the integrand of the pairing."""
    prod = psi * chi
    return Density(prod.chart, {Fraction(1): prod.component(1)})


def _sign_split(c: ScalarExpr, odd_flag: int) -> ScalarExpr:
    """c with its odd part negated when odd_flag is set."""
    if not odd_flag:
        return c
    ev, od = c.split_parity()
    return ev - od


class Derivation:
    """Vector field on the extended manifold: t^lam (X^a d_a + X_0 w)."""

    __slots__ = ("chart", "coords", "wpart", "lam", "parity")

    def __init__(self, chart: Chart, coords: Sequence, wpart=0, lam=0, parity=None):
        self.chart = chart
        self.coords = tuple(chart(c) for c in coords)
        if len(self.coords) != chart.dim:
            raise ValueError("one component per coordinate is required")
        self.wpart = chart(wpart)
        self.lam = as_fraction(lam)
        if parity is None:
            parity = self._infer_parity()
        self.parity = Parity.parse(parity)
        for a, c in enumerate(self.coords):
            if not c.is_zero() and c.parity != self.parity + chart.parities[a]:
                raise ParityError(f"component along {chart.names[a]} has the wrong parity")
        if not self.wpart.is_zero() and self.wpart.parity != self.parity:
            raise ParityError("weight component has the wrong parity")

    def _infer_parity(self) -> Parity:
        for a, c in enumerate(self.coords):
            if not c.is_zero() and c.parity is not None:
                return c.parity + self.chart.parities[a]
        if not self.wpart.is_zero() and self.wpart.parity is not None:
            return self.wpart.parity
        return Parity.EVEN

    @classmethod
    def weight_operator(cls, chart: Chart) -> "Derivation":
        return cls(chart, [0] * chart.dim, 1, 0, Parity.EVEN)

    @classmethod
    def partial(cls, chart: Chart, name) -> "Derivation":
        i = chart._idx(name)
        return cls(chart, [1 if j == i else 0 for j in range(chart.dim)], 0, 0, chart.parities[i])

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coords) and self.wpart.is_zero()

    def __add__(self, other: "Derivation") -> "Derivation":
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        if other.lam != self.lam or other.parity != self.parity:
            raise ValueError("can only add derivations of equal weight and parity")
        return Derivation(
            self.chart,
            [a + b for a, b in zip(self.coords, other.coords)],
            self.wpart + other.wpart,
            self.lam,
            self.parity,
        )

    def __neg__(self):
        return Derivation(self.chart, [-c for c in self.coords], -self.wpart, self.lam, self.parity)

    def __sub__(self, other):
        return self + (-other)

    def __eq__(self, other):
        if not isinstance(other, Derivation):
            return NotImplemented
        if self.is_zero() and other.is_zero():
            return True
        return (
            self.lam == other.lam
            and self.parity == other.parity
            and self.coords == other.coords
            and self.wpart == other.wpart
        )

    __hash__ = None

    def scaled(self, a: Density) -> "Derivation":
        """The derivation a*X for a density a homogeneous in weight and parity."""
        w = a.weight()
        c = a.component(w)
        p = c.parity
        if p is None:
            raise ParityError("scaling density must be parity-homogeneous")
        return Derivation(
            self.chart,
            [c * x for x in self.coords],
            c * self.wpart,
            self.lam + w,
            self.parity + p,
        )

    def __call__(self, psi: Density) -> Density:
        return derivation_apply(self, psi)

    def __str__(self):
        parts = [f"({c})*d_{n}" for c, n in zip(self.coords, self.chart.names) if not c.is_zero()]
        if not self.wpart.is_zero():
            parts.append(f"({self.wpart})*w")
        body = " + ".join(parts) or "0"
        return f"t^({self.lam})*[{body}]" if self.lam else body

    __repr__ = __str__


def derivation_apply(X: Derivation, psi: Density) -> Density:
    """t^lam (X^a d_a psi + X_0 w psi)."""
    out: dict = {}
    for w, c in psi.parts.items():
        acc = X.wpart * c * w if w else X.chart.zero()
        for a, xa in enumerate(X.coords):
            if not xa.is_zero():
                acc = acc + xa * c.diff(a)
        if not acc.is_zero():
            key = w + X.lam
            out[key] = out[key] + acc if key in out else acc
    return Density(X.chart, out)


def coordinate_divergence(X: Derivation) -> ScalarExpr:
    """sum_a d_a X^a (-1)^{a(X+1)}."""
    chart = X.chart
    out = chart.zero()
    for a, xa in enumerate(X.coords):
        d = xa.diff(a)
        if chart.parities[a] and not X.parity:
            d = -d
        out = out + d
    return out


def divergence(X: Derivation) -> Density:
    """t^lam (d_a X^a (-1)^{a(X+1)} + (lam - 1) X_0)."""
    return Density.of(coordinate_divergence(X) + X.wpart * (X.lam - 1), X.lam, X.chart)


def divergence_via_adjoint(X: Derivation) -> Density:
    """-(X + X*), computed through the operator adjoint."""
    from .operators import DiffOp, adjoint

    op = DiffOp.from_derivation(X)
    total = op + adjoint(op)
    if total.slice_order() > 0 or total.wdegree() > 0:
        raise ArithmeticError(f"X + X* is not of order zero: {total}")
    return -total.apply(Density.one(X.chart))


def decompose_derivation(X: Derivation) -> tuple:
    """Split X = X_free + phi*w with div X_free = 0; needs lam != 1."""
    if X.lam == 1:
        raise ValueError("decomposition requires weight lam != 1")
    d = divergence(X).component(X.lam)
    phi = d * (Fraction(1) / (X.lam - 1))
    free = Derivation(X.chart, X.coords, X.wpart - phi, X.lam, X.parity)
    return free, Density.of(phi, X.lam, X.chart)


def derivation_commutator(X: Derivation, Y: Derivation) -> Derivation:
    """Graded commutator XY - (-1)^{XY} YX, read off on the generators x^a and t."""
    chart = X.chart
    sign = -1 if X.parity and Y.parity else 1
    lam = X.lam + Y.lam

    def bracket_on(psi: Density) -> Density:
        return X(Y(psi)) - Y(X(psi)) * sign

    coords = [bracket_on(Density.of(chart.coordinate(a), 0, chart)).component(lam) for a in range(chart.dim)]
    w0 = bracket_on(Density.of(chart.one(), 1, chart)).component(lam + 1)
    return Derivation(chart, coords, w0, lam, X.parity + Y.parity)
