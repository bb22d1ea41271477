"""Functions on the extended cotangent bundle and the canonical bracket.

A :class:`PhaseFn` is a finite sum ``c(x) * p^alpha * t^k * p_t^m`` with the
coefficient written first.  Momentum ``p_a`` has the parity of ``x^a``;
``t`` and ``p_t`` are even.  Exponents of ``t`` may be rational so that
master Hamiltonians of fractional weight fit in the same type.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .scalar import Chart, Parity, ParityError, ScalarExpr, as_fraction


def _odd_positions(chart: Chart, mom: tuple) -> list:
    return [i for i, k in enumerate(mom) if k and chart.parities[i] == Parity.ODD]


def _mom_parity(chart: Chart, mom: tuple) -> int:
    return len(_odd_positions(chart, mom)) % 2


def _mom_product(chart: Chart, m1: tuple, m2: tuple):
    """Product of two normal-ordered momentum monomials: (sign, monomial) or None."""
    o1 = _odd_positions(chart, m1)
    o2 = _odd_positions(chart, m2)
    if set(o1) & set(o2):
        return None
    swaps = sum(1 for b in o2 for a in o1 if a > b)
    mom = tuple(a + b for a, b in zip(m1, m2))
    return (-1 if swaps % 2 else 1), mom


class PhaseFn:
    """Immutable polynomial in momenta, t and p_t with ScalarExpr coefficients."""

    __slots__ = ("chart", "terms")

    def __init__(self, chart: Chart, terms: Mapping):
        self.chart = chart
        out = {}
        for k, v in terms.items():
            if not v.is_zero():
                out[k] = v
        self.terms = out

    # -- constructors -----------------------------------------------------------
    @classmethod
    def zero(cls, chart: Chart) -> "PhaseFn":
        return cls(chart, {})

    @classmethod
    def scalar(cls, c: ScalarExpr, chart: Chart | None = None) -> "PhaseFn":
        chart = chart or c.chart
        return cls(chart, {(tuple([0] * chart.dim), Fraction(0), 0): c})

    @classmethod
    def momentum(cls, chart: Chart, name) -> "PhaseFn":
        i = chart._idx(name)
        mom = tuple(1 if j == i else 0 for j in range(chart.dim))
        return cls(chart, {(mom, Fraction(0), 0): chart.one()})

    @classmethod
    def t(cls, chart: Chart, power=1) -> "PhaseFn":
        return cls(chart, {(tuple([0] * chart.dim), as_fraction(power), 0): chart.one()})

    @classmethod
    def pt(cls, chart: Chart, power: int = 1) -> "PhaseFn":
        return cls(chart, {(tuple([0] * chart.dim), Fraction(0), power): chart.one()})

    # -- structure ----------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def _term_parts(self):
        """Yield (key, parity, homogeneous coefficient) for every homogeneous piece."""
        for key, c in self.terms.items():
            mp = _mom_parity(self.chart, key[0])
            for p, part in c.homogeneous_parts():
                yield key, Parity((int(p) + mp) % 2), part

    def split_parity(self) -> tuple:
        even, odd = {}, {}
        for key, p, part in self._term_parts():
            target = odd if p else even
            target[key] = target[key] + part if key in target else part
        return PhaseFn(self.chart, even), PhaseFn(self.chart, odd)

    @property
    def parity(self):
        ps = {p for _, p, _ in self._term_parts()}
        if not ps:
            return Parity.EVEN
        return ps.pop() if len(ps) == 1 else None

    def coefficient(self, mom: Sequence[int], tpow=0, ptpow: int = 0) -> ScalarExpr:
        return self.terms.get((tuple(mom), as_fraction(tpow), ptpow), self.chart.zero())

    # -- arithmetic -----------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, PhaseFn):
            if other.chart is not self.chart:
                raise ValueError("mismatched charts")
            return other
        if isinstance(other, ScalarExpr):
            return PhaseFn.scalar(other, self.chart)
        if isinstance(other, (int, Fraction)):
            return PhaseFn.scalar(self.chart.const(other), self.chart)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return PhaseFn(self.chart, out)

    __radd__ = __add__

    def __neg__(self):
        return PhaseFn(self.chart, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return PhaseFn(self.chart, {k: v * other for k, v in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict = {}
        for (m1, t1, q1), c1 in self.terms.items():
            mp1 = _mom_parity(self.chart, m1)
            for (m2, t2, q2), c2 in other.terms.items():
                mm = _mom_product(self.chart, m1, m2)
                if mm is None:
                    continue
                sign, mom = mm
                c2s = c2
                if mp1:
                    ev, od = c2.split_parity()
                    c2s = ev - od
                c = c1 * c2s
                if sign < 0:
                    c = -c
                key = (mom, t1 + t2, q1 + q2)
                out[key] = out[key] + c if key in out else c
        return PhaseFn(self.chart, out)

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

    # -- derivatives (left) ---------------------------------------------------------
    def diff_x(self, name) -> "PhaseFn":
        return PhaseFn(self.chart, {k: c.diff(name) for k, c in self.terms.items()})

    def diff_p(self, name) -> "PhaseFn":
        chart = self.chart
        i = chart._idx(name)
        odd = chart.parities[i] == Parity.ODD
        out: dict = {}
        for (mom, tp, qp), c in self.terms.items():
            k = mom[i]
            if not k:
                continue
            newmom = mom[:i] + (k - 1,) + mom[i + 1:]
            if odd:
                before = sum(1 for j in _odd_positions(chart, mom) if j < i)
                ev, od = c.split_parity()
                val = ev - od  # p_a passes the coefficient
                if before % 2:
                    val = -val
            else:
                val = c * k
            key = (newmom, tp, qp)
            out[key] = out[key] + val if key in out else val
        return PhaseFn(chart, out)

    def diff_t(self) -> "PhaseFn":
        out = {}
        for (mom, tp, qp), c in self.terms.items():
            if tp:
                out[(mom, tp - 1, qp)] = c * tp
        return PhaseFn(self.chart, out)

    def diff_pt(self) -> "PhaseFn":
        out = {}
        for (mom, tp, qp), c in self.terms.items():
            if qp:
                out[(mom, tp, qp - 1)] = c * qp
        return PhaseFn(self.chart, out)

    def __str__(self):
        return format_phasefn(self)

    def __repr__(self):
        return f"PhaseFn({format_phasefn(self)!r})"


def format_phasefn(F: PhaseFn) -> str:
    if not F.terms:
        return "0"
    parts = []
    names = F.chart.names
    for (mom, tp, qp), c in sorted(F.terms.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        factors = []
        for n, k in zip(names, mom):
            if k:
                factors.append(f"p_{n}" + (f"^{k}" if k > 1 else ""))
        if tp:
            factors.append("t" + (f"^{tp}" if tp != 1 else "") if tp.denominator == 1 else f"t^({tp})")
        if qp:
            factors.append("p_t" + (f"^{qp}" if qp > 1 else ""))
        cs = str(c)
        if not factors:
            parts.append(cs)
        elif cs == "1":
            parts.append("*".join(factors))
        else:
            parts.append(f"({cs})*" + "*".join(factors))
    return " + ".join(parts)


def _right_derivative(F: PhaseFn, which: str, name=None) -> PhaseFn:
    """Right derivative F<-d_z = (-1)^{z(F+1)} d_z F, applied per parity part."""
    out = PhaseFn.zero(F.chart)
    ev, od = F.split_parity()
    for fp, part in ((0, ev), (1, od)):
        if part.is_zero():
            continue
        if which == "x":
            d, zp = part.diff_x(name), int(F.chart.parity_of(name))
        elif which == "p":
            d, zp = part.diff_p(name), int(F.chart.parity_of(name))
        elif which == "t":
            d, zp = part.diff_t(), 0
        else:
            d, zp = part.diff_pt(), 0
        if zp and not fp:
            d = -d
        out = out + d
    return out


def canonical_bracket(F: PhaseFn, G: PhaseFn) -> PhaseFn:
    """Graded canonical Poisson bracket on the extended cotangent bundle.

    (F, G) = F<-d_{p_a} d_a G - (-1)^a F<-d_a d_{p_a} G plus the (t, p_t) pair,
    normalized so that ``(p_a, x^b) = delta`` and ``(p_t, t) = 1``.
    """
    if F.chart is not G.chart:
        raise ValueError("mismatched charts")
    chart = F.chart
    out = PhaseFn.zero(chart)
    for n in chart.names:
        out = out + _right_derivative(F, "p", n) * G.diff_x(n)
        second = _right_derivative(F, "x", n) * G.diff_p(n)
        out = out + second if chart.parity_of(n) else out - second
    out = out + _right_derivative(F, "pt") * G.diff_t()
    out = out - _right_derivative(F, "t") * G.diff_pt()
    return out


def apply_D(S: PhaseFn, F: PhaseFn) -> PhaseFn:
    """The operator D = (S, .)."""
    return canonical_bracket(S, F)


@dataclass(frozen=True)
class BracketData:
    """Coefficients (S^{ab}, gamma^a, theta) of a long bracket of weight lam and parity eps."""

    chart: Chart
    S: tuple
    gamma: tuple
    theta: ScalarExpr
    lam: Fraction = Fraction(0)
    eps: Parity = Parity.EVEN

    def __post_init__(self):
        chart = self.chart
        n = chart.dim
        S = tuple(tuple(chart(e) for e in row) for row in self.S)
        gamma = tuple(chart(e) for e in self.gamma)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "theta", chart(self.theta))
        object.__setattr__(self, "lam", as_fraction(self.lam))
        object.__setattr__(self, "eps", Parity.parse(self.eps))
        if len(S) != n or any(len(r) != n for r in S) or len(gamma) != n:
            raise ValueError(f"bracket data must be {n}x{n} / {n} sized")
        eps = int(self.eps)
        par = [int(p) for p in chart.parities]
        for a in range(n):
            for b in range(n):
                e = S[a][b]
                if not e.is_zero() and e.parity != Parity((eps + par[a] + par[b]) % 2):
                    raise ParityError(f"S^{{{chart.names[a]}{chart.names[b]}}} has the wrong parity")
                sign = -1 if par[a] * par[b] else 1
                if e != S[b][a] * sign:
                    raise ParityError(
                        f"S is not graded-symmetric at ({chart.names[a]}, {chart.names[b]})"
                    )
            g = gamma[a]
            if not g.is_zero() and g.parity != Parity((eps + par[a]) % 2):
                raise ParityError(f"gamma^{chart.names[a]} has the wrong parity")
        th = self.theta
        if not th.is_zero() and th.parity != self.eps:
            raise ParityError("theta has the wrong parity")

    @classmethod
    def build(cls, chart: Chart, S, gamma=None, theta=0, lam=0, eps=None) -> "BracketData":
        n = chart.dim
        if gamma is None:
            gamma = [0] * n
        if eps is None:
            eps = infer_parity(chart, S, gamma, theta)
        return cls(chart, S, gamma, theta, lam, eps)

    def with_(self, **kw) -> "BracketData":
        fields = dict(chart=self.chart, S=self.S, gamma=self.gamma, theta=self.theta, lam=self.lam, eps=self.eps)
        fields.update(kw)
        return BracketData(**fields)

    def __eq__(self, other):
        if not isinstance(other, BracketData):
            return NotImplemented
        return (
            self.chart is other.chart
            and self.S == other.S
            and self.gamma == other.gamma
            and self.theta == other.theta
            and self.lam == other.lam
            and self.eps == other.eps
        )

    __hash__ = None

    def is_zero(self) -> bool:
        return all(e.is_zero() for r in self.S for e in r) and all(g.is_zero() for g in self.gamma) and self.theta.is_zero()

    def as_dict(self) -> dict:
        names = self.chart.names
        return {
            "lambda": str(self.lam),
            "parity": str(self.eps),
            "S": [[str(e) for e in row] for row in self.S],
            "gamma": {n: str(g) for n, g in zip(names, self.gamma)},
            "theta": str(self.theta),
        }


def infer_parity(chart: Chart, S, gamma, theta) -> Parity:
    """Read eps off the first nonzero coefficient (even when all vanish)."""
    par = [int(p) for p in chart.parities]
    for a, row in enumerate(S):
        for b, e in enumerate(row):
            e = chart(e)
            if not e.is_zero() and e.parity is not None:
                return Parity((int(e.parity) + par[a] + par[b]) % 2)
    for a, g in enumerate(gamma):
        g = chart(g)
        if not g.is_zero() and g.parity is not None:
            return Parity((int(g.parity) + par[a]) % 2)
    th = chart(theta)
    if not th.is_zero() and th.parity is not None:
        return th.parity
    return Parity.EVEN


def quadratic_form(chart: Chart, S) -> PhaseFn:
    """1/2 S^{ab} p_b p_a."""
    out = PhaseFn.zero(chart)
    for a in range(chart.dim):
        for b in range(chart.dim):
            e = S[a][b]
            if e.is_zero():
                continue
            out = out + PhaseFn.scalar(e, chart) * PhaseFn.momentum(chart, b) * PhaseFn.momentum(chart, a)
    return out * Fraction(1, 2)


def linear_form(chart: Chart, v) -> PhaseFn:
    """v^a p_a."""
    out = PhaseFn.zero(chart)
    for a, e in enumerate(v):
        if not e.is_zero():
            out = out + PhaseFn.scalar(e, chart) * PhaseFn.momentum(chart, a)
    return out


def master_hamiltonian(data: BracketData) -> PhaseFn:
    """t^lam * 1/2 (S^{ab} p_b p_a + 2 t gamma^a p_a p_t + t^2 theta p_t^2)."""
    chart = data.chart
    t = PhaseFn.t(chart)
    pt = PhaseFn.pt(chart)
    body = quadratic_form(chart, data.S)
    body = body + t * linear_form(chart, data.gamma) * pt
    body = body + PhaseFn.t(chart, 2) * PhaseFn.scalar(data.theta, chart) * PhaseFn.pt(chart, 2) * Fraction(1, 2)
    return PhaseFn.t(chart, data.lam) * body


def master_hamiltonian_M(data: BracketData) -> PhaseFn:
    """The T*M part 1/2 S^{ab} p_b p_a."""
    return quadratic_form(data.chart, data.S)
