"""Coordinate changes, connections on volume forms, and operator geometry.

A :class:`CoordChange` stores new coordinates as functions of the old ones,
so every transformed object keeps exact rational coefficients even when the
inverse map is not rational.  On top of it this module provides the
transformation laws for bracket data, a direct operator-conjugation oracle,
Laplace-Beltrami pencils from volume forms and connections, pencil shifts,
decomposition and recovery of second-order operators, flatness and
existence-of-action checks, the BV cocycle, and the 1-D Sturm-Liouville
demonstration.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import sympy

from .brackets import (
    canonical_pencil,
    check_jacobi_equations,
    classify_delta_squared,
    generated_bracket,
    grad_derivation,
    long_bracket_eval,
)
from .densities import Density, Derivation, coordinate_divergence
from .operators import (
    DiffOp,
    apply,
    compose,
    conjugate,
    lie_derivative,
    specialize,
)
from .phasespace import BracketData, PhaseFn, canonical_bracket, linear_form, quadratic_form
from .scalar import (
    Chart,
    ChartError,
    Parity,
    PullbackChart,
    ScalarExpr,
    as_fraction,
    berezinian,
    left_inverse,
    substitute,
)

HALF = Fraction(1, 2)


def _neg_if(c, flag):
    return -c if flag else c


def _par(chart: Chart) -> list:
    return [int(p) for p in chart.parities]


# -- coordinate changes ---------------------------------------------------------------

class CoordChange:
    """An invertible change x -> x' with x'^{a'} given as functions of x.

    ``target`` is a :class:`PullbackChart` whose expressions are functions of
    the old coordinates.  ``M[a][a'] = d_a x^{a'}`` and ``N = M^{-1}`` (so
    ``N[a'][a] = d x^a / d x^{a'}``).  ``J`` is the Berezinian of ``M``.
    """

    def __init__(self, base: Chart, names: Sequence[str], forward: Mapping, inverse: Mapping | None = None,
                 J=None, parities: Sequence | None = None):
        self.base = base
        names = tuple(names)
        fwd = {}
        for n in names:
            if n not in forward:
                raise ChartError(f"no forward expression for new coordinate {n!r}")
            fwd[n] = base(forward[n])
        if parities is None:
            parities = []
            for n in names:
                p = fwd[n].parity
                if p is None:
                    raise ValueError(f"forward expression for {n!r} has mixed parity")
                parities.append(p)
        parities = [Parity.parse(p) for p in parities]
        if sorted(parities) != sorted(base.parities):
            raise ValueError("the change must preserve the numbers of even and odd coordinates")
        for n, p in zip(names, parities):
            if not fwd[n].is_zero() and fwd[n].parity != p:
                raise ValueError(f"forward expression for {n!r} has the wrong parity")
        self.names = names
        self.parities = parities
        self.forward = fwd
        self.M = [[fwd[n].diff(a) for n in names] for a in range(base.dim)]
        try:
            self.N = left_inverse(self.M)
        except ZeroDivisionError as exc:
            raise ValueError(f"the change is not invertible: {exc}") from None
        self.target = PullbackChart(base, names, parities, fwd, self.N)
        computed = berezinian(self.M, base.parities, parities)
        if J is not None:
            J = base(J)
            if J != computed:
                raise ValueError(f"supplied Jacobian {J} differs from the Berezinian {computed}")
        self.J = computed
        if self.J.is_zero() or not self.J.body():
            raise ValueError("the Jacobian vanishes")
        self.inverse = None
        if inverse is not None:
            self.inverse = self._check_inverse(inverse)

    def _check_inverse(self, inverse: Mapping) -> dict:
        scratch = Chart(self.names, self.parities)
        out = {}
        for a, n in enumerate(self.base.names):
            if n not in inverse:
                raise ChartError(f"no inverse expression for old coordinate {n!r}")
            g = scratch(inverse[n])
            back = substitute(g, self.forward, target=self.base)
            if back != self.base.coordinate(a):
                raise ValueError(f"inverse map does not undo the forward map on {n!r} (got {back})")
            out[n] = g
        return out

    @classmethod
    def identity(cls, base: Chart, names: Sequence[str] | None = None) -> "CoordChange":
        names = names or [n + "'" for n in base.names]
        return cls(base, names, {m: base.coordinate(n) for m, n in zip(names, base.names)},
                   parities=base.parities)

    # -- pushing objects to the new chart ---------------------------------------
    def push(self, e: ScalarExpr) -> ScalarExpr:
        """The same function viewed on the new chart."""
        return e.relabel(self.target)

    def dlogJ(self) -> list:
        Jinv = self.J.inverse()
        return [self.J.diff(a) * Jinv for a in range(self.base.dim)]

    def __repr__(self):
        body = ", ".join(f"{n} = {self.forward[n]}" for n in self.names)
        return f"CoordChange({body})"


def _jpow(ch: CoordChange, k) -> ScalarExpr:
    k = as_fraction(k)
    if k.denominator != 1:
        raise ValueError("only integer powers of the Jacobian are supported")
    return ch.J ** int(k)


def transform_bracket_data(data: BracketData, ch: CoordChange) -> BracketData:
    """Coefficients of the same long bracket in the new coordinates (t' = J t).

    S'^{a'b'} = J^-lam sum S^{ab} d_b x^{a'} d_a x^{b'} (-1)^{a a'}
    gamma'^{a'} = J^-lam sum (gamma^a d_a x^{a'} + S^{ab} d_b x^{a'} d_a log J (-1)^{a a'})
    theta' = J^-lam (theta + 2 gamma^a d_a log J + S^{ab} d_b log J d_a log J)
    """
    if data.chart is not ch.base:
        raise ChartError("bracket data lives on a different chart")
    base = ch.base
    n = base.dim
    par = _par(base)
    npar = [int(p) for p in ch.parities]
    scale = _jpow(ch, -data.lam)
    L = ch.dlogJ()
    xs = [ch.forward[m] for m in ch.names]
    dx = [[x.diff(a) for a in range(n)] for x in xs]   # dx[a'][a] = d_a x^{a'}
    S2 = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = base.zero()
            for a in range(n):
                for b in range(n):
                    s = data.S[a][b]
                    if s.is_zero():
                        continue
                    acc = acc + _neg_if(s * dx[i][b] * dx[j][a], par[a] * npar[i])
            row.append(ch.push(scale * acc))
        S2.append(row)
    gamma2 = []
    for i in range(n):
        acc = base.zero()
        for a in range(n):
            acc = acc + data.gamma[a] * dx[i][a]
            for b in range(n):
                s = data.S[a][b]
                if not s.is_zero():
                    acc = acc + _neg_if(s * dx[i][b] * L[a], par[a] * npar[i])
        gamma2.append(ch.push(scale * acc))
    th = data.theta
    for a in range(n):
        th = th + data.gamma[a] * L[a] * 2
        for b in range(n):
            s = data.S[a][b]
            if not s.is_zero():
                th = th + s * L[b] * L[a]
    return BracketData(ch.target, S2, gamma2, ch.push(scale * th), data.lam, data.eps)


def transform_bracket_data_via_brackets(data: BracketData, ch: CoordChange) -> BracketData:
    """Oracle: evaluate the old bracket on x^{a'} and t' = J t, then rescale."""
    base = ch.base
    n = base.dim
    lam = data.lam
    xs = [Density.of(ch.forward[m], 0, base) for m in ch.names]
    tp = Density.of(ch.J, 1, base)
    S2 = [[ch.push(long_bracket_eval(data, xs[i], xs[j]).component(lam) * _jpow(ch, -lam)) for j in range(n)]
          for i in range(n)]
    g2 = [ch.push(long_bracket_eval(data, xs[i], tp).component(lam + 1) * _jpow(ch, -lam - 1)) for i in range(n)]
    th = ch.push(long_bracket_eval(data, tp, tp).component(lam + 2) * _jpow(ch, -lam - 2))
    return BracketData(ch.target, S2, g2, th, lam, data.eps)


def transform_operator(op: DiffOp, ch: CoordChange) -> DiffOp:
    """The operator acting on new-chart densities, by direct substitution.

    A weight-w density psi t^w equals (psi J^-w) t'^w.  Each old partial d_a
    becomes sum_{a'} (d_a x^{a'}) d_{a'} + w d_a log J, and t^lam = J^-lam t'^lam.
    """
    if op.chart is not ch.base:
        raise ChartError("operator lives on a different chart")
    tgt = ch.target
    n = ch.base.dim
    L = ch.dlogJ()
    w = DiffOp.weight_op(tgt)
    D = []
    for a in range(n):
        acc = compose(w, DiffOp.scalar(ch.push(L[a])))
        for i in range(n):
            m = ch.M[a][i]
            if not m.is_zero():
                acc = acc + compose(DiffOp.scalar(ch.push(m)), DiffOp.partial(tgt, i))
        D.append(acc)
    e = DiffOp._empty_word(tgt)
    out = DiffOp.zero(tgt)
    for (lam, word, j), c in op.terms.items():
        head = DiffOp(tgt, {(lam, e, 0): ch.push(c * _jpow(ch, -lam))})
        prod = head
        # normal-ordered word d_0^{k0} d_1^{k1} ... is applied last coordinate first
        for a in range(n):
            for _ in range(word[a]):
                prod = compose(prod, D[a])
        out = out + compose(prod, DiffOp(tgt, {(Fraction(0), e, j): tgt.one()}))
    return out


# -- connections on volume forms ----------------------------------------------------------

@dataclass(frozen=True)
class ConnectionOnVol:
    """Lower coefficients gamma_a of nabla_a rho = (d_a + gamma_a) rho."""

    chart: Chart
    coeffs: tuple

    def __post_init__(self):
        chart = self.chart
        cs = tuple(chart(c) for c in self.coeffs)
        if len(cs) != chart.dim:
            raise ValueError("one coefficient per coordinate is required")
        for a, c in enumerate(cs):
            if not c.is_zero() and c.parity != chart.parities[a]:
                raise ValueError(f"gamma_{chart.names[a]} has the wrong parity")
        object.__setattr__(self, "coeffs", cs)

    @classmethod
    def from_volume(cls, chart: Chart, A) -> "ConnectionOnVol":
        """The flat connection gamma_a = -d_a A of rho = e^A."""
        A = chart(A)
        return cls(chart, [-A.diff(a) for a in range(chart.dim)])

    def __add__(self, other: "ConnectionOnVol") -> "ConnectionOnVol":
        return ConnectionOnVol(self.chart, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other: "ConnectionOnVol") -> "ConnectionOnVol":
        return ConnectionOnVol(self.chart, [a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __eq__(self, other):
        if not isinstance(other, ConnectionOnVol):
            return NotImplemented
        return self.chart is other.chart and self.coeffs == other.coeffs

    __hash__ = None

    def transform(self, ch: CoordChange) -> "ConnectionOnVol":
        """gamma_{a'} = sum_a (d x^a / d x^{a'}) (gamma_a + d_a log J)."""
        n = ch.base.dim
        L = ch.dlogJ()
        out = []
        for i in range(n):
            acc = ch.base.zero()
            for a in range(n):
                acc = acc + ch.N[i][a] * (self.coeffs[a] + L[a])
            out.append(ch.push(acc))
        return ConnectionOnVol(ch.target, out)


def raise_index(S, v: Sequence[ScalarExpr]) -> list:
    """v^a = S^{ab} v_b."""
    n = len(v)
    return [sum((S[a][b] * v[b] for b in range(n)), v[0].chart.zero()) for a in range(n)]


def pair(lower: Sequence[ScalarExpr], upper: Sequence[ScalarExpr]) -> ScalarExpr:
    """u_a v^a."""
    return sum((u * v for u, v in zip(lower, upper)), lower[0].chart.zero())


def _matrix(chart: Chart, S) -> list:
    return [[chart(e) for e in row] for row in S]


def _infer_eps(chart: Chart, S) -> Parity:
    from .phasespace import infer_parity

    return infer_parity(chart, S, [0] * chart.dim, 0)


def pencil_from_connection(S, conn: ConnectionOnVol, lam=0, eps=None) -> BracketData:
    """gamma^a = S^{ab} gamma_b, theta = gamma^a gamma_a."""
    chart = conn.chart
    S = _matrix(chart, S)
    up = raise_index(S, list(conn.coeffs))
    th = pair(list(conn.coeffs), up)
    eps = _infer_eps(chart, S) if eps is None else eps
    return BracketData(chart, S, up, th, lam, eps)


def lb_pencil_from_volume(chart: Chart, S, A, lam=0, eps=None) -> BracketData:
    """Laplace-Beltrami data of rho = e^A: gamma^a = -S^{ab} d_b A, theta = gamma^a gamma_a."""
    A = chart(A)
    if A.parity != Parity.EVEN:
        raise ValueError("the log-density A must be even")
    return pencil_from_connection(S, ConnectionOnVol.from_volume(chart, A), lam, eps)


def lb_pencil_direct(chart: Chart, S, A, eps=None) -> DiffOp:
    """Oracle at lam = 0: 1/2 sum (-1)^{a(eps+1)} (d_a - (w-1) A_a) o S^{ab} o (d_b - w A_b).

    This is rho^{w-1} d_a (rho S^{ab} d_b (rho^{-w} .)) written with the
    weight operator; it never calls the canonical-pencil construction.
    """
    A = chart(A)
    S = _matrix(chart, S)
    eps = int(_infer_eps(chart, S) if eps is None else eps)
    n = chart.dim
    par = _par(chart)
    w = DiffOp.weight_op(chart)
    one = DiffOp.identity(chart)
    out = DiffOp.zero(chart)
    for a in range(n):
        left = DiffOp.partial(chart, a) - compose(w - one, DiffOp.scalar(A.diff(a)))
        for b in range(n):
            s = S[a][b]
            if s.is_zero():
                continue
            right = DiffOp.partial(chart, b) - compose(w, DiffOp.scalar(A.diff(b)))
            term = compose(compose(left, DiffOp.scalar(s)), right)
            out = out + _neg_if(term, par[a] * (eps + 1) % 2)
    return out * HALF


# -- pencil shifts ----------------------------------------------------------------------------

@dataclass
class ShiftResult:
    data: BracketData
    delta: DiffOp
    displayed: DiffOp
    corollary: DiffOp | None

    @property
    def consistent(self) -> bool:
        ok = self.delta == self.displayed
        if self.corollary is not None:
            ok = ok and self.delta == self.corollary
        return ok


def shift_difference(data: BracketData, X: Sequence[ScalarExpr], xi: ScalarExpr) -> DiffOp:
    """1/2 t^lam [(2w + lam - 1)(X^a d_a + 1/2 xi w) + w div X] with div X = d_a X^a (+-) + (lam-1) xi / 2."""
    chart = data.chart
    lam = data.lam
    n = chart.dim
    par = _par(chart)
    eps = int(data.eps)
    w = DiffOp.weight_op(chart)
    one = DiffOp.identity(chart)
    field_op = DiffOp.zero(chart)
    for a in range(n):
        if not X[a].is_zero():
            field_op = field_op + compose(DiffOp.scalar(X[a]), DiffOp.partial(chart, a))
    field_op = field_op + compose(w, DiffOp.scalar(xi)) * HALF
    div = chart.zero()
    for a in range(n):
        div = div + _neg_if(X[a].diff(a), par[a] * (eps + 1) % 2)
    div = div + xi * ((lam - 1) / 2)
    body = compose(w * 2 + one * (lam - 1), field_op) + compose(w, DiffOp.scalar(div))
    return compose(DiffOp.t_power(chart, lam), body * HALF)


def pencil_shift(data: BracketData, X: Sequence, xi=0) -> ShiftResult:
    """Shift gamma by X and theta by xi; return the new data and the operator change."""
    chart = data.chart
    X = [chart(e) for e in X]
    xi = chart(xi)
    new = data.with_(gamma=[g + x for g, x in zip(data.gamma, X)], theta=data.theta + xi)
    delta = canonical_pencil(new) - canonical_pencil(data)
    displayed = shift_difference(data, X, xi)
    corollary = None
    if data.lam == 0:
        # (w - 1/2) Lie_X - w (w - 1) div X_hat with div X_hat = div_M X - xi/2
        Xd = Derivation(chart, X, 0, 0, Parity(int(data.eps)))
        div_hat = coordinate_divergence(Xd) - xi * HALF
        w = DiffOp.weight_op(chart)
        one = DiffOp.identity(chart)
        corollary = compose(w - one * HALF, lie_derivative(chart, X, Xd.parity)) - compose(
            compose(w, w - one), DiffOp.scalar(div_hat)
        )
    return ShiftResult(new, delta, displayed, corollary)


# -- decomposition and recovery --------------------------------------------------------------

def _first_order_data(L: DiffOp) -> tuple:
    """(S, T, R, eps) of L = 1/2 S^{ab} d_b d_a + T^a d_a + R for a w-free operator."""
    chart = L.chart
    if L.wdegree() > 0:
        raise ValueError("operator must not involve the weight operator")
    if L.slice_order() > 2:
        raise ValueError("operator has order above two")
    if L.lam not in (None, Fraction(0)):
        raise ValueError("operator must have weight 0")
    n = chart.dim
    xs = [Density.of(chart.coordinate(a), 0, chart) for a in range(n)]
    S = [[generated_bracket(L, xs[a], xs[b]).component(0) for b in range(n)] for a in range(n)]
    T = [L.coefficient(tuple(1 if k == a else 0 for k in range(n)), 0, 0) for a in range(n)]
    R = apply(L, Density.one(chart)).component(0)
    eps = L.parity
    if eps is None:
        raise ValueError("operator has mixed parity")
    return S, T, R, eps


def _dS(chart: Chart, S, eps: int) -> list:
    """d_b S^{ba} (-1)^{b(eps+1)}."""
    n = chart.dim
    par = _par(chart)
    return [sum((_neg_if(S[b][a].diff(b), par[b] * (eps + 1) % 2) for b in range(n)), chart.zero())
            for a in range(n)]


def extract_upper_connection(L: DiffOp, w0) -> list:
    """gamma^a = (2 T^a - d_b S^{ba} (+-)) / (2 w0 - 1) for L acting on weight w0."""
    w0 = as_fraction(w0)
    if w0 == HALF:
        raise ValueError("at weight 1/2 the subprincipal symbol is a vector field and gives no upper connection")
    S, T, _, eps = _first_order_data(L)
    dS = _dS(L.chart, S, int(eps))
    return [(T[a] * 2 - dS[a]) / (2 * w0 - 1) for a in range(L.chart.dim)]


def _lie(chart: Chart, Q, parity) -> DiffOp:
    if all(q.is_zero() for q in Q):
        return DiffOp.zero(chart)
    return lie_derivative(chart, Q, parity)


def decompose_operator(L: DiffOp, w0, A) -> tuple:
    """L = Delta^LB_{w0} + Lie_Q + f relative to rho = e^A; returns (Q, f)."""
    chart = L.chart
    w0 = as_fraction(w0)
    A = chart(A)
    S, T, _, eps = _first_order_data(L)
    dS = _dS(chart, S, int(eps))
    lb = lb_pencil_from_volume(chart, S, A, 0, eps)
    Gam = lb.gamma
    Q = [(T[a] * 2 - dS[a] - Gam[a] * (2 * w0 - 1)) * HALF for a in range(chart.dim)]
    rest = L - specialize(canonical_pencil(lb), w0) - specialize(_lie(chart, Q, eps), w0)
    if rest.slice_order() > 0:
        raise ArithmeticError(f"residual is not of order zero: {rest}")
    f = apply(rest, Density.one(chart)).component(0)
    return Q, f


def recover_pencil(L: DiffOp, w0, A=0) -> DiffOp:
    """The unique canonical pencil whose value at w0 is L."""
    chart = L.chart
    w0 = as_fraction(w0)
    if w0 in (0, HALF, 1):
        raise ValueError(f"recovery is not unique at w0 = {w0}")
    A = chart(A)
    Q, f = decompose_operator(L, w0, A)
    S, _, _, eps = _first_order_data(L)
    lb = canonical_pencil(lb_pencil_from_volume(chart, S, A, 0, eps))
    w = DiffOp.weight_op(chart)
    one = DiffOp.identity(chart)
    lie = compose(w * 2 - one, _lie(chart, Q, eps)) * (1 / (2 * w0 - 1))
    quad = compose(compose(w, w - one), DiffOp.scalar(f)) * (1 / (w0 * (w0 - 1)))
    return lb + lie + quad


# -- flatness, cocycle, action -------------------------------------------------------------------

@dataclass
class FlatnessReport:
    residual: PhaseFn
    via_lower: PhaseFn | None = None

    @property
    def flat(self) -> bool:
        return self.residual.is_zero()


def flatness_check(chart: Chart, S, gamma, eps, gamma_lower=None) -> FlatnessReport:
    """(S, gamma^a p_a) on T*M; zero iff the upper connection is flat.

    With ``gamma_lower`` (gamma = S gamma_lower) and (S, S) = 0 it also forms
    sum_{a,b} (-1)^{a+1} S*(dx^a) S*(dx^b) d_b gamma_a with S*(dx^a) = S^{ac} p_c
    and asserts it agrees.
    """
    if Parity.parse(eps) == Parity.EVEN:
        raise ValueError("flatness via the odd bracket needs an odd S (eps = 1)")
    S = _matrix(chart, S)
    gamma = [chart(g) for g in gamma]
    SM = quadratic_form(chart, S)
    res = canonical_bracket(SM, linear_form(chart, gamma))
    rep = FlatnessReport(res)
    if gamma_lower is not None:
        low = list(ConnectionOnVol(chart, gamma_lower).coeffs)
        if raise_index(S, low) != gamma:
            raise ValueError("gamma is not S applied to gamma_lower")
        if canonical_bracket(SM, SM).is_zero():
            n = chart.dim
            par = _par(chart)
            star = [linear_form(chart, S[a]) for a in range(n)]
            acc = PhaseFn.zero(chart)
            for a in range(n):
                for b in range(n):
                    d = low[a].diff(b)
                    if d.is_zero():
                        continue
                    term = star[a] * star[b] * PhaseFn.scalar(d, chart)
                    acc = acc + _neg_if(term, (par[a] + 1) % 2)
            rep.via_lower = acc
            if acc != res:
                raise ArithmeticError(f"S*(d gamma) = {acc} disagrees with (S, gamma) = {res}")
    return rep


def bv_cocycle(S, g0: ConnectionOnVol, g1: ConnectionOnVol, eps=None) -> ScalarExpr:
    """c = d_a X^a (+-) - 1/2 (g0 + g1)_a X^a with X = g1 - g0 and indices raised by S."""
    chart = g0.chart
    S = _matrix(chart, S)
    eps = int(_infer_eps(chart, S) if eps is None else eps)
    par = _par(chart)
    Xlow = [b - a for a, b in zip(g0.coeffs, g1.coeffs)]
    Xup = raise_index(S, Xlow)
    div = sum((_neg_if(Xup[a].diff(a), par[a] * (eps + 1) % 2) for a in range(chart.dim)), chart.zero())
    mean = [a + b for a, b in zip(g0.coeffs, g1.coeffs)]
    return div - pair(mean, Xup) * HALF


class NonJacobiError(ValueError):
    """Raised when the data fails the Jacobi equations; carries the report."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass
class ActionReport:
    gamma_lower: list
    action: ScalarExpr | None
    status: str            # "exact", "twisted" or "theta-mismatch"
    theta_residual: ScalarExpr | None = None
    jacobi_residuals: tuple = ()
    notes: list = field(default_factory=list)


def _integrate_even(e: ScalarExpr, name: str) -> ScalarExpr | None:
    """Antiderivative in an even coordinate, coefficientwise; None if not rational."""
    chart = e.chart
    ring = chart.ring
    sym = sympy.Symbol(name)
    out = {}
    for key, v in e.terms.items():
        prim = sympy.integrate(v.as_expr(), sym)
        try:
            out[key] = ring.field.from_expr(sympy.cancel(prim))
        except (ValueError, TypeError, sympy.polys.polyerrors.PolynomialError):
            return None
    return ScalarExpr(chart, out)


def integrate_gradient(omega: Sequence[ScalarExpr]) -> ScalarExpr | None:
    """A with d_a A = omega_a, or None when the closed form is not exact in the chart."""
    chart = omega[0].chart
    A = chart.zero()
    for a, name in enumerate(chart.names):
        r = omega[a] - A.diff(a)
        if r.is_zero():
            continue
        if chart.parities[a] == Parity.ODD:
            if not r.diff(a).is_zero():
                return None
            piece = chart.coordinate(a) * r
        else:
            piece = _integrate_even(r, name)
            if piece is None:
                return None
        A = A + piece
    if any(A.diff(a) != omega[a] for a in range(chart.dim)):
        return None
    return A


def existence_of_action_check(data: BracketData) -> ActionReport:
    """Solve gamma^a = S^{ab} gamma_b and gamma_a = -d_a A; check theta = gamma^a gamma_a."""
    chart = data.chart
    if data.eps != Parity.ODD:
        raise ValueError("existence of action needs an odd bracket")
    if data.lam != 0:
        raise ValueError("existence of action needs lam = 0")
    try:
        inv = left_inverse([list(r) for r in data.S])
    except ZeroDivisionError:
        raise ValueError("S is degenerate") from None
    n = chart.dim
    low = [sum((inv[a][b] * data.gamma[b] for b in range(n)), chart.zero()) for a in range(n)]
    residuals = check_jacobi_equations(data)
    A = integrate_gradient([-g for g in low])
    th = data.theta - pair(low, list(data.gamma))
    if A is None:
        status = "twisted"
    elif not th.is_zero():
        status = "theta-mismatch"
    else:
        status = "exact"
    rep = ActionReport(low, A, status, th, residuals)
    if not th.is_zero():
        rep.notes.append(f"theta - gamma^a gamma_a = {th}")
    if any(not r.is_zero() for r in residuals):
        raise NonJacobiError("data does not satisfy the Jacobi equations", rep)
    return rep


def bv_master_check(data: BracketData, A) -> Density:
    """Delta_{1/2}(rho^{1/2}) with the flat half-density Laplacian, as a weight-1/2 density.

    Equals e^{-A/2} Delta_{1/2} e^{A/2} applied to 1, where Delta is the
    canonical pencil of S alone.
    """
    chart = data.chart
    A = chart(A)
    if data.eps != Parity.ODD:
        raise ValueError("the BV equation needs an odd bracket")
    expected = lb_pencil_from_volume(chart, data.S, A, data.lam, data.eps)
    if expected != data:
        raise ValueError("data is not the Laplace-Beltrami data of e^A")
    flat = BracketData(chart, data.S, [0] * chart.dim, 0, data.lam, data.eps)
    half = specialize(canonical_pencil(flat), HALF)
    op = conjugate(half, A * HALF)
    return Density.of(apply(op, Density.one(chart)).component(data.lam), HALF + data.lam, chart)


def bv_field_hamiltonian(data: BracketData, A) -> tuple:
    """(H, X, -grad H): the BV residual and the vector field of Delta^2 at lam = 0."""
    chart = data.chart
    H = bv_master_check(data, A)
    rep = classify_delta_squared(canonical_pencil(data), data)
    flat = BracketData(chart, data.S, [0] * chart.dim, 0, 0, data.eps)
    h = Density.of(H.component(HALF), 0, chart)
    grads = [grad_derivation(flat, part) for _, _, part in h.homogeneous_parts()]
    minus_grad = [chart.zero() for _ in range(chart.dim)]
    for g in grads:
        minus_grad = [m - c for m, c in zip(minus_grad, g.coords)]
    X = list(rep.vector_field) if rep.vector_field is not None else [chart.zero()] * chart.dim
    return H, X, minus_grad, rep


# -- Sturm-Liouville ---------------------------------------------------------------------------------

def schwarzian(y: ScalarExpr, name=0) -> ScalarExpr:
    """y'''/y' - 3/2 (y''/y')^2."""
    y1 = y.diff(name)
    y2 = y1.diff(name)
    y3 = y2.diff(name)
    r = y2 / y1
    return y3 / y1 - r * r * Fraction(3, 2)


@dataclass
class SturmReport:
    U: ScalarExpr
    U_new: ScalarExpr
    U_new_direct: ScalarExpr
    schwarzian: ScalarExpr
    routes_agree: bool
    sign: int | None            # s with U' = y_x^-2 (U + s/2 * S), if either sign holds
    magnitude_holds: bool
    operator: DiffOp
    transformed: DiffOp

    def as_dict(self) -> dict:
        return {
            "U": str(self.U),
            "U_new": str(self.U_new),
            "U_new_direct": str(self.U_new_direct),
            "schwarzian": str(self.schwarzian),
            "routes_agree": self.routes_agree,
            "schwarzian_sign": self.sign,
            "magnitude_holds": self.magnitude_holds,
        }


def sturm_pencil(data: BracketData) -> DiffOp:
    """s d^2 + (s_x + (2w+1) gamma) d + w gamma_x + w(w+1) theta, i.e. twice the canonical pencil."""
    return canonical_pencil(data) * 2


def _potential(op: DiffOp) -> ScalarExpr:
    """U with op = s d^2 + ... - U, read as minus the zeroth-order coefficient."""
    return -apply(op, Density.one(op.chart)).component(op.lam or 0)


def sturm_liouville_demo(chart: Chart, s, gamma, theta, ch: CoordChange) -> SturmReport:
    if chart.dim != 1 or chart.parities[0] != Parity.EVEN:
        raise ValueError("the Sturm-Liouville demo needs one even coordinate")
    s, gamma, theta = chart(s), chart(gamma), chart(theta)
    if s.is_zero():
        raise ValueError("s must be nonzero")
    data = BracketData(chart, [[s]], [gamma], theta, 2, Parity.EVEN)
    P = sturm_pencil(data)
    L = specialize(P, -HALF)
    U = _potential(L)
    new = transform_bracket_data(data, ch)
    L_new = specialize(sturm_pencil(new), -HALF)
    U_new = _potential(L_new)
    direct = specialize(transform_operator(P, ch), -HALF)
    U_direct = _potential(direct)
    y = ch.forward[ch.names[0]]
    Sy = schwarzian(y)
    yx2 = y.diff(0) ** 2
    base_new = U_new.relabel(chart)
    sign = None
    for sgn in (1, -1):
        if base_new == (U + Sy * (HALF * sgn)) / yx2:
            sign = sgn
            break
    mag = sign is not None or base_new * base_new == ((U - Sy * HALF) / yx2) ** 2
    return SturmReport(U, U_new, U_direct, Sy, L_new == direct and U_new == U_direct, sign, mag, L, L_new)
