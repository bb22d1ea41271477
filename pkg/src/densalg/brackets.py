"""Long brackets on densities and their canonical generating operators.

A long bracket of weight ``lam`` and parity ``eps`` is fixed by coefficients
``(S^{ab}, gamma^a, theta)`` (see :class:`~densalg.phasespace.BracketData`).
This module evaluates such brackets, builds the unique self-adjoint
unit-killing second-order pencil generating them, inverts that
construction, checks the odd Jacobi equations, and classifies ``Delta^2``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Sequence

from .densities import (
    Density,
    Derivation,
    decompose_derivation,
    divergence,
)
from .operators import (
    DiffOp,
    adjoint,
    apply,
    compose,
    derivation_from_operator,
    lie_derivative,
)
from .phasespace import (
    BracketData,
    PhaseFn,
    canonical_bracket,
    linear_form,
    master_hamiltonian,
    quadratic_form,
)
from .scalar import Chart, Parity, ScalarExpr


HALF = Fraction(1, 2)


def _neg_if(c, flag):
    return -c if flag else c


# -- evaluation ---------------------------------------------------------------------

def _bracket_homogeneous(data: BracketData, w1, f: ScalarExpr, w2, g: ScalarExpr) -> ScalarExpr:
    chart = data.chart
    n = chart.dim
    fp = int(f.parity)
    par = [int(p) for p in chart.parities]
    out = chart.zero()
    df = [f.diff(a) for a in range(n)]
    dg = [g.diff(a) for a in range(n)]
    for a in range(n):
        sa = par[a] * fp
        for b in range(n):
            s = data.S[a][b]
            if s.is_zero() or df[b].is_zero() or dg[a].is_zero():
                continue
            out = out + _neg_if(s * df[b] * dg[a], sa)
        ga = data.gamma[a]
        if ga.is_zero():
            continue
        if w2 and not df[a].is_zero():
            out = out + ga * df[a] * g * w2
        if w1 and not dg[a].is_zero():
            out = out + _neg_if(ga * f * dg[a] * w1, sa)
    if w1 and w2 and not data.theta.is_zero():
        out = out + data.theta * f * g * (w1 * w2)
    return out


def long_bracket_eval(data: BracketData, psi: Density, chi: Density) -> Density:
    """{psi; chi} for arbitrary densities, by bilinearity over homogeneous parts."""
    out = Density.zero(data.chart)
    for w1, _, p in psi.homogeneous_parts():
        f = p.component(w1)
        for w2, _, q in chi.homogeneous_parts():
            g = q.component(w2)
            val = _bracket_homogeneous(data, w1, f, w2, g)
            out = out + Density.of(val, w1 + w2 + data.lam, data.chart)
    return out


def long_bracket_via_hamiltonian(data: BracketData, psi: Density, chi: Density) -> Density:
    """Independent route: ((S_hat, psi), chi) with the extended master Hamiltonian."""
    chart = data.chart
    H = master_hamiltonian(data)
    out = Density.zero(chart)
    for w1, _, p in psi.homogeneous_parts():
        F = PhaseFn.scalar(p.component(w1)) * PhaseFn.t(chart, w1)
        inner = canonical_bracket(H, F)
        for w2, _, q in chi.homogeneous_parts():
            G = PhaseFn.scalar(q.component(w2)) * PhaseFn.t(chart, w2)
            res = canonical_bracket(inner, G)
            for (mom, tp, qp), c in res.terms.items():
                if any(mom) or qp:
                    raise ArithmeticError("double bracket left momentum dependence")
                out = out + Density.of(c, tp, chart)
    return out


def generated_bracket(op: DiffOp, psi: Density, chi: Density) -> Density:
    """op(psi chi) - op(psi) chi - (-1)^{psi eps} psi op(chi) + op(1) psi chi."""
    chart = op.chart
    out = Density.zero(chart)
    one = apply(op, Density.one(chart))
    for eps, part in zip((0, 1), op.split_parity()):
        if part.is_zero():
            continue
        for w1, p1, ps in psi.homogeneous_parts():
            for w2, p2, ch in chi.homogeneous_parts():
                val = apply(part, ps * ch) - apply(part, ps) * ch
                t3 = ps * apply(part, ch)
                val = val - t3 if not (int(p1) * eps) else val + t3
                out = out + val
    for w1, p1, ps in psi.homogeneous_parts():
        for w2, p2, ch in chi.homogeneous_parts():
            out = out + one * ps * ch
    return out


# -- the canonical pencil -------------------------------------------------------------

def canonical_pencil(data: BracketData) -> DiffOp:
    """The unique self-adjoint, unit-killing second-order pencil generating ``data``."""
    chart = data.chart
    n = chart.dim
    par = [int(p) for p in chart.parities]
    eps = int(data.eps)
    lam = data.lam
    w = DiffOp.weight_op(chart)
    d = [DiffOp.partial(chart, a) for a in range(n)]
    body = DiffOp.zero(chart)
    for a in range(n):
        for b in range(n):
            s = data.S[a][b]
            if not s.is_zero():
                body = body + compose(DiffOp.scalar(s), compose(d[b], d[a]))
    for a in range(n):
        # d_b S^{ba} (-1)^{b(eps+1)} d_a
        first = chart.zero()
        for b in range(n):
            s = data.S[b][a]
            if not s.is_zero():
                first = first + _neg_if(s.diff(b), par[b] * (eps + 1) % 2)
        if not first.is_zero():
            body = body + compose(DiffOp.scalar(first), d[a])
        g = data.gamma[a]
        if not g.is_zero():
            body = body + compose(compose(w * 2 + (lam - 1), DiffOp.scalar(g)), d[a])
    divg = chart.zero()
    for a in range(n):
        divg = divg + _neg_if(data.gamma[a].diff(a), par[a] * (eps + 1) % 2)
    if not divg.is_zero():
        body = body + compose(w, DiffOp.scalar(divg))
    if not data.theta.is_zero():
        body = body + compose(compose(w, w + (lam - 1)), DiffOp.scalar(data.theta))
    return compose(DiffOp.t_power(chart, lam), body * HALF)


def bracket_from_operator(op: DiffOp) -> BracketData:
    """Read (S, gamma, theta, lam, eps) off the bracket generated by ``op``."""
    chart = op.chart
    if op.pencil_order() > 2:
        raise ValueError(
            f"operator has pencil order {op.pencil_order()} > 2; its bracket is not a bi-derivation"
        )
    lam = op.lam
    if lam is None:
        raise ValueError("operator mixes weights")
    eps = op.parity
    if eps is None:
        raise ValueError("operator has mixed parity")
    xs = [Density.of(chart.coordinate(a), 0, chart) for a in range(chart.dim)]
    tt = Density.of(chart.one(), 1, chart)
    S = [[generated_bracket(op, xs[a], xs[b]).component(lam) for b in range(chart.dim)] for a in range(chart.dim)]
    gamma = [generated_bracket(op, xs[a], tt).component(lam + 1) for a in range(chart.dim)]
    theta = generated_bracket(op, tt, tt).component(lam + 2)
    return BracketData(chart, S, gamma, theta, lam, eps)


def symmetrize_operator(op: DiffOp) -> DiffOp:
    """D'' - D''(1) with D'' = (D' + D'*)/2."""
    if op.pencil_order() > 2:
        raise ValueError("symmetrization needs pencil order <= 2")
    half = (op + adjoint(op)) * HALF
    return half - DiffOp.multiplication(apply(half, Density.one(op.chart)))


def is_canonical(op: DiffOp) -> bool:
    return adjoint(op) == op and apply(op, Density.one(op.chart)).is_zero()


# -- grad / div grad --------------------------------------------------------------------

def grad_derivation(data: BracketData, psi: Density) -> Derivation:
    """The derivation {psi; .} for psi homogeneous in weight and parity."""
    chart = data.chart
    w = psi.weight()
    f = psi.component(w)
    fp = f.parity
    if fp is None:
        raise ValueError("grad needs a parity-homogeneous density")
    n = chart.dim
    par = [int(p) for p in chart.parities]
    coords = []
    w0 = chart.zero()
    for a in range(n):
        acc = chart.zero()
        for b in range(n):
            s = data.S[a][b]
            if not s.is_zero():
                acc = acc + s * f.diff(b)
        if w:
            acc = acc + data.gamma[a] * f * w
        coords.append(_neg_if(acc, par[a] * int(fp)))
        w0 = w0 + data.gamma[a] * f.diff(a)
    if w:
        w0 = w0 + data.theta * f * w
    return Derivation(chart, coords, w0, w + data.lam, data.eps + fp)


def grad_derivations(data: BracketData, psi: Density) -> list:
    """grad on an arbitrary density, one homogeneous derivation per piece."""
    return [grad_derivation(data, part) for _, _, part in psi.homogeneous_parts()]


def div_grad(data: BracketData, psi: Density) -> Density:
    """(1/2) div grad psi; equals the canonical pencil applied to psi."""
    out = Density.zero(data.chart)
    for X in grad_derivations(data, psi):
        out = out + divergence(X)
    return out * HALF


# -- Jacobi equations --------------------------------------------------------------------

class EvenBracketError(ValueError):
    """Jacobi checks are meaningless for even symmetric brackets."""


def hamiltonians(data: BracketData) -> tuple:
    """(S, gamma, theta) as functions on T*M."""
    chart = data.chart
    return quadratic_form(chart, data.S), linear_form(chart, data.gamma), PhaseFn.scalar(data.theta, chart)


def check_jacobi_equations(data: BracketData) -> tuple:
    """The four residual Hamiltonians; all zero iff the odd long bracket is Jacobi."""
    if data.eps == Parity.EVEN:
        raise EvenBracketError(
            "an even symmetric bracket with the fake Jacobi property has all triple brackets zero; "
            "Jacobi is only checked for odd brackets"
        )
    S, G, T = hamiltonians(data)
    lam = data.lam
    br = canonical_bracket
    r1 = br(S, S) - S * G * (2 * lam)
    r2 = br(S, G) - S * T * lam
    r3 = br(S, T) + br(G, G) - G * T * lam
    r4 = br(G, T)
    return r1, r2, r3, r4


def jacobi_holds(data: BracketData) -> bool:
    return all(r.is_zero() for r in check_jacobi_equations(data))


def cyclic_jacobi_sum(data: BracketData, a: Density, b: Density, c: Density) -> Density:
    """(-1)^{ac}{{a,b},c} + (-1)^{cb}{{c,a},b} + (-1)^{ba}{{b,c},a} for homogeneous a, b, c."""
    pa, pb, pc = (int(x.parity) for x in (a, b, c))
    br = lambda u, v: long_bracket_eval(data, u, v)
    out = _neg_if(br(br(a, b), c), pa * pc)
    out = out + _neg_if(br(br(c, a), b), pc * pb)
    out = out + _neg_if(br(br(b, c), a), pb * pa)
    return out


# -- probes ------------------------------------------------------------------------------

PROBE_WEIGHTS = (Fraction(0), HALF, Fraction(1), Fraction(-1, 2), Fraction(2))


def probe_monomials(chart: Chart, max_degree: int = 3) -> list:
    """All monomials in the chart coordinates of degree <= max_degree (odd ones square-free)."""
    n = chart.dim
    out = []
    ranges = [range(2) if chart.parities[a] else range(max_degree + 1) for a in range(n)]
    for exps in product(*ranges):
        if sum(exps) > max_degree:
            continue
        m = chart.one()
        for a, e in enumerate(exps):
            if e:
                m = m * chart.coordinate(a) ** e
        out.append(m)
    return out


def probe_densities(chart: Chart, max_degree: int = 3, weights=PROBE_WEIGHTS) -> list:
    return [Density.of(m, w, chart) for w in weights for m in probe_monomials(chart, max_degree)]


def sample_pairs(items: Sequence, count: int, seed: int = 0) -> list:
    rng = random.Random(seed)
    return [(rng.choice(items), rng.choice(items)) for _ in range(count)]


def sample_triples(items: Sequence, count: int, seed: int = 0) -> list:
    rng = random.Random(seed)
    return [(rng.choice(items), rng.choice(items), rng.choice(items)) for _ in range(count)]


# -- Delta^2 ------------------------------------------------------------------------------

@dataclass
class DeltaSquaredReport:
    order: int
    slice_order: int
    square: DiffOp
    is_zero: bool
    derivation: Derivation | None = None
    divergence: Density | None = None
    vector_field: tuple | None = None
    lie_matches: bool | None = None
    poisson: bool | None = None
    top_symbol: PhaseFn | None = None
    notes: list = field(default_factory=list)

    @property
    def classification(self) -> str:
        if self.is_zero:
            return "zero"
        return f"order {self.order}"


def pencil_symbol(op: DiffOp, order: int) -> PhaseFn:
    """Pencil-order-``order`` part with d_a -> p_a and w -> t p_t."""
    chart = op.chart
    out = PhaseFn.zero(chart)
    tpt = PhaseFn.t(chart) * PhaseFn.pt(chart)
    for (lam, word, j), c in op.terms.items():
        if sum(word) + j != order:
            continue
        term = PhaseFn(chart, {(word, lam, 0): c})
        for _ in range(j):
            term = term * tpt
        out = out + term
    return out


def is_poisson_field(data: BracketData, Q: Sequence[ScalarExpr], parity, probes=None) -> bool:
    """(S, Q^a p_a) = 0 and Q{f,g} = {Qf,g} + (-1)^{Q(f+1)}{f,Qg} on probe functions."""
    chart = data.chart
    S = quadratic_form(chart, data.S)
    if not canonical_bracket(S, linear_form(chart, Q)).is_zero():
        return False
    X = Derivation(chart, Q, 0, 0, parity)
    base = BracketData(chart, data.S, [0] * chart.dim, 0, 0, data.eps)
    probes = probes or [Density.of(m, 0, chart) for m in probe_monomials(chart, 2)]
    for f, g in sample_pairs(probes, 12):
        lhs = X(long_bracket_eval(base, f, g))
        rhs = long_bracket_eval(base, X(f), g)
        second = long_bracket_eval(base, f, X(g))
        flag = int(X.parity) * (int(f.parity) + 1) % 2
        rhs = rhs - second if flag else rhs + second
        if lhs != rhs:
            return False
    return True


def classify_delta_squared(op: DiffOp, data: BracketData | None = None) -> DeltaSquaredReport:
    """Order of Delta^2 and, when it is a vector field, its Lie-derivative reading."""
    chart = op.chart
    if op.parity != Parity.ODD:
        raise ValueError("Delta^2 classification needs an odd operator")
    if not is_canonical(op):
        raise ValueError("operator must be self-adjoint and annihilate 1")
    if data is None:
        data = bracket_from_operator(op)
    sq = compose(op, op)
    rep = DeltaSquaredReport(
        order=sq.pencil_order(), slice_order=sq.slice_order(), square=sq, is_zero=sq.is_zero()
    )
    if rep.is_zero:
        return rep
    if rep.order <= 1 and apply(sq, Density.one(chart)).is_zero():
        X = derivation_from_operator(sq)
        rep.derivation = X
        rep.divergence = divergence(X)
        Q = X.coords
        rep.vector_field = Q
        if X.lam != 1:
            free, phi = decompose_derivation(X)
            rep.notes.append(f"decomposition remainder phi = {phi}")
        if X.lam == 0:
            rep.lie_matches = DiffOp.from_derivation(X) == lie_derivative(chart, Q, X.parity)
            rep.poisson = is_poisson_field(data, Q, X.parity)
    else:
        rep.top_symbol = pencil_symbol(sq, 3)
    return rep


def derivation_of_bracket_check(op: DiffOp, data: BracketData, probes=None, count: int = 20) -> Density:
    """First nonzero residual of the Koszul-signed derivation identity on probe pairs.

    Delta{a,b} = (-1)^{D e}{Delta a,b} + (-1)^{D(e+a)}{a,Delta b} with D, e the
    parities of Delta and of the bracket.
    """
    chart = op.chart
    probes = probes or probe_densities(chart, 2)
    dp, e = int(op.parity or 0), int(data.eps)
    for a, b in sample_pairs(probes, count):
        lhs = apply(op, long_bracket_eval(data, a, b))
        first = long_bracket_eval(data, apply(op, a), b)
        second = long_bracket_eval(data, a, apply(op, b))
        res = lhs - _neg_if(first, dp * e) - _neg_if(second, dp * (e + int(a.parity)) % 2)
        if not res.is_zero():
            return res
    return Density.zero(chart)


def ss_obstruction(data: BracketData) -> PhaseFn:
    """(S, S) on T*M."""
    S = quadratic_form(data.chart, data.S)
    return canonical_bracket(S, S)
