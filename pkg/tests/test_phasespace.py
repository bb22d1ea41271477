import random
from fractions import Fraction

import pytest

from densalg.fixtures import f1, f2, f2_volume
from densalg.phasespace import (
    BracketData,
    PhaseFn,
    apply_D,
    canonical_bracket,
    master_hamiltonian,
    quadratic_form,
)
from densalg.scalar import ParityError


def P(chart, name):
    return PhaseFn.momentum(chart, name)


def X(chart, text):
    return PhaseFn.scalar(chart(text), chart)


def test_bracket_normalization(c2):
    assert canonical_bracket(P(c2, "x"), X(c2, "x")) == PhaseFn.scalar(c2.one(), c2)
    assert canonical_bracket(PhaseFn.pt(c2), PhaseFn.t(c2)) == PhaseFn.scalar(c2.one(), c2)


def test_odd_symplectic_S_squares_to_zero(c2):
    S = P(c2, "xi") * P(c2, "x")
    assert canonical_bracket(S, S).is_zero()


def test_weight_operator_on_t(c2):
    tpt = PhaseFn.t(c2) * PhaseFn.pt(c2)
    assert canonical_bracket(tpt, PhaseFn.t(c2)) == PhaseFn.t(c2)


def test_master_hamiltonian_zero(c1):
    d = BracketData.build(c1, [[0]], [0], 0)
    assert master_hamiltonian(d).is_zero()


def test_master_hamiltonian_f1(c1):
    H = master_hamiltonian(f1(chart=c1))
    px, t, pt = P(c1, "x"), PhaseFn.t(c1), PhaseFn.pt(c1)
    # 1/2 S p p + t gamma p p_t with gamma = -2x
    expected = px * px * Fraction(1, 2) - X(c1, "2*x") * t * px * pt
    assert H == expected
    assert H.coefficient((1,), 1, 1) == c1("-2*x")


def test_master_hamiltonian_weight_two(c1):
    d = BracketData.build(c1, [[1]], [0], 0, lam=2)
    assert master_hamiltonian(d) == PhaseFn.t(c1, 2) * P(c1, "x") * P(c1, "x") * Fraction(1, 2)


def test_D_of_constant(c2):
    S = quadratic_form(c2, f2(chart=c2).S)
    assert apply_D(S, X(c2, "3")).is_zero()


def _random_phasefn(chart, rng):
    atoms = [X(chart, "x"), X(chart, "xi"), X(chart, "x^2"), P(chart, "x"), P(chart, "xi"),
             PhaseFn.t(chart), PhaseFn.pt(chart), X(chart, "1")]
    out = PhaseFn.zero(chart)
    for _ in range(3):
        term = rng.choice(atoms) * rng.choice(atoms)
        out = out + term
    return out


def _homogeneous(F):
    ev, od = F.split_parity()
    return [(0, ev), (1, od)]


def test_D_squared_zero(c2):
    S = quadratic_form(c2, f2(chart=c2).S)
    rng = random.Random(0)
    for _ in range(10):
        F = _random_phasefn(c2, rng)
        assert apply_D(S, apply_D(S, F)).is_zero()


def test_D_of_exact_gradient(c2):
    S = quadratic_form(c2, f2(chart=c2).S)
    for A in ["x^2", "x^3 + 1", "1/(x + 1)"]:
        dA = apply_D(S, X(c2, A))
        assert apply_D(S, -dA).is_zero()


def test_antisymmetry_and_jacobi(c2):
    rng = random.Random(2)
    for _ in range(15):
        F, G, H = (_random_phasefn(c2, rng) for _ in range(3))
        for pf, f in _homogeneous(F):
            for pg, g in _homogeneous(G):
                sign = -1 if pf and pg else 1
                assert canonical_bracket(f, g) == -canonical_bracket(g, f) * sign
                for ph, h in _homogeneous(H):
                    # (f,(g,h)) = ((f,g),h) + (-1)^{fg} (g,(f,h))
                    lhs = canonical_bracket(f, canonical_bracket(g, h))
                    rhs = canonical_bracket(canonical_bracket(f, g), h) + canonical_bracket(g, canonical_bracket(f, h)) * sign
                    assert lhs == rhs


def test_bracket_is_derivation(c2):
    rng = random.Random(3)
    for _ in range(10):
        F, G, H = (_random_phasefn(c2, rng) for _ in range(3))
        for pf, f in _homogeneous(F):
            for pg, g in _homogeneous(G):
                sign = -1 if pf and pg else 1
                assert canonical_bracket(f, g * H) == canonical_bracket(f, g) * H + g * canonical_bracket(f, H) * sign


def test_double_bracket_reproduces_display(c2):
    # ((S, f), g) = S^{ab} d_b f d_a g (-1)^{a f}
    S = quadratic_form(c2, f2(chart=c2).S)
    f, g = c2("x^2*xi"), c2("x + xi")
    lhs = canonical_bracket(canonical_bracket(S, PhaseFn.scalar(f, c2)), PhaseFn.scalar(g, c2))
    # a = x, b = xi: S^{x xi} d_xi f d_x g ; a = xi, b = x: -(f odd) S^{xi x} d_x f d_xi g
    expected = f.diff("xi") * g.diff("x") - f.diff("x") * g.diff("xi")
    assert lhs == PhaseFn.scalar(expected, c2)


def test_jacobi_data_gives_nilpotent_master(c2):
    H = master_hamiltonian(f2_volume("x^2 + x^3", c2))
    assert canonical_bracket(H, H).is_zero()


def test_bracket_data_validation(c2, c1):
    with pytest.raises(ParityError):
        BracketData(c2, [[0, 1], [1, 0]], [0, 0], "xi", 0, "even")
    with pytest.raises(ParityError):
        BracketData(c1, [[1]], ["x"], "x", 0, "odd")
    with pytest.raises(ValueError):
        BracketData(c1, [[1, 0]], ["x"], 0)
