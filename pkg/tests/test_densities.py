import random
from fractions import Fraction

import pytest

from densalg.densities import (
    Density,
    Derivation,
    decompose_derivation,
    derivation_apply,
    derivation_commutator,
    divergence,
    divergence_via_adjoint,
    residue_pairing,
)
from densalg.operators import lie_derivative, DiffOp

H = Fraction(1, 2)


def D(chart, text, w=0):
    return Density.of(chart(text), w, chart)


def test_half_weights_multiply(c1):
    assert D(c1, "x", H) * D(c1, "x^2", H) == D(c1, "x^3", 1)


def test_unit(c1):
    psi = D(c1, "x + 1", Fraction(1, 3))
    assert psi * Density.one(c1) == psi


def test_mixed_weight_product(c1):
    psi = D(c1, "x") + D(c1, "1", 1)
    chi = D(c1, "x^2", 1) + D(c1, "x")
    expected = D(c1, "x^2") + D(c1, "x^3 + x", 1) + D(c1, "x^2", 2)
    assert psi * chi == expected


def test_pairing_complementary_weights(c1):
    assert residue_pairing(D(c1, "x", Fraction(1, 3)), D(c1, "x^2", Fraction(2, 3))) == D(c1, "x^3", 1)
    assert residue_pairing(D(c1, "x", Fraction(1, 3)), D(c1, "x", Fraction(1, 3))).is_zero()


def test_pairing_selects_weight_one(c1):
    psi = D(c1, "x") + D(c1, "1", 1)
    chi = D(c1, "x^2", 1) + D(c1, "x")
    assert residue_pairing(psi, chi) == D(c1, "x^3 + x", 1)


def test_pairing_invariance(c2):
    rng = random.Random(1)
    pool = [D(c2, m, w) for m in ("x", "xi", "x*xi", "1", "x^2") for w in (0, H, 1, -H)]
    for _ in range(20):
        a, b, c = (rng.choice(pool) for _ in range(3))
        assert residue_pairing(a * b, c) == residue_pairing(a, b * c)


def test_weight_operator_eigenvalue(c1):
    w = Derivation.weight_operator(c1)
    assert w(D(c1, "x", 3)) == D(c1, "3*x", 3)


def test_euler_field(c1):
    X = Derivation(c1, ["x"])
    assert X(D(c1, "x^2")) == D(c1, "2*x^2")


def test_weighted_derivation_action(c1):
    X = Derivation(c1, ["1"], "x", lam=2)
    # t^2 (d_x + x w) on x t^(1/2)
    assert derivation_apply(X, D(c1, "x", H)) == D(c1, "1 + x^2/2", Fraction(5, 2))


def test_divergence_examples(c1):
    assert divergence(Derivation(c1, ["x"])) == D(c1, "1")
    assert divergence(Derivation.weight_operator(c1)) == D(c1, "-1")
    assert divergence(Derivation.partial(c1, "x")).is_zero()


def test_lie_lift_is_divergence_free(c2):
    op = lie_derivative(c2, [c2("x*xi"), c2("x^2")])
    from densalg.operators import derivation_from_operator

    assert divergence(derivation_from_operator(op)).is_zero()


def test_divergence_via_adjoint_examples(c1):
    assert divergence_via_adjoint(Derivation.partial(c1, "x")).is_zero()
    assert divergence_via_adjoint(Derivation.weight_operator(c1)) == D(c1, "-1")


def _random_derivation(chart, rng, lam, parity):
    pool = {0: ["x", "x^2", "1", "x*y", "xi*eta", "2*x + 3"], 1: ["xi", "eta", "x*xi", "y*eta", "x^2*eta"]}
    coords = []
    for a, p in enumerate(chart.parities):
        need = (int(p) + parity) % 2
        coords.append(chart(rng.choice(pool[need])) * rng.randint(-2, 2))
    w = chart(rng.choice(pool[parity])) * rng.randint(-2, 2)
    return Derivation(chart, coords, w, lam, parity)


@pytest.mark.parametrize("lam", [0, 2, -1])
def test_decomposition_round_trip(c2b, lam):
    rng = random.Random(lam + 10)
    for _ in range(10):
        X = _random_derivation(c2b, rng, lam, rng.randint(0, 1))
        free, phi = decompose_derivation(X)
        assert divergence(free).is_zero()
        assert free + Derivation(c2b, [0] * 4, phi.component(lam), lam, X.parity) == X


def test_decomposition_examples(c1):
    X = Derivation(c1, ["x"], 1)
    free, phi = decompose_derivation(X)
    assert free == X and phi.is_zero()
    free, phi = decompose_derivation(Derivation.weight_operator(c1))
    assert free.is_zero() and phi == D(c1, "1")
    with pytest.raises(ValueError):
        decompose_derivation(Derivation(c1, ["x"], 0, 1))


def test_commutator_examples(c1):
    d = Derivation.partial(c1, "x")
    assert derivation_commutator(d, Derivation(c1, ["x"])) == d
    X = Derivation(c1, ["x^2"], "x", lam=2)
    assert derivation_commutator(Derivation.weight_operator(c1), X) == X.scaled(D(c1, "2"))


def test_divergence_by_hand(c1):
    X, Y = Derivation(c1, ["x^2"]), Derivation.partial(c1, "x")
    assert divergence(derivation_commutator(X, Y)) == D(c1, "-2")


def test_divergence_is_flat(c2b):
    rng = random.Random(4)
    for _ in range(10):
        X = _random_derivation(c2b, rng, rng.choice([0, 2, -1]), rng.randint(0, 1))
        Y = _random_derivation(c2b, rng, rng.choice([0, 1]), rng.randint(0, 1))
        sign = -1 if X.parity and Y.parity else 1
        lhs = divergence(derivation_commutator(X, Y))
        rhs = X(divergence(Y)) - Y(divergence(X)) * sign
        assert lhs == rhs
        assert divergence_via_adjoint(X) == divergence(X)


def test_divergence_module_property(c2b):
    rng = random.Random(5)
    for _ in range(10):
        X = _random_derivation(c2b, rng, 0, rng.randint(0, 1))
        a = D(c2b, rng.choice(["x*xi", "y^2", "eta", "x + 1"]), rng.choice([0, H, 1]))
        sign = -1 if a.parity and X.parity else 1
        assert divergence(X.scaled(a)) == a * divergence(X) + X(a) * sign


def test_derivation_parity_is_checked(c2):
    from densalg.scalar import ParityError

    with pytest.raises(ParityError):
        Derivation(c2, ["x", "x"], 0, 0, "even")


def test_operator_of_derivation_agrees(c2):
    X = Derivation(c2, ["xi", "x"], "x*xi", 0)
    psi = D(c2, "x^2*xi + x", H)
    assert DiffOp.from_derivation(X)(psi) == X(psi)
