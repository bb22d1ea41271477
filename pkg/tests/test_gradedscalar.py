import random
from fractions import Fraction

import pytest

from densalg.parser import ParseError, parse_expression
from densalg.scalar import (
    Chart,
    ChartError,
    Parity,
    ParityError,
    berezinian,
    determinant,
    differentiate,
    equals,
    format_scalar,
    left_inverse,
    multiply,
    substitute,
)


def test_odd_square_vanishes(cs):
    xi = cs.coordinate("xi")
    assert multiply(xi, xi).is_zero()


def test_odd_generators_anticommute(cs):
    xi, eta = cs.coordinate("xi"), cs.coordinate("eta")
    assert multiply(eta, xi) == -multiply(xi, eta)


def test_rational_cancellation(cs):
    x = cs.coordinate("x")
    assert multiply(cs.const(1) / x, x) == cs.one()


def test_mismatched_charts_rejected(c1, cs):
    with pytest.raises(ChartError):
        multiply(c1.coordinate("x"), cs.coordinate("x"))


def test_polynomial_derivative(c1):
    assert differentiate(c1("x^2"), "x") == c1("2*x")


def test_left_derivative_convention(cs):
    assert differentiate(cs("xi*eta"), "xi") == cs("eta")
    assert differentiate(cs("eta*xi"), "xi") == cs("-eta")


def test_unknown_coordinate_derivative(c1):
    with pytest.raises(ChartError):
        differentiate(c1("x"), "z")


def test_substitute_even_map():
    src = Chart(["x"], ["even"])
    dst = Chart(["y"], ["even"])
    out = substitute(src("x + 1"), {"x": dst("y^2")}, target=dst)
    assert out == dst("y^2 + 1")


def test_substitute_identity(cs):
    e = cs("x*xi + y/(x+1) + eta*xi")
    assert substitute(e, {}) == e


def test_substitute_nilpotent_shift_inverse(cs):
    e = substitute(cs("1/x"), {"x": cs("x + xi*eta")})
    assert e == cs("1/x - xi*eta/x^2")
    assert e * cs("x + xi*eta") == cs.one()


def test_substitute_parity_violation(cs):
    with pytest.raises(ParityError):
        substitute(cs("x"), {"x": cs("xi")})


def test_substitute_zero_denominator(cs):
    with pytest.raises(ZeroDivisionError):
        substitute(cs("1/(x - y)"), {"x": cs("y")})


def test_equals_algebraic_identity(c1):
    assert equals(c1("(x^2 - 1)/(x - 1)"), c1("x + 1"))


def test_equals_detects_soul(cs):
    assert not equals(cs("x"), cs("x + xi*eta"))


def _random_expr(chart, rng):
    atoms = ["x", "y", "xi", "eta", "1", "2", "x*y", "xi*eta", "x*xi", "y*eta"]
    return chart(" + ".join(rng.choice(atoms) for _ in range(3)))


def test_reassociation(cs):
    rng = random.Random(0)
    for _ in range(10):
        a, b, c = (_random_expr(cs, rng) for _ in range(3))
        assert equals((a * b) * c, a * (b * c))


def test_graded_commutativity_random(cs):
    rng = random.Random(1)
    for _ in range(20):
        a = _random_expr(cs, rng)
        b = _random_expr(cs, rng)
        for pa, ha in a.homogeneous_parts():
            for pb, hb in b.homogeneous_parts():
                sign = -1 if pa and pb else 1
                assert ha * hb == hb * ha * sign


def test_inverse_of_nilpotent_perturbation(cs):
    e = cs("2 + x*xi*eta")
    assert e * e.inverse() == cs.one()
    with pytest.raises(ZeroDivisionError):
        cs("xi*eta").inverse()


def test_parity_of_homogeneous_and_mixed(cs):
    assert cs("xi*x").parity == Parity.ODD
    assert cs("xi*eta + 1").parity == Parity.EVEN
    assert cs("xi + 1").parity is None


def test_format_round_trip(cs):
    for text in ["1/x - xi + (3*x^2/(4*x + 8))*xi*eta", "-xi*eta", "0", "x^3/7 - 2/3"]:
        e = cs(text)
        assert cs(format_scalar(e)) == e


def test_parser_positioned_errors(c1):
    with pytest.raises(ParseError) as err:
        parse_expression("x+*y", c1)
    assert (err.value.line, err.value.column) == (1, 3)
    with pytest.raises(ParseError, match="undeclared"):
        parse_expression("x + z", c1)
    with pytest.raises(ParseError):
        parse_expression("", c1)
    with pytest.raises(ParseError):
        parse_expression("(x + 1", c1)


def test_parser_rational_literals_and_powers(c1):
    assert parse_expression("3/4", c1).constant_value() == Fraction(3, 4)
    assert parse_expression("0.25*x", c1) == c1("x/4")
    assert parse_expression("x^-2", c1) == c1("1/(x*x)")
    assert parse_expression("-(x - 1)^2", c1) == c1("-x^2 + 2*x - 1")


def test_left_inverse_and_determinant(cs):
    M = [[cs("x"), cs("xi")], [cs("eta"), cs("1")]]
    N = left_inverse(M)
    for i in range(2):
        for j in range(2):
            prod = sum((N[i][k] * M[k][j] for k in range(2)), cs.zero())
            assert prod == (cs.one() if i == j else cs.zero())
    assert determinant([[cs("x"), cs("1")], [cs("y"), cs("2")]]) == cs("2*x - y")


def test_berezinian_block_diagonal(cs):
    # rows/cols ordered (x, xi): Ber = a / d
    M = [[cs("x"), cs.zero()], [cs.zero(), cs("y")]]
    assert berezinian(M, ["even", "odd"]) == cs("x/y")


def test_berezinian_with_odd_blocks(cs):
    # rows/cols (x, xi): A - B D^-1 C = x - xi*eta/2, divided by D = 2
    M = [[cs("x"), cs("xi")], [cs("eta"), cs("2")]]
    assert berezinian(M, ["even", "odd"]) == cs("(x - xi*eta/2)/2")
