from fractions import Fraction

import pytest

from densalg.brackets import canonical_pencil, is_canonical
from densalg.fixtures import F2_S, F2B_S, f1, f2, f2_volume, f2b_volume
from densalg.geometry import (
    ConnectionOnVol,
    CoordChange,
    NonJacobiError,
    bv_cocycle,
    bv_field_hamiltonian,
    bv_master_check,
    decompose_operator,
    existence_of_action_check,
    extract_upper_connection,
    flatness_check,
    integrate_gradient,
    lb_pencil_direct,
    lb_pencil_from_volume,
    pencil_from_connection,
    pencil_shift,
    raise_index,
    recover_pencil,
    schwarzian,
    sturm_liouville_demo,
    transform_bracket_data,
    transform_bracket_data_via_brackets,
    transform_operator,
)
from densalg.operators import DiffOp, compose, lie_derivative, specialize
from densalg.scalar import Chart

H = Fraction(1, 2)

EVEN_CHANGES = [{"y": "x^2"}, {"y": "2*x + 3"}, {"y": "x^3 + x"}]
SUPER_CHANGES = [
    {"X": "x + xi*eta", "Y": "y", "XI": "xi + x*eta", "ETA": "eta"},
    {"X": "x", "Y": "y + x*xi*eta", "XI": "xi + eta*y", "ETA": "eta + x*xi"},
    {"X": "2*x + y", "Y": "y", "XI": "xi", "ETA": "eta + xi"},
]


def test_change_checks(c1):
    ch = CoordChange(c1, ["y"], {"y": "2*x + 3"}, inverse={"x": "(y - 3)/2"}, J=2)
    assert ch.J == c1("2")
    with pytest.raises(ValueError):
        CoordChange(c1, ["y"], {"y": "2*x + 3"}, J=3)
    with pytest.raises(ValueError):
        CoordChange(c1, ["y"], {"y": "2*x + 3"}, inverse={"x": "y - 3"})
    with pytest.raises(ValueError):
        CoordChange(c1, ["y"], {"y": "5"})


def test_berezinian_of_super_change(c2b):
    ch = CoordChange(c2b, list(SUPER_CHANGES[1]), SUPER_CHANGES[1])
    # hand Schur complement: det(A - B D^-1 C) = 1 + x^2 xi eta/(1 - xy), det D = 1 - xy
    assert ch.J == c2b("1/(1 - x*y) + x^2*xi*eta/(1 - x*y)^2")
    assert CoordChange(c2b, list(SUPER_CHANGES[0]), SUPER_CHANGES[0]).J == c2b("1")
    P = transform_operator(canonical_pencil(f2b_volume("x*xi*eta", c2b)), ch)
    assert is_canonical(P)


@pytest.mark.parametrize("lam", [0, 2])
@pytest.mark.parametrize("fwd", EVEN_CHANGES)
def test_naturality_even(c1, lam, fwd):
    d = f1(lam=lam, chart=c1)
    ch = CoordChange(c1, ["y"], fwd)
    t = transform_bracket_data(d, ch)
    assert t == transform_bracket_data_via_brackets(d, ch)
    assert canonical_pencil(t) == transform_operator(canonical_pencil(d), ch)


@pytest.mark.parametrize("lam", [0, 2])
@pytest.mark.parametrize("fwd", SUPER_CHANGES)
def test_naturality_super(c2b, lam, fwd):
    d = f2b_volume("x^2 + y*xi*eta", c2b).with_(lam=lam)
    ch = CoordChange(c2b, list(fwd), fwd)
    t = transform_bracket_data(d, ch)
    assert t == transform_bracket_data_via_brackets(d, ch)
    assert canonical_pencil(t) == transform_operator(canonical_pencil(d), ch)


def test_identity_change_is_trivial(c2):
    d = f2_volume("x^3", c2)
    ch = CoordChange.identity(c2)
    t = transform_bracket_data(d, ch)
    assert [[e.relabel(c2) for e in row] for row in t.S] == [[e for e in row] for row in d.S]


def test_connection_transform_matches_data_law(c1):
    conn = ConnectionOnVol(c1, ["x^2"])
    ch = CoordChange(c1, ["y"], {"y": "x^3 + x"})
    d = pencil_from_connection([[1]], conn)
    via_data = transform_bracket_data(d, ch)
    via_conn = pencil_from_connection([list(via_data.S[0])], conn.transform(ch))
    assert via_conn.gamma == via_data.gamma and via_conn.theta == via_data.theta


def test_lb_direct_oracle(c2b, c1):
    for A in ["x*xi*eta", "x^2 + y*xi*eta"]:
        assert canonical_pencil(lb_pencil_from_volume(c2b, F2B_S, A)) == lb_pencil_direct(c2b, F2B_S, A)
    assert canonical_pencil(lb_pencil_from_volume(c1, [["x^2 + 1"]], "x^3")) == lb_pencil_direct(c1, [["x^2 + 1"]], "x^3")


def test_lb_volume_recovers_f1(c1):
    # F1 shares gamma with the Laplace-Beltrami data of rho = e^{x^2}
    d = lb_pencil_from_volume(c1, [[1]], "x^2")
    assert d.gamma == f1(chart=c1).gamma and d.theta == c1("4*x^2")


@pytest.mark.parametrize("lam", [0, 2, -1])
def test_pencil_shift_even(c1, lam):
    assert pencil_shift(f1(lam=lam, chart=c1), ["x^2 + 1"], "x^3").consistent


def test_pencil_shift_unit(c1):
    r = pencil_shift(f1(chart=c1), [1], 0)
    w, dx = DiffOp.weight_op(c1), DiffOp.partial(c1, "x")
    assert r.delta == compose(w - H, dx)


def test_pencil_shift_super(c2b):
    assert pencil_shift(f2b_volume("x*xi*eta", c2b), ["xi", "0", "x", "y*xi*eta"], "x*xi").consistent


def test_cocycle_additive(c2b):
    c = Chart(["x", "y"], ["even", "even"])
    cases = [
        (c, [[1, 0], [0, "x"]], [["x*y", "y"], ["1", "x^2"], ["y^2", "x/(y + 1)"]]),
        (c2b, F2B_S, [["x*y + xi*eta", "1", "x*xi", "eta + y*xi"], ["y^2", "x*xi*eta", "eta", "0"],
                      ["0", "x", "xi*y", "x*eta"]]),
    ]
    for chart, S, gs in cases:
        g = [ConnectionOnVol(chart, x) for x in gs]
        assert bv_cocycle(S, g[0], g[1]) + bv_cocycle(S, g[1], g[2]) == bv_cocycle(S, g[0], g[2])


def test_cocycle_is_pencil_change(c1):
    g0, g1 = ConnectionOnVol(c1, ["x"]), ConnectionOnVol(c1, ["x^2 - 1"])
    D0 = canonical_pencil(pencil_from_connection([[1]], g0))
    D1 = canonical_pencil(pencil_from_connection([[1]], g1))
    X = raise_index([[c1("1")]], list((g1 - g0).coeffs))
    w, one = DiffOp.weight_op(c1), DiffOp.identity(c1)
    rhs = compose(w * 2 - one, lie_derivative(c1, X, 0)) * H - compose(compose(w, w - one),
                                                                        DiffOp.scalar(bv_cocycle([[1]], g0, g1)))
    assert D1 - D0 == rhs


def test_half_density_invariance(c1):
    z, X = ConnectionOnVol(c1, [0]), ConnectionOnVol(c1, ["-2/x"])
    assert bv_cocycle([[1]], z, X).is_zero()
    d0, d1 = pencil_from_connection([[1]], z), pencil_from_connection([[1]], X)
    assert specialize(canonical_pencil(d1), H) == specialize(canonical_pencil(d0), H)


def test_flatness(c2, c2b):
    d = f2_volume("x^3", c2)
    assert flatness_check(c2, F2_S, d.gamma, 1, [c2("-3*x^2"), c2("0")]).flat
    A = "x*y*xi*eta + x^3"
    low = ConnectionOnVol.from_volume(c2b, A).coeffs
    assert flatness_check(c2b, F2B_S, f2b_volume(A, c2b).gamma, 1, low).flat
    low = [c2b("x*y + xi*eta"), c2b("x^2"), c2b("y*eta"), c2b("x*xi")]
    rep = flatness_check(c2b, F2B_S, raise_index([[c2b(e) for e in r] for r in F2B_S], low), 1, low)
    assert not rep.flat and rep.via_lower == rep.residual
    assert not flatness_check(c2, F2_S, ["xi*x", "0"], 1).flat
    with pytest.raises(ValueError):
        flatness_check(c2, F2_S, [0, 0], 0)


def test_action_exact_and_twisted(c2):
    rep = existence_of_action_check(f2_volume("x^2 + x", c2))
    assert rep.status == "exact" and rep.action == c2("x^2 + x")
    tw = pencil_from_connection(F2_S, ConnectionOnVol(c2, ["1/x", "0"]))
    assert existence_of_action_check(tw).status == "twisted"


def test_action_non_jacobi(c2):
    with pytest.raises(NonJacobiError) as err:
        existence_of_action_check(f2(theta="xi", chart=c2))
    assert err.value.report.status == "theta-mismatch"


def test_integrate_gradient(c1):
    assert integrate_gradient([c1("3*x^2 + 1")]) == c1("x^3 + x")
    assert integrate_gradient([c1("1/x")]) is None


def test_bv_master_zero_volume(c2):
    d = f2_volume("0", c2)
    assert bv_master_check(d, "0").is_zero()
    H_, X, mg, rep = bv_field_hamiltonian(d, "0")
    assert rep.is_zero and all(x.is_zero() for x in X)


def test_bv_field_is_minus_grad(c2b):
    A = "x*y*xi*eta + x^3"
    H_, X, mg, rep = bv_field_hamiltonian(f2b_volume(A, c2b), A)
    assert not H_.is_zero() and not rep.is_zero
    assert X == mg


def test_bv_zero_tests_agree(c2b):
    for A, zero in [("x + y", True), ("x*y", True), ("xi*eta", True), ("x*y*xi*eta + x^3", False)]:
        H_, X, mg, rep = bv_field_hamiltonian(f2b_volume(A, c2b), A)
        assert H_.is_zero() == rep.is_zero == zero


def test_recovery(c1):
    P = canonical_pencil(f1(chart=c1))
    L = specialize(P, 2)
    assert recover_pencil(L, 2) == P
    assert recover_pencil(L, 2, "x^2") == P
    assert recover_pencil(L, 2, "x^3 + x") == P
    for w in (0, H, 1):
        with pytest.raises(ValueError):
            recover_pencil(L, w)


def test_decomposition_f1(c1):
    Q, f = decompose_operator(specialize(canonical_pencil(f1(chart=c1)), 3), 3, 0)
    assert Q == [c1("-5*x")] and f == c1("12")


def test_upper_connection(c1):
    P = canonical_pencil(f1(chart=c1))
    assert extract_upper_connection(specialize(P, 0), 0) == [c1("-2*x")]
    with pytest.raises(ValueError):
        extract_upper_connection(specialize(P, H), H)


def test_schwarzian(c1):
    assert schwarzian(c1("x^2")) == c1("-3/(2*x^2)")
    assert schwarzian(c1("5*x - 7")).is_zero()
    assert schwarzian(c1("(2*x + 1)/(x + 3)")).is_zero()


def test_sturm_liouville(c1):
    rep = sturm_liouville_demo(c1, 1, 0, 0, CoordChange(c1, ["y"], {"y": "x^2"}))
    assert rep.routes_agree and rep.magnitude_holds
    assert rep.U.is_zero()
    assert rep.U_new.relabel(c1) == c1("-3/(16*x^4)")
    assert rep.sign == 1


def test_sturm_affine(c1):
    rep = sturm_liouville_demo(c1, 1, "x", 0, CoordChange(c1, ["y"], {"y": "3*x + 1"}))
    assert rep.schwarzian.is_zero() and rep.routes_agree and rep.magnitude_holds
