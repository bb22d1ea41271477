"""Small reference configurations used by the demos, tests and scenarios.

F1   even R^1, S = 1, gamma = -2x, theta = 0, lam = 0
F2   odd symplectic R^{1|1} (x even, xi odd), S^{x xi} = S^{xi x} = 1
F2b  odd symplectic R^{2|2} (x, y even; xi, eta odd) in Darboux form
F3   even R^1 at lam = 2 (Sturm-Liouville family)
"""
from __future__ import annotations

from .geometry import lb_pencil_from_volume
from .phasespace import BracketData
from .scalar import Chart, Parity


def chart_f1() -> Chart:
    return Chart(["x"], [Parity.EVEN])


def f1(lam=0, chart: Chart | None = None) -> BracketData:
    c = chart or chart_f1()
    return BracketData(c, [[1]], ["-2*x"], 0, lam, Parity.EVEN)


def chart_f2() -> Chart:
    return Chart(["x", "xi"], [Parity.EVEN, Parity.ODD])


F2_S = [[0, 1], [1, 0]]


def f2(gamma=(0, 0), theta=0, lam=0, chart: Chart | None = None) -> BracketData:
    c = chart or chart_f2()
    return BracketData(c, F2_S, list(gamma), theta, lam, Parity.ODD)


def f2_volume(A, chart: Chart | None = None) -> BracketData:
    """F2 with gamma = -S dA and theta = {A, A}."""
    c = chart or chart_f2()
    return lb_pencil_from_volume(c, F2_S, A, 0, Parity.ODD)


def chart_f2b() -> Chart:
    return Chart(["x", "y", "xi", "eta"], [Parity.EVEN, Parity.EVEN, Parity.ODD, Parity.ODD])


F2B_S = [[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]]


def f2b_volume(A, chart: Chart | None = None) -> BracketData:
    c = chart or chart_f2b()
    return lb_pencil_from_volume(c, F2B_S, A, 0, Parity.ODD)


def chart_f3() -> Chart:
    return Chart(["x"], [Parity.EVEN])


def f3(s=1, gamma=0, theta=0, chart: Chart | None = None) -> BracketData:
    c = chart or chart_f3()
    return BracketData(c, [[s]], [gamma], theta, 2, Parity.EVEN)
