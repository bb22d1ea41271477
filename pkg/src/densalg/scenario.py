"""Scenario documents: a chart, bracket data, optional extras, and a command list.

A scenario is a JSON object::

    {
      "name": "F1",
      "chart": [{"name": "x", "parity": "even"}],
      "lambda": "0",
      "parity": "even",
      "S": [["1"]],
      "gamma": {"x": "-2*x"},
      "theta": "0",
      "A": "x^2",
      "change": {"new": ["y"], "forward": {"y": "x^2"}, "inverse": null, "J": "2*x"},
      "commands": [{"command": "build-pencil"}, {"command": "recover", "w0": "2"}]
    }

``gamma``/``theta`` may be omitted when ``A`` is given; the data is then the
Laplace-Beltrami data of e^A.  Expression strings use the scalar grammar.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .brackets import (
    bracket_from_operator,
    canonical_pencil,
    check_jacobi_equations,
    classify_delta_squared,
    generated_bracket,
    is_canonical,
    long_bracket_eval,
    probe_densities,
    sample_pairs,
)
from .geometry import (
    ConnectionOnVol,
    CoordChange,
    NonJacobiError,
    bv_cocycle,
    bv_field_hamiltonian,
    decompose_operator,
    existence_of_action_check,
    flatness_check,
    lb_pencil_from_volume,
    recover_pencil,
    sturm_liouville_demo,
    transform_bracket_data,
    transform_bracket_data_via_brackets,
    transform_operator,
)
from .operators import check_order_agreement, lie_derivative, specialize
from .parser import ParseError
from .phasespace import BracketData, format_phasefn
from .scalar import Chart, ChartError, Parity, ParityError, as_fraction

COMMANDS = (
    "build-pencil",
    "bracket-roundtrip",
    "jacobi",
    "delta-squared",
    "transform",
    "recover",
    "bv-master",
    "sturm-demo",
    "cocycle",
    "decompose",
    "flatness",
    "action",
)

ODD_ONLY = {"jacobi", "delta-squared", "bv-master", "flatness", "action"}


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario document."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


@dataclass
class Scenario:
    name: str
    chart: Chart
    data: BracketData
    A: Any = None
    change: CoordChange | None = None
    commands: list = field(default_factory=list)
    source: dict = field(default_factory=dict)


@dataclass
class CommandResult:
    index: int
    command: str
    status: str                 # "pass", "fail" or "error"
    residuals: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def as_dict(self, timing: bool = True) -> dict:
        out = {
            "index": self.index,
            "command": self.command,
            "status": self.status,
            "residuals": self.residuals,
            "details": self.details,
        }
        if timing:
            out["seconds"] = round(self.seconds, 4)
        return out


@dataclass
class Report:
    scenario: str
    fixture: dict
    results: list

    @property
    def passed(self) -> bool:
        return all(r.status == "pass" for r in self.results)

    def as_dict(self, timing: bool = True) -> dict:
        return {
            "scenario": self.scenario,
            "fixture": self.fixture,
            "passed": self.passed,
            "results": [r.as_dict(timing) for r in self.results],
        }

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.as_dict(timing), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"scenario {self.scenario}"]
        for r in self.results:
            lines.append(f"  [{r.status.upper():5}] #{r.index} {r.command} ({r.seconds:.3f}s)")
            for k, v in r.residuals.items():
                lines.append(f"      residual {k}: {v}")
            for k, v in r.details.items():
                lines.append(f"      {k}: {v}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


# -- parsing ------------------------------------------------------------------------------

def _expr(chart: Chart, text, where: str):
    if isinstance(text, bool) or not isinstance(text, (str, int)):
        raise ScenarioError(f"{where}: expected an expression string")
    try:
        return chart(str(text))
    except ParseError as exc:
        raise ScenarioError(f"{where}: {exc}") from None
    except ZeroDivisionError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _rational(value, where: str) -> Fraction:
    try:
        if isinstance(value, str):
            return Fraction(value.strip())
        return as_fraction(value)
    except (ValueError, TypeError, ZeroDivisionError):
        raise ScenarioError(f"{where}: expected a rational number, got {value!r}") from None


def _parse_chart(doc) -> Chart:
    if not isinstance(doc, list) or not doc:
        raise ScenarioError("chart: expected a non-empty list of coordinates")
    names, pars = [], []
    for i, c in enumerate(doc):
        if not isinstance(c, dict) or "name" not in c:
            raise ScenarioError(f"chart[{i}]: expected an object with 'name' and 'parity'")
        names.append(c["name"])
        try:
            pars.append(Parity.parse(c.get("parity", "even")))
        except (ValueError, KeyError):
            raise ScenarioError(f"chart[{i}]: unknown parity {c.get('parity')!r}") from None
    try:
        return Chart(names, pars)
    except ChartError as exc:
        raise ScenarioError(f"chart: {exc}") from None


def _vector(chart: Chart, doc, where: str) -> list:
    if isinstance(doc, dict):
        unknown = set(doc) - set(chart.names)
        if unknown:
            raise ScenarioError(f"{where}: undeclared coordinate {sorted(unknown)[0]!r}")
        return [_expr(chart, doc.get(n, "0"), f"{where}.{n}") for n in chart.names]
    if isinstance(doc, list) and len(doc) == chart.dim:
        return [_expr(chart, e, f"{where}[{i}]") for i, e in enumerate(doc)]
    raise ScenarioError(f"{where}: expected an object keyed by coordinate or a list of length {chart.dim}")


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    chart = _parse_chart(doc.get("chart"))
    n = chart.dim
    lam = _rational(doc.get("lambda", 0), "lambda")
    S_doc = doc.get("S")
    if not isinstance(S_doc, list) or len(S_doc) != n or any(not isinstance(r, list) or len(r) != n for r in S_doc):
        raise ScenarioError(f"S: expected a {n}x{n} matrix of expressions")
    S = [[_expr(chart, e, f"S[{i}][{j}]") for j, e in enumerate(row)] for i, row in enumerate(S_doc)]
    A = _expr(chart, doc["A"], "A") if doc.get("A") is not None else None
    eps = doc.get("parity")
    try:
        eps = Parity.parse(eps) if eps is not None else None
    except (ValueError, KeyError):
        raise ScenarioError(f"parity: unknown parity {eps!r}") from None
    try:
        if "gamma" not in doc and "theta" not in doc and A is not None:
            data = lb_pencil_from_volume(chart, S, A, lam, eps)
        else:
            gamma = _vector(chart, doc.get("gamma", ["0"] * n), "gamma")
            theta = _expr(chart, doc.get("theta", "0"), "theta")
            data = BracketData.build(chart, S, gamma, theta, lam, eps)
    except (ParityError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"bracket data: {exc}") from None
    change = None
    if doc.get("change") is not None:
        ch = doc["change"]
        if not isinstance(ch, dict) or "new" not in ch or "forward" not in ch:
            raise ScenarioError("change: expected an object with 'new' and 'forward'")
        try:
            change = CoordChange(chart, ch["new"], {k: _expr(chart, v, f"change.forward.{k}") for k, v in ch["forward"].items()},
                                 inverse=ch.get("inverse"), J=ch.get("J"))
        except (ParseError, ChartError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"change: {exc}") from None
    cmds = doc.get("commands", [])
    if not isinstance(cmds, list):
        raise ScenarioError("commands: expected a list")
    for i, c in enumerate(cmds):
        if not isinstance(c, dict) or c.get("command") not in COMMANDS:
            raise ScenarioError(f"commands[{i}]: unknown command {c.get('command') if isinstance(c, dict) else c!r}")
        name = c["command"]
        if name in ODD_ONLY and data.eps != Parity.ODD:
            raise ScenarioError(f"commands[{i}]: {name} needs an odd bracket")
        if name == "sturm-demo" and (n != 1 or chart.parities[0] != Parity.EVEN or lam != 2):
            raise ScenarioError(f"commands[{i}]: sturm-demo needs one even coordinate and lambda = 2")
        if name in ("transform", "sturm-demo") and change is None:
            raise ScenarioError(f"commands[{i}]: {name} needs a coordinate change")
        if name == "bv-master" and A is None:
            raise ScenarioError(f"commands[{i}]: bv-master needs A")
    return Scenario(str(doc.get("name", "scenario")), chart, data, A, change, cmds, doc)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# -- commands ---------------------------------------------------------------------------------

def _cmd_build_pencil(sc: Scenario, params: dict, res: CommandResult):
    P = canonical_pencil(sc.data)
    res.details["pencil"] = str(P)
    res.details["pencil_order"] = P.pencil_order()
    res.details["weight_degree"] = P.wdegree()
    ok = is_canonical(P) and P.wdegree() <= 2
    try:
        res.details["grothendieck_order"] = check_order_agreement(P)
    except ArithmeticError as exc:
        res.residuals["order"] = str(exc)
        ok = False
    return ok


def _cmd_bracket_roundtrip(sc: Scenario, params: dict, res: CommandResult):
    P = canonical_pencil(sc.data)
    back = bracket_from_operator(P)
    ok = back == sc.data
    if not ok:
        res.residuals["data"] = json.dumps(back.as_dict(), sort_keys=True)
    count = int(params.get("pairs", 20))
    probes = probe_densities(sc.chart, 2)
    checked = 0
    for a, b in sample_pairs(probes, count):
        diff = generated_bracket(P, a, b) - long_bracket_eval(sc.data, a, b)
        checked += 1
        if not diff.is_zero():
            res.residuals["bracket"] = f"{a} , {b} -> {diff}"
            ok = False
            break
    res.details["pairs_checked"] = checked
    return ok


def _cmd_jacobi(sc: Scenario, params: dict, res: CommandResult):
    residuals = check_jacobi_equations(sc.data)
    ok = True
    for i, r in enumerate(residuals, 1):
        if not r.is_zero():
            res.residuals[f"r{i}"] = format_phasefn(r)
            ok = False
    return ok


def _cmd_delta_squared(sc: Scenario, params: dict, res: CommandResult):
    rep = classify_delta_squared(canonical_pencil(sc.data), sc.data)
    res.details["classification"] = rep.classification
    if rep.vector_field is not None:
        res.details["vector_field"] = [str(q) for q in rep.vector_field]
        res.details["lie_matches"] = rep.lie_matches
        res.details["poisson"] = rep.poisson
    if rep.top_symbol is not None:
        res.residuals["top_symbol"] = format_phasefn(rep.top_symbol)
    expect = params.get("expect_order")
    if expect is not None:
        got = -1 if rep.is_zero else rep.order
        return got == int(expect)
    if rep.is_zero:
        return True
    return rep.order <= 1 and bool(rep.lie_matches) and bool(rep.poisson)


def _cmd_transform(sc: Scenario, params: dict, res: CommandResult):
    ch = sc.change
    new = transform_bracket_data(sc.data, ch)
    oracle = transform_bracket_data_via_brackets(sc.data, ch)
    res.details["J"] = str(ch.J)
    res.details["data"] = new.as_dict()
    ok = True
    if new != oracle:
        res.residuals["bracket_route"] = json.dumps(oracle.as_dict(), sort_keys=True)
        ok = False
    lhs = canonical_pencil(new)
    rhs = transform_operator(canonical_pencil(sc.data), ch)
    if lhs != rhs:
        res.residuals["naturality"] = str(lhs - rhs)
        ok = False
    return ok


def _cmd_recover(sc: Scenario, params: dict, res: CommandResult):
    w0 = _rational(params.get("w0", 2), "w0")
    P = canonical_pencil(sc.data)
    L = specialize(P, w0)
    A = sc.A if sc.A is not None else sc.chart.zero()
    rec = recover_pencil(L, w0, A)
    rec0 = recover_pencil(L, w0, 0)
    ok = True
    if rec != P:
        res.residuals["roundtrip"] = str(rec - P)
        ok = False
    if rec != rec0:
        res.residuals["auxiliary_A"] = str(rec - rec0)
        ok = False
    res.details["w0"] = str(w0)
    return ok


def _cmd_decompose(sc: Scenario, params: dict, res: CommandResult):
    w0 = _rational(params.get("w0", 0), "w0")
    P = canonical_pencil(sc.data)
    L = specialize(P, w0)
    A = sc.A if sc.A is not None else sc.chart.zero()
    Q, f = decompose_operator(L, w0, A)
    res.details["Q"] = [str(q) for q in Q]
    res.details["f"] = str(f)
    lb = lb_pencil_from_volume(sc.chart, sc.data.S, A, 0, sc.data.eps)
    from .operators import DiffOp

    lie = lie_derivative(sc.chart, Q, sc.data.eps) if any(not q.is_zero() for q in Q) else DiffOp.zero(sc.chart)
    recomposed = specialize(canonical_pencil(lb), w0) + specialize(lie, w0) + DiffOp.scalar(f)
    if recomposed != L:
        res.residuals["recomposition"] = str(recomposed - L)
        return False
    return True


def _cmd_bv_master(sc: Scenario, params: dict, res: CommandResult):
    data = lb_pencil_from_volume(sc.chart, sc.data.S, sc.A, sc.data.lam, sc.data.eps)
    H, X, minus_grad, rep = bv_field_hamiltonian(data, sc.A)
    res.details["H"] = str(H)
    res.details["delta_squared"] = rep.classification
    res.details["vector_field"] = [str(x) for x in X]
    ok = H.is_zero() == rep.is_zero
    if not ok:
        res.residuals["zero_tests"] = f"H = {H} but Delta^2 is {rep.classification}"
    if [str(x) for x in X] != [str(g) for g in minus_grad]:
        res.residuals["field"] = f"X = {[str(x) for x in X]}, -grad H = {[str(g) for g in minus_grad]}"
        ok = False
    return ok


def _cmd_sturm(sc: Scenario, params: dict, res: CommandResult):
    d = sc.data
    rep = sturm_liouville_demo(sc.chart, d.S[0][0], d.gamma[0], d.theta, sc.change)
    res.details.update(rep.as_dict())
    ok = rep.routes_agree and rep.sign is not None
    if not rep.routes_agree:
        res.residuals["routes"] = f"{rep.U_new} vs {rep.U_new_direct}"
    return ok


def _cmd_cocycle(sc: Scenario, params: dict, res: CommandResult):
    chart = sc.chart
    conns = []
    for key in ("gamma0", "gamma1", "gamma2"):
        if key not in params:
            raise ScenarioError(f"cocycle needs {key}")
        conns.append(ConnectionOnVol(chart, _vector(chart, params[key], key)))
    S = sc.data.S
    c01 = bv_cocycle(S, conns[0], conns[1], sc.data.eps)
    c12 = bv_cocycle(S, conns[1], conns[2], sc.data.eps)
    c02 = bv_cocycle(S, conns[0], conns[2], sc.data.eps)
    res.details.update({"c01": str(c01), "c12": str(c12), "c02": str(c02)})
    diff = c01 + c12 - c02
    if not diff.is_zero():
        res.residuals["additivity"] = str(diff)
        return False
    return True


def _cmd_flatness(sc: Scenario, params: dict, res: CommandResult):
    rep = flatness_check(sc.chart, sc.data.S, sc.data.gamma, sc.data.eps)
    if not rep.flat:
        res.residuals["curvature"] = format_phasefn(rep.residual)
        return False
    return True


def _cmd_action(sc: Scenario, params: dict, res: CommandResult):
    try:
        rep = existence_of_action_check(sc.data)
    except NonJacobiError as exc:
        rep = exc.report
        res.residuals["jacobi"] = [format_phasefn(r) for r in rep.jacobi_residuals]
        res.details["status"] = rep.status
        res.details["notes"] = rep.notes
        return False
    res.details["status"] = rep.status
    res.details["A"] = None if rep.action is None else str(rep.action)
    return rep.status == "exact"


_DISPATCH = {
    "build-pencil": _cmd_build_pencil,
    "bracket-roundtrip": _cmd_bracket_roundtrip,
    "jacobi": _cmd_jacobi,
    "delta-squared": _cmd_delta_squared,
    "transform": _cmd_transform,
    "recover": _cmd_recover,
    "bv-master": _cmd_bv_master,
    "sturm-demo": _cmd_sturm,
    "cocycle": _cmd_cocycle,
    "decompose": _cmd_decompose,
    "flatness": _cmd_flatness,
    "action": _cmd_action,
}


def run_scenario(sc: Scenario, only: str | None = None) -> Report:
    """Run every command (or only those named ``only``); errors stay per command."""
    results = []
    for i, params in enumerate(sc.commands):
        name = params["command"]
        if only is not None and name != only:
            continue
        res = CommandResult(i, name, "error")
        start = time.perf_counter()
        try:
            res.status = "pass" if _DISPATCH[name](sc, params, res) else "fail"
        except Exception as exc:  # recorded per command, siblings still run
            res.status = "error"
            res.residuals["error"] = f"{type(exc).__name__}: {exc}"
        res.seconds = time.perf_counter() - start
        results.append(res)
    fixture = {"chart": [{"name": n, "parity": str(p)} for n, p in zip(sc.chart.names, sc.chart.parities)]}
    fixture.update(sc.data.as_dict())
    if sc.A is not None:
        fixture["A"] = str(sc.A)
    return Report(sc.name, fixture, results)
