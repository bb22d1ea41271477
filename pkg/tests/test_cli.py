import json
from pathlib import Path

import pytest

from densalg.cli import main
from densalg.scenario import ScenarioError, parse_scenario, run_scenario

SCEN = Path(__file__).resolve().parent.parent / "scenarios"

GOOD = ["f1.json", "f2_flat.json", "f2b_bv.json", "f3_sturm.json"]


@pytest.mark.parametrize("name", GOOD)
def test_good_scenarios_pass(name, capsys):
    assert main(["check", str(SCEN / name)]) == 0
    assert capsys.readouterr().out.strip().endswith("PASS")


def test_broken_scenario_fails(capsys):
    assert main(["check", str(SCEN / "f2_broken.json"), "--report", "json"]) == 1
    rep = json.loads(capsys.readouterr().out)
    status = {r["command"]: r["status"] for r in rep["results"]}
    assert status["jacobi"] == "fail" and status["delta-squared"] == "pass"


def test_only_filter(capsys):
    assert main(["check", str(SCEN / "f1.json"), "--report", "json", "--only", "transform"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert [r["command"] for r in rep["results"]] == ["transform"]


def test_reports_are_deterministic():
    text = (SCEN / "f2_flat.json").read_text()
    a = run_scenario(parse_scenario(text)).to_json(timing=False)
    b = run_scenario(parse_scenario(text)).to_json(timing=False)
    assert a == b


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["check", str(SCEN / "f1.json"), "--only", "nonsense"])
    assert e.value.code == 2
    assert main(["check", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["check", str(bad)]) == 2
    capsys.readouterr()


def _doc(**over):
    doc = {
        "chart": [{"name": "x", "parity": "even"}],
        "lambda": "0",
        "S": [["1"]],
        "gamma": {"x": "-2*x"},
        "theta": "0",
        "commands": [{"command": "build-pencil"}],
    }
    doc.update(over)
    return json.dumps(doc)


def test_parse_errors_carry_location():
    with pytest.raises(ScenarioError) as e:
        parse_scenario(_doc(gamma={"x": "-2*x +"}))
    assert "gamma" in str(e.value)
    with pytest.raises(ScenarioError):
        parse_scenario(_doc(commands=[{"command": "jacobi"}]))
    with pytest.raises(ScenarioError):
        parse_scenario(_doc(commands=[{"command": "transform"}]))
    with pytest.raises(ScenarioError):
        parse_scenario(_doc(commands=[{"command": "frobnicate"}]))
    with pytest.raises(ScenarioError) as e:
        parse_scenario("{\n  \"chart\": [,]\n}")
    assert e.value.line == 2


def test_inline_scenario_runs():
    rep = run_scenario(parse_scenario(_doc(commands=[{"command": "build-pencil"}, {"command": "bracket-roundtrip", "pairs": 5}])))
    assert rep.passed and len(rep.results) == 2


@pytest.mark.parametrize("which", ["sturm", "bv"])
def test_demos(which, capsys):
    assert main(["demo", which]) == 0
    out = capsys.readouterr().out
    assert ("U_new: (-3)/(16*x^4)" in out) if which == "sturm" else ("-grad H" in out)
