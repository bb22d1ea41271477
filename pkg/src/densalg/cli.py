"""Command-line entry point.

    densalg check <scenario-file> [--report text|json] [--only <command-name>]
    densalg demo sturm
    densalg demo bv

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import sys

from .geometry import CoordChange, bv_field_hamiltonian, sturm_liouville_demo
from .fixtures import chart_f2b, chart_f3, f2b_volume
from .scenario import COMMANDS, ScenarioError, load_scenario, run_scenario

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="densalg", description="Exact checks for long brackets and operator pencils on densities.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    chk = sub.add_parser("check", help="run the commands of a scenario file")
    chk.add_argument("scenario", help="path to a JSON scenario document")
    chk.add_argument("--report", choices=("text", "json"), default="text")
    chk.add_argument("--only", choices=COMMANDS, default=None, help="run only commands with this name")
    demo = sub.add_parser("demo", help="built-in demonstrations")
    demo.add_argument("which", choices=("sturm", "bv"))
    return p


def _demo_sturm() -> int:
    c = chart_f3()
    ch = CoordChange(c, ["y"], {"y": "x^2"})
    rep = sturm_liouville_demo(c, 1, 0, 0, ch)
    print("Sturm-Liouville family at lam = 2 under y = x^2 (s = 1, gamma = 0, theta = 0)")
    print("  transformed gamma, theta via the data laws, then U' read at w = -1/2")
    for k, v in rep.as_dict().items():
        print(f"  {k}: {v}")
    print("  (all functions written in the old coordinate x)")
    return EXIT_PASS if rep.routes_agree and rep.sign is not None else EXIT_FAIL


def _demo_bv() -> int:
    c = chart_f2b()
    A = c("x*y*xi*eta + x^3")
    data = f2b_volume(A, c)
    H, X, minus_grad, rep = bv_field_hamiltonian(data, A)
    print("Odd Laplace-Beltrami data on R^{2|2} with rho = e^A, A = x*y*xi*eta + x^3")
    print(f"  BV residual Delta_1/2(rho^1/2)/rho^1/2 = {H}")
    print(f"  Delta^2: {rep.classification}")
    print(f"  vector field X of Delta^2 = {[str(x) for x in X]}")
    print(f"  -grad H                   = {[str(g) for g in minus_grad]}")
    print(f"  Poisson: {rep.poisson}, Lie derivative form: {rep.lie_matches}")
    ok = [str(x) for x in X] == [str(g) for g in minus_grad] and H.is_zero() == rep.is_zero
    return EXIT_PASS if ok else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "demo":
        return _demo_sturm() if args.which == "sturm" else _demo_bv()
    try:
        sc = load_scenario(args.scenario)
    except OSError as exc:
        print(f"densalg: cannot read {args.scenario}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"densalg: {args.scenario}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = run_scenario(sc, args.only)
    print(report.to_json() if args.report == "json" else report.to_text())
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
