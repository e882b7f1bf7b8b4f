"""
Command-line front end.

    python cli.py verify-dims --p 2
    python cli.py curvature --p 1 --F "z1*y^2" --order 2 --check-closed-form
    python cli.py orbit-sweep --p 1 --k 2 --seed 7
    python cli.py run scenario.txt --format json

Exit status: 0 when every result is ok, 1 on a verification failure or a
missing orbit map, 2 on a usage error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from config import load_settings
from errors import USAGE_ERRORS, ScenarioError
from scenario import Report, TaskResult, TaskSpec, emit_report, make_config, parse_scenario
from workbench import run_scenario, run_task

logger = logging.getLogger(__name__)

# command -> task name
COMMANDS = {
    "curvature": "curvature",
    "weyl": "weyl",
    "model": "model",
    "normalize": "normalize",
    "stabdim": "stabdim",
    "verify-dims": "isometry-dims",
    "alpha": "alpha",
    "classify-psi": "classify-psi",
    "orbit-map": "orbit-map",
    "orbit-sweep": "orbit-sweep",
    "okp": "okp",
    "jacobi": "jacobi",
}


# commands whose --k is an order, not an Mk family selector
TABLE_COMMANDS = ("okp", "stabdim", "orbit-map", "orbit-sweep", "jacobi", "verify-dims")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("table", "json"), default="table")
    parser.add_argument("--seed", type=int, default=None, help="Overrides CURVHOM_SEED.")
    parser.add_argument("--tolerance", type=float, default=None, help="Float comparison tolerance (1e-9).")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvhom", description="Curvature and isometry workbench for g_{6+4p,F}.")
    commands = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = commands.add_parser(command)
        sub.add_argument("--p", type=int, required=True)
        sub.add_argument("--k", type=int)
        sub.add_argument("--F", dest="F", help="Warping function, e.g. \"z1*y^2\".")
        sub.add_argument("--psi", help="Profile psi(y), e.g. \"exp(y)+exp(2*y)\".")
        sub.add_argument("--order", type=int, default=0)
        sub.add_argument("--nu", default=None, help="Comma-separated list, default 2.")
        sub.add_argument("--at", action="append", default=[], metavar="COORD=VALUE")
        sub.add_argument("--xi", action="append", default=[], metavar="COORD=VALUE")
        sub.add_argument("--check-closed-form", action="store_true")
        sub.add_argument("--affine", action="store_true")
        sub.add_argument("--double-isotropy", action="store_true")
        sub.add_argument("--samples", type=int, help="Random vectors drawn by orbit-sweep (default 100).")
        _common(sub)
    run = commands.add_parser("run", help="Run every task of a scenario file.")
    run.add_argument("scenario", type=Path)
    _common(run)
    return parser


def _bindings(pairs: Sequence[str], flag: str) -> Dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ScenarioError(f"{flag} expects COORD=VALUE, got {pair!r}")
        name, value = pair.split("=", 1)
        out[name.strip()] = value.strip()
    return out


def _single_task(args: argparse.Namespace) -> TaskSpec:
    params = {}
    if args.k is not None:
        params["k"] = str(args.k)
    if args.command == "curvature":
        params["order"] = str(args.order)
    if args.nu:
        params["nu"] = args.nu
    if args.samples is not None:
        params["samples"] = str(args.samples)
    for flag in ("check_closed_form", "affine", "double_isotropy"):
        if getattr(args, flag):
            params[flag.replace("_", "-")] = "true"
    for name, value in _bindings(args.xi, "--xi").items():
        params[f"xi.{name}"] = value
    return TaskSpec(index=1, name=COMMANDS[args.command], params=params)


def _run_command(args: argparse.Namespace, settings) -> Report:
    if args.command == "run":
        try:
            text = args.scenario.read_text()
        except OSError as e:
            raise ScenarioError(f"cannot read {args.scenario}: {e}") from e
        return run_scenario(parse_scenario(text), settings)
    if args.F is not None:
        family = "F"
    elif args.psi is not None:
        family = "Npsi"
    elif args.k is not None and args.command not in TABLE_COMMANDS:
        family = "Mk"
    else:
        family = None
    config = make_config(name=args.command, p=args.p, family=family, k=args.k if family == "Mk" else None,
                         psi=args.psi, F=args.F, point=_bindings(args.at, "--at"))
    if family is None and args.k is not None and not 0 <= args.k <= args.p + 2:
        raise ScenarioError(f"k must lie in [0, {args.p + 2}] for p={args.p}, got {args.k}")
    report = Report(scenario=args.command)
    report.results.append(run_task(config, _single_task(args), settings))
    return report


def _frame(result: TaskResult) -> pd.DataFrame:
    rows = result.values.get("rows")
    if isinstance(rows, list) and rows:
        return pd.DataFrame(rows)
    pairs = [(key, str(value)) for key, value in sorted(result.values.items())]
    pairs += [(f"residual:{key}", str(value)) for key, value in sorted(result.residuals.items())]
    return pd.DataFrame(pairs, columns=["key", "value"])


def render_table(report: Report) -> str:
    blocks = []
    for result in report.results:
        blocks.append(f"== {result.task}: {result.status}")
        blocks.append(_frame(result).to_string(index=False))
    return "\n".join(blocks) + "\n"


def exit_code(report: Report) -> int:
    return 0 if report.passed else 1


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {key: value for key, value in (("seed", args.seed), ("tolerance", args.tolerance)) if value is not None}
    try:
        settings = load_settings(**overrides)
        report = _run_command(args, settings)
    except (ValidationError, *USAGE_ERRORS) as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    sys.stdout.write(emit_report(report) if args.format == "json" else render_table(report))
    return exit_code(report)


if __name__ == "__main__":
    sys.exit(main())
