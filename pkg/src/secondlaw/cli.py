"""Command-line interface: ``secondlaw run|sweep|list-builtins|verify``.

Exit codes: 0 when every applicable inequality holds, 2 when a violation is
detected (or an acceptance check fails), 1 on any error.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import yaml

from .config import parse_overrides, tolerances
from .errors import SecondLawError
from .scenarios import builtin_names, builtin_text, emit_report, format_table, run_scenario
from .scenarios.document import ScenarioSpec, parse_scenario
from .scenarios.runner import _clean

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


def _read_document(source: str) -> dict:
    p = Path(source)
    text = p.read_text() if p.is_file() else builtin_text(source)
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict):
        raise SecondLawError(f"{source}: scenario document must be a mapping")
    return doc


def _grid_values(text: str) -> list:
    values = [yaml.safe_load(v) for v in text.split(",") if v.strip()]
    if not values:
        raise SecondLawError("--grid needs at least one value")
    return values


def _spec_from_args(args) -> ScenarioSpec:
    doc = copy.deepcopy(_read_document(args.spec))
    if args.seed is not None:
        doc["seed"] = args.seed
    if getattr(args, "param", None) is not None:
        doc["sweep"] = {"param": args.param, "grid": _grid_values(args.grid)}
    return parse_scenario(doc)


def _emit(bundle, args) -> int:
    if args.out:
        for path in emit_report(bundle, args.out, args.format):
            print(path)
    elif args.format == "table":
        sys.stdout.write(format_table(bundle))
    else:
        doc = {"scenario": bundle.name, "seed": bundle.seed, "records": bundle.records(), "task": bundle.task}
        print(json.dumps(_clean(doc), sort_keys=True, indent=2))
    return EXIT_VIOLATION if bundle.violation_detected else EXIT_OK


def cmd_run(args) -> int:
    return _emit(run_scenario(_spec_from_args(args)), args)


def cmd_list(args) -> int:
    for name in builtin_names():
        doc = yaml.safe_load(builtin_text(name))
        desc = " ".join(str(doc.get("description", "")).split())
        print(f"{name:24s} {desc}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import run_acceptance

    only = [int(x) for x in args.only.split(",")] if args.only else None
    results = run_acceptance(only, seed=args.seed or 0)
    for r in results:
        print(r.line())
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VIOLATION if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secondlaw", description="Microscopic second-law inequality checks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the document seed")
    common.add_argument("--out", default=None, help="write records and series files into this directory")
    common.add_argument("--format", choices=("table", "records"), default="table")
    common.add_argument("--tol", default="", help='tolerance overrides, e.g. "tol_slack=1e-7,tol_herm=1e-8"')
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run a scenario file or builtin name")
    p.add_argument("spec")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="run a scenario over a parameter grid")
    p.add_argument("spec")
    p.add_argument("--param", required=True, help="dotted document path, e.g. layout.1.beta")
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("list-builtins", help="list builtin scenarios")
    p.set_defaults(func=cmd_list, tol="")

    p = sub.add_parser("verify", parents=[common], help="run the acceptance property suite")
    p.add_argument("--only", default=None, help="comma-separated check numbers")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with tolerances(**parse_overrides(args.tol)):
            return args.func(args)
    except (SecondLawError, OSError, ValueError, KeyError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
