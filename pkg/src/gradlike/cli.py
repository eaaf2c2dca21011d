"""Command-line entry point: ``gradlike run|validate|suite``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import GradlikeError, InputError
from .scenario import (
    EXIT_INPUT,
    EXIT_NUMERIC,
    EXIT_OK,
    apply_overrides,
    bundled_scenarios,
    load_scenario,
    run_scenario,
)
from .serialization import dump_json


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gradlike", description="Population-dynamics scenarios on the simplex.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run one scenario file (or bundled scenario name)"),
                           ("validate", "parse and validate a scenario file"),
                           ("suite", "run every scenario in a directory ('bundled' for the packaged set)")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("target")
        if name != "validate":
            sp.add_argument("--output", help="artifact directory")
            sp.add_argument("--seed", type=int, help="override the scenario seed")
            sp.add_argument("--samples", type=int, help="override sampling-based check sizes")
    return p


def _exit_for(exc: GradlikeError) -> int:
    return EXIT_INPUT if isinstance(exc, InputError) else EXIT_NUMERIC


def _run_one(path, output, seed, samples) -> int:
    sc = apply_overrides(load_scenario(path), seed, samples)
    res = run_scenario(sc, output)
    failed = [v["check"] for v in res.report["verifications"] if not v["passed"]]
    print(f"{sc.name}: exit {res.exit_code} ({res.report['status']}) -> {res.output}")
    for f in failed:
        print(f"  failed: {f}")
    return res.exit_code


def _suite(target, output, seed, samples) -> int:
    if target == "bundled":
        files = sorted(bundled_scenarios().values())
    else:
        files = sorted(Path(target).glob("*.json"))
    if not files:
        raise InputError(f"no scenario files in {target}")
    root = Path(output or "gradlike-out")
    summary, worst = {}, EXIT_OK
    for f in files:
        try:
            code = _run_one(f, root / f.stem, seed, samples)
        except GradlikeError as exc:
            print(f"{f.stem}: {type(exc).__name__}: {exc}", file=sys.stderr)
            code = _exit_for(exc)
        summary[f.stem] = code
        worst = max(worst, code)
    root.mkdir(parents=True, exist_ok=True)
    dump_json({"scenarios": summary, "exit_code": worst}, root / "suite_report.json")
    return worst


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            sc = load_scenario(args.target)
            print(f"{sc.name}: valid ({len(sc.analyses)} analyses, n={sc.n})")
            return EXIT_OK
        if args.command == "run":
            return _run_one(args.target, args.output, args.seed, args.samples)
        return _suite(args.target, args.output, args.seed, args.samples)
    except GradlikeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_for(exc)


if __name__ == "__main__":
    sys.exit(main())
