"""Command-line front end for the scenario runner.

Exit codes: 0 all checks pass, 1 any check fails, 2 configuration error.
"""
from __future__ import annotations

import argparse
import sys

from .runner import (
    RunRecord,
    Scenario,
    ScenarioError,
    emit,
    load_suite,
    run,
    run_suite,
)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--out", default=None, help="write results to this path")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)


def _add_gauge(p: argparse.ArgumentParser):
    p.add_argument("--k", type=int, default=1, help="winding of the scalar gauge")
    p.add_argument(
        "--diag-k",
        default=None,
        help="comma-separated windings for a diagonal gauge (overrides --k)",
    )


def _gauge_spec(args) -> dict:
    if getattr(args, "diag_k", None):
        return {"diag_k": [int(t) for t in args.diag_k.split(",")]}
    return {"k": args.k}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="diracflow",
        description="Spectral-flow verification experiments on the circle and cylinder.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("circle-sf", help="boundary flow vs winding number")
    p.add_argument("--n-theta", type=int, default=33)
    _add_gauge(p)
    _add_common(p)

    p = sub.add_parser("cylinder-theorem", help="two-sided main identity check")
    p.add_argument("--n-theta", type=int, default=33)
    p.add_argument("--n-x", type=int, default=32)
    p.add_argument("--length", type=float, default=1.0)
    p.add_argument("--f0", type=int, default=1)
    p.add_argument("--fl", type=int, default=-1)
    _add_gauge(p)
    _add_common(p)

    p = sub.add_parser("cobordism", help="total boundary flow vanishing")
    p.add_argument("--n-theta", type=int, default=33)
    p.add_argument("--n-x", type=int, default=32)
    p.add_argument("--length", type=float, default=1.0)
    _add_gauge(p)
    _add_common(p)

    p = sub.add_parser("getzler-sweep", help="heat-trace flow estimate sweep")
    p.add_argument("--n-theta", type=int, default=65)
    p.add_argument("--eps-grid", default="1,4,9,16,25")
    _add_gauge(p)
    _add_common(p)

    p = sub.add_parser("halfcyl-checks", help="half-cylinder analytic checks")
    p.add_argument("--n-theta", type=int, default=33)
    _add_gauge(p)
    _add_common(p)

    p = sub.add_parser("gamma-check", help="grading deformation invertibility")
    p.add_argument("--n-theta", type=int, default=33)
    p.add_argument("--n-x", type=int, default=32)
    p.add_argument("--length", type=float, default=1.0)
    p.add_argument("--f0", type=int, default=1)
    p.add_argument("--fl", type=int, default=-1)
    _add_gauge(p)
    _add_common(p)

    p = sub.add_parser("suite", help="run a JSON suite file")
    p.add_argument("suite_file")
    _add_common(p)
    return ap


def _scenario_from_args(args) -> Scenario:
    gauge = _gauge_spec(args)
    if args.command == "circle-sf":
        return Scenario(
            name=f"circle-sf-k{args.k}",
            kind="circle_sf",
            params={"n_theta": args.n_theta, "gauge": gauge},
            seed=args.seed,
        )
    if args.command == "cylinder-theorem":
        return Scenario(
            name=f"cylinder-theorem-k{args.k}",
            kind="cylinder_theorem",
            params={
                "n_theta": args.n_theta,
                "n_x": args.n_x,
                "L": args.length,
                "F0": args.f0,
                "FL": args.fl,
                "gauge": gauge,
            },
            seed=args.seed,
        )
    if args.command == "cobordism":
        return Scenario(
            name=f"cobordism-k{args.k}",
            kind="cobordism",
            params={
                "n_theta": args.n_theta,
                "n_x": args.n_x,
                "L": args.length,
                "gauge": gauge,
            },
            seed=args.seed,
        )
    if args.command == "getzler-sweep":
        eps_grid = [float(t) for t in args.eps_grid.split(",")]
        return Scenario(
            name=f"getzler-sweep-k{args.k}",
            kind="getzler_sweep",
            params={"n_theta": args.n_theta, "gauge": gauge, "eps_grid": eps_grid},
            seed=args.seed,
        )
    if args.command == "halfcyl-checks":
        return Scenario(
            name=f"halfcyl-checks-k{args.k}",
            kind="halfcyl_checks",
            params={"n_theta": args.n_theta, "gauge": gauge},
            seed=args.seed,
        )
    if args.command == "gamma-check":
        return Scenario(
            name=f"gamma-check-k{args.k}",
            kind="gamma_check",
            params={
                "n_theta": args.n_theta,
                "n_x": args.n_x,
                "L": args.length,
                "F0": args.f0,
                "FL": args.fl,
                "gauge": gauge,
            },
            seed=args.seed,
        )
    raise ScenarioError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    try:
        if args.command == "suite":
            with open(args.suite_file) as fh:
                scenarios = load_suite(fh.read())
            records = run_suite(scenarios, workers=args.workers)
        else:
            records = [run(_scenario_from_args(args))]
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    text = emit(records, args.format, args.out)
    if args.out is None:
        print(text, end="" if text.endswith("\n") else "\n")
    return 0 if all(r.passed for r in records) else 1


if __name__ == "__main__":
    sys.exit(main())
