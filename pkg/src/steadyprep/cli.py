"""Command line front end: experiment runner plus a CSV fit helper.

Exit codes: 0 clean run, 2 when any row carries a failure flag, 1 on
usage or config errors.
"""
from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from datetime import datetime, timezone

from .config import ExperimentConfig
from .experiments import EXPERIMENTS, fit_linear, run_experiment, write_result
from .ttss import fit_power_law


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="steadyprep",
                     description="Steady-state preparation benchmarks: "
                                 "adiabatic ramps vs fixed-generator relaxation.")
    sub = parser.add_subparsers(dest="command", metavar="command",
                                parser_class=_Parser)
    sub.required = True
    for name in sorted(EXPERIMENTS):
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", default=None, metavar="PATH",
                       help="INI config file (defaults cover every key)")
        p.add_argument("--out", default="results", metavar="DIR",
                       help="output directory for CSV + JSON summary")
        p.add_argument("--workers", type=int, default=1, metavar="K",
                       help="sweep points computed in parallel")
        p.add_argument("--epsilon", type=float, default=None,
                       help="override the TTSS threshold for every model section")
        p.add_argument("--grid", type=int, default=None,
                       help="override grid resolution (qubit plane edge, spike s grid)")
    fp = sub.add_parser("fit", help="least-squares fit of two CSV columns")
    fp.add_argument("input", help="CSV produced by an experiment run")
    fp.add_argument("--x", required=True, help="abscissa column name")
    fp.add_argument("--y", required=True, help="ordinate column name")
    fp.add_argument("--log-log", action="store_true", dest="log_log",
                    help="fit a power law on ln-ln axes")
    return parser


def _load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return ExperimentConfig.from_file(path)


def _apply_overrides(cfg: ExperimentConfig, args) -> None:
    if args.epsilon is not None:
        if args.epsilon <= 0:
            raise ValueError("--epsilon must be positive")
        for section, key in (("fermion", "epsilon"), ("qubit", "epsilon"),
                             ("spike", "epsilon"), ("spike", "closed_epsilon")):
            cfg.set(section, key, args.epsilon)
    if args.grid is not None:
        if args.grid < 3:
            raise ValueError("--grid must be at least 3")
        cfg.set("qubit", "grid", args.grid)
        cfg.set("spike", "s_grid", args.grid if args.grid % 2 == 1 else args.grid + 1)


def _read_csv_columns(path: str, xcol: str, ycol: str):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    body = [ln for ln in lines if not ln.startswith("#")]
    if not body:
        raise ValueError("no header row found")
    header = body[0].split(",")
    try:
        ix, iy = header.index(xcol), header.index(ycol)
    except ValueError as exc:
        raise ValueError(f"column not found: {exc}") from None
    xs, ys = [], []
    for ln in body[1:]:
        parts = ln.split(",")
        try:
            x, y = float(parts[ix]), float(parts[iy])
        except (ValueError, IndexError):
            continue
        if x == x and y == y:  # drop nan
            xs.append(x)
            ys.append(y)
    return xs, ys


def _run_fit(args) -> int:
    try:
        xs, ys = _read_csv_columns(args.input, args.x, args.y)
    except (OSError, ValueError) as exc:
        print(f"steadyprep fit: error: {exc}", file=sys.stderr)
        return 1
    if len(xs) < 3:
        print(f"steadyprep fit: error: need at least 3 finite rows, "
              f"got {len(xs)}", file=sys.stderr)
        return 1
    entry = {"input": os.path.basename(args.input), "x": args.x, "y": args.y,
             "log_log": bool(args.log_log), "points": len(xs)}
    if args.log_log:
        if min(xs) <= 0 or min(ys) <= 0:
            print("steadyprep fit: error: log-log fit needs strictly "
                  "positive data", file=sys.stderr)
            return 1
        p, c, r2 = fit_power_law(xs, ys)
        entry.update(exponent=p, prefactor=c, r_squared=r2)
    else:
        a, b, r2 = fit_linear(xs, ys)
        entry.update(slope=a, intercept=b, r_squared=r2)
    summary_path = args.input[:-4] + "_summary.json" \
        if args.input.endswith(".csv") else args.input + "_summary.json"
    summary = {}
    if os.path.exists(summary_path):
        with open(summary_path) as fh:
            summary = json.load(fh)
    summary.setdefault("cli_fits", []).append(entry)
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    print(json.dumps(entry, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "fit":
        return _run_fit(args)
    try:
        cfg = _load_config(args.config)
        _apply_overrides(cfg, args)
    except (FileNotFoundError, ValueError, configparser.Error) as exc:
        print(f"steadyprep: config error: {exc}", file=sys.stderr)
        return 1
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    result = run_experiment(args.command, cfg, workers=max(1, args.workers))
    csv_path, json_path = write_result(result, cfg, args.out, timestamp=stamp)
    print(f"wrote {csv_path} and {json_path} "
          f"({len(result.rows)} rows, {result.flagged_count} flagged)")
    return 2 if result.flagged_count else 0


if __name__ == "__main__":
    sys.exit(main())
