"""Command-line entry point.

Exit codes: 0 success (warnings allowed), 1 task failure, 2 configuration
error, 3 surface/grid incompatibility.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .catalog import CATALOG
from .config import ConfigError, GridIncompatible, load_config
from .errors import GridTooSmall, InvalidParameter, StencilOrderError, UnknownSurface
from .pipeline import run
from .report import export_csv

THREADS_ENV = "CONFGEOM_THREADS"
TASK_COMMANDS = ("analyze", "invariance", "willmore", "variation", "isotropy")


def _threads(arg) -> int:
    if arg is not None:
        return max(int(arg), 1)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return 1


def _add_common(p):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration key (repeatable)")
    p.add_argument("--seed", type=int, help="single seed replacing the configured list")
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confgeom",
                                     description="Conformal invariants of submanifolds.")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run the tasks listed in the configuration")
    _add_common(run_p)
    for name in TASK_COMMANDS:
        _add_common(sub.add_parser(name, help=f"run only the {name} task"))
    cat = sub.add_parser("catalog", help="catalog operations")
    cat.add_argument("action", choices=["list"])
    exp = sub.add_parser("export", help="write a per-node field as CSV")
    _add_common(exp)
    exp.add_argument("--field", required=True, help="field name, e.g. tau, kappa_conf, A")
    return parser


def _catalog_list(out) -> int:
    for name, entry in CATALOG.items():
        params = ", ".join(f"{k}={v}" for k, v in entry.defaults.items()) or "-"
        print(f"{name:20s} {str(entry.spaceform):16s} {params:40s} {entry.description}", file=out)
    return 0


def _write_outputs(result, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    result.report.write(out_dir / "report.txt")
    with open(out_dir / "timing.txt", "w", encoding="utf-8") as fh:
        for name, sec in result.timings:
            fh.write(f"{name} = {sec:.3f}\n")
    arrays = {}
    for name, (values, mask) in result.fields.items():
        arrays[name] = np.asarray(values)
        arrays[name + ".mask"] = np.asarray(mask)
    np.savez(out_dir / "fields.npz", **arrays)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "catalog":
        return _catalog_list(sys.stdout)
    try:
        overrides = list(args.set)
        if args.command in TASK_COMMANDS:
            overrides.append(f"tasks = {args.command}")
        elif args.command == "export":
            overrides.append("tasks = analyze")
        cfg = load_config(args.config, overrides, args.seed)
        threads = _threads(args.threads)
    except (ConfigError, InvalidParameter, UnknownSurface, StencilOrderError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (GridIncompatible, GridTooSmall) as exc:
        print(f"grid error: {exc}", file=sys.stderr)
        return 3
    out_dir = Path(args.out or cfg.output_dir)
    try:
        result = run(cfg, threads)
    except (InvalidParameter, UnknownSurface) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (GridIncompatible, GridTooSmall) as exc:
        print(f"grid error: {exc}", file=sys.stderr)
        return 3

    if args.command == "export":
        if args.field not in result.fields:
            print(f"unknown field {args.field!r}; available: {', '.join(result.fields)}",
                  file=sys.stderr)
            return 1
        out_dir.mkdir(parents=True, exist_ok=True)
        values, mask = result.fields[args.field]
        path = out_dir / f"{args.field}.csv"
        export_csv(path, cfg.grid, args.field, values, mask)
        print(path)
        return 0

    _write_outputs(result, out_dir)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for f in result.failures:
        print(f"failed: {f}", file=sys.stderr)
    print(out_dir / "report.txt")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
