"""Command line: ``ddchemo {run,sweep,converge,ineq,keys} --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, config_reference, load_config
from .runs import execute_converge, execute_ineq, execute_run, execute_sweep

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddchemo", description=(
        "Finite-volume simulator and estimate monitors for a doubly degenerate "
        "nutrient-taxis system."))
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "run": "one simulation: diagnostics CSV, PGM snapshots, report JSON",
        "sweep": "(m, alpha) grid of runs with classification and admissibility overlay",
        "converge": "epsilon ladder and grid refinement study",
        "ineq": "functional inequality suite on random field corpora",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, type=Path, help="config file")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
        p.add_argument("--seed", type=int, default=None, help="override [output] seed")
    sub.add_parser("keys", help="print the configuration key reference (markdown)")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "keys":
        print(config_reference())
        return 0
    if args.workers < 1:
        print("ddchemo: --workers must be >= 1", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_values(output__seed=args.seed)
        if args.command == "run":
            code = execute_run(cfg, args.out)
        elif args.command == "sweep":
            code = execute_sweep(cfg, args.out, args.workers)
        elif args.command == "converge":
            code = execute_converge(cfg, args.out, args.workers)
        else:
            code = execute_ineq(cfg, args.out, args.workers)
    except ConfigError as exc:
        print(f"ddchemo: {exc}", file=sys.stderr)
        return 1
    print(f"ddchemo {args.command}: exit {code}, outputs in {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
