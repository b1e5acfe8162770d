"""``klsde-bench`` command line.

Exit status: 0 on success, 2 for configuration or input errors, 3 for
numerical failures.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from ..errors import ConfigError, KlsdeError, ValidationError
from .config import METHODS, ExperimentConfig, load_config, parse_int_list
from .problems import PROBLEM_KINDS
from .runs import (CONVERGENCE_HEADER, MOMENTS_HEADER, run_convergence, run_endpoint_gallery, run_moments,
                   run_sample, run_trajectory)

log = logging.getLogger("klsde.bench")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI experiment file")
    p.add_argument("--problem", choices=PROBLEM_KINDS, help="problem kind (overrides the config)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    p.add_argument("--samples", type=int, help="Monte Carlo sample count N")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--method", help=f"comma-separated methods from: {', '.join(METHODS)}")
    p.add_argument("--m-grid", help="comma-separated m values applied to every method")
    p.add_argument("--workers", type=int, help="thread pool size for sampling")
    p.add_argument("--no-timing", action="store_true",
                   help="write NA wall times so output is byte-reproducible")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="klsde-bench",
        description="Sampling and convergence studies for linear SDEs with additive noise.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("sample", "write endpoint samples"),
                       ("converge", "weak-error convergence table"),
                       ("trajectory", "one time-stepping path"),
                       ("gallery", "exact mean and a few endpoint realizations"),
                       ("moments", "deterministic moment and error table")):
        _common(sub.add_parser(name, help=text))
    return parser


def _config_from_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    kw = dict(seed=args.seed, samples=args.samples, out=args.out, workers=args.workers)
    if args.problem and args.problem != cfg.problem_kind:
        kw.update(problem_kind=args.problem, params={})
    if args.method:
        kw["methods"] = tuple(s.strip() for s in args.method.split(",") if s.strip())
    if args.m_grid:
        kw["m_grids"] = {"default": parse_int_list(args.m_grid)}
    if args.no_timing:
        kw["timing"] = False
    return cfg.with_overrides(**kw)


def _print_rows(header, rows):
    print("  ".join(f"{h:>14s}" for h in header))
    for r in rows:
        cells = []
        for v in r:
            if isinstance(v, float):
                cells.append(f"{v:14.6g}")
            else:
                cells.append(f"{str(v):>14s}")
        print("  ".join(cells))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
        if args.command == "converge":
            rows = run_convergence(cfg)
            _print_rows(CONVERGENCE_HEADER, [r.csv_fields() for r in rows])
        elif args.command == "trajectory":
            table = run_trajectory(cfg)
            print(f"{table.shape[0]} rows, final state {np.array2string(table[-1, 1:], precision=4)}")
        elif args.command == "gallery":
            table = run_endpoint_gallery(cfg)
            print(f"{table.shape[0]} rows x {table.shape[1] - 1} value columns")
        elif args.command == "sample":
            x = run_sample(cfg)
            print(f"{x.shape[0]} samples, mean |X|^2 = {np.mean(np.sum(x * x, axis=1)):.6g}")
        else:
            _print_rows(MOMENTS_HEADER, run_moments(cfg))
    except (ConfigError, ValidationError) as exc:
        print(f"klsde-bench: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KlsdeError as exc:
        print(f"klsde-bench: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
