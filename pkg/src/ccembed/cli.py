"""Command-line entry point.

Exit codes: 0 all checks passed, 1 a verification failed, 2 the boundary
curvature hypothesis is violated, 3 the optimizer did not converge, 4 the
configuration is invalid.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import parse_config, parse_tolerance_overrides
from .errors import (EXIT_CONFIG_ERROR, EXIT_FAIL, EXIT_HYPOTHESIS_VIOLATION,
                     EXIT_NOT_CONVERGED, EXIT_PASS, CcembedError, ConfigError,
                     HypothesisViolation, NotConvergedError)
from .pipeline import run_pipeline
from .suite import SUITE_NAMES, run_suite

__all__ = ["main", "build_parser"]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", metavar="DIR",
                   help="directory for the report, CSV dumps and figures")
    p.add_argument("--dump-fields", action="store_true",
                   help="also export every intermediate field as CSV")
    p.add_argument("--tol", metavar="NAME=VALUE", action="append",
                   default=[], help="override a named tolerance "
                                    "(repeatable)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the optimizer seed")


def build_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(
        prog="ccembed",
        description="Isometric embedding pipeline for conformally compact "
                    "metrics with curvature bounded above at infinity.")
    sub = root.add_subparsers(dest="command", required=True)

    pipe = sub.add_parser("pipeline", help="full verification pipeline")
    psub = pipe.add_subparsers(dest="action", required=True)
    prun = psub.add_parser(
        "run", help="run the full chain described by a config file")
    prun.add_argument("config", help="path to the INI config")
    _add_common(prun)
    psuite = psub.add_parser(
        "suite", help="run a built-in verification suite")
    psuite.add_argument("name", choices=SUITE_NAMES)
    _add_common(psuite)

    for name, text in (
            ("kappa", "curvature at infinity and the hypothesis gate only"),
            ("bdf", "stop after the collar profile and adjusted tensor"),
            ("embed", "stop after the flat embedding step")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="path to the INI config")
        _add_common(p)
    return root


def _run_suite(args) -> int:
    summary = run_suite(args.name, seed=args.seed if args.seed is not None
                        else 0)
    table = summary.render_table()
    sys.stdout.write(table)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"suite_{args.name}.txt").write_text(table)
    return EXIT_PASS if summary.passed else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "pipeline" and args.action == "suite":
            return _run_suite(args)
        through = {"pipeline": "verify", "kappa": "kappa",
                   "bdf": "bdf", "embed": "embed"}[args.command]
        cfg = parse_config(args.config).with_overrides(
            out=args.out,
            seed=args.seed,
            dump_fields=True if args.dump_fields else None,
            tolerances=parse_tolerance_overrides(args.tol))
        result = run_pipeline(cfg, through=through)
        sys.stdout.write(result.report.render())
        return result.exit_code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except HypothesisViolation as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS_VIOLATION
    except NotConvergedError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except CcembedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
