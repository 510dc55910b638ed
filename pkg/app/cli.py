from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from typing import List, Optional

import cvxpy as cp
import numpy as np

from app.problem import COMMANDS, parse_problem_file
from app.reports import FORMATS, emit_report
from app.runner import run_command
from core.config import RnoConfig
from core.errors import ParseError, RnoError, SolverError, ValidationError
from core.ledger import FindingsLedger
from core.telemetry import Telemetry, use_telemetry

EXIT_OK = 0

# Numerical failures raised below the SDP layer map to the solver exit code.
NUMERIC_FAILURES = (cp.error.SolverError, np.linalg.LinAlgError, FloatingPointError)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", "-i", required=True, help="problem file (JSON)")
    p.add_argument("--output", "-o", default=None, help="report path; stdout when omitted")
    p.add_argument("--format", "-f", choices=FORMATS, default="json")
    p.add_argument("--seed", type=int, default=None, help="overrides the seed of the problem file")
    p.add_argument("--tol", type=float, default=None, help="SDP tolerance (defaults to config, then RNO_TOL)")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None, help="restarts of the smoothing and see-saw heuristics")
    p.add_argument("--tight-mode", action="store_true", help="transform: use the max-overlap condition")
    p.add_argument("--no-clobber", action="store_true", help="fail instead of replacing an existing report")
    p.add_argument("--config", default="config.json")
    p.add_argument("--progress", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rno",
        description="Resource-nongenerating operations workbench: JSON problem files in, reports out.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        _add_common(sub.add_parser(name, help=f"run a {name} problem file"))
    return parser


def _config(args: argparse.Namespace) -> RnoConfig:
    cfg = RnoConfig.load_or_default(args.config)
    if args.max_iter is not None:
        if args.max_iter < 1:
            raise ValidationError(f"--max-iter must be positive, got {args.max_iter}")
        cfg.max_iter = int(args.max_iter)
    return cfg


def run(args: argparse.Namespace, cfg: RnoConfig) -> int:
    pf = parse_problem_file(args.input)
    if pf.command != args.command:
        raise ParseError("/command/name", f"file requests {pf.command!r} but the subcommand is {args.command!r}")
    if args.tol is not None:
        if not (0.0 < args.tol < 1.0):
            raise ValidationError(f"--tol must lie in (0, 1), got {args.tol}")
        pf = replace(pf, tolerances={**pf.tolerances, "sdp_tolerance": float(args.tol)})
    pf = pf.with_overrides(seed=args.seed, restarts=args.restarts, tight=True if args.tight_mode else None)

    ledger = FindingsLedger(cfg.ledger_path) if cfg.telemetry_enabled else FindingsLedger.in_memory()
    report = run_command(pf, cfg, ledger, progress=args.progress)
    text = emit_report(report, args.format, args.output, overwrite=not args.no_clobber)
    if args.output is None:
        sys.stdout.write(text)
    return EXIT_OK


def _fail(e: RnoError) -> int:
    print(f"error ({type(e).__name__}): {e}", file=sys.stderr)
    return e.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
    except RnoError as e:
        return _fail(e)
    tel = Telemetry.for_run(args.command, cfg.log_dir) if cfg.telemetry_enabled else Telemetry.disabled()

    t0 = time.perf_counter()
    code = EXIT_OK
    with use_telemetry(tel):
        tel.command_start(args.command, args.seed if args.seed is not None else cfg.seed)
        try:
            code = run(args, cfg)
        except RnoError as e:
            code = _fail(e)
        except NUMERIC_FAILURES as e:
            code = _fail(SolverError(f"{type(e).__name__}: {e}"))
        finally:
            tel.command_end(args.command, code, time.perf_counter() - t0)
    return code
