"""Command-line entry point.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .config import (
    ParseError,
    RunConfig,
    ValidationError,
    emit_history,
    format_history_row,
    parse_config,
)
from .diagnostics import (
    DiagnosticsReport,
    complementarity_audit,
    convergence_slope,
    gradient_check,
    projection_residual,
    symmetry_check,
)
from .errors import SolverError
from .sqp import run_continuation

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("robin_sqp")

FIELD_HELP = {
    "dim": "space dimension, 2 or 3",
    "level_min": "coarsest level of the continuation",
    "level_max": "finest level (h = 2^-level, tau = T 2^-level)",
    "T": "time horizon",
    "kappa": "control cost",
    "alpha": "lower control bound",
    "beta": "upper control bound",
    "nonlinearity": "comma-separated coefficients of a(y), ascending degree",
    "target": "tracking target: example or zero",
    "rho": "stop when the relative increments sum below rho",
    "max_iters": "SQP iterations per level",
    "seed": "seed for random directions in diagnostics",
    "output": "CSV file for the finest-level history",
    "mode": "solve, continuation or diagnostics",
    "robin": "Robin coupling: lumped or exact",
    "target_rule": "time quadrature of the tracking term: right or gauss",
    "pg_tol": "tolerance of the projected-gradient warm start",
    "allow_large": "permit levels beyond the desk-scale limit",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robin-sqp",
        description="Lagrange-Newton SQP for bilinear Robin boundary control of a semilinear heat equation.",
    )
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every SQP iteration")
    for f in fields(RunConfig):
        parser.add_argument(f"--{f.name}", dest=f.name, default=None, metavar="VALUE",
                            help=f"{FIELD_HELP.get(f.name, f.name)} (default {f.default})")
    return parser


def level_path(path: Path, level: int) -> Path:
    return path.with_name(f"{path.stem}_level{level}{path.suffix}")


def run(cfg: RunConfig) -> int:
    spec = cfg.problem()
    out = cfg.output_path()
    level_min = cfg.level_max if cfg.mode == "solve" else cfg.level_min
    result = run_continuation(spec, level_min, cfg.level_max, rho=cfg.rho,
                              max_iters=cfg.max_iters, pg_tol=cfg.pg_tol)
    for level, hist in result.histories.items():
        if level != cfg.level_max:
            emit_history(hist, level_path(out, level))
    final = result.histories[cfg.level_max]
    emit_history(final, out)
    for rec in final:
        print(",".join(format_history_row(rec)))

    if cfg.mode == "diagnostics":
        disc, w = result.discretization, result.iterate
        audit = complementarity_audit(disc, w)
        try:
            slope = convergence_slope(final)
        except ValueError:
            slope = float("nan")
        report = DiagnosticsReport(
            gradient_fd_error=gradient_check(disc, w.u, seed=cfg.seed),
            hessian_asymmetry=symmetry_check(disc, w, seed=cfg.seed),
            projection_residual=projection_residual(disc, w),
            strict_complementarity_margin=audit.margin,
            degenerate_fraction=audit.degenerate_fraction,
            tau_plus=audit.tau_plus,
            tau_minus=audit.tau_minus,
            convergence_slope=slope,
        )
        text = report.to_text()
        out.with_name(f"{out.stem}_diagnostics.txt").write_text(text)
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig) if getattr(args, f.name) is not None}
    try:
        cfg = parse_config(args.config, overrides)
    except (ParseError, ValidationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return run(cfg)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
