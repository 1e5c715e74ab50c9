"""
Command-line interface

    drroots solve --coeffs="-1,0 0,0 0,0 1,0"
    drroots annuli --roots="1 -1 0,2" --iota1 0.66 --iota2 1.33 --svg annuli.svg
    drroots experiment c1 --degree 10 --trials 300 --seed 1

Results go to stdout, logs to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src import config
from src.cascade import CascadeConfig, cascade_solve, solve_report
from src.dr_geometry import annuli, containment_check, dr_disks
from src.errors import DrRootsError, ParseError, ReportError, SolverError
from src.experiments import (
    EXPERIMENT_KINDS,
    IOTA1_LOWER_BOUND,
    Conjecture2Aggregation,
    CubicScanConfig,
    TrialEnsembleConfig,
    random_unit_circle_poly,
    run_experiment,
    track_report,
    trial_rng,
    write_quotient_csv,
    write_report,
)
from src.poly_core import CoeffForm, RootForm, roots_to_coeffs

logger = logging.getLogger("drroots")

EXIT_OK = 0
EXIT_USAGE = 2


class UsageError(Exception):
    """Invalid flag combination, reported with the usage text."""


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def parse_complex(token):
    """'re,im' or 're' -> complex."""
    parts = token.strip().split(",")
    if not 1 <= len(parts) <= 2 or not all(parts):
        raise ParseError(f"bad complex literal {token!r}, expected 're,im'")
    try:
        values = [float(part) for part in parts]
    except ValueError as exc:
        raise ParseError(f"bad complex literal {token!r}: {exc}") from exc
    z = complex(values[0], values[1] if len(values) == 2 else 0.0)
    if not np.isfinite(z):
        raise ParseError(f"non-finite complex literal {token!r}")
    return z


def parse_complex_list(text):
    tokens = text.split()
    if not tokens:
        raise ParseError("empty coefficient list")
    return [parse_complex(t) for t in tokens]


def read_complex_file(path):
    """One 're,im' per line; blank lines and '#' comments are skipped."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path} is not UTF-8 text: {exc}") from exc
    values = [parse_complex(line) for line in lines if line.strip() and not line.lstrip().startswith("#")]
    if not values:
        raise ParseError(f"{path} holds no coefficients")
    return values


def _coeff_form(values, center):
    if values[-1] == 0:
        raise ParseError("highest-degree coefficient is zero")
    return CoeffForm(values, center)


def polynomial_from_args(args):
    """RootForm for --roots, CoeffForm for --coeffs/--file, None when none given."""
    given = [name for name in ("coeffs", "roots", "file") if getattr(args, name) is not None]
    if len(given) > 1:
        raise UsageError("give only one of --coeffs, --roots, --file")
    if not given:
        return None
    center = parse_complex(args.center) if args.center else 0.0
    if args.roots is not None:
        if args.center:
            raise UsageError("--center applies to coefficient input only")
        leading = parse_complex(args.leading) if args.leading else 1.0
        if leading == 0:
            raise ParseError("leading coefficient is zero")
        return RootForm(parse_complex_list(args.roots), leading)
    if args.leading:
        raise UsageError("--leading applies to --roots input only")
    values = read_complex_file(args.file) if args.file is not None else parse_complex_list(args.coeffs)
    return _coeff_form(values, center)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _float_format(value):
    return f"{value:.17g}"


def _print_frame(frame):
    print(frame.to_string(index=False, float_format=_float_format))


def cmd_solve(args):
    poly = polynomial_from_args(args)
    if poly is None:
        raise UsageError("solve needs --coeffs, --roots or --file")
    coeffs = roots_to_coeffs(poly) if isinstance(poly, RootForm) else poly
    if not coeffs.is_finite:
        raise ParseError("coefficients overflow double precision")
    if coeffs.degree < 1:
        raise UsageError("polynomial must have degree >= 1")

    cfg = CascadeConfig(
        samples_per_circle_factor=args.samples_factor,
        newton_tol=args.tol,
        dedupe_tol=max(args.dedupe_tol, args.tol),
        deflate_mode=args.deflate,
        residual_bound=args.residual_bound,
    )
    logger.info("Solving degree %d (%s mode)", coeffs.degree, "deflation" if cfg.deflate_mode else "default")
    result = cascade_solve(coeffs, cfg)
    frame = pd.DataFrame(
        {
            "re": result.roots.real,
            "im": result.roots.imag,
            "residual": result.residuals,
            "cluster": result.cluster_flags,
        }
    )
    _print_frame(frame)
    if args.out:
        _write_text(args.out, solve_report(result, cfg).model_dump_json(indent=2) + "\n")
        logger.info("[OK] Solve report saved to: %s", args.out)
    return EXIT_OK


def _annulus_polynomial(args):
    poly = polynomial_from_args(args)
    if poly is not None and args.degree is not None:
        raise UsageError("--degree draws a random polynomial; drop the explicit input")
    if poly is None:
        if args.degree is None:
            raise UsageError("annuli needs --coeffs, --roots, --file or --degree")
        if args.degree < 2:
            raise UsageError("--degree must be >= 2")
        seed = config.resolve_seed(args.seed)
        return random_unit_circle_poly(args.degree, trial_rng(seed, 0))
    if isinstance(poly, CoeffForm):
        result = cascade_solve(poly)
        return RootForm(result.roots, poly.leading)
    return poly


def cmd_annuli(args):
    if not 0 < args.iota1 <= 1 <= args.iota2:
        raise UsageError("need 0 < --iota1 <= 1 <= --iota2")
    p = _annulus_polynomial(args)
    if p.degree < 2:
        raise UsageError("annuli need degree >= 2")

    disks = dr_disks(p)
    rings = annuli(p, args.iota1, args.iota2, disks=disks)
    inside = containment_check(p, args.iota1, args.iota2, disks=disks)
    frame = pd.DataFrame(
        {
            "zeta_re": [d.center.real for d in disks],
            "zeta_im": [d.center.imag for d in disks],
            "rho": [d.radius for d in disks],
            "inner": [r.inner for r in rings],
            "outer": [r.outer for r in rings],
        }
    )
    _print_frame(frame)
    print(f"# roots inside annulus union: {int(inside.sum())}/{p.degree}")

    if args.out:
        try:
            frame.to_csv(args.out, index=False, float_format="%.17g")
        except OSError as exc:
            raise ReportError(f"cannot write {args.out}: {exc}") from exc
        logger.info("[OK] Annulus table saved to: %s", args.out)
    if args.svg:
        from src.figures import render_annuli_svg

        render_annuli_svg(p, disks, rings, args.svg)
    return EXIT_OK


def _summary(report):
    if report.kind in ("c1", "cubic-scan"):
        line = f"iota1={report.iota1_estimate:.4f} iota2={report.iota2_estimate:.4f}"
    elif report.kind == "c2":
        line = f"c2_min_basin_points={report.c2_min_basin_points}"
    elif report.kind == "c3":
        line = f"c3_min_rich_circles={report.c3_min_rich_circles} total_radians_min={report.total_radians_min:.4f}"
    else:
        line = f"total_radians_min={report.total_radians_min:.4f}"
    if report.ensemble is not None:
        line += f" trials={report.trials_completed} rejected={report.rejected_trials}"
    return line


def cmd_experiment(args):
    kind = args.kind
    seed = config.resolve_seed(args.seed)
    workers = config.resolve_workers(args.threads)
    if args.plot and kind != "c1":
        raise UsageError("--plot is available for c1 only")

    if kind == "cubic-scan":
        scan = CubicScanConfig(grid_step=args.step, radius_cap=args.radius_cap)
        report = run_experiment(kind, scan=scan)
        default_name = f"cubic-scan_step{args.step:g}.json"
    else:
        ensemble = TrialEnsembleConfig(
            degree=args.degree if args.degree is not None else 10,
            trials=args.trials if args.trials is not None else 300,
            seed=seed,
            circle_points_factor=args.points_factor,
            basin_k_max=args.k_max,
            aggregation=args.aggregation,
        )
        report = run_experiment(kind, ensemble=ensemble, workers=workers)
        default_name = f"{kind}_n{ensemble.degree}_t{ensemble.trials}_s{seed}.json"

    if report.ensemble is not None and report.trials_completed == 0:
        raise SolverError(f"every one of {report.rejected_trials} trials was rejected")

    out = Path(args.out) if args.out else config.DRROOTS_REPORT_DIR / default_name
    artifacts = [write_report(report, out)]
    if kind == "c1":
        artifacts.append(write_quotient_csv(report, out.with_suffix(".csv")))
        if args.plot and report.quotient_histogram is not None:
            from src.figures import plot_quotient_histogram

            artifacts.append(plot_quotient_histogram(report, args.plot, lower_bound=IOTA1_LOWER_BOUND))

    print(_summary(report))
    if args.track:
        track_report(report, artifacts)
    return EXIT_OK


def _write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="RNG seed (default: $DRROOTS_SEED, else 0)")
    common.add_argument("--out", type=Path, help="Output file")
    common.add_argument("--threads", type=int, help="Worker processes (default: $DRROOTS_THREADS, else CPU count)")
    common.add_argument("--degree", type=int, help="Degree of random polynomials")
    common.add_argument("--trials", type=int, help="Number of random trials")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug")

    polynomial = argparse.ArgumentParser(add_help=False)
    polynomial.add_argument("--coeffs", help='Ascending coefficients, e.g. "-1,0 0,0 1,0"')
    polynomial.add_argument("--roots", help='Roots, e.g. "1,0 -1,0"')
    polynomial.add_argument("--file", type=Path, help="Coefficient file, one 're,im' per line")
    polynomial.add_argument("--center", help="Expansion point of the coefficients (default 0)")
    polynomial.add_argument("--leading", help="Leading coefficient for --roots (default 1)")

    parser = argparse.ArgumentParser(prog="drroots", description="Derivative-root annuli and the cascade root finder")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", parents=[common, polynomial], help="Find all roots")
    solve.add_argument("--deflate", action="store_true", help="One root per circle pass with deflation")
    solve.add_argument("--samples-factor", type=int, default=10, help="Newton starts per circle = factor * degree")
    solve.add_argument("--tol", type=float, default=1e-12, help="Newton convergence tolerance")
    solve.add_argument("--dedupe-tol", type=float, default=1e-9, help="Relative distance merging duplicate roots")
    solve.add_argument(
        "--residual-bound", type=float, default=1e-8, help="Largest normalised residual a returned root may have"
    )
    solve.set_defaults(handler=cmd_solve)

    ann = sub.add_parser("annuli", parents=[common, polynomial], help="DR-disks and annuli")
    ann.add_argument("--iota1", type=float, default=0.66)
    ann.add_argument("--iota2", type=float, default=1.33)
    ann.add_argument("--svg", type=Path, help="Write the plane figure")
    ann.set_defaults(handler=cmd_annuli)

    exp = sub.add_parser("experiment", parents=[common], help="Seeded experiments")
    exp.add_argument("kind", choices=EXPERIMENT_KINDS)
    exp.add_argument("--step", type=float, default=0.05, help="cubic-scan grid step")
    exp.add_argument("--radius-cap", type=float, default=50.0, help="cubic-scan bound on |a|")
    exp.add_argument("--points-factor", type=int, default=10, help="Samples per DR-circle = factor * degree")
    exp.add_argument("--k-max", type=int, default=64, help="Newton steps checked by the basin test")
    exp.add_argument(
        "--aggregation",
        choices=[a.value for a in Conjecture2Aggregation],
        default=Conjecture2Aggregation.BEST_CIRCLE.value,
        help="c2 per-root score: best single circle or all circles summed",
    )
    exp.add_argument("--plot", type=Path, help="c1 only: write a quotient histogram (PNG)")
    exp.add_argument("--track", action="store_true", help="Log the run to MLflow")
    exp.set_defaults(handler=cmd_experiment)
    return parser


def configure_logging(verbosity):
    if verbosity >= 2:
        level, fmt = logging.DEBUG, "[%(levelname)s] %(name)s: %(message)s"
    elif verbosity == 1:
        level, fmt = logging.INFO, "%(message)s"
    else:
        level, fmt = config.DRROOTS_LOG_LEVEL.upper(), "%(message)s"
    logging.basicConfig(stream=sys.stderr, level=level, format=fmt)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except (UsageError, ValidationError) as exc:
        parser.print_usage(sys.stderr)
        logger.error("[ERROR] %s", exc)
        return EXIT_USAGE
    except DrRootsError as exc:
        logger.error("[ERROR] %s", exc)
        return exc.exit_code
    except OSError as exc:
        logger.error("[ERROR] %s", exc)
        return ReportError.exit_code


if __name__ == "__main__":
    sys.exit(main())
