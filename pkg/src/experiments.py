"""
Experiments

Seeded Monte-Carlo runs over random polynomials with roots on the unit circle:

1. c1            - min / max quotient |z_i - zeta_j| / rho_j (annulus scalars)
2. c2            - fast-basin sample points per root on the DR-circles
3. c3            - DR-circles rich in fast-basin points, plus total radians
4. cubic-scan    - the degree-3 family (z - 1)(z + 1)(z - a) on a grid of a

Each trial owns the RNG stream default_rng(SeedSequence([seed, trial])), so a
run is identical whether its trials are mapped serially or over processes.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from functools import partial
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.dr_geometry import dr_disks, iota_records
from src.errors import IllConditioned, ReportError, ReportSchemaError
from src.newton import DEFAULT_K_MAX, fast_basin_targets
from src.poly_core import RootForm

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"

ExperimentKind = Literal["c1", "c2", "c3", "cubic-scan", "total-radians"]
EXPERIMENT_KINDS = ("c1", "c2", "c3", "cubic-scan", "total-radians")

# Real root of a^3 - a - 1 (the plastic number): the sharp upper scalar for cubics
ALPHA_STAR = ((9 + math.sqrt(69)) / 18) ** (1 / 3) + ((9 - math.sqrt(69)) / 18) ** (1 / 3)

# A lower annulus scalar exists universally and is at least this; no upper one does
IOTA1_LOWER_BOUND = (math.sqrt(5.0) - 1.0) / 2.0

# A DR-circle is rich when this fraction of its samples lies in some fast basin
RICH_FRACTION = 0.1

HISTOGRAM_RANGE = (0.0, 2.0)
HISTOGRAM_BINS = 80

BANNER = "=" * 70


class Conjecture2Aggregation(str, Enum):
    BEST_CIRCLE = "best-circle"
    ALL_CIRCLES = "all-circles"


class TrialEnsembleConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    degree: int = Field(10, ge=2)
    trials: int = Field(300, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    circle_points_factor: int = Field(10, gt=0, description="Samples per DR-circle = factor * degree")
    basin_k_max: int = Field(DEFAULT_K_MAX, gt=0)
    aggregation: Conjecture2Aggregation = Conjecture2Aggregation.BEST_CIRCLE
    distinct_tol: float = Field(1e-12, gt=0, description="Trials with two roots this close are rejected from basin runs")


class CubicScanConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    grid_step: float = Field(0.05, gt=0)
    radius_cap: float = Field(50.0, gt=0)
    refine_rounds: int = Field(12, ge=0, description="Zoom rounds around each extreme after the grid pass")
    refine_seeds: int = Field(8, gt=0, description="Best grid points each extreme is refined from")


class QuotientExtreme(BaseModel):
    trial: int
    root_index: int
    circle_index: int
    quotient: float


class QuotientHistogram(BaseModel):
    edges: list[float]
    counts: list[int]


class ExperimentReport(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    schema_version: str = SCHEMA_VERSION
    kind: ExperimentKind
    ensemble: Optional[TrialEnsembleConfig] = None
    scan: Optional[CubicScanConfig] = None
    iota1_estimate: Optional[float] = None
    iota2_estimate: Optional[float] = None
    direct_quotient_min: Optional[float] = None
    direct_quotient_max: Optional[float] = None
    c2_min_basin_points: Optional[int] = Field(None, ge=0)
    c3_min_rich_circles: Optional[int] = Field(None, ge=0)
    total_radians_min: Optional[float] = Field(None, ge=0)
    grid_points: Optional[int] = None
    trials_completed: int = Field(0, ge=0)
    rejected_trials: int = Field(0, ge=0)
    rejected_trial_indices: list[int] = []
    quotient_extremes: list[QuotientExtreme] = []
    quotient_histogram: Optional[QuotientHistogram] = None
    started_at: str
    finished_at: str


# ---------------------------------------------------------------------------
# Random ensemble
# ---------------------------------------------------------------------------


def trial_rng(seed, trial):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def random_unit_circle_poly(degree, rng):
    """Monic polynomial with roots e^{i theta}, theta uniform on [0, 2 pi)."""
    if degree < 2:
        raise ValueError("degree must be >= 2")
    theta = rng.uniform(0.0, 2.0 * math.pi, size=degree)
    return RootForm(np.exp(1j * theta))


@dataclass
class _IotaTrial:
    trial: int
    rejected: bool = False
    low: Optional[QuotientExtreme] = None
    high: Optional[QuotientExtreme] = None
    quotients: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass
class _BasinTrial:
    trial: int
    rejected: bool = False
    best_circle_min: int = 0
    all_circles_min: int = 0
    rich_circles: int = 0
    radians_min: float = 0.0


def _extreme(trial, records, index):
    rec = records[index]
    return QuotientExtreme(trial=trial, root_index=index, circle_index=rec.circle_index, quotient=rec.quotient)


def _iota_trial(degree, seed, trial):
    p = random_unit_circle_poly(degree, trial_rng(seed, trial))
    try:
        disks = dr_disks(p)
    except IllConditioned as exc:
        logger.warning("[WARNING] Trial %d rejected: %s", trial, exc)
        return _IotaTrial(trial, rejected=True)
    records = iota_records(p, disks)
    q = np.array([r.quotient for r in records])
    return _IotaTrial(
        trial,
        low=_extreme(trial, records, int(np.argmin(q))),
        high=_extreme(trial, records, int(np.argmax(q))),
        quotients=q,
    )


def basin_counts(p, disks, points_per_circle, k_max=DEFAULT_K_MAX):
    """
    Fast-basin counts on the DR-circles.

    Returns (counts, union): counts[i, j] is the number of samples on circle j
    in the fast basin of root i; union[j] the samples on circle j in any basin.
    """
    n = p.degree
    theta = 2.0 * math.pi * np.arange(points_per_circle) / points_per_circle
    ring = np.exp(1j * theta)
    counts = np.zeros((n, len(disks)), dtype=int)
    union = np.zeros(len(disks), dtype=int)
    usable = [j for j, d in enumerate(disks) if 0 < d.radius < math.inf]
    if not usable:
        return counts, union
    starts = np.concatenate([disks[j].center + disks[j].radius * ring for j in usable])
    targets = fast_basin_targets(p, starts, k_max).reshape(len(usable), points_per_circle)
    for row, j in enumerate(usable):
        hits = targets[row][targets[row] >= 0]
        counts[:, j] = np.bincount(hits, minlength=n)
        union[j] = hits.size
    return counts, union


def _has_close_roots(roots, tol):
    diffs = np.abs(roots[:, None] - roots[None, :])
    np.fill_diagonal(diffs, np.inf)
    return bool(np.min(diffs) <= tol)


def _basin_trial(cfg, trial):
    p = random_unit_circle_poly(cfg.degree, trial_rng(cfg.seed, trial))
    if _has_close_roots(p.roots, cfg.distinct_tol):
        logger.warning("[WARNING] Trial %d rejected: roots closer than %.0e", trial, cfg.distinct_tol)
        return _BasinTrial(trial, rejected=True)
    try:
        disks = dr_disks(p)
    except IllConditioned as exc:
        logger.warning("[WARNING] Trial %d rejected: %s", trial, exc)
        return _BasinTrial(trial, rejected=True)

    points = cfg.circle_points_factor * cfg.degree
    counts, union = basin_counts(p, disks, points, cfg.basin_k_max)
    per_root = counts.sum(axis=1)
    return _BasinTrial(
        trial,
        best_circle_min=int(counts.max(axis=1).min()),
        all_circles_min=int(per_root.min()),
        rich_circles=int(np.count_nonzero(union >= RICH_FRACTION * points)),
        radians_min=float(per_root.min() * 2.0 * math.pi / points),
    )


def _map_trials(fn, trials, workers):
    if workers <= 1:
        return [fn(t) for t in range(trials)]
    chunksize = max(1, trials // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials), chunksize=chunksize))


def _now():
    return datetime.now(timezone.utc).isoformat()


def _banner(title, cfg):
    logger.info(BANNER)
    logger.info("%s: degree %d, %d trials, seed %d", title, cfg.degree, cfg.trials, cfg.seed)
    logger.info(BANNER)


def conjecture1_experiment(cfg, workers=1):
    """Global min / max of the per-root quotient closest to 1."""
    started = _now()
    _banner("ANNULUS SCALARS", cfg)
    logger.info("[1/2] Computing DR-disks and quotients...")
    results = _map_trials(partial(_iota_trial, cfg.degree, cfg.seed), cfg.trials, workers)

    logger.info("[2/2] Aggregating...")
    done = [r for r in results if not r.rejected]
    rejected = [r.trial for r in results if r.rejected]
    extremes = []
    for r in done:
        extremes.extend([r.low, r.high])
    report = ExperimentReport(
        kind="c1",
        ensemble=cfg,
        trials_completed=len(done),
        rejected_trials=len(rejected),
        rejected_trial_indices=rejected,
        quotient_extremes=extremes,
        started_at=started,
        finished_at=started,
    )
    if done:
        quotients = np.concatenate([r.quotients for r in done])
        counts, edges = np.histogram(quotients, bins=HISTOGRAM_BINS, range=HISTOGRAM_RANGE)
        report = report.model_copy(
            update={
                "iota1_estimate": min(r.low.quotient for r in done),
                "iota2_estimate": max(r.high.quotient for r in done),
                "quotient_histogram": QuotientHistogram(edges=edges.tolist(), counts=counts.tolist()),
            }
        )
    logger.info("[OK] iota1=%s iota2=%s (%d rejected)", report.iota1_estimate, report.iota2_estimate, len(rejected))
    return report.model_copy(update={"finished_at": _now()})


def _basin_experiment(cfg, workers, kind):
    started = _now()
    _banner("FAST-BASIN SAMPLES ON DR-CIRCLES", cfg)
    logger.info("[1/2] Classifying %d samples per circle...", cfg.circle_points_factor * cfg.degree)
    results = _map_trials(partial(_basin_trial, cfg), cfg.trials, workers)

    logger.info("[2/2] Aggregating...")
    done = [r for r in results if not r.rejected]
    rejected = [r.trial for r in results if r.rejected]
    update = {}
    if done:
        if cfg.aggregation is Conjecture2Aggregation.BEST_CIRCLE:
            update["c2_min_basin_points"] = min(r.best_circle_min for r in done)
        else:
            update["c2_min_basin_points"] = min(r.all_circles_min for r in done)
        update["c3_min_rich_circles"] = min(r.rich_circles for r in done)
        update["total_radians_min"] = min(r.radians_min for r in done)
    report = ExperimentReport(
        kind=kind,
        ensemble=cfg,
        trials_completed=len(done),
        rejected_trials=len(rejected),
        rejected_trial_indices=rejected,
        started_at=started,
        finished_at=_now(),
        **update,
    )
    logger.info(
        "[OK] min basin points=%s, min rich circles=%s (%d rejected)",
        report.c2_min_basin_points,
        report.c3_min_rich_circles,
        len(rejected),
    )
    return report


def conjecture2_experiment(cfg, workers=1):
    """Per root, the best count of fast-basin samples on a DR-circle; min over roots and trials."""
    return _basin_experiment(cfg, workers, "c2")


def conjecture3_experiment(cfg, workers=1, kind="c3"):
    """Per trial, DR-circles with at least a tenth of samples in some fast basin; min over trials."""
    return _basin_experiment(cfg, workers, kind)


# ---------------------------------------------------------------------------
# Degree-3 grid scan
# ---------------------------------------------------------------------------


def cubic_critical_points(a):
    """Roots of 3z^2 - 2az - 1, with sqrt(a^2 + 3) taken in the first quadrant."""
    a = np.asarray(a, dtype=complex)
    root = np.sqrt(a * a + 3.0)
    return (a - root) / 3.0, (a + root) / 3.0


def _cubic_rho(zeta, a):
    p = (zeta - 1.0) * (zeta + 1.0) * (zeta - a)
    second = 6.0 * zeta - 2.0 * a
    return np.minimum(np.abs(2.0 * p / second) ** 0.5, np.abs(p) ** (1.0 / 3.0))


def cubic_ratios(a):
    """
    rho / |z - zeta| for the three roots of (z - 1)(z + 1)(z - a).

    Roots 1 and -1 are measured against the '-' critical point, root a
    against the '+' one. Returns an array of shape (3,) + a.shape.
    """
    a = np.asarray(a, dtype=complex)
    minus, plus = cubic_critical_points(a)
    rho_minus = _cubic_rho(minus, a)
    return np.stack(
        [
            rho_minus / np.abs(1.0 - minus),
            rho_minus / np.abs(-1.0 - minus),
            _cubic_rho(plus, a) / np.abs(a - plus),
        ]
    )


def _feasible(a, radius_cap):
    return (a.real >= 0) & (a.imag >= 0) & (np.abs(a - 1.0) >= 2.0) & (np.abs(a) <= radius_cap)


def _signed_extreme(a, sign):
    """Largest ratio per a for sign = +1, minus the smallest for sign = -1."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = cubic_ratios(a)
    values = ratios.max(axis=0) if sign > 0 else -ratios.min(axis=0)
    return np.where(np.isnan(values), -np.inf, values)


def _refine_extreme(seeds, half_width, radius_cap, sign, rounds, points=41):
    """
    Zoom in on the extreme around each seed.

    Every round lays a points x points grid over the square of the current half
    width around the best a so far, keeps the feasible nodes and shrinks the
    square fourfold. Returns the largest ratio (sign = +1) or the smallest
    (sign = -1) seen.
    """
    offsets = np.linspace(-1.0, 1.0, points)
    window = (offsets[:, None] + 1j * offsets[None, :]).ravel()
    best = -np.inf
    for a0 in seeds:
        center, h = complex(a0), half_width
        value = float(_signed_extreme(np.array([center]), sign)[0])
        for _ in range(rounds):
            a = center + h * window
            a = a[_feasible(a, radius_cap)]
            if a.size:
                values = _signed_extreme(a, sign)
                j = int(np.argmax(values))
                if values[j] > value:
                    center, value = complex(a[j]), float(values[j])
            h /= 4.0
        best = max(best, value)
    return sign * best


def cubic_scan(grid_step=0.05, radius_cap=50.0, refine_rounds=12, refine_seeds=8):
    """
    Extremes of the cubic ratios over a in the first quadrant with |a - 1| >= 2.

    The grid pass locates the extremes; each is then refined by zooming in on
    the refine_seeds best grid points, so the reported values do not depend on
    the grid step landing on the peak.
    """
    cfg = CubicScanConfig(
        grid_step=grid_step, radius_cap=radius_cap, refine_rounds=refine_rounds, refine_seeds=refine_seeds
    )
    started = _now()
    logger.info("[1/2] Scanning cubic grid (step %g, cap %g)...", cfg.grid_step, cfg.radius_cap)
    axis = cfg.grid_step * np.arange(int(math.floor(cfg.radius_cap / cfg.grid_step)) + 1)
    a = (axis[:, None] + 1j * axis[None, :]).ravel()
    a = a[_feasible(a, cfg.radius_cap)]
    if a.size == 0:
        raise ValueError(f"no grid point with |a - 1| >= 2 inside radius cap {cfg.radius_cap}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = cubic_ratios(a)
    upper, lower = ratios.max(axis=0), ratios.min(axis=0)
    logger.info("[OK] %d grid points, iota1=%.4f iota2=%.4f", a.size, lower.min(), upper.max())

    logger.info("[2/2] Refining the extremes (%d rounds around %d seeds)...", cfg.refine_rounds, cfg.refine_seeds)
    k = min(cfg.refine_seeds, a.size)
    zoom = partial(_refine_extreme, half_width=cfg.grid_step, radius_cap=cfg.radius_cap, rounds=cfg.refine_rounds)
    iota2 = max(float(upper.max()), zoom(a[np.argsort(upper)[-k:]], sign=1))
    iota1 = min(float(lower.min()), zoom(a[np.argsort(lower)[:k]], sign=-1))
    report = ExperimentReport(
        kind="cubic-scan",
        scan=cfg,
        iota1_estimate=iota1,
        iota2_estimate=iota2,
        direct_quotient_min=1.0 / iota2,
        direct_quotient_max=1.0 / iota1,
        grid_points=int(a.size),
        started_at=started,
        finished_at=_now(),
    )
    logger.info("[OK] Refined iota1=%.6f iota2=%.6f", iota1, iota2)
    return report


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def write_report(report, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write report {path}: {exc}") from exc
    logger.info("[OK] Report saved to: %s", path)
    return path


def read_report(path):
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ReportError(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ReportSchemaError(f"{path} is not a JSON report: {exc}") from exc
    if not isinstance(payload, dict) or "schema_version" not in payload:
        raise ReportSchemaError(f"{path} has no schema_version")
    if payload["schema_version"] != SCHEMA_VERSION:
        raise ReportSchemaError(f"{path}: unsupported schema_version {payload['schema_version']!r}")
    try:
        return ExperimentReport.model_validate(payload)
    except ValidationError as exc:
        raise ReportSchemaError(f"{path} failed validation: {exc}") from exc


def quotient_extremes_frame(report):
    columns = ["trial", "root_index", "circle_index", "quotient"]
    rows = [e.model_dump() for e in report.quotient_extremes]
    return pd.DataFrame(rows, columns=columns)


def write_quotient_csv(report, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        quotient_extremes_frame(report).to_csv(path, index=False, float_format="%.17g")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    logger.info("[OK] Quotient extremes saved to: %s", path)
    return path


# ---------------------------------------------------------------------------
# Dispatch and tracking
# ---------------------------------------------------------------------------


def run_experiment(kind, ensemble=None, scan=None, workers=1):
    if kind not in EXPERIMENT_KINDS:
        raise ValueError(f"unknown experiment {kind!r}")
    if kind == "cubic-scan":
        scan = scan or CubicScanConfig()
        return cubic_scan(scan.grid_step, scan.radius_cap, scan.refine_rounds, scan.refine_seeds)
    ensemble = ensemble or TrialEnsembleConfig()
    if kind == "c1":
        return conjecture1_experiment(ensemble, workers)
    if kind == "c2":
        return conjecture2_experiment(ensemble, workers)
    return conjecture3_experiment(ensemble, workers, kind=kind)


_METRICS = (
    "iota1_estimate",
    "iota2_estimate",
    "direct_quotient_min",
    "direct_quotient_max",
    "c2_min_basin_points",
    "c3_min_rich_circles",
    "total_radians_min",
    "trials_completed",
    "rejected_trials",
)


def track_report(report, artifacts=()):
    """Log config, headline statistics and artifact files to MLflow."""
    from mlflow_setup.mlflow_config import RUN_TAGS, setup_mlflow

    mlflow = setup_mlflow()
    config = report.ensemble or report.scan
    with mlflow.start_run(run_name=report.kind, tags=RUN_TAGS):
        mlflow.log_param("kind", report.kind)
        if config is not None:
            mlflow.log_params({k: str(v) for k, v in config.model_dump(mode="json").items()})
        for name in _METRICS:
            value = getattr(report, name)
            if value is not None and math.isfinite(value):
                mlflow.log_metric(name, value)
        for path in artifacts:
            mlflow.log_artifact(str(path))
        logger.info("[OK] Logged %s run to MLflow", report.kind)
