"""Tests for the seeded ensembles, the cubic scan and report persistence."""

import json
import math

import numpy as np
import pandas as pd
import pytest

from src.dr_geometry import containment_check, dr_disks
from src.errors import ReportSchemaError
from src.experiments import (
    ALPHA_STAR,
    Conjecture2Aggregation,
    CubicScanConfig,
    TrialEnsembleConfig,
    basin_counts,
    conjecture1_experiment,
    conjecture2_experiment,
    conjecture3_experiment,
    cubic_ratios,
    cubic_scan,
    random_unit_circle_poly,
    read_report,
    run_experiment,
    track_report,
    trial_rng,
    write_quotient_csv,
    write_report,
)
from src.poly_core import RootForm
from tests.conftest import nth_roots

TIMESTAMPS = {"started_at", "finished_at"}


def _body(report):
    return report.model_dump(mode="json", exclude=TIMESTAMPS)


def test_alpha_star_is_plastic_number():
    assert abs(ALPHA_STAR**3 - ALPHA_STAR - 1) <= 1e-14
    assert ALPHA_STAR == pytest.approx(1.3247, abs=1e-4)


def test_random_poly_on_unit_circle_and_seeded():
    p = random_unit_circle_poly(12, trial_rng(5, 3))
    assert np.allclose(np.abs(p.roots), 1, atol=1e-15)
    again = random_unit_circle_poly(12, trial_rng(5, 3))
    assert np.array_equal(p.roots, again.roots)
    other = random_unit_circle_poly(12, trial_rng(5, 4))
    assert not np.array_equal(p.roots, other.roots)


def test_random_poly_needs_degree_two():
    with pytest.raises(ValueError):
        random_unit_circle_poly(1, trial_rng(0, 0))


def test_ensemble_config_validation():
    with pytest.raises(ValueError):
        TrialEnsembleConfig(degree=1)
    with pytest.raises(ValueError):
        TrialEnsembleConfig(seed=-1)
    with pytest.raises(ValueError):
        TrialEnsembleConfig(trials=10, unknown=True)


# ---------------------------------------------------------------------------
# Conjecture 1
# ---------------------------------------------------------------------------


def test_c1_quadratics_give_unit_scalars():
    report = conjecture1_experiment(TrialEnsembleConfig(degree=2, trials=20, seed=1))
    assert report.trials_completed == 20
    assert abs(report.iota1_estimate - 1) <= 1e-10
    assert abs(report.iota2_estimate - 1) <= 1e-10


def test_c1_small_run_structure():
    cfg = TrialEnsembleConfig(degree=8, trials=30, seed=4)
    report = conjecture1_experiment(cfg)
    assert report.kind == "c1"
    assert report.ensemble == cfg
    assert report.trials_completed + report.rejected_trials == 30
    assert report.iota1_estimate <= report.iota2_estimate
    assert len(report.quotient_extremes) == 2 * report.trials_completed
    assert sum(report.quotient_histogram.counts) <= 8 * report.trials_completed
    assert len(report.quotient_histogram.edges) == len(report.quotient_histogram.counts) + 1


def test_c1_reproducible_apart_from_timestamps():
    cfg = TrialEnsembleConfig(degree=7, trials=15, seed=9)
    assert _body(conjecture1_experiment(cfg)) == _body(conjecture1_experiment(cfg))


def test_c1_serial_and_parallel_agree():
    cfg = TrialEnsembleConfig(degree=6, trials=12, seed=2)
    assert _body(conjecture1_experiment(cfg, workers=1)) == _body(conjecture1_experiment(cfg, workers=2))


def test_c1_more_trials_widen_the_range():
    small = conjecture1_experiment(TrialEnsembleConfig(degree=8, trials=10, seed=3))
    large = conjecture1_experiment(TrialEnsembleConfig(degree=8, trials=25, seed=3))
    assert large.iota1_estimate <= small.iota1_estimate
    assert large.iota2_estimate >= small.iota2_estimate


def test_c1_estimates_contain_every_trial():
    cfg = TrialEnsembleConfig(degree=9, trials=20, seed=6)
    report = conjecture1_experiment(cfg)
    iota1, iota2 = report.iota1_estimate, report.iota2_estimate
    if not iota1 <= 1 <= iota2:
        pytest.skip("estimates do not straddle 1 on this small run")
    for trial in range(cfg.trials):
        if trial in report.rejected_trial_indices:
            continue
        p = random_unit_circle_poly(cfg.degree, trial_rng(cfg.seed, trial))
        assert containment_check(p, iota1, iota2).all()


def test_c1_desk_scale_bands():
    report = conjecture1_experiment(TrialEnsembleConfig(degree=10, trials=300, seed=1))
    assert 0.60 <= report.iota1_estimate <= 0.80
    assert 1.20 <= report.iota2_estimate <= 1.45


@pytest.mark.slow
def test_c1_long_run_bands():
    report = conjecture1_experiment(TrialEnsembleConfig(degree=10, trials=3000, seed=1), workers=4)
    assert 0.64 <= report.iota1_estimate <= 0.70
    assert 1.29 <= report.iota2_estimate <= 1.36


# ---------------------------------------------------------------------------
# Fast-basin experiments
# ---------------------------------------------------------------------------


def test_basin_counts_pure_power():
    p = RootForm(nth_roots(8, 1))
    disks = dr_disks(p)
    counts, union = basin_counts(p, disks, 80)
    assert counts.shape == (8, len(disks))
    assert counts.max(axis=1).min() >= 1
    assert np.all(union >= 8)
    assert np.all(counts.sum(axis=0) == union)


def test_basin_counts_skip_degenerate_disks():
    p = RootForm([0, 0, 1])
    disks = dr_disks(p)
    counts, union = basin_counts(p, disks, 30)
    # the disk at the double root has radius 0
    assert union[0] == 0
    assert counts[:, 0].sum() == 0


def test_basin_experiment_small_run():
    cfg = TrialEnsembleConfig(degree=6, trials=10, seed=8)
    report = conjecture2_experiment(cfg)
    assert report.kind == "c2"
    assert report.c2_min_basin_points >= 0
    assert 0 <= report.c3_min_rich_circles <= cfg.degree - 1
    assert report.total_radians_min >= 0


def test_all_circles_aggregation_dominates_best_circle():
    best = conjecture2_experiment(TrialEnsembleConfig(degree=6, trials=10, seed=8))
    total = conjecture2_experiment(
        TrialEnsembleConfig(degree=6, trials=10, seed=8, aggregation=Conjecture2Aggregation.ALL_CIRCLES)
    )
    assert total.c2_min_basin_points >= best.c2_min_basin_points


def test_total_radians_kind():
    report = conjecture3_experiment(TrialEnsembleConfig(degree=5, trials=5, seed=0), kind="total-radians")
    assert report.kind == "total-radians"
    assert report.total_radians_min <= 2 * math.pi * (report.ensemble.degree - 1)


@pytest.mark.slow
def test_c2_desk_scale():
    report = conjecture2_experiment(TrialEnsembleConfig(degree=10, trials=300, seed=1))
    assert report.c2_min_basin_points >= 5


@pytest.mark.slow
def test_c3_desk_scale():
    report = conjecture3_experiment(TrialEnsembleConfig(degree=10, trials=300, seed=1))
    assert report.c3_min_rich_circles >= 5


# ---------------------------------------------------------------------------
# Cubic scan
# ---------------------------------------------------------------------------


def test_cubic_ratios_at_three():
    # roots 1, -1, 3: rho / |1 - zeta_minus| = sqrt(2/3)
    ratios = cubic_ratios(np.array([3.0]))
    assert ratios.shape == (3, 1)
    assert ratios[0, 0] == pytest.approx(math.sqrt(2 / 3), rel=1e-12)


def test_cubic_ratios_at_two_i():
    ratios = cubic_ratios(2j)
    assert ratios[2] == pytest.approx(2 ** (1 / 3), rel=1e-12)
    assert np.all(ratios >= math.sqrt(2 / 3))


def test_cubic_scan_bands():
    report = cubic_scan(0.05, 50)
    assert 1.3237 <= report.iota2_estimate <= 1.3257
    assert 0.79 <= report.iota1_estimate <= 0.85
    assert report.direct_quotient_max == pytest.approx(1 / report.iota1_estimate)
    assert report.grid_points > 0
    assert report.scan == CubicScanConfig(grid_step=0.05, radius_cap=50)


def test_cubic_scan_refinement_beats_its_grid():
    coarse = cubic_scan(0.5, 5, refine_rounds=0)
    refined = cubic_scan(0.5, 5)
    assert refined.iota2_estimate >= coarse.iota2_estimate
    assert refined.iota1_estimate <= coarse.iota1_estimate
    assert refined.iota2_estimate <= ALPHA_STAR + 1e-6
    assert refined.grid_points == coarse.grid_points


def test_cubic_scan_coarse_grid_still_finds_the_peak():
    # a 0.1 grid alone stops short of the peak near a = 2.2i
    report = cubic_scan(0.1, 10)
    assert report.iota2_estimate == pytest.approx(ALPHA_STAR, abs=1e-3)


def test_cubic_scan_needs_a_feasible_point():
    with pytest.raises(ValueError):
        cubic_scan(0.5, 1)


def test_run_experiment_dispatch():
    report = run_experiment("cubic-scan", scan=CubicScanConfig(grid_step=0.5, radius_cap=5))
    assert report.kind == "cubic-scan"
    with pytest.raises(ValueError):
        run_experiment("c4")


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def test_report_rewrite_is_byte_identical(tmp_path):
    report = conjecture1_experiment(TrialEnsembleConfig(degree=5, trials=5, seed=0))
    first = write_report(report, tmp_path / "a.json")
    second = write_report(read_report(first), tmp_path / "b.json")
    assert first.read_bytes() == second.read_bytes()


def test_report_without_version_is_rejected(tmp_path):
    path = tmp_path / "old.json"
    payload = json.loads(cubic_scan(0.5, 5).model_dump_json())
    del payload["schema_version"]
    path.write_text(json.dumps(payload))
    with pytest.raises(ReportSchemaError):
        read_report(path)


def test_report_with_future_version_is_rejected(tmp_path):
    path = tmp_path / "new.json"
    payload = json.loads(cubic_scan(0.5, 5).model_dump_json())
    payload["schema_version"] = "99"
    path.write_text(json.dumps(payload))
    with pytest.raises(ReportSchemaError):
        read_report(path)


def test_garbage_report_is_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("not json")
    with pytest.raises(ReportSchemaError):
        read_report(path)


def test_quotient_csv(tmp_path):
    report = conjecture1_experiment(TrialEnsembleConfig(degree=4, trials=6, seed=2))
    frame = pd.read_csv(write_quotient_csv(report, tmp_path / "q.csv"))
    assert list(frame.columns) == ["trial", "root_index", "circle_index", "quotient"]
    assert len(frame) == 2 * report.trials_completed
    assert frame["quotient"].min() == pytest.approx(report.iota1_estimate, rel=1e-15)


@pytest.mark.slow
def test_c3_degree_20():
    report = conjecture3_experiment(TrialEnsembleConfig(degree=20, trials=300, seed=1), workers=4)
    assert report.c3_min_rich_circles >= 11


def test_track_report_logs_run(tmp_path, monkeypatch):
    mlflow = pytest.importorskip("mlflow")
    from mlflow_setup import mlflow_config

    monkeypatch.setattr(mlflow_config, "MLFLOW_TRACKING_URI", (tmp_path / "mlruns").as_uri())
    report = cubic_scan(0.5, 5)
    artifact = write_report(report, tmp_path / "scan.json")
    track_report(report, [artifact])
    runs = mlflow.search_runs(experiment_names=[mlflow_config.MLFLOW_EXPERIMENT_NAME])
    assert len(runs) == 1
    assert runs["metrics.iota2_estimate"].iloc[0] == pytest.approx(report.iota2_estimate)
    assert runs["tags.project"].iloc[0] == "drroots"
    assert runs["params.grid_step"].iloc[0] == "0.5"


@pytest.mark.slow
def test_c1_degree_40_rarely_rejects():
    report = conjecture1_experiment(TrialEnsembleConfig(degree=40, trials=200, seed=1), workers=4)
    assert report.rejected_trials < 2
