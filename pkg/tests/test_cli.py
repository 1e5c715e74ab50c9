"""
CLI Tests

Drives `drroots` through main(argv) and checks stdout, written files and
exit codes.
"""

import json
import xml.etree.ElementTree as ET

import pandas as pd
import pytest

from src import cli, config
from src.cli import main, parse_complex, parse_complex_list
from src.errors import LevelIncomplete, ParseError
from src.experiments import ExperimentReport, TrialEnsembleConfig


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def test_parse_complex():
    assert parse_complex("1,-2") == 1 - 2j
    assert parse_complex(" 3 ") == 3
    assert parse_complex("1e-3,0") == 0.001
    for bad in ("", "1,2,3", "a,b", "inf,0", "1,"):
        with pytest.raises(ParseError):
            parse_complex(bad)


def test_parse_complex_list():
    assert parse_complex_list("-1,0 0,0 1,0") == [-1, 0, 1]
    with pytest.raises(ParseError):
        parse_complex_list("   ")


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def test_solve_cube_roots(capsys):
    code, out = _run(capsys, "solve", "--coeffs=-1,0 0,0 0,0 1,0")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].split() == ["re", "im", "residual", "cluster"]
    assert len(lines) == 4
    real_parts = sorted(float(line.split()[0]) for line in lines[1:])
    assert real_parts[0] == pytest.approx(-0.5, abs=1e-10)
    assert real_parts[2] == pytest.approx(1.0, abs=1e-10)


def test_solve_writes_report(capsys, tmp_path):
    out = tmp_path / "roots.json"
    code, _ = _run(capsys, "solve", "--roots=1 -1 0,2", "--deflate", "--out", str(out))
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["schema_version"] == "1"
    assert payload["degree"] == 3
    assert payload["config"]["deflate_mode"] is True


def test_solve_from_file(capsys, tmp_path):
    path = tmp_path / "coeffs.txt"
    path.write_text("# z^2 - 1\n-1,0\n\n0,0\n1,0\n")
    code, out = _run(capsys, "solve", "--file", str(path))
    assert code == 0
    assert len(out.splitlines()) == 3


def test_solve_centered_cluster(capsys):
    # (z - 2)^10 - 1e-20 written about 2
    coeffs = " ".join(["-1e-20,0"] + ["0,0"] * 9 + ["1,0"])
    code, out = _run(capsys, "solve", f"--coeffs={coeffs}", "--center=2,0")
    assert code == 0
    rows = out.splitlines()[1:]
    assert len(rows) == 10
    assert all(abs(float(r.split()[0]) - 2) <= 0.0101 for r in rows)


def test_solve_usage_errors(capsys):
    assert main(["solve"]) == 2
    assert main(["solve", "--coeffs=1,0 1,0", "--roots=1"]) == 2
    assert main(["solve", "--roots=1 2", "--center=1"]) == 2
    assert main(["solve", "--coeffs=5,0"]) == 2
    assert main(["solve", "--coeffs=-1,0 1,0", "--tol", "0"]) == 2


def test_solve_parse_errors(capsys):
    assert main(["solve", "--coeffs=1,2,3 1,0"]) == 3
    assert main(["solve", "--coeffs=1,0 0,0"]) == 3
    assert main(["solve", "--roots=1", "--leading=0"]) == 3


def test_solve_missing_file_is_io_error(capsys, tmp_path):
    assert main(["solve", "--file", str(tmp_path / "missing.txt")]) == 5


def test_unknown_subcommand_exits_with_usage():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


# ---------------------------------------------------------------------------
# annuli
# ---------------------------------------------------------------------------


def test_annuli_table(capsys, tmp_path):
    csv = tmp_path / "annuli.csv"
    code, out = _run(capsys, "annuli", "--roots=1 -1 0,2", "--out", str(csv))
    assert code == 0
    lines = out.splitlines()
    assert lines[0].split() == ["zeta_re", "zeta_im", "rho", "inner", "outer"]
    assert lines[-1] == "# roots inside annulus union: 3/3"
    frame = pd.read_csv(csv)
    assert len(frame) == 2
    assert (frame["inner"] <= frame["outer"]).all()


def test_annuli_degenerate_cubic_at_tight_scalar(capsys):
    code, out = _run(capsys, "annuli", "--roots=0 0 1", "--iota1", "0.9", "--iota2", "1")
    assert code == 0
    assert out.splitlines()[-1] == "# roots inside annulus union: 2/3"


def test_annuli_from_coefficients(capsys):
    code, out = _run(capsys, "annuli", "--coeffs=-1,0 0,0 1,0", "--iota1", "1", "--iota2", "1")
    assert code == 0
    assert out.splitlines()[-1] == "# roots inside annulus union: 2/2"


def test_annuli_random_instance_uses_env_seed(capsys, monkeypatch):
    _, explicit = _run(capsys, "annuli", "--degree", "6", "--seed", "7")
    monkeypatch.setattr(config, "DRROOTS_SEED", "7")
    _, from_env = _run(capsys, "annuli", "--degree", "6")
    assert explicit == from_env
    assert explicit.splitlines()[-1].endswith("/6")


def test_annuli_svg_is_deterministic(capsys, tmp_path):
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    assert main(["annuli", "--roots=1 -1 0,2", "--svg", str(first)]) == 0
    assert main(["annuli", "--roots=1 -1 0,2", "--svg", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    root = ET.parse(first).getroot()
    assert root.tag.endswith("svg")


def test_annuli_usage_errors(capsys):
    assert main(["annuli", "--roots=1 -1", "--iota1", "1.1"]) == 2
    assert main(["annuli", "--roots=1 -1", "--degree", "4"]) == 2
    assert main(["annuli"]) == 2
    assert main(["annuli", "--roots=1"]) == 2


def test_annuli_unwritable_output(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["annuli", "--roots=1 -1", "--svg", str(blocker / "x.svg")]) == 5


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


def test_experiment_cubic_scan(capsys, tmp_path):
    out = tmp_path / "scan.json"
    code, stdout = _run(capsys, "experiment", "cubic-scan", "--step", "0.5", "--radius-cap", "5", "--out", str(out))
    assert code == 0
    assert stdout.startswith("iota1=")
    assert json.loads(out.read_text())["kind"] == "cubic-scan"


def test_experiment_c1_writes_report_and_csv(capsys, tmp_path):
    out = tmp_path / "c1.json"
    plot = tmp_path / "c1.png"
    code, stdout = _run(
        capsys,
        "experiment", "c1",
        "--degree", "5", "--trials", "10", "--seed", "1", "--threads", "1",
        "--out", str(out), "--plot", str(plot),
    )  # fmt: skip
    assert code == 0
    assert stdout.startswith("iota1=")
    assert "trials=10 rejected=0" in stdout
    assert out.exists()
    assert out.with_suffix(".csv").exists()
    assert plot.stat().st_size > 0


def test_experiment_c3_summary(capsys, tmp_path):
    code, stdout = _run(
        capsys,
        "experiment", "c3",
        "--degree", "5", "--trials", "4", "--threads", "1",
        "--out", str(tmp_path / "c3.json"),
    )  # fmt: skip
    assert code == 0
    assert stdout.startswith("c3_min_rich_circles=")


def test_experiment_plot_needs_c1(capsys, tmp_path):
    assert main(["experiment", "c2", "--plot", str(tmp_path / "x.png")]) == 2


def test_experiment_rejects_bad_ensemble(capsys, tmp_path):
    assert main(["experiment", "c1", "--degree", "1", "--threads", "1", "--out", str(tmp_path / "r.json")]) == 2


@pytest.mark.slow
def test_experiment_c1_desk_scale(capsys, tmp_path):
    code, stdout = _run(
        capsys,
        "experiment", "c1",
        "--degree", "10", "--trials", "300", "--seed", "1",
        "--out", str(tmp_path / "c1.json"),
    )  # fmt: skip
    assert code == 0
    fields = dict(item.split("=") for item in stdout.split())
    assert 0.60 <= float(fields["iota1"]) <= 0.80
    assert 1.20 <= float(fields["iota2"]) <= 1.45


def test_solve_non_utf8_file_is_parse_error(capsys, tmp_path):
    path = tmp_path / "coeffs.txt"
    path.write_bytes(b"\xff\xfe1,0\n")
    assert main(["solve", "--file", str(path)]) == 3


def test_solve_residual_bound_miss_exits_4(capsys):
    assert main(["solve", "--coeffs=-2,0 0,0 1,0", "--residual-bound", "1e-300"]) == 4


def test_solve_level_failure_exits_4(capsys, monkeypatch):
    def fail(*_args, **_kwargs):
        raise LevelIncomplete("level 0: found 1 of 2 roots", level=0, found=1, expected=2)

    monkeypatch.setattr(cli, "cascade_solve", fail)
    assert main(["solve", "--coeffs=-2,0 0,0 1,0"]) == 4


def test_experiment_all_rejected_writes_nothing(capsys, tmp_path, monkeypatch):
    ensemble = TrialEnsembleConfig(degree=5, trials=3)
    empty = ExperimentReport(
        kind="c1",
        ensemble=ensemble,
        rejected_trials=3,
        rejected_trial_indices=[0, 1, 2],
        started_at="2026-01-01T00:00:00+00:00",
        finished_at="2026-01-01T00:00:01+00:00",
    )
    monkeypatch.setattr(cli, "run_experiment", lambda *args, **kwargs: empty)
    out = tmp_path / "c1.json"
    code = main(["experiment", "c1", "--degree", "5", "--trials", "3", "--threads", "1", "--out", str(out)])
    assert code == 4
    assert not out.exists()
    assert not out.with_suffix(".csv").exists()
