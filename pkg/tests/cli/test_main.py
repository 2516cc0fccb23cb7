import json

import pytest
from click.testing import CliRunner

from pyjsep.cli.main import cli
from pyjsep.cli.report import ReportRecord, Series, emit_series
from pyjsep.cli.runner import run_scenario
from pyjsep.errors import NoSeries


@pytest.fixture
def runner():
    return CliRunner()


def test_run_operator_check(runner, test_dir, tmp_path):
    result = runner.invoke(
        cli, ["run", str(test_dir / "operator_check.scenario.yaml"), "--out", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    assert "operator_check: rotation (operator-check) not_separated" in result.output

    report_path = tmp_path / "operator_check.json"
    with open(report_path) as fh:
        raw = json.load(fh)
    assert raw["scenario"] == "operator_check"
    assert raw["provenance"]["seed"] == 3

    record = ReportRecord.from_file(report_path)
    check = record.result("operator-check")
    assert check.status == "ok"
    assert check.verdict == "strictly_separated"
    payload = check.payload
    assert payload["index"] == 1
    assert payload["polar"]["r_minus"] == pytest.approx([0.5])
    assert payload["polar"]["r_plus"] == pytest.approx([2.0])
    assert payload["monotonicity"] == "strictly_monotone"
    assert payload["kuhne"]["r_lower"] == pytest.approx(-1.0)
    assert payload["kuhne"]["r_upper"] == pytest.approx(4.0)
    assert payload["sigma_d"] == pytest.approx(2.0)
    assert payload["composition"]["holds"]

    rotation = record.result("rotation")
    assert rotation.verdict == "not_separated"
    assert "polar" not in rotation.payload
    assert rotation.payload["monotonicity"] == "not_monotone"


def test_run_is_deterministic(test_dir):
    first = run_scenario(test_dir / "operator_check.scenario.yaml")
    second = run_scenario(test_dir / "operator_check.scenario.yaml")
    assert first.payload() == second.payload()
    assert "wall_time" not in first.payload()["provenance"]
    assert "wall_time" in first.provenance


def test_series(test_dir):
    record = run_scenario(test_dir / "linear_series.scenario.yaml")
    assert not record.errored, record.summary()

    text = emit_series(record, "lyapunov")
    lines = text.splitlines()
    assert lines[0] == "t [model time]\tchi_1 [1/time]\tchi_2 [1/time]\tchi_3 [1/time]"
    times = [float(line.split("\t")[0]) for line in lines[1:]]
    assert times == sorted(times)
    assert len(lines[1].split("\t")) == 4

    text = emit_series(record, "domination")
    assert text.splitlines()[0] == "t [model time]\tlog_ratio [dimensionless]"

    assert record.result("orbit-check").verdict == "strictly_separated"
    assert record.result("domination").verdict == "dominated"
    assert record.result("volume-expansion").verdict == "pass"
    assert record.result("bounds-check").verdict == "holds"
    assert record.result("equilibria").verdict == "hyperbolic"

    with pytest.raises(NoSeries):
        emit_series(record, "equilibria")
    with pytest.raises(KeyError):
        emit_series(record, "missing")


def test_series_files(runner, test_dir, tmp_path):
    result = runner.invoke(
        cli,
        [
            "lyapunov",
            str(test_dir / "linear_series.scenario.yaml"),
            "--out",
            str(tmp_path),
            "--series",
        ],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "linear_series.lyapunov.tsv").exists()
    assert not (tmp_path / "linear_series.domination.tsv").exists()

    report = str(tmp_path / "linear_series.json")
    result = runner.invoke(cli, ["report", report, "--series", "lyapunov"])
    assert result.exit_code == 0
    assert result.output.startswith("t [model time]")

    result = runner.invoke(cli, ["report", report])
    assert result.exit_code == 0
    assert "linear_series: lyapunov (lyapunov)" in result.output

    result = runner.invoke(cli, ["report", report, "--series", "equilibria"])
    assert result.exit_code == 1


def test_failing_analysis(runner, test_dir):
    result = runner.invoke(cli, ["run", str(test_dir / "failing.scenario.yaml")])
    assert result.exit_code == 1
    assert "periodic-orbit (periodic-orbit) ERROR NoConvergence" in result.output
    assert "equilibria (equilibria) hyperbolic" in result.output

    record = run_scenario(test_dir / "failing.scenario.yaml")
    assert record.errored
    assert record.result("periodic-orbit").status == "error"
    assert record.result("equilibria").status == "ok"


def test_invalid_scenario(runner, test_dir):
    result = runner.invoke(cli, ["run", str(test_dir / "unknown_key.scenario.yaml")])
    assert result.exit_code == 2
    assert "Invalid scenario" in result.output
    assert "modle" in result.output

    result = runner.invoke(
        cli,
        ["run", str(test_dir / "operator_check.scenario.yaml"), "--tol-override", "bogus=1"],
    )
    assert result.exit_code == 2


def test_overrides(test_dir):
    record = run_scenario(
        test_dir / "operator_check.scenario.yaml", seed=8, tol_overrides={"separation": 1e-8}
    )
    assert record.provenance["seed"] == 8
    assert record.provenance["tolerances"]["separation"] == 1e-8


def test_subset_command(runner, test_dir, tmp_path):
    result = runner.invoke(
        cli, ["equilibria", str(test_dir / "linear_series.scenario.yaml"), "--out", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    record = ReportRecord.from_file(tmp_path / "linear_series.json")
    assert [a.analysis_id for a in record.analyses] == ["equilibria"]


def test_lorenz_star(test_dir):
    record = run_scenario(test_dir / "lorenz_star.scenario.yaml")
    assert not record.errored, record.summary()
    equilibria = record.result("equilibria").payload["equilibria"]
    assert sorted(eq["index"] for eq in equilibria) == [1, 1, 2]
    assert record.result("star-check").verdict == "pass"
    homogeneity = record.result("homogeneity")
    assert homogeneity.verdict == "homogeneous"
    assert homogeneity.payload["singularity_indices"] == [2, 1, 1]


@pytest.mark.slow
def test_limit_cycle(test_dir):
    record = run_scenario(test_dir / "limit_cycle.scenario.yaml")
    assert not record.errored, record.summary()
    orbit = record.result("periodic-orbit")
    assert orbit.verdict == "pass"
    assert orbit.payload["index"] == 2
    assert orbit.payload["period"] == pytest.approx(6.283185307, rel=1e-6)
    assert record.result("orbit-check").verdict == "strictly_separated"
    assert record.result("partial-hyperbolicity").verdict == "pass"
    assert record.result("star-check").verdict == "pass"
    assert record.result("homogeneity").verdict == "homogeneous"


def test_series_validation():
    series = Series.from_arrays([("t", "s"), ("margin", "1")], [0.0, 1.0], [2.0, 3.0])
    assert series.rows == [[0.0, 2.0], [1.0, 3.0]]
    assert series.to_text().splitlines()[0] == "t [s]\tmargin [1]"
    with pytest.raises(ValueError, match="unit"):
        Series(columns=["t", "margin"], units=["s"], rows=[])
    with pytest.raises(ValueError, match="Row width"):
        Series(columns=["t"], units=["s"], rows=[[0.0, 1.0]])
