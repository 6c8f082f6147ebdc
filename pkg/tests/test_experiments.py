"""Tests for simulation orchestration, refinement tables, sweeps and the CLI."""

import math

import numpy as np
import pytest

from errors import ConfigError
from main import main
from models.reports import HardyResult
from services.experiments import (
    ExperimentRunner,
    Simulation,
    analyze,
    convergence_table,
    hardy_variation,
    sample_schedule,
)
from utils.storage import read_csv, read_json, write_csv


# ============== Schedules ==============

def test_schedule_is_log_spaced_and_merged():
    times = sample_schedule(1000.0, 10, extra=[0.0, 5.0, 2000.0])
    assert times[0] == 0.0 and times[-1] == 1000.0
    assert np.all(np.diff(times) > 0.0)
    assert 5.0 in times
    assert 2000.0 not in times


# ============== Simulation ==============

def test_short_run_completes(quick_config):
    result = Simulation(quick_config).run()
    assert result.outcome.completed
    assert result.outcome.t_final == pytest.approx(2.0)
    assert len(result.snapshots) == 3

    series = result.series
    np.testing.assert_allclose(series.mass, 1.0, atol=1e-4)
    assert np.all(series.eta_x_min > 0.0)
    assert series.x_plus[0] == pytest.approx(result.grid.L, rel=1e-12)
    assert np.all(np.diff(series.x_plus) > 0.0)
    # The third time derivative only exists once three accelerations are stored.
    assert math.isnan(series.energies[2][0])
    assert np.isfinite(series.energies[2][-1])


def test_unperturbed_run_stays_at_rest(quick_config):
    config = quick_config.with_overrides(["run.amplitude=0", "correction.frozen=true"])
    result = Simulation(config).run()
    assert result.outcome.completed
    assert np.max(result.series.unweighted_sup[0]) <= 1e-13
    assert np.max(result.series.total_energy) == 0.0


def test_collapsed_initial_map_ends_the_run(quick_config):
    config = quick_config.with_overrides(["run.preset=dilation", "run.amplitude=-1"])
    result = Simulation(config).run()
    assert not result.outcome.completed
    assert result.outcome.degenerate
    assert result.outcome.degenerate_at == 0.0
    assert result.outcome.exit_code == 3
    assert result.series.t.size == 0


def test_simulate_writes_stamped_outputs(quick_config, tmp_path):
    runner = ExperimentRunner(quick_config, str(tmp_path))
    runner.simulate()

    summary = read_csv(tmp_path / "summary.csv")
    assert summary.config_hash == quick_config.config_hash
    assert summary.columns[:4] == ["t", "E0", "E1", "E2"]
    assert summary["t"][-1] == pytest.approx(2.0)
    for label in ("0", "1", "2"):
        snapshot = read_csv(tmp_path / f"snapshot_t{label}.csv")
        assert snapshot["x"].size == quick_config.grid.n_cells + 1

    report = read_json(tmp_path / "report.json")
    assert report["config_hash"] == quick_config.config_hash
    assert report["outcome"]["completed"] is True
    assert report["parameters"]["derivative_count"] == 6
    assert report["sup_total_excludes"] == ["dt3_w"]
    assert report["refinement_sensitive_norms"] == ["dt1_wx", "dt3_w"]
    decay_rows = (report["energy_decay"] or {}).get("rows", [])
    flagged = {row["quantity"] for row in decay_rows if row["refinement_sensitive"]}
    assert flagged <= {"sup_dt1_wx", "sup_dt3_w"}
    assert "series.csv" in {path.name for path in tmp_path.iterdir()}


@pytest.mark.slow
def test_runs_are_reproducible(quick_config, tmp_path):
    ExperimentRunner(quick_config, str(tmp_path / "a")).simulate()
    ExperimentRunner(quick_config, str(tmp_path / "b")).simulate()
    for name in ("summary.csv", "series.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# ============== Other experiments ==============

def test_barenblatt_tables(quick_config, tmp_path):
    result = ExperimentRunner(quick_config, str(tmp_path)).barenblatt()
    np.testing.assert_allclose(result["mass"], 1.0, rtol=1e-9)
    profile = read_json(tmp_path / "profile.json")["profile"]
    assert profile["B"] == pytest.approx(0.15)
    table = read_csv(tmp_path / "barenblatt_t1.csv")
    assert table["rho_bar"][0] == pytest.approx(0.0, abs=1e-12)
    assert table["rho_bar"][-1] == pytest.approx(0.0, abs=1e-12)


def test_correction_tables(quick_config, tmp_path):
    result = ExperimentRunner(quick_config, str(tmp_path)).correction()
    table = read_csv(tmp_path / "correction.csv")
    assert table.columns == ["t", "h", "h_t", "eta_x", "d1_eta_x", "d2_eta_x", "d3_eta_x"]
    assert table["h"][0] == 0.0
    assert result["decay"].K >= 1.0
    assert "decay" in read_json(tmp_path / "correction_report.json")
    final = result["final_state"]
    assert final["t"] == pytest.approx(quick_config.correction.t_end)
    assert 0.0 < final["h"] <= result["h_max"]


def test_refinement_report(quick_config, tmp_path):
    report = ExperimentRunner(quick_config, str(tmp_path)).refine([16, 32, 64])
    assert len(report.rows) == 1
    assert all(error > 0.0 for error in report.errors)
    assert (tmp_path / "refinement.csv").exists()
    stored = read_json(tmp_path / "refinement.json")
    assert stored["asymptotic_order"] == pytest.approx(report.rows[-1].observed_order)
    assert stored["order_target"] == quick_config.fits.order_target


def test_hardy_study(quick_config, tmp_path):
    result = ExperimentRunner(quick_config, str(tmp_path)).hardy([16, 32], [2.0])
    assert len(result["results"]) == 4
    assert read_csv(tmp_path / "hardy.csv")["ratio"].size == 4


def test_rates_refit(quick_config, tmp_path):
    t = sample_schedule(1000.0, 50)
    write_csv(tmp_path / "series.csv", ["t", "x_plus"], {"t": t, "x_plus": 2.0 * (1.0 + t) ** 0.6}, "h")
    runner = ExperimentRunner(quick_config, str(tmp_path))
    fit = runner.rates(str(tmp_path / "series.csv"), "x_plus", window=(10.0, 1000.0), p_theory=0.6)
    assert fit.exponent == pytest.approx(0.6, abs=1e-10)
    with pytest.raises(ConfigError):
        runner.rates(str(tmp_path / "series.csv"), "nope", window=(10.0, 1000.0))


def test_sweep_isolates_failing_cells(quick_config, tmp_path):
    rows = ExperimentRunner(quick_config, str(tmp_path)).sweep([1.5], [0.5, 1.5], [1.0], workers=1)
    assert [row.index for row in rows] == [0, 1]
    assert rows[0].exit_code == 0
    assert rows[1].exit_code == 2
    assert rows[1].error
    table = read_csv(tmp_path / "sweep.csv")
    np.testing.assert_array_equal(table["exit_code"], [0.0, 2.0])


# ============== Refinement tables ==============

def test_convergence_table_recovers_second_order():
    n_list = [16, 32, 64]
    solutions = [np.sin(np.linspace(-1.0, 1.0, n + 1)) + 1.0 / n ** 2 for n in n_list]
    report = convergence_table(n_list, solutions, 1.0)
    assert report.rows[0].observed_order == pytest.approx(2.0, rel=1e-6)
    assert report.monotone
    assert report.min_order == pytest.approx(2.0, rel=1e-6)
    assert report.asymptotic_order == pytest.approx(2.0, rel=1e-6)
    assert report.passed


def test_convergence_table_judges_the_finest_triplet():
    n_list = [16, 32, 64, 128]
    # Errors 1e-2, 4e-3, 1e-3: orders log2(2.5) then 2.
    offsets = {16: 0.0, 32: 1e-2, 64: 1.4e-2, 128: 1.5e-2}
    solutions = [np.full(n + 1, offsets[n]) for n in n_list]
    report = convergence_table(n_list, solutions, 1.0, order_target=1.5)
    assert report.min_order == pytest.approx(math.log2(2.5), rel=1e-9)
    assert report.asymptotic_order == pytest.approx(2.0, rel=1e-9)
    assert report.monotone and report.passed

    strict = convergence_table(n_list, solutions, 1.0, order_target=2.5)
    assert not strict.passed


@pytest.mark.parametrize("n_list", [[16, 24, 40], [16, 32]])
def test_convergence_table_rejects_bad_grids(n_list):
    with pytest.raises(ConfigError):
        convergence_table(n_list, [np.zeros(n + 1) for n in n_list], 1.0)


def test_hardy_variation_skips_degenerate():
    results = [
        ("one", HardyResult(theta=2.0, n_cells=16, ratio=1.0)),
        ("one", HardyResult(theta=2.0, n_cells=32, ratio=1.1)),
        ("zero", HardyResult(theta=2.0, n_cells=16, ratio=0.0, degenerate=True)),
    ]
    assert hardy_variation(results) == {"one@2": pytest.approx(0.1)}


# ============== CLI ==============

def test_cli_simulate(quick_config, tmp_path):
    config_path = tmp_path / "run.ini"
    config_path.write_text(quick_config.to_ini(), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(config_path), "--out", str(out)]) == 0
    assert (out / "summary.csv").exists()


def test_cli_validation_exit_code(tmp_path):
    assert main(["barenblatt", "--out", str(tmp_path), "--override", "params.gamma=0.5"]) == 2
    assert main(["barenblatt", "--out", str(tmp_path), "--override", "nonsense"]) == 2


def test_cli_degenerate_exit_code(quick_config, tmp_path):
    config_path = tmp_path / "run.ini"
    config_path.write_text(quick_config.to_ini(), encoding="utf-8")
    code = main([
        "simulate",
        "--config", str(config_path),
        "--out", str(tmp_path / "out"),
        "--override", "run.preset=dilation",
        "--override", "run.amplitude=-1",
    ])
    assert code == 3


def test_background_run_expands_at_the_predicted_rate(quick_config):
    config = quick_config.with_overrides([
        "run.amplitude=0",
        "correction.frozen=true",
        "run.t_end=100",
        "run.samples_per_decade=50",
        "grid.n_cells=16",
        "fits.t_lo=5",
        "fits.t_hi=100",
    ])
    result = analyze(Simulation(config).run())
    rows = {row.quantity: row for row in result.rate_report.rows}
    assert rows["x_plus"].fitted == pytest.approx(result.params.expansion_rate, abs=1e-9)
    assert result.rate_report.passed, [row for row in result.rate_report.rows if not row.passed]
