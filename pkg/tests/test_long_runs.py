"""
Long runs at production resolution.

Covers the default lambda < 1 scenario at n = 400 and n = 800 (boundedness,
exponents, boundary derivatives, embedding ratio), the self-convergence study,
Hardy ratios up to n = 1600, the exact fixed point and the lambda = mu = 1 case.
"""

import numpy as np
import pytest

from models.config import RunConfig
from services.experiments import ExperimentRunner, Simulation, analyze

pytestmark = pytest.mark.slow


def _config(*overrides: str) -> RunConfig:
    return RunConfig.from_ini("", overrides=list(overrides))


@pytest.fixture(scope="module")
def bounded_runs():
    """(gamma, lambda, mu) = (1.5, 0.5, 1), delta = 0.6, bump data, t_end = 1e3."""
    runs = {}
    for n in (400, 800):
        result = analyze(Simulation(_config("params.delta=0.6", f"grid.n_cells={n}")).run())
        assert result.outcome.completed, result.outcome.message
        assert result.rate_report is not None and result.energy_decay is not None, result.analysis_note
        runs[n] = result
    return runs


def _rows(report):
    return {row.quantity: row for row in report.rows}


# ============== Boundedness ==============

def test_energies_stay_bounded(bounded_runs):
    for result in bounded_runs.values():
        rows = _rows(result.energy_decay)
        assert rows["E0"].passed and rows["E1"].passed
        assert np.isfinite(rows["E0"].sup_ratio) and np.isfinite(rows["E1"].sup_ratio)


def test_every_boundedness_row_passes_at_default_resolution(bounded_runs):
    report = bounded_runs[400].energy_decay
    assert report.passed, [row for row in report.rows if not row.passed]


@pytest.mark.parametrize("quantity", ["E0", "E1"])
def test_energy_supremum_is_refinement_stable(bounded_runs, quantity):
    coarse = _rows(bounded_runs[400].energy_decay)[quantity].sup_ratio
    fine = _rows(bounded_runs[800].energy_decay)[quantity].sup_ratio
    assert abs(fine - coarse) <= 0.15 * coarse


def test_embedding_ratio_is_refinement_stable(bounded_runs):
    coarse = float(np.nanmax(bounded_runs[400].series.embedding_ratio))
    fine = float(np.nanmax(bounded_runs[800].series.embedding_ratio))
    assert np.isfinite(coarse) and coarse > 0.0
    assert abs(fine - coarse) <= 0.15 * coarse


# ============== Exponents ==============

def test_boundary_expansion_rate(bounded_runs):
    row = _rows(bounded_runs[400].rate_report)["x_plus"]
    assert row.fitted == pytest.approx(0.6, abs=0.05)
    assert row.passed


@pytest.mark.parametrize("k", [1, 2])
def test_boundary_derivative_rates(bounded_runs, k):
    row = _rows(bounded_runs[400].rate_report)[f"d{k}_x_plus"]
    assert row.fitted == pytest.approx(0.6 - k, abs=0.1)


def test_velocity_and_density_decay(bounded_runs):
    rows = _rows(bounded_runs[400].rate_report)
    assert rows["velocity_diff"].fitted <= -0.3
    assert rows["density_ratio"].fitted <= rows["density_ratio"].predicted + 0.1
    assert rows["velocity_diff"].passed and rows["density_ratio"].passed


# ============== Self-convergence ==============

def test_bump_refinement_reaches_second_order(tmp_path):
    """Default run: bump data, amplitude 1e-2, t_probe = 1, n = 100..800."""
    report = ExperimentRunner(_config(), str(tmp_path)).refine([100, 200, 400, 800])
    assert report.monotone, report.errors
    assert report.asymptotic_order >= 1.5
    assert report.passed


# ============== Hardy ratios ==============

def test_hardy_ratios_are_refinement_stable(tmp_path):
    runner = ExperimentRunner(_config(), str(tmp_path))
    result = runner.hardy([100, 200, 400, 800, 1600])
    # F in {1, cos}, theta in {1.5, 2, alpha + 1}
    assert len(result["variation"]) == 6
    assert max(result["variation"].values()) <= 0.2, result["variation"]


# ============== Fixed point and exploratory runs ==============

def test_zero_data_stay_zero_with_live_correction():
    config = _config(
        "params.gamma=2",
        "params.lambda=1",
        "params.mu=3",
        "grid.n_cells=400",
        "run.t_end=100",
        "run.amplitude=0",
    )
    assert not config.correction.frozen
    result = Simulation(config).run()
    assert result.outcome.completed
    assert np.max(result.series.unweighted_sup[0]) <= 1e-13


def test_weak_damping_run_records_its_outcome():
    result = Simulation(_config("params.lambda=1", "params.mu=1")).run()
    assert result.outcome.exit_code in (0, 3)
    if result.outcome.exit_code == 3:
        assert result.outcome.degenerate
