"""Tests for weighted energies, sup norms, the acceleration history and Hardy ratios."""

import math

import numpy as np
import pytest
from scipy import integrate

from errors import HistoryTooShort, InvalidParameters, InvalidTheta
from models.config import EnergyConfig
from models.state import AnsatzEvaluation, SolverState
from services.correction import CorrectionTrajectory
from services.experiments import hardy_variation
from services.metrics import (
    AccelerationHistory,
    energy_Eji,
    energy_Ej,
    energy_from_derivatives,
    energy_report,
    hardy_ratio,
    integrate_weighted,
    sup_norm_names,
    time_derivatives,
    weighted_sup_norms,
)
from services.solver import build_grid, initial_data, reconstruct_eulerian

AT_REST = AnsatzEvaluation(t=0.0, eta_tilde_x=1.0, derivatives=())


@pytest.fixture
def global_grid(global_profile, global_params):
    return build_grid(global_profile, global_params, 400)


# ============== Energies ==============

def test_zero_state_has_zero_energy(global_grid, global_params):
    state = initial_data(global_grid, "dilation", 0.0)
    assert energy_Ej(state, global_grid, global_params, AT_REST, 0) == 0.0
    assert energy_Ej(state, global_grid, global_params, AT_REST, 1) == 0.0
    assert energy_Eji(state, global_grid, global_params, AT_REST, 0, 1) == 0.0


def test_energy_is_quadratic_in_amplitude(global_grid, global_params):
    small = initial_data(global_grid, "bump", 1e-3)
    large = initial_data(global_grid, "bump", 2e-3)
    e_small = energy_Ej(small, global_grid, global_params, AT_REST, 0)
    e_large = energy_Ej(large, global_grid, global_params, AT_REST, 0)
    assert e_large / e_small == pytest.approx(4.0, rel=1e-12)

    e1_small = energy_Ej(small, global_grid, global_params, AT_REST, 1)
    e1_large = energy_Ej(large, global_grid, global_params, AT_REST, 1)
    assert e1_large / e1_small == pytest.approx(4.0, rel=1e-2)


def test_dilation_energy_matches_quadrature(global_grid, global_params, global_profile):
    """w = eps x, w_t = 0 at t = 0: E_0 = eps^2 int (sigma^alpha x^2 + sigma^{alpha+1}) dx."""
    eps = 1e-2
    state = initial_data(global_grid, "dilation", eps)
    alpha = global_params.alpha
    A, B, L = global_profile.A, global_profile.B, global_profile.L

    exact, _ = integrate.quad(lambda x: (A - B * x * x) ** alpha * x * x + (A - B * x * x) ** (alpha + 1.0), -L, L)
    assert energy_Ej(state, global_grid, global_params, AT_REST, 0) == pytest.approx(eps ** 2 * exact, rel=1e-3)


def test_time_weight_uses_delta_below_lambda_one(global_grid, global_params):
    state = initial_data(global_grid, "bump", 1e-2)
    later = SolverState(t=3.0, w=state.w, w_t=state.w_t)
    ansatz = AnsatzEvaluation(t=3.0, eta_tilde_x=1.0, derivatives=())
    ratio = energy_Ej(later, global_grid, global_params, ansatz, 0) / energy_Ej(
        state, global_grid, global_params, AT_REST, 0
    )
    assert ratio == pytest.approx(4.0 ** (-global_params.delta))


def test_mixed_energy_needs_spatial_order(global_grid, global_params):
    state = initial_data(global_grid, "bump", 1e-2)
    with pytest.raises(InvalidParameters):
        energy_Eji(state, global_grid, global_params, AT_REST, 0, 0)


def test_negative_exponent_quadrature(global_grid):
    """Constant integrand against sigma^{-1/2}: midpoint end cells keep the integral finite."""
    value = integrate_weighted(global_grid, np.ones_like(global_grid.nodes), -0.5)
    assert math.isfinite(value) and value > 0.0


def test_unknown_quadrature_rule(global_grid):
    with pytest.raises(InvalidParameters):
        integrate_weighted(global_grid, np.ones_like(global_grid.nodes), 1.0, rule="simpson")


@pytest.mark.slow
def test_trapezoid_and_midpoint_energies_agree(global_profile, global_params):
    """Both rules are second order, so their gap shrinks about fourfold per halving of dx."""
    gaps = []
    for n in (100, 200, 400):
        grid = build_grid(global_profile, global_params, n)
        w = initial_data(grid, "bump", 1e-2).w
        w_t = 1e-2 * grid.nodes
        trapezoid = energy_from_derivatives(grid, global_params, 0.0, 0, w, w_t)
        midpoint = energy_from_derivatives(grid, global_params, 0.0, 0, w, w_t, rule="midpoint")
        gaps.append(abs(trapezoid - midpoint))
        assert gaps[-1] <= 1e-2 * trapezoid
    assert gaps[1] <= gaps[0] / 3.0
    assert gaps[2] <= gaps[1] / 3.0


# ============== History ==============

class TestAccelerationHistory:
    def test_exact_on_quadratics(self):
        history = AccelerationHistory()
        times = [0.0, 0.1, 0.35]
        for t in times:
            history.push(t, np.array([1.0 + 2.0 * t + 3.0 * t * t, -t * t]))
        np.testing.assert_allclose(history.third_derivative(), [2.0 + 6.0 * 0.35, -0.7], rtol=1e-12)

    def test_too_short(self):
        history = AccelerationHistory()
        history.push(0.0, np.zeros(3))
        history.push(1.0, np.zeros(3))
        with pytest.raises(HistoryTooShort):
            history.third_derivative()

    def test_keeps_three_entries(self):
        history = AccelerationHistory()
        for t in range(5):
            history.push(float(t), np.full(2, float(t)))
        assert len(history) == 3
        assert history.latest_time == 4.0

    def test_times_must_increase(self):
        history = AccelerationHistory()
        history.push(1.0, np.zeros(2))
        with pytest.raises(InvalidParameters):
            history.push(1.0, np.zeros(2))

    def test_third_derivative_requires_matching_history(self, global_grid, global_params):
        state = initial_data(global_grid, "bump", 1e-2)
        with pytest.raises(HistoryTooShort):
            time_derivatives(state, global_grid, global_params, AT_REST, 3)

        history = AccelerationHistory()
        for t in (-0.2, -0.1, 0.5):
            history.push(t, np.zeros_like(state.w))
        with pytest.raises(HistoryTooShort):
            time_derivatives(state, global_grid, global_params, AT_REST, 3, history)


# ============== Sup norms ==============

def test_sup_norm_names():
    assert sup_norm_names(range(3)) == [
        "dt0_w",
        "dt1_w",
        "dt2_w",
        "dt0_wx",
        "dt1_wx",
        "sigma_dt2_dx1",
        "sigma_dt0_dx2",
        "sigma_dt1_dx2",
        "sigma_dt2_dx2",
    ]


def test_weighted_sup_of_kick(global_grid, global_params):
    state = initial_data(global_grid, "kick", 1e-2)
    table = weighted_sup_norms(state, global_grid, global_params, AT_REST, j_list=(0, 1))
    assert table["dt0_w"] == 0.0
    assert table["dt1_w"] == pytest.approx((1e-2 * global_grid.L) ** 2)
    assert table["dt1_wx"] == pytest.approx(1e-4)


def test_energy_report_on_the_background(global_grid, global_params):
    trajectory = CorrectionTrajectory.zero(global_params, 1.0)
    state = initial_data(global_grid, "bump", 0.0)
    snapshot = reconstruct_eulerian(state, global_grid, global_params, trajectory)
    report = energy_report(state, global_grid, global_params, trajectory.ansatz(0.0), snapshot, EnergyConfig())

    assert report.total_energy == 0.0
    assert report.sup_total == 0.0
    assert set(report.E) == {0, 1}
    assert report.mass == pytest.approx(1.0, abs=1e-6)
    assert report.x_plus == pytest.approx(global_grid.L)
    assert report.time_weight_offset == pytest.approx(global_params.delta)


def test_differenced_norm_stays_out_of_sup_total(global_grid, global_params):
    trajectory = CorrectionTrajectory.zero(global_params, 1.0)
    state = initial_data(global_grid, "kick", 1e-2)
    snapshot = reconstruct_eulerian(state, global_grid, global_params, trajectory)
    history = AccelerationHistory()
    for t in (-0.2, -0.1, 0.0):
        history.push(t, np.full_like(state.w, t))
    report = energy_report(
        state, global_grid, global_params, trajectory.ansatz(0.0), snapshot, EnergyConfig(), history
    )

    assert report.excluded_from_total == ["dt3_w"]
    assert report.sup_norms["dt3_w"] == pytest.approx(1.0)
    kept = sum(value for name, value in report.sup_norms.items() if name != "dt3_w")
    assert kept > 0.0
    assert report.sup_total == pytest.approx(kept)


# ============== Hardy ==============

def test_hardy_ratio_closed_form(default_profile, default_params):
    """F = 1, theta = 2: 2L / (16 A^2 L / 15) = 15 / (8 A^2)."""
    grid = build_grid(default_profile, default_params, 400)
    result = hardy_ratio(grid, np.ones_like(grid.nodes), 2.0)
    assert not result.degenerate
    assert result.ratio == pytest.approx(15.0 / (8.0 * default_profile.A ** 2), rel=1e-4)


@pytest.mark.parametrize("theta", [1.0, 0.5, -2.0])
def test_hardy_theta_must_exceed_one(small_grid, theta):
    with pytest.raises(InvalidTheta):
        hardy_ratio(small_grid, np.ones_like(small_grid.nodes), theta)


def test_hardy_zero_function_is_degenerate(small_grid):
    result = hardy_ratio(small_grid, np.zeros_like(small_grid.nodes), 2.0)
    assert result.degenerate
    assert result.ratio == 0.0


def test_hardy_ratio_is_grid_independent(default_profile, default_params):
    results = []
    for n in (200, 400, 800):
        grid = build_grid(default_profile, default_params, n)
        F = np.cos(math.pi * grid.nodes / (2.0 * grid.L))
        results.append(("cos", hardy_ratio(grid, F, 1.5)))
    assert hardy_variation(results)["cos@1.5"] < 0.02
