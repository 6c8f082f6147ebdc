"""Tests for the Lagrangian vacuum solver."""

import numpy as np
import pytest

from errors import InvalidGrid, MapDegenerate, UnknownPreset
from models.state import AnsatzEvaluation, SolverState
from services.barenblatt import barenblatt_boundary
from services.correction import CorrectionTrajectory
from services.solver import (
    PRESETS,
    build_grid,
    initial_data,
    linearized_acceleration,
    nodal_gradient,
    reconstruct_eulerian,
    rhs_acceleration,
    snapshot_mass,
    stable_dt,
    step,
)


def _at_rest(t: float = 0.0, eta_tilde_x: float = 1.0) -> AnsatzEvaluation:
    return AnsatzEvaluation(t=t, eta_tilde_x=eta_tilde_x, derivatives=())


# ============== Grid ==============

class TestGrid:
    @pytest.mark.parametrize("n_cells", [6, 7, 9, 0])
    def test_rejects_bad_sizes(self, default_profile, default_params, n_cells):
        with pytest.raises(InvalidGrid):
            build_grid(default_profile, default_params, n_cells)

    def test_layout(self, default_profile, default_params):
        grid = build_grid(default_profile, default_params, 16)
        assert grid.nodes.size == 17
        assert grid.nodes[0] == -grid.L and grid.nodes[-1] == grid.L
        assert grid.nodes[8] == 0.0
        assert grid.sigma_at_nodes[0] == 0.0 and grid.sigma_at_nodes[-1] == 0.0
        assert grid.dx == pytest.approx(2.0 * default_profile.L / 16)
        np.testing.assert_array_equal(grid.nodes, -grid.nodes[::-1])

    def test_boundary_slope_matches_profile(self, default_profile, default_params):
        grid = build_grid(default_profile, default_params, 16)
        assert grid.sigma_x_at_nodes[0] == pytest.approx(2.0 * default_profile.B * grid.L)
        assert grid.sigma_x_at_nodes[-1] == pytest.approx(-2.0 * default_profile.B * grid.L)
        np.testing.assert_allclose(grid.sigma_x_at_nodes, -grid.sigma_x_at_nodes[::-1], atol=1e-14)

    def test_nodal_gradient_exact_on_quadratics(self):
        x = np.linspace(-1.0, 1.0, 21)
        np.testing.assert_allclose(nodal_gradient(3.0 * x * x - x, x[1] - x[0]), 6.0 * x - 1.0, atol=1e-12)


# ============== Presets ==============

def test_presets(small_grid):
    x = small_grid.nodes
    dilation = initial_data(small_grid, "dilation", 0.01)
    np.testing.assert_allclose(dilation.w, 0.01 * x)
    assert not np.any(dilation.w_t)

    kick = initial_data(small_grid, "kick", 0.01)
    assert not np.any(kick.w)
    np.testing.assert_allclose(kick.w_t, 0.01 * x)

    bump = initial_data(small_grid, "bump", 0.01)
    assert bump.w[0] == 0.0 and bump.w[-1] == 0.0
    assert set(PRESETS) == {"dilation", "bump", "kick"}


def test_unknown_preset(small_grid):
    with pytest.raises(UnknownPreset):
        initial_data(small_grid, "wave")


# ============== Operator ==============

def test_zero_state_is_a_fixed_point(small_grid, default_params, default_trajectory):
    state = initial_data(small_grid, "dilation", 0.0)
    for _ in range(5):
        state = step(state, small_grid, default_params, default_trajectory, cfl=0.5)
    assert state.t > 0.0
    assert not np.any(state.w)
    assert not np.any(state.w_t)


def test_odd_data_stay_odd(small_grid, default_params, default_trajectory):
    state = initial_data(small_grid, "bump", 0.05)
    for _ in range(20):
        state = step(state, small_grid, default_params, default_trajectory, cfl=0.5)
    np.testing.assert_array_equal(state.w, -state.w[::-1])
    np.testing.assert_array_equal(state.w_t, -state.w_t[::-1])


def test_linearization_error_is_quadratic(default_profile, default_params):
    """Nonlinear-minus-linear residual drops by 100 when the amplitude drops by 10."""
    grid = build_grid(default_profile, default_params, 128)

    def residual(amplitude: float) -> float:
        state = initial_data(grid, "bump", amplitude)
        full = rhs_acceleration(state, grid, default_params, _at_rest())
        linear = linearized_acceleration(state, grid, default_params, _at_rest())
        return float(np.max(np.abs(full - linear)))

    assert residual(1e-3) / residual(1e-4) == pytest.approx(100.0, rel=0.05)


def test_collapsed_map_is_reported(small_grid, default_params):
    state = initial_data(small_grid, "dilation", -1.0)
    with pytest.raises(MapDegenerate) as excinfo:
        rhs_acceleration(state, small_grid, default_params, _at_rest())
    assert excinfo.value.t == 0.0
    assert excinfo.value.eta_x_min <= 1e-10
    assert excinfo.value.exit_code == 3


# ============== Time step ==============

def test_time_step_scales_with_dx(default_profile, default_params):
    coarse = build_grid(default_profile, default_params, 64)
    fine = build_grid(default_profile, default_params, 128)
    dt_coarse = stable_dt(initial_data(coarse, "dilation", 0.0), coarse, default_params, 1.0, 0.5)
    dt_fine = stable_dt(initial_data(fine, "dilation", 0.0), fine, default_params, 1.0, 0.5)
    assert dt_coarse / dt_fine == pytest.approx(2.0, rel=1e-2)


def test_time_step_respects_damping_cap(small_grid, default_params):
    dt = stable_dt(initial_data(small_grid, "dilation", 0.0), small_grid, default_params, 1.0, 1.0)
    assert dt <= 0.5 / default_params.mu


def test_step_lands_on_requested_time(small_grid, default_params, default_trajectory):
    state = initial_data(small_grid, "bump", 0.01)
    state = step(state, small_grid, default_params, default_trajectory, 0.5, max_dt=1e-3)
    assert state.t == pytest.approx(1e-3)
    assert state.step_count == 1
    assert state.dt_current == pytest.approx(1e-3)


def test_invalid_courant_number(small_grid, default_params, default_trajectory):
    with pytest.raises(InvalidGrid):
        step(initial_data(small_grid, "bump", 0.01), small_grid, default_params, default_trajectory, cfl=1.5)


# ============== Eulerian reconstruction ==============

def test_unperturbed_state_reproduces_barenblatt(global_profile, global_params):
    grid = build_grid(global_profile, global_params, 400)
    trajectory = CorrectionTrajectory.zero(global_params, 10.0)
    state = SolverState(t=0.0, w=np.zeros_like(grid.nodes), w_t=np.zeros_like(grid.nodes))

    snapshot = reconstruct_eulerian(state, grid, global_params, trajectory)
    assert not np.any(snapshot.density_diff)
    assert not np.any(snapshot.velocity_diff)
    assert snapshot.boundary == pytest.approx(barenblatt_boundary(global_profile, global_params, 0.0))
    assert snapshot_mass(snapshot, grid) == pytest.approx(1.0, abs=1e-6)


def test_mass_survives_a_perturbed_run(global_profile, global_params):
    grid = build_grid(global_profile, global_params, 400)
    trajectory = CorrectionTrajectory.zero(global_params, 10.0)
    state = initial_data(grid, "kick", 0.01)
    while state.t < 0.05:
        state = step(state, grid, global_params, trajectory, 0.5)

    snapshot = reconstruct_eulerian(state, grid, global_params, trajectory)
    assert snapshot.eta_x_min > 0.0
    assert snapshot_mass(snapshot, grid) == pytest.approx(1.0, abs=1e-6)
