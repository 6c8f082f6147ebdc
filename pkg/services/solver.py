"""
Vacuum free-boundary solver in Lagrangian coordinates.

This module handles:
- The uniform grid on the reference interval [-L, L] with precomputed weights
- The semi-discrete perturbation equation for w = eta - eta_tilde:
      rho0 w_tt + d(t) rho0 w_t + (1/gamma) [rho0^gamma ((eta_tilde_x + w_x)^{-gamma} - eta_tilde_x^{-gamma})]_x = 0
  in conservative flux form in the interior (rho0 = sigma^alpha, rho0^gamma = sigma^{alpha+1})
  and in the sigma -> 0 limit form at the two vacuum nodes
- Classical RK4 time stepping under a sound-speed CFL condition
- Initial-data presets and the Eulerian reconstruction rho eta_x = rho0
"""

import logging
from typing import Optional

import numpy as np
from scipy import integrate

from errors import CflUnderflow, InvalidGrid, MapDegenerate, UnknownPreset
from models.parameters import BarenblattProfile, GasParameters
from models.state import AnsatzEvaluation, EulerianSnapshot, Grid, SolverState
from services.barenblatt import sigma, sigma_derivative
from services.correction import CorrectionTrajectory, eta_bar_x, eta_bar_x_derivative

logger = logging.getLogger(__name__)

# eta_x <= DEGENERACY_THRESHOLD * eta_tilde_x counts as a collapsed map.
DEGENERACY_THRESHOLD = 1e-10
MIN_DT = 1e-14
PRESETS = ("dilation", "bump", "kick")


# ============== Grid ==============

def build_grid(profile: BarenblattProfile, params: GasParameters, n_cells: int) -> Grid:
    """
    Uniform grid with x_0 = -L, x_N = L and sigma exactly zero at both ends.

    Args:
        profile: Barenblatt constants (defines L)
        params: Gas parameters (defines alpha)
        n_cells: Number of cells, even and >= 8 so x = 0 is a node

    Returns:
        Grid: Nodes, midpoints and weight arrays

    Raises:
        InvalidGrid: If n_cells is odd or smaller than 8
    """
    if n_cells < 8 or n_cells % 2 != 0:
        raise InvalidGrid(f"n_cells must be even and >= 8, got {n_cells}")

    L = profile.L
    nodes = np.linspace(-L, L, n_cells + 1)
    nodes = 0.5 * (nodes - nodes[::-1])
    nodes[n_cells // 2] = 0.0
    midpoints = 0.5 * (nodes[:-1] + nodes[1:])

    sigma_nodes = np.asarray(sigma(profile, nodes), dtype=float)
    sigma_nodes[0] = sigma_nodes[-1] = 0.0
    sigma_mid = np.asarray(sigma(profile, midpoints), dtype=float)

    return Grid(
        n_cells=n_cells,
        L=L,
        dx=2.0 * L / n_cells,
        nodes=nodes,
        midpoints=midpoints,
        sigma_at_nodes=sigma_nodes,
        sigma_at_midpoints=sigma_mid,
        sigma_x_at_nodes=np.asarray(sigma_derivative(profile, nodes), dtype=float),
        alpha=params.alpha,
        A=profile.A,
    )


def nodal_gradient(values: np.ndarray, dx: float) -> np.ndarray:
    """
    Second-order nodal derivative: centered inside, one-sided at both ends.

    The two one-sided stencils are written as mirror images so odd data give an
    exactly even derivative.

    Args:
        values: Nodal values, at least three
        dx: Uniform node spacing

    Returns:
        np.ndarray: Derivative at every node, same shape as values
    """
    grad = np.empty_like(values)
    grad[1:-1] = (values[2:] - values[:-2]) / (2.0 * dx)
    grad[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx)
    grad[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * dx)
    return grad


def _pressure_response(slope: np.ndarray, eta_tilde_x: float, gamma: float) -> np.ndarray:
    """G(s) = (eta_tilde_x + s)^{-gamma} - eta_tilde_x^{-gamma}, evaluated as expm1 form."""
    return np.expm1(-gamma * np.log1p(slope / eta_tilde_x)) * eta_tilde_x ** (-gamma)


def _check_map(slopes: np.ndarray, eta_tilde_x: float, t: float) -> None:
    """
    Reject states whose Lagrangian map has (nearly) lost monotonicity.

    Args:
        slopes: Perturbation slopes w_x at the nodes
        eta_tilde_x: Corrected reference slope at time t
        t: Current time, reported in the error

    Raises:
        MapDegenerate: If min(eta_tilde_x + w_x) falls to the degeneracy threshold
    """
    eta_x_min = eta_tilde_x + float(np.min(slopes))
    if eta_x_min <= DEGENERACY_THRESHOLD * eta_tilde_x:
        raise MapDegenerate(
            f"Lagrangian map degenerate at t={t:.6g}: min eta_x = {eta_x_min:.3e}",
            t=t,
            eta_x_min=eta_x_min,
        )


# ============== Semi-discrete operator ==============

def rhs_acceleration(
    state: SolverState,
    grid: Grid,
    params: GasParameters,
    ansatz: AnsatzEvaluation,
) -> np.ndarray:
    """
    w_tt from the semi-discrete perturbation equation.

    Interior nodes:
        w_tt = -d w_t - (1/gamma) sigma_i^{-alpha} (F_{i+1/2} - F_{i-1/2}) / dx,
        F_{i+1/2} = sigma_{i+1/2}^{alpha+1} G((w_{i+1} - w_i) / dx)
    Vacuum nodes (sigma = 0):
        w_tt = -d w_t - alpha sigma_x G(w_x), with one-sided second-order w_x

    Raises:
        MapDegenerate: If eta_tilde_x + w_x collapses at any midpoint or node
    """
    gamma, alpha = params.gamma, params.alpha
    y = ansatz.eta_tilde_x
    damping = params.damping(state.t)
    w, w_t = state.w, state.w_t

    slope_mid = np.diff(w) / grid.dx
    slope_nodes = nodal_gradient(w, grid.dx)
    _check_map(slope_mid, y, state.t)
    _check_map(slope_nodes, y, state.t)

    flux = grid.sigma_at_midpoints ** (alpha + 1.0) * _pressure_response(slope_mid, y, gamma)

    w_tt = np.empty_like(w)
    w_tt[1:-1] = -damping * w_t[1:-1] - (
        (flux[1:] - flux[:-1]) / grid.dx / (gamma * grid.sigma_at_nodes[1:-1] ** alpha)
    )
    ends = np.array([0, -1])
    w_tt[ends] = -damping * w_t[ends] - alpha * grid.sigma_x_at_nodes[ends] * _pressure_response(
        slope_nodes[ends], y, gamma
    )
    return w_tt


def linearized_acceleration(
    state: SolverState,
    grid: Grid,
    params: GasParameters,
    ansatz: AnsatzEvaluation,
) -> np.ndarray:
    """Small-amplitude limit of rhs_acceleration: G(s) replaced by -gamma eta_tilde_x^{-gamma-1} s."""
    gamma, alpha = params.gamma, params.alpha
    y = ansatz.eta_tilde_x
    damping = params.damping(state.t)
    coeff = -gamma * y ** (-gamma - 1.0)

    slope_mid = np.diff(state.w) / grid.dx
    slope_nodes = nodal_gradient(state.w, grid.dx)
    flux = grid.sigma_at_midpoints ** (alpha + 1.0) * coeff * slope_mid

    w_tt = np.empty_like(state.w)
    w_tt[1:-1] = -damping * state.w_t[1:-1] - (
        (flux[1:] - flux[:-1]) / grid.dx / (gamma * grid.sigma_at_nodes[1:-1] ** alpha)
    )
    ends = np.array([0, -1])
    w_tt[ends] = -damping * state.w_t[ends] - alpha * grid.sigma_x_at_nodes[ends] * coeff * slope_nodes[ends]
    return w_tt


# ============== Time stepping ==============

def stable_dt(state: SolverState, grid: Grid, params: GasParameters, eta_tilde_x: float, cfl: float) -> float:
    """
    dt = cfl dx / c_max, c_max = max_mid sqrt(sigma (eta_tilde_x + w_x)^{-gamma-1}),
    capped by 0.5 (1+t)^lam / mu to resolve the damping.
    """
    slope_mid = np.diff(state.w) / grid.dx
    _check_map(slope_mid, eta_tilde_x, state.t)
    c_max = float(np.max(np.sqrt(grid.sigma_at_midpoints * (eta_tilde_x + slope_mid) ** (-params.gamma - 1.0))))
    dt = cfl * grid.dx / c_max
    return min(dt, 0.5 / params.damping(state.t))


def step(
    state: SolverState,
    grid: Grid,
    params: GasParameters,
    trajectory: CorrectionTrajectory,
    cfl: float,
    max_dt: Optional[float] = None,
) -> SolverState:
    """
    Advance (w, w_t) by one classical RK4 step.

    Args:
        state: Current state
        grid: Spatial grid
        params: Gas parameters
        trajectory: Correction trajectory supplying eta_tilde_x at RK substages
        cfl: Courant number in (0, 1]
        max_dt: Optional cap so a step lands exactly on a sample time

    Returns:
        SolverState: New state at t + dt

    Raises:
        MapDegenerate: Propagated from rhs_acceleration
        CflUnderflow: If dt falls below 1e-14
    """
    if not 0.0 < cfl <= 1.0:
        raise InvalidGrid(f"cfl must lie in (0, 1], got {cfl}")

    t = state.t
    dt = stable_dt(state, grid, params, float(trajectory.eta_x(t)), cfl)
    if max_dt is not None:
        dt = min(dt, max_dt)
    if dt < MIN_DT:
        raise CflUnderflow(f"Time step {dt:.3e} underflow at t={t:.6g}")

    def acceleration(t_stage: float, w: np.ndarray, w_t: np.ndarray) -> np.ndarray:
        ansatz = AnsatzEvaluation(t=t_stage, eta_tilde_x=float(trajectory.eta_x(t_stage)), derivatives=())
        return rhs_acceleration(SolverState(t=t_stage, w=w, w_t=w_t), grid, params, ansatz)

    w, v = state.w, state.w_t
    k1w, k1v = v, acceleration(t, w, v)
    k2w, k2v = v + 0.5 * dt * k1v, acceleration(t + 0.5 * dt, w + 0.5 * dt * k1w, v + 0.5 * dt * k1v)
    k3w, k3v = v + 0.5 * dt * k2v, acceleration(t + 0.5 * dt, w + 0.5 * dt * k2w, v + 0.5 * dt * k2v)
    k4w, k4v = v + dt * k3v, acceleration(t + dt, w + dt * k3w, v + dt * k3v)

    w_new = w + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    v_new = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return SolverState(t=t + dt, w=w_new, w_t=v_new, step_count=state.step_count + 1, dt_current=dt)


# ============== Initial data ==============

def initial_data(grid: Grid, preset: str, amplitude: float = 1e-2) -> SolverState:
    """
    Smooth, odd initial perturbations with finite weighted energy.

    Presets:
    - dilation: w = eps x,             w_t = 0
    - bump:     w = eps x sigma(x)/A,  w_t = 0
    - kick:     w = 0,                 w_t = eps x

    Raises:
        UnknownPreset: If preset is not one of the names above
    """
    x = grid.nodes
    zeros = np.zeros_like(x)
    if preset == "dilation":
        w, w_t = amplitude * x, zeros
    elif preset == "bump":
        w, w_t = amplitude * x * grid.sigma_at_nodes / grid.A, zeros
    elif preset == "kick":
        w, w_t = zeros, amplitude * x
    else:
        raise UnknownPreset(f"Unknown preset '{preset}', expected one of {', '.join(PRESETS)}")
    return SolverState(t=0.0, w=w.copy(), w_t=w_t.copy())


# ============== Eulerian reconstruction ==============

def reconstruct_eulerian(
    state: SolverState,
    grid: Grid,
    params: GasParameters,
    trajectory: CorrectionTrajectory,
) -> EulerianSnapshot:
    """
    Map a Lagrangian state back to Eulerian quantities along particle paths.

    eta = x eta_tilde_x + w, eta_x = eta_tilde_x + w_x, rho = rho0 / eta_x,
    u = x eta_tilde_xt + w_t. Differences against the Barenblatt flow use
    rho_bar(eta_bar) = rho0 / eta_bar_x and u - u_bar = w_t + x h_t.

    Raises:
        MapDegenerate: If eta_x collapses at any node
    """
    t = state.t
    x = grid.nodes
    y = float(trajectory.eta_x(t))
    z = float(trajectory.z_at(t))
    y_t = float(eta_bar_x_derivative(params, t, 1)) + z
    bar_x = float(eta_bar_x(params, t))

    w_x = nodal_gradient(state.w, grid.dx)
    _check_map(w_x, y, t)
    eta_x = y + w_x
    rho0 = grid.rho0_at_nodes

    positions = x * y + state.w
    density = rho0 / eta_x
    barenblatt_density = rho0 / bar_x
    return EulerianSnapshot(
        t=t,
        positions=positions,
        eta_x=eta_x,
        density=density,
        velocity=x * y_t + state.w_t,
        barenblatt_density=barenblatt_density,
        barenblatt_velocity=x * float(eta_bar_x_derivative(params, t, 1)),
        density_diff=density - barenblatt_density,
        velocity_diff=state.w_t + x * z,
        boundary=(float(positions[0]), float(positions[-1])),
    )


def snapshot_mass(snapshot: EulerianSnapshot, grid: Grid) -> float:
    """Composite Simpson quadrature of rho eta_x over the reference grid."""
    return float(integrate.simpson(snapshot.density * snapshot.eta_x, x=grid.nodes))
