"""
Weighted energy service.

This module handles:
- Time derivatives of the perturbation w: w and w_t from the state, w_tt from
  the equation, w_ttt by backward differencing of the acceleration history
- The weighted energies E_j and E_{j,i} with time weight (1+t)^{2j - delta 1_{lam<1}}
- Weighted sup norms (the L-infinity side of the embedding estimate)
- Hardy-inequality ratios for the sigma weight

Quadrature is composite trapezoid on the nodes. Integrands whose weight has a
negative exponent switch the two end cells to the midpoint rule.
"""

import logging
from collections import deque
from typing import Deque, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from errors import HistoryTooShort, InvalidParameters, InvalidTheta
from models.config import EnergyConfig
from models.parameters import GasParameters
from models.reports import DIFFERENCED_NORMS, EnergyReport, HardyResult
from models.state import AnsatzEvaluation, EulerianSnapshot, Grid, SolverState
from services.solver import nodal_gradient, rhs_acceleration, snapshot_mass

logger = logging.getLogger(__name__)

QUADRATURE_RULES = ("trapezoid", "midpoint")


# ============== Time derivatives ==============

class AccelerationHistory:
    """Last three (t, w_tt) pairs of a run, for the backward-difference w_ttt."""

    def __init__(self):
        self._entries: Deque[Tuple[float, np.ndarray]] = deque(maxlen=3)

    def __len__(self) -> int:
        return len(self._entries)

    def push(self, t: float, acceleration: np.ndarray) -> None:
        if self._entries and t <= self._entries[-1][0]:
            raise InvalidParameters(f"History times must increase: {t} after {self._entries[-1][0]}")
        self._entries.append((float(t), np.array(acceleration, copy=True)))

    @property
    def latest_time(self) -> Optional[float]:
        return self._entries[-1][0] if self._entries else None

    def third_derivative(self) -> np.ndarray:
        """
        Second-order backward difference of w_tt at the newest time, variable steps.

        Raises:
            HistoryTooShort: With fewer than three stored accelerations
        """
        if len(self._entries) < 3:
            raise HistoryTooShort(f"w_ttt needs 3 stored accelerations, have {len(self._entries)}")
        (t0, f0), (t1, f1), (t2, f2) = self._entries
        h1, h2 = t1 - t0, t2 - t1
        return (
            f0 * (h2 / (h1 * (h1 + h2)))
            - f1 * ((h1 + h2) / (h1 * h2))
            + f2 * ((h1 + 2.0 * h2) / ((h1 + h2) * h2))
        )


def time_derivatives(
    state: SolverState,
    grid: Grid,
    params: GasParameters,
    ansatz: AnsatzEvaluation,
    order: int,
    history: Optional[AccelerationHistory] = None,
) -> List[np.ndarray]:
    """
    [w, w_t, ..., d^order w / dt^order] at the state's time, order <= 3.

    Raises:
        HistoryTooShort: If order = 3 and the history is missing, short, or stale
    """
    if not 0 <= order <= 3:
        raise InvalidParameters(f"time derivative order must lie in 0..3, got {order}")
    derivatives = [state.w, state.w_t]
    if order >= 2:
        derivatives.append(rhs_acceleration(state, grid, params, ansatz))
    if order >= 3:
        if history is None:
            raise HistoryTooShort("w_ttt needs an acceleration history")
        if history.latest_time is None or abs(history.latest_time - state.t) > 1e-12 * (1.0 + state.t):
            raise HistoryTooShort(f"Acceleration history does not end at t={state.t}")
        derivatives.append(history.third_derivative())
    return derivatives[: order + 1]


# ============== Quadrature ==============

def integrate_weighted(grid: Grid, values: np.ndarray, exponent: float, rule: str = "trapezoid") -> float:
    """
    Integral of sigma^exponent * values over [-L, L].

    Nonnegative exponents use the trapezoid rule on all nodes (the weight kills
    the endpoint terms when exponent > 0). Negative exponents keep the trapezoid
    rule on the interior and use the midpoint rule in the two end cells.

    Args:
        grid: Grid carrying sigma at nodes and midpoints
        values: Nodal values of the unweighted integrand
        exponent: Power of sigma in the weight
        rule: "trapezoid", or "midpoint" for sigma at cell midpoints times the
            average of the two nodal values in every cell

    Returns:
        float: The weighted integral

    Raises:
        InvalidParameters: For an unknown rule
    """
    if rule not in QUADRATURE_RULES:
        raise InvalidParameters(f"Unknown quadrature rule '{rule}', expected one of {', '.join(QUADRATURE_RULES)}")
    if rule == "midpoint":
        cell_means = 0.5 * (values[:-1] + values[1:])
        return grid.dx * float(np.sum(grid.sigma_at_midpoints ** exponent * cell_means))

    if exponent >= 0.0:
        weight = grid.sigma_at_nodes ** exponent
        return float(integrate.trapezoid(weight * values, x=grid.nodes))

    inner_nodes = grid.nodes[1:-1]
    inner = float(integrate.trapezoid(grid.sigma_at_nodes[1:-1] ** exponent * values[1:-1], x=inner_nodes))
    left = grid.sigma_at_midpoints[0] ** exponent * 0.5 * (values[0] + values[1])
    right = grid.sigma_at_midpoints[-1] ** exponent * 0.5 * (values[-2] + values[-1])
    return inner + grid.dx * float(left + right)


def _time_weight(params: GasParameters, t: float, j: int) -> float:
    return (1.0 + t) ** (2.0 * j - params.delta_effective)


def _spatial_derivatives(values: np.ndarray, dx: float, order: int) -> List[np.ndarray]:
    """[f, f_x, ..., d^order f / dx^order] by repeated nodal differencing (accuracy drops near the ends)."""
    out = [values]
    for _ in range(order):
        out.append(nodal_gradient(out[-1], dx))
    return out


# ============== Energies ==============

def energy_from_derivatives(
    grid: Grid,
    params: GasParameters,
    t: float,
    j: int,
    dj: np.ndarray,
    dj_next: np.ndarray,
    rule: str = "trapezoid",
) -> float:
    """E_j from precomputed d^j w and d^{j+1} w, with the quadrature rule of integrate_weighted."""
    alpha = params.alpha
    dj_x = nodal_gradient(dj, grid.dx)
    integral = (
        integrate_weighted(grid, dj * dj, alpha, rule)
        + integrate_weighted(grid, dj_x * dj_x, alpha + 1.0, rule)
        + (1.0 + t) ** (params.lam + 1.0) * integrate_weighted(grid, dj_next * dj_next, alpha, rule)
    )
    return _time_weight(params, t, j) * integral


def mixed_energy_from_derivative(grid: Grid, params: GasParameters, t: float, j: int, i: int, dj: np.ndarray) -> float:
    """E_{j,i} from precomputed d^j w."""
    if i < 1:
        raise InvalidParameters(f"E_(j,i) needs i >= 1, got {i}")
    alpha = params.alpha
    spatial = _spatial_derivatives(dj, grid.dx, i + 1)
    integral = integrate_weighted(grid, spatial[i + 1] ** 2, alpha + i + 1.0) + integrate_weighted(
        grid, spatial[i] ** 2, alpha + i - 1.0
    )
    return _time_weight(params, t, j) * integral


def energy_Ej(
    state: SolverState,
    grid: Grid,
    params: GasParameters,
    ansatz: AnsatzEvaluation,
    j: int,
    history: Optional[AccelerationHistory] = None,
) -> float:
    """
    E_j(t) = (1+t)^{2j - delta 1_{lam<1}} int [sigma^alpha (d^j w)^2
             + sigma^{alpha+1} (d^j w_x)^2 + (1+t)^{lam+1} sigma^alpha (d^{j+1} w)^2] dx

    Raises:
        HistoryTooShort: For j = 2 without three stored accelerations
    """
    derivs = time_derivatives(state, grid, params, ansatz, j + 1, history)
    return energy_from_derivatives(grid, params, state.t, j, derivs[j], derivs[j + 1])


def energy_Eji(
    state: SolverState,
    grid: Grid,
    params: GasParameters,
    ansatz: AnsatzEvaluation,
    j: int,
    i: int,
    history: Optional[AccelerationHistory] = None,
) -> float:
    """
    E_{j,i}(t) = (1+t)^{2j - delta 1_{lam<1}} int [sigma^{alpha+i+1} (d^j d_x^{i+1} w)^2
                 + sigma^{alpha+i-1} (d^j d_x^i w)^2] dx,  i >= 1
    """
    derivs = time_derivatives(state, grid, params, ansatz, j, history)
    return mixed_energy_from_derivative(grid, params, state.t, j, i, derivs[j])


# ============== Sup norms ==============

def sup_norm_names(j_list: Iterable[int], i_max: int = 2) -> List[str]:
    names = [f"dt{j}_w" for j in j_list]
    names += [f"dt{j}_wx" for j in j_list if j <= 1]
    for i in range(1, i_max + 1):
        for j in j_list:
            if 2 * i + j >= 4 and j <= 2:
                names.append(f"sigma_dt{j}_dx{i}")
    return names


def sup_from_derivatives(
    grid: Grid,
    params: GasParameters,
    t: float,
    derivs: Sequence[np.ndarray],
    j_list: Iterable[int],
    i_max: int = 2,
) -> Dict[str, float]:
    """
    Weighted sup table from precomputed time derivatives.

    dt{j}_w:          (1+t)^{2j - delta'} |d^j w|^2
    dt{j}_wx:         (1+t)^{2j - delta'} |d^j w_x|^2, j <= 1
    sigma_dt{j}_dx{i}: (1+t)^{2j - delta'} sigma^{2i+j-3} |d^j d_x^i w|^2, 2i + j >= 4
    """
    j_list = list(j_list)
    table: Dict[str, float] = {}
    for j in j_list:
        weight = _time_weight(params, t, j)
        table[f"dt{j}_w"] = weight * float(np.max(derivs[j] ** 2))
    for j in j_list:
        if j <= 1:
            wx = nodal_gradient(derivs[j], grid.dx)
            table[f"dt{j}_wx"] = _time_weight(params, t, j) * float(np.max(wx ** 2))
    for i in range(1, i_max + 1):
        for j in j_list:
            if 2 * i + j >= 4 and j <= 2:
                d_x = _spatial_derivatives(derivs[j], grid.dx, i)[i]
                weighted = grid.sigma_at_nodes ** (2.0 * i + j - 3.0) * d_x ** 2
                table[f"sigma_dt{j}_dx{i}"] = _time_weight(params, t, j) * float(np.max(weighted))
    return table


def weighted_sup_norms(
    state: SolverState,
    grid: Grid,
    params: GasParameters,
    ansatz: AnsatzEvaluation,
    j_list: Iterable[int] = (0, 1, 2),
    history: Optional[AccelerationHistory] = None,
    i_max: int = 2,
) -> Dict[str, float]:
    """
    Max over nodes of each weighted quantity of the embedding estimate.

    Args:
        j_list: Time-derivative orders, each <= 3 (3 needs a history)
        i_max: Highest spatial order of the sigma-weighted mixed terms

    Returns:
        Dict keyed by dt{j}_w, dt{j}_wx and sigma_dt{j}_dx{i}
    """
    j_list = sorted(set(j_list))
    if j_list and j_list[-1] > 3:
        raise InvalidParameters(f"sup-norm orders must be <= 3, got {j_list[-1]}")
    derivs = time_derivatives(state, grid, params, ansatz, j_list[-1] if j_list else 0, history)
    return sup_from_derivatives(grid, params, state.t, derivs, j_list, i_max)


# ============== Hardy inequality ==============

def hardy_ratio(grid: Grid, F: np.ndarray, theta: float) -> HardyResult:
    """
    int sigma^{theta-2} F^2 dx / int sigma^theta (F^2 + F_x^2) dx.

    Args:
        grid: Grid carrying sigma
        F: Nodal values
        theta: Weight exponent (> 1)

    Returns:
        HardyResult: ratio, flagged degenerate (ratio 0) when the denominator vanishes

    Raises:
        InvalidTheta: If theta <= 1
    """
    if not theta > 1.0:
        raise InvalidTheta(f"theta must exceed 1, got {theta}")
    F = np.asarray(F, dtype=float)
    F_x = nodal_gradient(F, grid.dx)
    numerator = integrate_weighted(grid, F * F, theta - 2.0)
    denominator = integrate_weighted(grid, F * F + F_x * F_x, theta)
    if denominator == 0.0:
        return HardyResult(theta=theta, n_cells=grid.n_cells, ratio=0.0, degenerate=True)
    return HardyResult(theta=theta, n_cells=grid.n_cells, ratio=numerator / denominator)


# ============== Report ==============

def energy_report(
    state: SolverState,
    grid: Grid,
    params: GasParameters,
    ansatz: AnsatzEvaluation,
    snapshot: EulerianSnapshot,
    config: Optional[EnergyConfig] = None,
    history: Optional[AccelerationHistory] = None,
) -> EnergyReport:
    """
    All configured energies and sup norms at one time.

    E_j for j = 0..j_max (E_2 only when use_j3_fd and the history is long enough),
    E_{j,i} for i = 1..i_max and sup norms up to the highest available order.
    The differenced dt3_w norm is reported but kept out of sup_total.
    """
    config = config or EnergyConfig()
    have_j3 = config.use_j3_fd and history is not None and len(history) >= 3
    top = min(config.j_max + 1, 3 if have_j3 else 2)
    derivs = time_derivatives(state, grid, params, ansatz, top, history if have_j3 else None)

    energies = {
        j: energy_from_derivatives(grid, params, state.t, j, derivs[j], derivs[j + 1], config.quadrature)
        for j in range(config.j_max + 1)
        if j + 1 <= top
    }
    mixed = {
        f"{j},{i}": mixed_energy_from_derivative(grid, params, state.t, j, i, derivs[j])
        for j in range(config.j_max + 1)
        for i in range(1, config.i_max + 1)
        if j <= top
    }
    sup = sup_from_derivatives(grid, params, state.t, derivs, range(top + 1), i_max=2)

    positions = snapshot.positions
    return EnergyReport(
        t=state.t,
        time_weight_offset=params.delta_effective,
        E=energies,
        E_mixed=mixed,
        sup_norms=sup,
        excluded_from_total=[name for name in DIFFERENCED_NORMS if name in sup],
        mass=snapshot_mass(snapshot, grid),
        x_minus=float(positions[0]),
        x_plus=float(positions[-1]),
        eta_x_min=snapshot.eta_x_min,
    )
