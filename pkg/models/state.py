"""
Array-carrying state records.

Grid, solver states and Eulerian snapshots hold numpy arrays, so they are
frozen dataclasses rather than pydantic models. Once emitted they are never
mutated; the solver always builds a fresh SolverState per step.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np


@dataclass(frozen=True)
class CorrectionState:
    """Point of the correction trajectory: h and z = h_t at time t."""

    t: float
    h: float
    z: float


@dataclass(frozen=True)
class AnsatzEvaluation:
    """
    eta_tilde_x(t) = (1+t)^{(lam+1)/(gamma+1)} + h(t) and its time derivatives.

    derivatives[k-1] holds d^k eta_tilde_x / dt^k for k = 1..k_max.
    """

    t: float
    eta_tilde_x: float
    derivatives: Tuple[float, ...]

    @property
    def k_max(self) -> int:
        return len(self.derivatives)

    def derivative(self, k: int) -> float:
        """k-th derivative, k = 0 returning eta_tilde_x itself."""
        if k == 0:
            return self.eta_tilde_x
        return self.derivatives[k - 1]


@dataclass(frozen=True)
class Grid:
    """
    Uniform grid on the reference interval [-L, L].

    The boundary nodes sit exactly on the roots of sigma; nodes are exactly
    antisymmetric so reflection tests are bit-for-bit.
    """

    n_cells: int
    L: float
    dx: float
    nodes: np.ndarray
    midpoints: np.ndarray
    sigma_at_nodes: np.ndarray
    sigma_at_midpoints: np.ndarray
    sigma_x_at_nodes: np.ndarray
    alpha: float
    A: float

    @property
    def rho0_at_nodes(self) -> np.ndarray:
        """rho_bar_0 = sigma^alpha."""
        return self.sigma_at_nodes ** self.alpha


@dataclass(frozen=True)
class SolverState:
    """Lagrangian perturbation w = eta - eta_tilde and w_t at the nodes."""

    t: float
    w: np.ndarray
    w_t: np.ndarray
    step_count: int = 0
    dt_current: float = 0.0


@dataclass(frozen=True)
class EulerianSnapshot:
    """
    Eulerian reconstruction of a solver state.

    Differences are taken along particle paths:
    rho(eta(x,t),t) - rho_bar(eta_bar(x,t),t) and u(eta(x,t),t) - u_bar(eta_bar(x,t),t).
    """

    t: float
    positions: np.ndarray
    eta_x: np.ndarray
    density: np.ndarray
    velocity: np.ndarray
    barenblatt_density: np.ndarray
    barenblatt_velocity: np.ndarray
    density_diff: np.ndarray
    velocity_diff: np.ndarray
    boundary: Tuple[float, float] = field(default=(0.0, 0.0))

    @property
    def eta_x_min(self) -> float:
        return float(np.min(self.eta_x))


@dataclass(frozen=True)
class RunSeries:
    """
    Time series recorded by a simulation at its scheduled sample times.

    boundary_derivatives[k] is d^k x_plus / dt^k; unweighted_sup[j] is
    sup_x |d^j w / dt^j| without time weights.
    """

    t: np.ndarray
    x_minus: np.ndarray
    x_plus: np.ndarray
    mass: np.ndarray
    eta_x_min: np.ndarray
    dt: np.ndarray
    density_ratio_sup: np.ndarray
    velocity_diff_sup: np.ndarray
    total_energy: np.ndarray
    sup_total: np.ndarray
    boundary_derivatives: Dict[int, np.ndarray] = field(default_factory=dict)
    energies: Dict[int, np.ndarray] = field(default_factory=dict)
    sup_norms: Dict[str, np.ndarray] = field(default_factory=dict)
    unweighted_sup: Dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def embedding_ratio(self) -> np.ndarray:
        """Weighted sup total over computed energy; zero where the energy vanishes."""
        safe = np.where(self.total_energy > 0.0, self.total_energy, 1.0)
        return np.where(self.total_energy > 0.0, self.sup_total / safe, 0.0)
