"""
Correction ODE service.

This module handles:
- Integrating h_tt + d(t) h_t + c [eta_bar_x^{-gamma} - (eta_bar_x + h)^{-gamma}] = -eta_bar_xtt,
  h(0) = h_t(0) = 0, with d(t) = mu (1+t)^{-lam}, c = mu (lam+1)/(gamma+1)
- Dense output of (h, z = h_t) by cubic Hermite interpolation between accepted steps
- Exact time derivatives of eta_tilde_x = eta_bar_x + h obtained by differentiating
  eta_tilde_xtt + d eta_tilde_xt - c eta_tilde_x^{-gamma} = 0
- Phase-plane and decay-envelope diagnostics of the trajectory

Bound constants (C, K, c_k) are always reported as run suprema.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate, interpolate

from config import settings
from errors import InsufficientSpan, InvalidParameters, PatternNotFound, StepSizeUnderflow
from models.parameters import GasParameters
from models.reports import DecayReport, DecayRow, PhasePlaneReport
from models.state import AnsatzEvaluation, CorrectionState
from services.rates import fit_power_law

logger = logging.getLogger(__name__)

K_MAX_LIMIT = 4


# ============== Ansatz background ==============

def eta_bar_x(params: GasParameters, t):
    """eta_bar_x = (1+t)^p, p = (lam+1)/(gamma+1)."""
    return (1.0 + np.asarray(t, dtype=float)) ** params.expansion_rate


def eta_bar_x_derivative(params: GasParameters, t, k: int):
    """k-th time derivative of (1+t)^p."""
    p = params.expansion_rate
    coeff = 1.0
    for i in range(k):
        coeff *= p - i
    return coeff * (1.0 + np.asarray(t, dtype=float)) ** (p - k)


def _pressure_gap(eta_bar, h, gamma):
    """eta_bar^{-gamma} - (eta_bar + h)^{-gamma} without cancellation for small h."""
    return -eta_bar ** (-gamma) * np.expm1(-gamma * np.log1p(h / eta_bar))


def correction_rhs(params: GasParameters, t: float, y: Sequence[float]) -> np.ndarray:
    """First-order system (h, z)' for the correction ODE."""
    h, z = y[0], y[1]
    gamma, mu = params.gamma, params.mu
    c = mu * params.expansion_rate
    eb = eta_bar_x(params, t)
    z_t = (
        -params.damping(t) * z
        - c * _pressure_gap(eb, h, gamma)
        - eta_bar_x_derivative(params, t, 2)
    )
    return np.array([z, z_t])


def correction_growth_exponent(params: GasParameters) -> float:
    """
    Growth exponent q of h from the quasi-static balance of the linearized ODE.

    Balancing d(t) h_t + c gamma eta_bar_x^{-gamma-1} h against -eta_bar_xtt gives
    h ~ (1+t)^q with q = (lam+1)/(gamma+1) + lam - 1. For q < 0 the correction
    returns to zero; otherwise it grows, but slower than eta_bar_x when lam < 1.
    """
    return params.expansion_rate + params.lam - 1.0


# ============== Trajectory ==============

class CorrectionTrajectory:
    """
    Accepted steps of the correction ODE with cubic Hermite dense output.

    h is interpolated with slope z; z is interpolated with slope z_t taken
    from the ODE at each node, so the second derivative is never differenced.
    """

    def __init__(self, params: GasParameters, t: np.ndarray, h: np.ndarray, z: np.ndarray, frozen: bool = False):
        if t.size < 2 or np.any(np.diff(t) <= 0.0):
            raise InvalidParameters("Correction trajectory needs strictly increasing times")
        self.params = params
        self.t = t
        self.h = h
        self.z = z
        self.frozen = frozen
        if frozen:
            z_t = np.zeros_like(t)
        else:
            z_t = np.array([correction_rhs(params, ti, (hi, zi))[1] for ti, hi, zi in zip(t, h, z)])
        self.z_t = z_t
        self._h_spline = interpolate.CubicHermiteSpline(t, h, z)
        self._z_spline = interpolate.CubicHermiteSpline(t, z, z_t)

    @classmethod
    def zero(cls, params: GasParameters, t_end: float) -> "CorrectionTrajectory":
        """h = 0 frozen mode: eta_tilde = eta_bar (the Barenblatt ansatz itself)."""
        t = np.array([0.0, t_end])
        return cls(params, t, np.zeros(2), np.zeros(2), frozen=True)

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def _check_range(self, t) -> None:
        ts = np.asarray(t, dtype=float)
        slack = 1e-12 * max(1.0, self.t_end)
        if np.any(ts < -slack) or np.any(ts > self.t_end + slack):
            raise InvalidParameters(f"t outside the integrated range [0, {self.t_end}]")

    def h_at(self, t):
        self._check_range(t)
        return self._h_spline(t)

    def z_at(self, t):
        self._check_range(t)
        return self._z_spline(t)

    def state_at(self, t: float) -> CorrectionState:
        return CorrectionState(float(t), float(self.h_at(t)), float(self.z_at(t)))

    def eta_x(self, t):
        """eta_tilde_x(t) = eta_bar_x(t) + h(t)."""
        return eta_bar_x(self.params, t) + self.h_at(t)

    def ansatz(self, t: float, k_max: int = 2) -> AnsatzEvaluation:
        return ansatz_derivatives(self.params, self, t, k_max)


def integrate_correction(
    params: GasParameters,
    t_end: float,
    tol: Optional[float] = None,
    atol: Optional[float] = None,
) -> CorrectionTrajectory:
    """
    Integrate the correction ODE on [0, t_end] with the Dormand-Prince 5(4) pair.

    Args:
        params: Gas parameters (any admissible regime, including lambda=1, mu<=2)
        t_end: Final time (> 0)
        tol: Relative local error tolerance (defaults to settings.ode_rtol)
        atol: Absolute tolerance (defaults to settings.ode_atol)

    Returns:
        CorrectionTrajectory: Accepted steps with dense output

    Raises:
        StepSizeUnderflow: If the step-size controller stalls
    """
    if not t_end > 0:
        raise InvalidParameters(f"t_end must be positive, got {t_end}")
    rtol = settings.ode_rtol if tol is None else tol
    atol = settings.ode_atol if atol is None else atol
    if not (rtol > 0 and atol > 0):
        raise InvalidParameters("ODE tolerances must be positive")

    sol = integrate.solve_ivp(
        lambda t, y: correction_rhs(params, t, y),
        (0.0, t_end),
        [0.0, 0.0],
        method="RK45",
        rtol=rtol,
        atol=atol,
    )
    if sol.status != 0:
        raise StepSizeUnderflow(f"Correction ODE integration failed at t={sol.t[-1]:.6g}: {sol.message}")

    logger.info(
        f"Correction ODE integrated to t={t_end:.4g} in {sol.t.size - 1} steps "
        f"(gamma={params.gamma}, lambda={params.lam}, mu={params.mu}, rtol={rtol:.1e})"
    )
    return CorrectionTrajectory(params, sol.t, sol.y[0], sol.y[1])


# ============== Ansatz derivatives ==============

def _ansatz_series(params: GasParameters, t, h, z, k_max: int) -> List[np.ndarray]:
    """
    [y, y', ..., y^(k_max)] for y = eta_tilde_x from (h, z) and repeated
    differentiation of y'' = -d y' + c y^{-gamma}.

    Args:
        params: Gas parameters (gamma, lambda, mu)
        t: Time or array of times
        h: Correction h at t
        z: h_t at t
        k_max: Highest derivative order wanted

    Returns:
        List[np.ndarray]: k_max + 1 arrays, entry k holding d^k eta_tilde_x / dt^k
    """
    gamma, lam, mu = params.gamma, params.lam, params.mu
    c = mu * params.expansion_rate
    t = np.asarray(t, dtype=float)
    one_t = 1.0 + t

    y = eta_bar_x(params, t) + h
    y1 = eta_bar_x_derivative(params, t, 1) + z
    series = [y, y1]
    if k_max < 2:
        return series[: k_max + 1]

    d = mu * one_t ** (-lam)
    d1 = -lam * mu * one_t ** (-lam - 1.0)
    d2 = lam * (lam + 1.0) * mu * one_t ** (-lam - 2.0)
    y_pow = y ** (-gamma)

    y2 = -d * y1 + c * y_pow
    series.append(y2)
    if k_max >= 3:
        y3 = -d1 * y1 - d * y2 - c * gamma * y_pow / y * y1
        series.append(y3)
    if k_max >= 4:
        y4 = (
            -d2 * y1
            - 2.0 * d1 * y2
            - d * series[3]
            + c * gamma * (gamma + 1.0) * y_pow / (y * y) * y1 * y1
            - c * gamma * y_pow / y * y2
        )
        series.append(y4)
    return series


def ansatz_derivatives(
    params: GasParameters,
    trajectory: CorrectionTrajectory,
    t: float,
    k_max: int = 3,
) -> AnsatzEvaluation:
    """
    eta_tilde_x and its first k_max time derivatives at time t.

    k = 1 comes from z + eta_bar_xt; k >= 2 from the differentiated ODE, so each
    value is exact given (h, z). In frozen mode (h = 0) the ansatz is eta_bar_x
    itself and the derivatives are those of (1+t)^p.

    Raises:
        InvalidParameters: If k_max is outside 0..4 or t outside the trajectory
    """
    if not 0 <= k_max <= K_MAX_LIMIT:
        raise InvalidParameters(f"k_max must lie in 0..{K_MAX_LIMIT}, got {k_max}")
    if trajectory.frozen:
        trajectory._check_range(t)
        values = [float(eta_bar_x_derivative(params, t, k)) for k in range(k_max + 1)]
    else:
        h = float(trajectory.h_at(t))
        z = float(trajectory.z_at(t))
        values = [float(v) for v in _ansatz_series(params, t, h, z, k_max)]
    return AnsatzEvaluation(t=float(t), eta_tilde_x=values[0], derivatives=tuple(values[1:]))


def sample_ansatz(
    params: GasParameters,
    trajectory: CorrectionTrajectory,
    times: np.ndarray,
    k_max: int = 3,
) -> np.ndarray:
    """
    Vectorized ansatz table: row k holds d^k eta_tilde_x / dt^k at the given times.
    """
    if not 0 <= k_max <= K_MAX_LIMIT:
        raise InvalidParameters(f"k_max must lie in 0..{K_MAX_LIMIT}, got {k_max}")
    times = np.asarray(times, dtype=float)
    return np.vstack(_ansatz_series(params, times, trajectory.h_at(times), trajectory.z_at(times), k_max))


def ansatz_velocity_integral_form(params: GasParameters, trajectory: CorrectionTrajectory, t: float) -> float:
    """
    eta_tilde_xt(t) by variation of constants, as a cross-check of the integrator.

    With integrating factor E(t) = exp(mu (1+t)^{1-lam} / (1-lam)) (or (1+t)^mu for lam = 1):
        eta_tilde_xt(t) = p E(0)/E(t) + c int_0^t E(s)/E(t) eta_tilde_x(s)^{-gamma} ds
    """
    lam, mu, gamma = params.lam, params.mu, params.gamma
    p = params.expansion_rate
    c = mu * p

    if lam == 1.0:
        def log_factor(s: float) -> float:
            return mu * math.log1p(s)
    else:
        def log_factor(s: float) -> float:
            return mu * (1.0 + s) ** (1.0 - lam) / (1.0 - lam)

    log_end = log_factor(t)
    integral, _ = integrate.quad(
        lambda s: math.exp(log_factor(s) - log_end) * float(trajectory.eta_x(s)) ** (-gamma),
        0.0,
        t,
        epsabs=0.0,
        epsrel=1e-11,
        limit=400,
    )
    return p * math.exp(log_factor(0.0) - log_end) + c * integral


# ============== Phase plane ==============

def phase_plane_check(trajectory: CorrectionTrajectory, rel_tol: float = 1e-9) -> PhasePlaneReport:
    """
    Locate t0 < t1 < t2 (z maximal, z = 0 with h maximal, z minimal) and verify
    the four monotonicity intervals:
        [0, t0]: z up, h up;  [t0, t1]: z down, h up;
        [t1, t2]: z down, h down;  [t2, end]: z up, h down.

    Args:
        trajectory: Integrated correction trajectory (accepted steps)
        rel_tol: Monotonicity slack relative to max |h|, max |z|

    Returns:
        PhasePlaneReport: Times and pass/fail per interval

    Raises:
        PatternNotFound: If z never turns from positive to negative, the
            negative minimum is not reached within the horizon, or the
            samples are not increasing in time
    """
    t, h, z = np.asarray(trajectory.t), np.asarray(trajectory.h), np.asarray(trajectory.z)
    if t.size < 4 or np.any(np.diff(t) <= 0.0):
        raise PatternNotFound("Trajectory samples must be strictly increasing in time")

    positive = np.flatnonzero(z > 0.0)
    if positive.size == 0:
        raise PatternNotFound("z never becomes positive")
    after_rise = positive[0]
    crossing = np.flatnonzero((z[after_rise:-1] > 0.0) & (z[after_rise + 1:] <= 0.0))
    if crossing.size == 0:
        raise PatternNotFound(f"z does not change sign before t={t[-1]:.4g}")
    i_cross = after_rise + crossing[0]

    i0 = int(np.argmax(z[: i_cross + 1]))
    # Linear interpolation of the zero of z between the bracketing samples.
    za, zb = z[i_cross], z[i_cross + 1]
    t1 = float(t[i_cross] + (t[i_cross + 1] - t[i_cross]) * za / (za - zb))

    back_up = np.flatnonzero(z[i_cross + 1:] > 0.0)
    i_stop = i_cross + 1 + (back_up[0] if back_up.size else t.size - i_cross - 1)
    i2 = i_cross + 1 + int(np.argmin(z[i_cross + 1: i_stop]))
    if i2 >= t.size - 1:
        raise PatternNotFound(f"z still decreasing at the horizon t={t[-1]:.4g}")

    tol_h = rel_tol * max(float(np.max(np.abs(h))), 1e-300)
    tol_z = rel_tol * max(float(np.max(np.abs(z))), 1e-300)

    def monotone(values: np.ndarray, lo: int, hi: int, increasing: bool, tol: float) -> bool:
        steps = np.diff(values[lo: hi + 1])
        return bool(np.all(steps >= -tol) if increasing else np.all(steps <= tol))

    intervals = {
        "z_up_h_up": monotone(z, 0, i0, True, tol_z) and monotone(h, 0, i0, True, tol_h),
        "z_down_h_up": monotone(z, i0, i_cross, False, tol_z) and monotone(h, i0, i_cross, True, tol_h),
        "z_down_h_down": monotone(z, i_cross + 1, i2, False, tol_z) and monotone(h, i_cross + 1, i2, False, tol_h),
        "z_up_h_down": monotone(z, i2, t.size - 1, True, tol_z) and monotone(h, i2, t.size - 1, False, tol_h),
    }

    h_max = float(np.max(h))
    i_hmax = int(np.argmax(h))
    if i_hmax not in (i_cross, i_cross + 1):
        intervals["h_max_at_t1"] = False

    report = PhasePlaneReport(
        t0=float(t[i0]),
        t1=t1,
        t2=float(t[i2]),
        intervals=intervals,
        h_max=h_max,
        h_end=float(h[-1]),
        decays_to_zero=bool(h[-1] <= 0.05 * h_max),
    )
    logger.info(
        f"Phase plane: t0={report.t0:.4g} t1={report.t1:.4g} t2={report.t2:.4g} passed={report.passed}"
    )
    return report


# ============== Decay envelopes ==============

def verify_decay_rates(
    params: GasParameters,
    trajectory: CorrectionTrajectory,
    k_max: int = 3,
    samples_per_decade: int = 50,
) -> DecayReport:
    """
    Fit the decay exponent of |d^k eta_tilde_x / dt^k| on the last decade and
    measure the envelope ratio against the predicted law.

    Predicted envelope: (1+t)^{p-k}; for lam = 1 and k >= mu + 2/(gamma+1)
    the log branch (1+t)^{-mu} ln(1+t). k = 0 reports eta_tilde_x / (1+t)^p,
    whose sup is K.

    Raises:
        InsufficientSpan: If 1 + t_end < 100
    """
    decades = math.log10(1.0 + trajectory.t_end)
    if decades < 2.0:
        raise InsufficientSpan(f"Trajectory spans {decades:.2f} decades of (1+t); need 2")

    n = int(math.ceil(decades * samples_per_decade)) + 1
    one_t = np.logspace(0.0, decades, n)
    one_t[-1] = 1.0 + trajectory.t_end
    times = np.minimum(one_t - 1.0, trajectory.t_end)
    table = sample_ansatz(params, trajectory, times, k_max)

    p = params.expansion_rate
    window = (one_t[-1] / 10.0 - 1.0, trajectory.t_end)
    drift_split = one_t[-1] / 100.0 - 1.0
    report = DecayReport(
        gamma=params.gamma,
        lam=params.lam,
        mu=params.mu,
        t_end=trajectory.t_end,
        growth_exponent=correction_growth_exponent(params),
    )

    for k in range(k_max + 1):
        magnitude = np.abs(table[k])
        log_branch = params.lam == 1.0 and k >= 1 and k >= params.log_threshold - 1e-12
        boundary_case = log_branch and abs(k - params.log_threshold) <= 1e-9
        if log_branch:
            predicted = -params.mu
            mask = one_t >= math.e
            envelope = one_t[mask] ** (-params.mu) * np.log(one_t[mask])
        else:
            predicted = p - k
            mask = np.ones_like(one_t, dtype=bool)
            envelope = one_t ** predicted
        ratio = magnitude[mask] / envelope

        fitted = None
        if k >= 1:
            fit = fit_power_law(times, magnitude, window, quantity=f"d{k}_eta_x", p_theory=predicted)
            fitted = fit.exponent

        running_before = ratio[times[mask] <= drift_split]
        sup_end = float(np.max(ratio))
        sup_before = float(np.max(running_before)) if running_before.size else sup_end
        drift = (sup_end - sup_before) / sup_before if sup_before > 0 else 0.0

        report.rows.append(
            DecayRow(
                k=k,
                fitted_exponent=fitted,
                predicted_exponent=predicted,
                log_branch=log_branch,
                boundary_case=boundary_case,
                envelope_min=float(np.min(ratio)),
                envelope_sup=sup_end,
                sup_drift=drift,
            )
        )

    logger.info(f"Decay report: K={report.K:.6g}, growth exponent of h {report.growth_exponent:+.3f}")
    return report
