"""
Modified Barenblatt solution service.

This module handles:
- Deriving the profile constants A, B (and half-width L) from the gas parameters and mass
- The reference weight sigma(x) = A - B x^2
- Closed-form density, velocity and boundary of the self-similar solution
- Analytic residual diagnostics against the porous-media system with
  time-dependent dissipation

All functions accept a float or a numpy array for the spatial argument and
return the same kind.
"""

import logging
import math
from typing import Tuple, Union

import numpy as np
from scipy import integrate

from errors import DomainError, InvalidParameters
from models.parameters import BarenblattProfile, GasParameters

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Relative slack when testing |x| <= L so nodes built from L itself stay inside.
_SUPPORT_SLACK = 1e-12


def _scalar_or_array(values: np.ndarray, like: ArrayLike) -> ArrayLike:
    return float(values) if np.ndim(like) == 0 else values


# ============== Profile constants ==============

def normalization_integral(params: GasParameters) -> float:
    """
    Integral of (1 - y^2)^{1/(gamma-1)} over (-1, 1) by adaptive Gauss-Kronrod quadrature.

    Args:
        params: Gas parameters (only alpha is used)

    Returns:
        float: Integral value, relative error well below 1e-10
    """
    alpha = params.alpha
    value, abserr = integrate.quad(
        lambda y: (1.0 - y * y) ** alpha,
        -1.0,
        1.0,
        epsabs=0.0,
        epsrel=1e-13,
        limit=200,
    )
    if abserr > 1e-10 * abs(value):
        logger.warning(f"Normalization quadrature error {abserr:.3e} above target for alpha={alpha}")
    return value


def derive_profile(params: GasParameters, M: float) -> BarenblattProfile:
    """
    Derive the Barenblatt constants carrying total mass M.

    B = mu (1+lam)(gamma-1) / (2(gamma+1)),
    A^{(gamma+1)/(2(gamma-1))} = M sqrt(B) / normalization.

    Args:
        params: Validated gas parameters
        M: Total mass (> 0)

    Returns:
        BarenblattProfile: Constants A, B, M

    Raises:
        InvalidParameters: If M is not positive
    """
    if not M > 0:
        raise InvalidParameters(f"Total mass must be positive, got {M}")

    gamma, lam, mu = params.gamma, params.lam, params.mu
    B = mu * (1.0 + lam) * (gamma - 1.0) / (2.0 * (gamma + 1.0))
    norm = normalization_integral(params)
    exponent = 2.0 * (gamma - 1.0) / (gamma + 1.0)
    A = (M * math.sqrt(B) / norm) ** exponent

    profile = BarenblattProfile(A=A, B=B, M=M, normalization=norm)
    logger.debug(f"Derived profile A={A:.12g} B={B:.12g} L={profile.L:.12g} for M={M}")
    return profile


# ============== Reference weight ==============

def sigma(profile: BarenblattProfile, x: ArrayLike) -> ArrayLike:
    """
    Reference weight sigma(x) = rho_bar_0^{gamma-1}(x) = A - B x^2.

    Raises:
        DomainError: If any |x| exceeds L
    """
    xs = np.asarray(x, dtype=float)
    L = profile.L
    if np.any(np.abs(xs) > L * (1.0 + _SUPPORT_SLACK)):
        raise DomainError(f"sigma evaluated outside the reference interval [-{L:.6g}, {L:.6g}]")
    values = np.maximum(profile.A - profile.B * xs * xs, 0.0)
    return _scalar_or_array(values, x)


def sigma_derivative(profile: BarenblattProfile, x: ArrayLike) -> ArrayLike:
    """sigma_x = -2 B x."""
    xs = np.asarray(x, dtype=float)
    return _scalar_or_array(-2.0 * profile.B * xs, x)


def initial_density(profile: BarenblattProfile, params: GasParameters, x: ArrayLike) -> ArrayLike:
    """rho_bar_0(x) = sigma(x)^alpha."""
    return _scalar_or_array(np.asarray(sigma(profile, x)) ** params.alpha, x)


# ============== Closed-form solution ==============

def similarity_scale(params: GasParameters, t: ArrayLike) -> ArrayLike:
    """(1+t)^{(1+lam)/(gamma+1)}, the expansion factor of the support."""
    ts = np.asarray(t, dtype=float)
    return _scalar_or_array((1.0 + ts) ** params.expansion_rate, t)


def barenblatt_density(
    profile: BarenblattProfile,
    params: GasParameters,
    x: ArrayLike,
    t: float,
) -> ArrayLike:
    """
    Modified Barenblatt density rho_bar(x, t).

    Args:
        profile: Profile constants
        params: Gas parameters
        x: Eulerian position(s) inside the support
        t: Time (>= 0)

    Returns:
        Density value(s), nonnegative

    Raises:
        DomainError: If x lies outside |x| <= L (1+t)^{(1+lam)/(gamma+1)}
    """
    xs = np.asarray(x, dtype=float)
    s = similarity_scale(params, t)
    if np.any(np.abs(xs) > profile.L * s * (1.0 + _SUPPORT_SLACK)):
        raise DomainError(f"Density evaluated outside the support at t={t}")
    g = np.maximum(profile.A - profile.B * xs * xs / (s * s), 0.0)
    return _scalar_or_array(g ** params.alpha / s, x)


def barenblatt_density_clamped(
    profile: BarenblattProfile,
    params: GasParameters,
    x: ArrayLike,
    t: float,
) -> ArrayLike:
    """Same as barenblatt_density but returns 0 outside the support (plotting paths)."""
    xs = np.asarray(x, dtype=float)
    s = similarity_scale(params, t)
    g = np.maximum(profile.A - profile.B * xs * xs / (s * s), 0.0)
    return _scalar_or_array(g ** params.alpha / s, x)


def barenblatt_velocity(params: GasParameters, x: ArrayLike, t: float) -> ArrayLike:
    """u_bar(x, t) = (1+lam) x / ((gamma+1)(1+t))."""
    xs = np.asarray(x, dtype=float)
    return _scalar_or_array(params.expansion_rate * xs / (1.0 + t), x)


def barenblatt_boundary(profile: BarenblattProfile, params: GasParameters, t: float) -> Tuple[float, float]:
    """Vacuum boundaries (x_bar_minus, x_bar_plus) = (-L, L) (1+t)^{(1+lam)/(gamma+1)}."""
    edge = profile.L * float(similarity_scale(params, t))
    return -edge, edge


def barenblatt_mass(profile: BarenblattProfile, params: GasParameters, t: float) -> float:
    """Quadrature of rho_bar(., t) over its support."""
    _, edge = barenblatt_boundary(profile, params, t)
    value, _ = integrate.quad(
        lambda y: barenblatt_density_clamped(profile, params, y, t),
        -edge,
        edge,
        epsabs=0.0,
        epsrel=1e-12,
        limit=200,
    )
    return value


# ============== Residual diagnostics ==============

def porous_media_residual(
    profile: BarenblattProfile,
    params: GasParameters,
    x: ArrayLike,
    t: float,
) -> ArrayLike:
    """
    Pointwise residual rho_t - ((1+t)^lam / mu) p(rho)_xx of the closed form.

    Both derivatives are analytic; valid strictly inside the support.
    With g = A - B x^2 s^{-2} and s the similarity scale:
        rho_t  = -(p/(1+t)) s^{-1} g^{alpha-1} [g - 2 alpha B x^2 s^{-2}]
        P_xx   = -2 alpha B s^{-gamma-2} g^{alpha-1} [g - 2 alpha B x^2 s^{-2}]
    where p = (1+lam)/(gamma+1).
    """
    xs = np.asarray(x, dtype=float)
    alpha, gamma = params.alpha, params.gamma
    rate = params.expansion_rate
    s = float(similarity_scale(params, t))
    g = profile.A - profile.B * xs * xs / (s * s)
    if np.any(g <= 0.0):
        raise DomainError("Porous-media residual requires interior points")

    bracket = g - 2.0 * alpha * profile.B * xs * xs / (s * s)
    rho_t = -(rate / (1.0 + t)) * g ** (alpha - 1.0) * bracket / s
    pressure_xx = -2.0 * alpha * profile.B * s ** (-gamma - 2.0) * g ** (alpha - 1.0) * bracket
    residual = rho_t - (1.0 + t) ** params.lam / params.mu * pressure_xx
    return _scalar_or_array(residual, x)


def velocity_identity_residual(
    profile: BarenblattProfile,
    params: GasParameters,
    x: ArrayLike,
    t: float,
) -> ArrayLike:
    """
    Relative mismatch between u_bar and -((1+t)^lam/mu) p(rho_bar)_x / rho_bar.

    p(rho)_x / rho = -2 alpha B x s^{-gamma-1} for the closed form; zero at x = 0.
    """
    xs = np.asarray(x, dtype=float)
    s = float(similarity_scale(params, t))
    g = profile.A - profile.B * xs * xs / (s * s)
    if np.any(g <= 0.0):
        raise DomainError("Velocity identity requires interior points")

    pressure_x_over_rho = -2.0 * params.alpha * profile.B * xs * s ** (-params.gamma - 1.0)
    from_pressure = -(1.0 + t) ** params.lam / params.mu * pressure_x_over_rho
    closed = np.asarray(barenblatt_velocity(params, xs, t))
    scale = np.maximum(np.abs(closed), np.finfo(float).tiny)
    relative = np.where(closed == 0.0, np.abs(from_pressure), np.abs(from_pressure - closed) / scale)
    return _scalar_or_array(relative, x)
