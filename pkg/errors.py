"""
Exception hierarchy for the vacuum lab.

Every error carries the process exit code the CLI reports for it:
- 1: numerical / analysis failure
- 2: validation error (parameters, config, grid, presets)
- 3: Lagrangian map degeneracy or CFL collapse
- 4: IO failure
"""

from typing import Optional


class VacuumLabError(Exception):
    """Base class for all lab errors."""

    exit_code: int = 1


# ============== Validation ==============

class InvalidParameters(VacuumLabError):
    """Gas or damping parameters outside the admissible ranges."""

    exit_code = 2


class ConfigError(VacuumLabError):
    """Run configuration could not be parsed or overridden."""

    exit_code = 2


class InvalidGrid(VacuumLabError):
    exit_code = 2


class DomainError(VacuumLabError):
    """Point requested outside the support of a profile."""

    exit_code = 2


class UnknownPreset(VacuumLabError):
    exit_code = 2


class InvalidTheta(VacuumLabError):
    exit_code = 2


# ============== Correction ODE ==============

class StepSizeUnderflow(VacuumLabError):
    """Adaptive integrator stalled; the correction ODE is smooth so this is a bug."""


class PatternNotFound(VacuumLabError):
    """Phase-plane pattern (z max, z zero, z min) absent within the horizon."""


class InsufficientSpan(VacuumLabError):
    """Trajectory too short for a decay fit."""


# ============== Solver ==============

class MapDegenerate(VacuumLabError):
    """
    Lagrangian map lost strict positivity (eta_x <= threshold).

    Attributes:
        t: Time at which the degeneracy was detected
        eta_x_min: Smallest eta_x seen at that time
    """

    exit_code = 3

    def __init__(self, message: str, t: Optional[float] = None, eta_x_min: Optional[float] = None):
        super().__init__(message)
        self.t = t
        self.eta_x_min = eta_x_min


class CflUnderflow(VacuumLabError):
    exit_code = 3


# ============== Metrics / rates ==============

class HistoryTooShort(VacuumLabError):
    """Not enough stored accelerations to difference a third time derivative."""


class InsufficientSamples(VacuumLabError):
    pass


class AllNonpositive(VacuumLabError):
    pass


# ============== IO ==============

class StorageError(VacuumLabError):
    exit_code = 4
