"""
Gas and profile parameter models.

Models follow this structure:
1. Required fields first (no default)
2. Optional/default fields after
3. Derived quantities as properties

Both models are frozen: every operation that consumes them is a pure function.
"""

import math
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from errors import InvalidParameters


class GasParameters(BaseModel):
    """
    Adiabatic exponent and damping law of the gas.

    Pressure follows p = rho^gamma / gamma; the friction is
    -mu / (1+t)^lam * rho * u.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    # ========== Required fields ==========
    gamma: float = Field(..., description="Adiabatic exponent (> 1)")
    lam: float = Field(..., alias="lambda", description="Damping decay exponent, 0 < lambda <= 1")
    mu: float = Field(..., description="Damping strength (> 0)")

    # ========== Optional/Default fields ==========
    delta: Optional[float] = Field(
        default=None,
        description="Time-weight offset in (0, 2(lambda+1)/(gamma+1)); midpoint when omitted",
    )
    allow_constant_damping: bool = Field(
        default=False,
        description="Admit lambda = 0 (constant damping limit, used for cross-checks only)",
    )

    @model_validator(mode="before")
    @classmethod
    def fill_delta(cls, data: Any) -> Any:
        """Default delta to the midpoint of its admissible interval."""
        if isinstance(data, dict) and data.get("delta") is None:
            gamma = data.get("gamma")
            lam = data.get("lam", data.get("lambda"))
            if isinstance(gamma, (int, float)) and isinstance(lam, (int, float)) and gamma != -1:
                data = {**data, "delta": (lam + 1.0) / (gamma + 1.0)}
        return data

    @model_validator(mode="after")
    def check_ranges(self) -> "GasParameters":
        """Validate the admissible region of (gamma, lambda, mu, delta)."""
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.mu > 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        lam_floor_ok = self.lam > 0.0 or (self.allow_constant_damping and self.lam == 0.0)
        if not (lam_floor_ok and self.lam <= 1.0):
            raise ValueError(f"lambda must lie in (0, 1], got {self.lam}")
        upper = 2.0 * (self.lam + 1.0) / (self.gamma + 1.0)
        if self.delta is None or not 0.0 < self.delta < upper:
            raise ValueError(f"delta must lie in (0, {upper:.6g}), got {self.delta}")
        return self

    @classmethod
    def create(cls, gamma: float, lam: float, mu: float, delta: Optional[float] = None, **extra) -> "GasParameters":
        """
        Build validated parameters, translating validation failures.

        Raises:
            InvalidParameters: If any range constraint is violated
        """
        try:
            return cls(gamma=gamma, lam=lam, mu=mu, delta=delta, **extra)
        except ValidationError as e:
            raise InvalidParameters(str(e)) from e

    # ========== Derived quantities ==========

    @property
    def alpha(self) -> float:
        """Weight exponent 1/(gamma-1)."""
        return 1.0 / (self.gamma - 1.0)

    @property
    def beta(self) -> float:
        return self.lam + 1.0

    @property
    def indicator_lambda_lt_1(self) -> bool:
        return self.lam < 1.0

    @property
    def expansion_rate(self) -> float:
        """Self-similar exponent (lambda+1)/(gamma+1) of the boundary and of eta_bar_x."""
        return (self.lam + 1.0) / (self.gamma + 1.0)

    @property
    def delta_effective(self) -> float:
        """delta * 1_{lambda<1}: the offset that actually enters the time weights."""
        return self.delta if self.indicator_lambda_lt_1 else 0.0

    @property
    def is_global_regime(self) -> bool:
        """(lambda<1, mu>0) or (lambda=1, mu>2)."""
        if self.lam < 1.0:
            return self.mu > 0.0
        return self.mu > 2.0

    @property
    def regime(self) -> str:
        return "global" if self.is_global_regime else "conjectured_blowup"

    @property
    def log_threshold(self) -> float:
        """mu + 2/(gamma+1): derivative order where the lambda=1 decay law switches."""
        return self.mu + 2.0 / (self.gamma + 1.0)

    @property
    def derivative_count(self) -> int:
        """Derivative count m of the full weighted energy hierarchy."""
        base = 4 + math.floor(self.alpha)
        if self.lam < 1.0:
            return base
        return min(base, math.floor(self.log_threshold))

    def damping(self, t: float) -> float:
        """Friction coefficient mu/(1+t)^lambda."""
        return self.mu * (1.0 + t) ** (-self.lam)


class BarenblattProfile(BaseModel):
    """
    Constants of the modified Barenblatt solution.

    rho_bar(x,t) = (1+t)^{-(1+lam)/(gamma+1)} [A - B (1+t)^{-2(1+lam)/(gamma+1)} x^2]^{1/(gamma-1)}
    """

    model_config = ConfigDict(frozen=True)

    A: float = Field(..., gt=0, description="Profile amplitude")
    B: float = Field(..., gt=0, description="Profile curvature")
    M: float = Field(..., gt=0, description="Total mass")
    normalization: float = Field(..., gt=0, description="Integral of (1-y^2)^{1/(gamma-1)} over (-1, 1)")

    @property
    def L(self) -> float:
        """Reference half-width sqrt(A/B)."""
        return math.sqrt(self.A / self.B)
