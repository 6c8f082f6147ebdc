"""
Report models emitted by the analysis services.

These are plain pydantic models so every report serializes to JSON with
model_dump() and round-trips through model_validate().
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field

# Sup norm built from the backward-differenced acceleration history.
DIFFERENCED_NORMS = ("dt3_w",)

# Sup norms whose sup over time keeps growing under grid refinement (the end
# stencils of w_x and the differenced w_ttt resolve the vacuum layer only as
# dx -> 0), so their bounds are read per grid, not across grids.
REFINEMENT_SENSITIVE_NORMS = ("dt1_wx", "dt3_w")


# ============== Correction ODE ==============

class PhasePlaneReport(BaseModel):
    """Times t0 < t1 < t2 of the (h, z) phase-plane pattern and per-interval checks."""

    t0: float
    t1: float
    t2: float
    intervals: Dict[str, bool] = Field(default_factory=dict)
    h_max: float = 0.0
    h_end: float = 0.0
    decays_to_zero: bool = False

    @property
    def passed(self) -> bool:
        return all(self.intervals.values())


class DecayRow(BaseModel):
    """Decay of |d^k eta_tilde_x / dt^k| against its predicted envelope."""

    k: int
    fitted_exponent: Optional[float] = None
    predicted_exponent: float
    log_branch: bool = False
    boundary_case: bool = False
    envelope_min: float
    envelope_sup: float
    sup_drift: float = Field(0.0, description="Relative growth of the running sup over the final two decades")


class DecayReport(BaseModel):
    gamma: float
    lam: float
    mu: float
    t_end: float
    rows: List[DecayRow] = Field(default_factory=list)
    growth_exponent: float = Field(..., description="Quasi-static growth exponent of h")

    @property
    def K(self) -> float:
        """Run supremum of eta_tilde_x / (1+t)^{(lam+1)/(gamma+1)}."""
        return next(row.envelope_sup for row in self.rows if row.k == 0)


# ============== Rates ==============

class RateFit(BaseModel):
    """Least-squares power-law fit q ~ (1+t)^p [ln(1+t)]^{0|1}."""

    quantity: str
    t_lo: float
    t_hi: float
    exponent: float
    intercept: float
    r_squared: float
    stderr: float
    n_samples: int
    n_excluded: int = 0
    p_theory: Optional[float] = None
    log_correction: bool = False

    @property
    def deviation(self) -> Optional[float]:
        if self.p_theory is None:
            return None
        return abs(self.exponent - self.p_theory)


class RateRow(BaseModel):
    """One measured-vs-predicted exponent row."""

    quantity: str
    fitted: Optional[float] = None
    predicted: float
    predicted_delta_to_zero: float
    deviation: Optional[float] = None
    r_squared: Optional[float] = None
    mode: str = Field("upper", description="'upper' (fitted <= predicted + tol) or 'equal' (|fitted - predicted| <= tol)")
    tolerance: float = 0.1
    passed: bool = False
    note: str = ""


class RateReport(BaseModel):
    rows: List[RateRow] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)


class BoundednessRow(BaseModel):
    quantity: str
    initial: float
    sup_ratio: float
    final_decade_drift: float
    decay_fit: Optional[float] = None
    decay_predicted: Optional[float] = None
    passed: bool = False
    refinement_sensitive: bool = False


class EnergyDecayReport(BaseModel):
    rows: List[BoundednessRow] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)


# ============== Metrics ==============

class EnergyReport(BaseModel):
    """Weighted energies, sup norms and bookkeeping quantities at one time."""

    t: float
    time_weight_offset: float = Field(..., description="delta * 1_{lambda<1}, stored so rate fits can strip it")
    E: Dict[int, float] = Field(default_factory=dict)
    E_mixed: Dict[str, float] = Field(default_factory=dict)
    sup_norms: Dict[str, float] = Field(default_factory=dict)
    excluded_from_total: List[str] = Field(
        default_factory=list, description="Sup norms reported but left out of sup_total"
    )
    mass: float
    x_minus: float
    x_plus: float
    eta_x_min: float

    @property
    def total_energy(self) -> float:
        return sum(self.E.values()) + sum(self.E_mixed.values())

    @property
    def sup_total(self) -> float:
        return sum(value for name, value in self.sup_norms.items() if name not in self.excluded_from_total)


class HardyResult(BaseModel):
    theta: float
    n_cells: int
    ratio: float
    degenerate: bool = False


# ============== Experiments ==============

class RunOutcome(BaseModel):
    """Terminal status of a simulation."""

    completed: bool
    t_final: float
    steps: int
    degenerate: bool = False
    degenerate_at: Optional[float] = None
    eta_x_min: Optional[float] = None
    message: str = ""
    exit_code: int = 0


class ConvergenceRow(BaseModel):
    n_coarse: int
    n_mid: int
    n_fine: int
    error_coarse: float
    error_fine: float
    observed_order: float


class RefinementReport(BaseModel):
    """
    Richardson table of a refinement study.

    The finest triplet decides the verdict: on coarse grids the
    sigma^{alpha+1} midpoint weights next to the vacuum boundary are not yet
    resolved, so the leading rows are pre-asymptotic.
    """

    t_probe: float
    n_list: List[int]
    errors: List[float] = Field(default_factory=list)
    rows: List[ConvergenceRow] = Field(default_factory=list)
    monotone: bool = False
    order_target: float = 1.5
    asymptotic_order: float = float("nan")
    passed: bool = False

    @property
    def min_order(self) -> float:
        return min(row.observed_order for row in self.rows)


class SweepRow(BaseModel):
    index: int
    gamma: float
    lam: float
    mu: float
    exit_code: int
    error: Optional[str] = None
    exponents: Dict[str, Optional[float]] = Field(default_factory=dict)
    directory: str = ""
