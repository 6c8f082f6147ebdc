"""
Run configuration model.

A run is described by a sectioned key = value file:

    [params]      gamma, lambda, mu, delta, mass
    [grid]        n_cells, cfl, n_list
    [run]         t_end, preset, amplitude, samples_per_decade, snapshot_times, t_probe
    [correction]  t_end, rtol, atol, k_max, frozen
    [output]      directory
    [fits]        t_lo, t_hi, boundary/derivative/upper tolerances, log_correction,
                  order_target
    [metrics]     j_max, i_max, use_j3_fd, quadrature, derivative_count, thetas

Everything is validated before any run starts. The config hash (SHA-256 of the
canonical JSON dump) is stamped into every file a run writes.
"""

import configparser
import hashlib
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from errors import ConfigError, InvalidGrid
from models.parameters import GasParameters

logger = logging.getLogger(__name__)


def _split_list(value: Any) -> Any:
    """Accept 'a, b, c' strings for list-valued keys."""
    if isinstance(value, str):
        parts = [part.strip() for part in value.replace(";", ",").split(",")]
        return [part for part in parts if part]
    return value


def _none_if_blank(value: Any) -> Any:
    if isinstance(value, str) and value.strip().lower() in ("", "none", "null"):
        return None
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


# ============== Sections ==============

class ParamsSection(_Section):
    gamma: float = 1.5
    lam: float = Field(0.5, alias="lambda")
    mu: float = 1.0
    delta: Optional[float] = None
    mass: float = Field(1.0, gt=0)

    @field_validator("delta", mode="before")
    @classmethod
    def blank_delta(cls, value: Any) -> Any:
        return _none_if_blank(value)


class GridSection(_Section):
    n_cells: int = 400
    cfl: float = 0.5
    n_list: List[int] = Field(default_factory=lambda: [100, 200, 400, 800])

    @field_validator("n_list", mode="before")
    @classmethod
    def split_n_list(cls, value: Any) -> Any:
        return _split_list(value)

    @model_validator(mode="after")
    def check_grid(self) -> "GridSection":
        for n in [self.n_cells, *self.n_list]:
            if n < 8 or n % 2 != 0:
                raise InvalidGrid(f"n_cells must be even and >= 8, got {n}")
        if not 0.0 < self.cfl <= 1.0:
            raise InvalidGrid(f"cfl must lie in (0, 1], got {self.cfl}")
        return self


class RunSection(_Section):
    t_end: float = Field(1000.0, gt=0)
    preset: str = "bump"
    amplitude: float = 1e-2
    samples_per_decade: int = Field(50, ge=2)
    snapshot_times: List[float] = Field(default_factory=lambda: [0.0, 1.0, 10.0, 100.0, 1000.0])
    t_probe: float = Field(1.0, gt=0)

    @field_validator("snapshot_times", mode="before")
    @classmethod
    def split_snapshot_times(cls, value: Any) -> Any:
        return _split_list(value)


class CorrectionSection(_Section):
    t_end: float = Field(1e6, gt=0)
    rtol: Optional[float] = None
    atol: Optional[float] = None
    k_max: int = Field(3, ge=0, le=4)
    frozen: bool = False

    @field_validator("rtol", "atol", mode="before")
    @classmethod
    def blank_tolerances(cls, value: Any) -> Any:
        return _none_if_blank(value)


class OutputSection(_Section):
    directory: Optional[str] = None

    @field_validator("directory", mode="before")
    @classmethod
    def blank_directory(cls, value: Any) -> Any:
        return _none_if_blank(value)


class FitsSection(_Section):
    t_lo: float = 10.0
    t_hi: float = 1000.0
    boundary_tolerance: float = 0.05
    derivative_tolerance: float = 0.1
    upper_tolerance: float = 0.1
    drift_tolerance: float = 0.1
    log_correction: bool = False
    order_target: float = 1.5

    @model_validator(mode="after")
    def check_window(self) -> "FitsSection":
        if not 0.0 < self.t_lo < self.t_hi:
            raise ConfigError(f"Fit window must satisfy 0 < t_lo < t_hi, got [{self.t_lo}, {self.t_hi}]")
        return self


class EnergyConfig(_Section):
    """
    Orders of the weighted energies to evaluate.

    j_max time derivatives come from the equation itself; j = 3 (needed by E_2)
    is estimated from the acceleration history when use_j3_fd is set.
    quadrature selects the rule for the E_j integrals.
    """

    j_max: int = Field(2, ge=0, le=2)
    i_max: int = Field(1, ge=0, le=2)
    use_j3_fd: bool = True
    quadrature: Literal["trapezoid", "midpoint"] = "trapezoid"
    derivative_count: Optional[int] = None
    thetas: List[float] = Field(default_factory=lambda: [1.5, 2.0])

    @field_validator("thetas", mode="before")
    @classmethod
    def split_thetas(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator("derivative_count", mode="before")
    @classmethod
    def blank_derivative_count(cls, value: Any) -> Any:
        return _none_if_blank(value)


SECTIONS = ("params", "grid", "run", "correction", "output", "fits", "metrics")


# ============== Run configuration ==============

class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    params: ParamsSection = Field(default_factory=ParamsSection)
    grid: GridSection = Field(default_factory=GridSection)
    run: RunSection = Field(default_factory=RunSection)
    correction: CorrectionSection = Field(default_factory=CorrectionSection)
    output: OutputSection = Field(default_factory=OutputSection)
    fits: FitsSection = Field(default_factory=FitsSection)
    metrics: EnergyConfig = Field(default_factory=EnergyConfig)

    @model_validator(mode="after")
    def check_parameters(self) -> "RunConfig":
        """Validate the gas parameters eagerly so a bad config never starts a run."""
        params = self.gas_parameters()
        depth = self.metrics.derivative_count or params.derivative_count
        if self.metrics.j_max + self.metrics.i_max > depth:
            logger.warning(
                f"Energy orders j_max + i_max = {self.metrics.j_max + self.metrics.i_max} exceed the "
                f"derivative count {depth} covered by the decay estimates"
            )
        if self.fits.t_hi > self.run.t_end:
            logger.debug(f"Fit window end {self.fits.t_hi} beyond t_end {self.run.t_end}; clipped at use")
        return self

    def gas_parameters(self) -> GasParameters:
        return GasParameters.create(
            gamma=self.params.gamma,
            lam=self.params.lam,
            mu=self.params.mu,
            delta=self.params.delta,
        )

    @property
    def fit_window(self) -> tuple:
        return (self.fits.t_lo, min(self.fits.t_hi, self.run.t_end))

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True), sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def to_ini(self) -> str:
        """Serialize to the sectioned text format; from_ini(to_ini()) is an identity."""
        parser = configparser.ConfigParser()
        for name in SECTIONS:
            section = getattr(self, name)
            parser[name] = {}
            for key, value in section.model_dump(by_alias=True).items():
                parser[name][key] = _format_value(value)
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()

    def with_overrides(self, overrides: Iterable[str]) -> "RunConfig":
        raw = {name: getattr(self, name).model_dump(by_alias=True) for name in SECTIONS}
        _apply_overrides(raw, overrides)
        return _validate(raw)

    @classmethod
    def from_ini(cls, text: str, overrides: Iterable[str] = ()) -> "RunConfig":
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"Malformed config: {e}") from e

        raw: Dict[str, Dict[str, Any]] = {}
        for name in parser.sections():
            if name not in SECTIONS:
                raise ConfigError(f"Unknown config section [{name}]")
            raw[name] = dict(parser[name])
        _apply_overrides(raw, overrides)
        return _validate(raw)


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(_format_value(item) for item in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _apply_overrides(raw: Dict[str, Dict[str, Any]], overrides: Iterable[str]) -> None:
    """Patch 'section.key=value' strings into the raw section dictionaries."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Override '{item}' is not of the form section.key=value")
        path, value = item.split("=", 1)
        if "." not in path:
            raise ConfigError(f"Override '{item}' must name a section: section.key=value")
        section, key = (part.strip() for part in path.split(".", 1))
        if section not in SECTIONS:
            raise ConfigError(f"Unknown config section '{section}' in override '{item}'")
        raw.setdefault(section, {})[key] = value.strip()


def _validate(raw: Dict[str, Dict[str, Any]]) -> RunConfig:
    params = raw.get("params", {})
    if "lam" in params:
        params["lambda"] = params.pop("lam")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid run configuration: {e}") from e


def load_run_config(path: Optional[str] = None, overrides: Iterable[str] = ()) -> RunConfig:
    """
    Load a run configuration, applying overrides before validation.

    Args:
        path: Config file path; defaults are used when omitted
        overrides: 'section.key=value' strings

    Returns:
        RunConfig: Validated configuration

    Raises:
        ConfigError: If the file is unreadable or a key is unknown or malformed
        InvalidParameters: If the gas parameters are out of range
        InvalidGrid: If a grid size or the CFL number is invalid
    """
    if path is None:
        return RunConfig.from_ini("", overrides)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    config = RunConfig.from_ini(text, overrides)
    logger.info(f"Loaded run config {path} (hash {config.config_hash[:12]})")
    return config
