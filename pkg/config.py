"""
Configuration management using Pydantic Settings.
Loads environment variables (prefix VACUUM_) from .env file.

Run-level physics configuration lives in models/config.py; this module only
holds process-wide settings: logging, output location, worker count and
default integrator tolerances.
"""

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="VACUUM_",
        case_sensitive=False,
        extra="ignore"
    )

    # ============== Output ==============
    output_dir: str = Field(
        default="runs",
        description="Default directory for emitted CSV/JSON files"
    )
    float_format: str = Field(
        default=".17g",
        description="Format spec for floats in CSV output (round-trip exact)"
    )

    # ============== Numerics ==============
    ode_rtol: float = Field(
        default=1e-10,
        description="Default relative tolerance for the correction ODE"
    )
    ode_atol: float = Field(
        default=1e-12,
        description="Default absolute tolerance for the correction ODE"
    )
    sweep_workers: int = Field(
        default=1,
        description="Process pool size for parameter sweeps"
    )

    # ============== Application ==============
    app_env: str = Field(
        default="development",
        description="Application environment: development, ci, production"
    )
    log_level: str = Field(
        default="INFO",
        description="Logging level: DEBUG, INFO, WARNING, ERROR, CRITICAL"
    )
    log_to_file: bool = Field(
        default=False,
        description="Also write logs under the output directory"
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        v_upper = v.upper()
        if v_upper not in valid_levels:
            raise ValueError(f"Log level must be one of: {', '.join(valid_levels)}")
        return v_upper

    @field_validator("sweep_workers")
    @classmethod
    def validate_workers(cls, v: int) -> int:
        if v < 1:
            raise ValueError("sweep_workers must be at least 1")
        return v

    @field_validator("ode_rtol", "ode_atol")
    @classmethod
    def validate_tolerance(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("ODE tolerances must be positive")
        return v


# Global settings instance
settings = Settings()
