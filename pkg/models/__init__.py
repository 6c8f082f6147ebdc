"""
Models package for typed domain records.

This package provides:
- Gas parameters and Barenblatt profile constants
- Run configuration (sectioned text file, config hash)
- Array-carrying state records (grid, solver state, snapshots, run series)
- Report models emitted by the services
"""

from models.config import EnergyConfig, RunConfig, load_run_config
from models.parameters import BarenblattProfile, GasParameters
from models.state import AnsatzEvaluation, CorrectionState, EulerianSnapshot, Grid, RunSeries, SolverState

__all__ = [
    # Parameters
    "GasParameters",
    "BarenblattProfile",
    # Configuration
    "EnergyConfig",
    "RunConfig",
    "load_run_config",
    # State
    "AnsatzEvaluation",
    "CorrectionState",
    "EulerianSnapshot",
    "Grid",
    "RunSeries",
    "SolverState",
]
