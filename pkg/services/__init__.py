"""
Services package for the lab's numerical work.

This package provides:
- Barenblatt profile and closed-form solution
- Correction ODE integration and ansatz derivatives
- Lagrangian vacuum solver
- Weighted energy metrics and rate analysis
- Experiment orchestration (runner behind the CLI)
"""

from services.correction import CorrectionTrajectory, integrate_correction
from services.experiments import ExperimentRunner, Simulation
from services.solver import build_grid, initial_data, step

__all__ = [
    "CorrectionTrajectory",
    "integrate_correction",
    "ExperimentRunner",
    "Simulation",
    "build_grid",
    "initial_data",
    "step",
]
