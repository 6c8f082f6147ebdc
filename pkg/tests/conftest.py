"""
Shared fixtures for the lab's test suite.

Parameter sets:
- global_params:  (gamma=1.5, lambda=0.5, mu=1), the default lambda < 1 scenario
- default_params: (gamma=2, lambda=1, mu=3), the lambda = 1 reference scenario
- damped_params:  (gamma=2, lambda=0.25, mu=5), strongly damped; the correction returns to zero
- log_params:     (gamma=3, lambda=1, mu=2.5), where mu + 2/(gamma+1) = 3 is an integer
"""

import pytest

from models.config import RunConfig
from models.parameters import GasParameters
from services.barenblatt import derive_profile
from services.correction import integrate_correction
from services.solver import build_grid


@pytest.fixture(scope="session")
def global_params() -> GasParameters:
    return GasParameters.create(gamma=1.5, lam=0.5, mu=1.0)


@pytest.fixture(scope="session")
def default_params() -> GasParameters:
    return GasParameters.create(gamma=2.0, lam=1.0, mu=3.0)


@pytest.fixture(scope="session")
def damped_params() -> GasParameters:
    return GasParameters.create(gamma=2.0, lam=0.25, mu=5.0)


@pytest.fixture(scope="session")
def log_params() -> GasParameters:
    return GasParameters.create(gamma=3.0, lam=1.0, mu=2.5)


@pytest.fixture(scope="session")
def default_profile(default_params):
    return derive_profile(default_params, 1.0)


@pytest.fixture(scope="session")
def global_profile(global_params):
    return derive_profile(global_params, 1.0)


@pytest.fixture(scope="session")
def global_trajectory(global_params):
    """Correction for the lambda < 1 scenario on [0, 1e6]."""
    return integrate_correction(global_params, 1e6)


@pytest.fixture(scope="session")
def default_trajectory(default_params):
    return integrate_correction(default_params, 1e4)


@pytest.fixture
def small_grid(default_profile, default_params):
    return build_grid(default_profile, default_params, 64)


@pytest.fixture
def quick_config() -> RunConfig:
    """Short, coarse run config used by orchestration and CLI tests."""
    return RunConfig.from_ini(
        "\n".join(
            [
                "[params]",
                "gamma = 1.5",
                "lambda = 0.5",
                "mu = 1.0",
                "[grid]",
                "n_cells = 32",
                "cfl = 0.5",
                "n_list = 16, 32, 64",
                "[run]",
                "t_end = 2.0",
                "preset = bump",
                "amplitude = 0.01",
                "samples_per_decade = 10",
                "snapshot_times = 0, 1, 2",
                "t_probe = 0.5",
                "[correction]",
                "t_end = 1000",
                "[fits]",
                "t_lo = 0.1",
                "t_hi = 2.0",
            ]
        )
    )
