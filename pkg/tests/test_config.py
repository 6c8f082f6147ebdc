"""Tests for run configuration parsing, overrides and hashing."""

import pytest

from errors import ConfigError, InvalidGrid, InvalidParameters
from models.config import RunConfig, load_run_config


def test_defaults():
    config = RunConfig.from_ini("")
    assert config.params.gamma == 1.5
    assert config.params.lam == 0.5
    assert config.grid.n_list == [100, 200, 400, 800]
    assert config.run.snapshot_times == [0.0, 1.0, 10.0, 100.0, 1000.0]
    assert config.params.delta is None
    assert config.gas_parameters().delta == pytest.approx(0.6)


def test_round_trip_keeps_hash(quick_config):
    again = RunConfig.from_ini(quick_config.to_ini())
    assert again == quick_config
    assert again.config_hash == quick_config.config_hash


def test_hash_tracks_content(quick_config):
    changed = quick_config.with_overrides(["params.mu=2"])
    assert changed.params.mu == 2.0
    assert changed.config_hash != quick_config.config_hash
    assert quick_config.with_overrides([]).config_hash == quick_config.config_hash


@pytest.mark.parametrize("key", ["lambda", "lam"])
def test_lambda_override_spellings(key):
    config = RunConfig.from_ini("", [f"params.{key}=1", "params.mu=3"])
    assert config.params.lam == 1.0
    assert config.gas_parameters().regime == "global"


def test_list_and_blank_values():
    config = RunConfig.from_ini(
        "[grid]\nn_list = 50; 100; 200\n[params]\ndelta = \n[correction]\nrtol = none\nfrozen = true\n"
    )
    assert config.grid.n_list == [50, 100, 200]
    assert config.params.delta is None
    assert config.correction.rtol is None
    assert config.correction.frozen is True


def test_fit_window_is_clipped_to_run():
    config = RunConfig.from_ini("", ["run.t_end=100"])
    assert config.fit_window == (10.0, 100.0)


@pytest.mark.parametrize(
    "text, overrides",
    [
        ("[physics]\ngamma = 2\n", []),
        ("", ["params.nu=1"]),
        ("", ["params.gamma"]),
        ("", ["gamma=2"]),
        ("", ["physics.gamma=2"]),
        ("", ["fits.t_lo=500", "fits.t_hi=100"]),
        ("[params\ngamma = 2\n", []),
    ],
)
def test_config_errors(text, overrides):
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_ini(text, overrides)
    assert excinfo.value.exit_code == 2


def test_parameter_errors_surface_before_a_run():
    with pytest.raises(InvalidParameters):
        RunConfig.from_ini("", ["params.gamma=0.9"])
    with pytest.raises(InvalidParameters):
        RunConfig.from_ini("", ["params.lambda=1.5"])


@pytest.mark.parametrize("override", ["grid.n_cells=7", "grid.n_list=100, 150, 201", "grid.cfl=1.5"])
def test_grid_errors(override):
    with pytest.raises(InvalidGrid):
        RunConfig.from_ini("", [override])


def test_load_from_file(tmp_path, quick_config):
    path = tmp_path / "run.ini"
    path.write_text(quick_config.to_ini(), encoding="utf-8")
    loaded = load_run_config(str(path), ["run.preset=kick"])
    assert loaded.run.preset == "kick"
    assert loaded.grid.n_cells == 32


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(str(tmp_path / "absent.ini"))
