import logging

import numpy as np
import pytest

from core.grid import ScalarField, TensorField
from physics.params import ModelParams
from simulation.checkpoint import (
    CheckpointError, decode_params, encode_params, load_checkpoint, save_checkpoint,
)
from simulation.presets import build_initial_state, params_differences
from simulation.state import SimState, StepControl
from simulation.timeloop import step
from tests.helpers import random_velocity


def _stepped_state(grid, params):
    rng = np.random.default_rng(71)
    phi = ScalarField(grid, 0.5 + 0.05 * rng.standard_normal(grid.shape))
    state = SimState.initial(random_velocity(grid, seed=72).scaled(0.05), phi,
                             TensorField.identity(grid), params)
    return step(state, params, StepControl(dt=1e-3, tol=1e-12))


def test_round_trip_is_bit_exact(tmp_path, grid, params):
    state = _stepped_state(grid, params)
    first = save_checkpoint(state, params, tmp_path / "a.pfsi")
    loaded, loaded_params = load_checkpoint(first)
    second = save_checkpoint(loaded, loaded_params, tmp_path / "b.pfsi")
    assert first.read_bytes() == second.read_bytes()
    assert loaded.n == state.n and loaded.t == state.t and loaded.dt_prev == state.dt_prev
    assert np.array_equal(loaded.phi.values, state.phi.values)
    assert np.array_equal(loaded.F_prev.values, state.F_prev.values)
    assert loaded.grid == grid


def test_periodic_grid_round_trip(tmp_path, periodic_grid, params):
    state = _stepped_state(periodic_grid, params)
    loaded, _ = load_checkpoint(save_checkpoint(state, params, tmp_path / "p.pfsi"))
    assert loaded.grid.periodic
    for a, b in zip(loaded.u.components, state.u.components):
        assert np.array_equal(a, b)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.pfsi"
    path.write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(CheckpointError, match="bad magic"):
        load_checkpoint(path)


def test_truncated_file(tmp_path, grid, params):
    path = save_checkpoint(_stepped_state(grid, params), params, tmp_path / "t.pfsi")
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_params_round_trip():
    params = ModelParams(lam=0.5, lam_e=0.0, eta_profile="linear", eta_range=(0.5, 2.0),
                         stabilization=300.0)
    assert decode_params(encode_params(params)) == params


def test_checkpoint_preset_warns_on_other_params(tmp_path, grid, params, caplog):
    path = save_checkpoint(_stepped_state(grid, params), params, tmp_path / "c.pfsi")
    configured = ModelParams(lam_e=0.5)
    assert params_differences(params, configured) == {"lam_e": (1.0, 0.5)}
    with caplog.at_level(logging.WARNING, logger="simulation.presets"):
        state = build_initial_state("checkpoint", grid, configured, {"checkpoint": str(path)})
    assert state.n == 1
    warnings = [r.getMessage() for r in caplog.records if r.levelno == logging.WARNING]
    assert len(warnings) == 1 and "lam_e" in warnings[0]


def test_checkpoint_preset_is_quiet_on_matching_params(tmp_path, grid, params, caplog):
    path = save_checkpoint(_stepped_state(grid, params), params, tmp_path / "m.pfsi")
    with caplog.at_level(logging.WARNING, logger="simulation.presets"):
        build_initial_state("checkpoint", grid, params, {"checkpoint": str(path)})
    assert not [r for r in caplog.records if r.levelno >= logging.WARNING]
