import math

import numpy as np
import pytest

from core.errors import CflViolation, InputError
from core.grid import GridSpec, MacVelocity, ScalarField, TensorField
from simulation.state import SimState, StepControl
from simulation.timeloop import cfl_dt, step
from tests.helpers import random_velocity, rest_state


def test_cfl_dt_from_velocity(params):
    grid = GridSpec((1.0, 1.0), (10, 10), "periodic")
    u = MacVelocity.from_functions(grid, [lambda x, y: 2.0 + 0 * x, lambda x, y: 0 * x])
    state = SimState.initial(u, ScalarField.full(grid, 0.5), TensorField.identity(grid), params)
    assert cfl_dt(state, params, safety=0.5) == pytest.approx(0.025)


def test_cfl_dt_at_rest(grid, params):
    state = rest_state(grid, params)
    assert cfl_dt(state, params, dt_max=0.01) == 0.01
    assert math.isinf(cfl_dt(state, params))


def test_rest_state_is_fixed_point(grid, params):
    state = rest_state(grid, params)
    ctrl = StepControl(dt=1e-3, tol=1e-12)
    new = step(state, params, ctrl)
    assert new.n == 1 and new.t == pytest.approx(1e-3)
    assert new.u.max_abs() == 0.0
    np.testing.assert_allclose(new.phi.values, 0.5, atol=1e-12)
    assert np.array_equal(new.F.values, state.F.values)
    assert new.dt_prev == 1e-3


def test_steps_are_deterministic(grid, params):
    rng = np.random.default_rng(51)
    phi = ScalarField(grid, 0.5 + 0.05 * rng.standard_normal(grid.shape))
    state = SimState.initial(random_velocity(grid, seed=52).scaled(0.05), phi,
                             TensorField.identity(grid), params)
    ctrl = StepControl(dt=1e-3, tol=1e-12)
    a = step(step(state, params, ctrl), params, ctrl)
    b = step(step(state, params, ctrl), params, ctrl)
    for (name, fa), (_, fb) in zip(a.fields(), b.fields()):
        va = fa.components if name == "u" else (fa.values,)
        vb = fb.components if name == "u" else (fb.values,)
        assert all(np.array_equal(x, y) for x, y in zip(va, vb)), name


def test_cfl_violation_is_not_retried(grid, params):
    u = random_velocity(grid, seed=53)
    state = SimState.initial(u, ScalarField.full(grid, 0.5), TensorField.identity(grid), params)
    with pytest.raises(CflViolation) as err:
        step(state, params, StepControl(dt=10.0))
    assert err.value.suggested_dt == pytest.approx(0.9 * grid.min_spacing / u.max_abs())


def test_non_finite_phase_rejected(grid, params):
    state = rest_state(grid, params)
    state.phi.values[0, 0] = np.nan
    with pytest.raises(InputError):
        step(state, params, StepControl(dt=1e-3))
