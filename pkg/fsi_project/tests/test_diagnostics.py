import numpy as np
import pytest

from core.grid import BCMode, GridSpec, MacVelocity, ScalarField, TensorField
from simulation.diagnostics import (
    diagnostics_row, energy_budget, existence_horizon, grad_u_sq, sobolev_norm_sq, total_energy,
    z_functional,
)
from simulation.state import SimState, StepControl
from simulation.timeloop import step
from reports.series import SERIES_COLUMNS
from tests.helpers import random_velocity, rest_state
from verify.orders import observed_order


def test_existence_horizon():
    assert existence_horizon(0.0, 1.0) == pytest.approx(2.0 ** -26, rel=1e-12)
    assert existence_horizon(0.5, 2.0) == pytest.approx(0.5 * existence_horizon(0.5, 1.0), rel=1e-12)
    values = [existence_horizon(z) for z in (0.0, 0.1, 1.0, 10.0)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert existence_horizon(1e300) == 0.0
    with pytest.raises(ValueError):
        existence_horizon(1.0, 0.0)


def test_z_at_rest_counts_identity(grid, params):
    z = z_functional(rest_state(grid, params), None, params)
    assert z.z_value == pytest.approx(2.0)
    assert z.f_h2 == pytest.approx(2.0)
    assert z.grad_u == 0.0 and z.lap_phi == 0.0 and z.u_t == 0.0
    assert z.m_value == 0.0


def test_z_vanishes_for_zero_tensor(grid, params):
    state = rest_state(grid, params)
    state.F = TensorField.zeros(grid)
    assert z_functional(state, None, params).z_value == 0.0


def test_grad_u_scales_quadratically(grid):
    u = random_velocity(grid, seed=61)
    assert grad_u_sq(u.scaled(2.0)) == pytest.approx(4.0 * grad_u_sq(u), rel=1e-12)


def test_sobolev_norm_orders(grid):
    rng = np.random.default_rng(62)
    values = rng.standard_normal(grid.shape)
    norms = [sobolev_norm_sq(values, grid, s) for s in range(4)]
    assert norms[0] == pytest.approx(float(np.mean(values ** 2)))
    assert all(b >= a for a, b in zip(norms, norms[1:]))


def test_total_energy_at_rest(grid, params):
    state = rest_state(grid, params, phi_value=0.0)
    # only the elastic part |I|^2 = 2 survives
    assert total_energy(state, params) == pytest.approx(0.5 * params.lam_e * 2.0)


def test_rest_energy_budget_closes(grid, params):
    state = rest_state(grid, params)
    new = step(state, params, StepControl(dt=1e-3, tol=1e-12))
    report = energy_budget(new, state, params)
    assert report.d_visc == 0.0 and report.d_drag == 0.0
    assert abs(report.residual) < 1e-8
    assert np.isnan(energy_budget(new, state, params, forced=True).residual)


def test_energy_residual_shrinks_with_dt(params):
    grid = GridSpec((1.0, 1.0), (16, 16), BCMode.PHYSICAL)
    phi = ScalarField.from_function(grid, lambda x, y: 0.9 + 0.05 * np.cos(np.pi * x) * np.cos(np.pi * y))
    start = SimState.initial(MacVelocity.zeros(grid), phi, TensorField.identity(grid), params)
    pairs = []
    for dt in (2e-5, 1e-5, 5e-6):
        new = step(start, params, StepControl(dt=dt, tol=1e-12))
        pairs.append((dt, abs(energy_budget(new, start, params).residual)))
    residuals = [r for _, r in pairs]
    assert residuals[0] > residuals[1] > residuals[2]
    assert observed_order(pairs) >= 0.9


def test_zero_interval_budget_is_empty(grid, params):
    state = rest_state(grid, params)
    report = energy_budget(state, state, params)
    assert report.residual == 0.0 and report.d_chem == 0.0


def test_time_rates_use_lagged_fields(grid, params):
    rng = np.random.default_rng(63)
    phi = ScalarField(grid, 0.5 + 0.05 * rng.standard_normal(grid.shape))
    state = SimState.initial(random_velocity(grid, seed=64).scaled(0.05), phi,
                             TensorField.identity(grid), params)
    new = step(state, params, StepControl(dt=1e-3, tol=1e-12))
    with_prev = z_functional(new, state, params)
    lagged = z_functional(new, None, params)
    assert with_prev.u_t > 0.0 and with_prev.grad_phi_t > 0.0
    assert lagged.z_value == pytest.approx(with_prev.z_value, rel=1e-12)


def test_diagnostics_row_has_series_columns(grid, params):
    row = diagnostics_row(rest_state(grid, params), None, params)
    assert set(SERIES_COLUMNS) <= set(row)
    assert row["mass"] == pytest.approx(0.5)
    assert row["det_drift"] == 0.0 and row["div_max"] == 0.0
