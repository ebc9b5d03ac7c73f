import numpy as np
import pytest

from core.errors import CflViolation
from core.grid import BCMode, GridSpec, MacVelocity, ScalarField, TensorField
from core.kernels import upwind_advective_derivative
from physics.elasticity import (
    det_drift, elastic_force, elastic_stress, frobenius_growth_factor, trace_elastic,
    transport_step, velocity_gradient,
)
from simulation.presets import taylor_green_velocity
from tests.helpers import random_velocity
from verify.orders import observed_order


def test_gradient_of_uniform_periodic_flow(periodic_grid):
    u = MacVelocity.from_functions(periodic_grid, [lambda x, y: 0.3 + 0 * x, lambda x, y: -0.2 + 0 * x])
    np.testing.assert_allclose(velocity_gradient(u).values, 0.0, atol=1e-14)


def test_gradient_of_shear_flow(grid):
    u = MacVelocity.from_functions(grid, [lambda x, y: y, lambda x, y: 0 * x])
    G = velocity_gradient(u).values
    np.testing.assert_allclose(G[0, 1][1:-1, 1:-1], 1.0, rtol=1e-12)
    np.testing.assert_allclose(G[1, 0], 0.0, atol=1e-14)
    np.testing.assert_allclose(G[1, 1], 0.0, atol=1e-14)


def test_transport_at_rest_is_identity(grid):
    rng = np.random.default_rng(31)
    F = TensorField(grid, rng.standard_normal((2, 2) + grid.shape))
    F_next = transport_step(F, MacVelocity.zeros(grid), 1e-2)
    assert np.array_equal(F_next.values, F.values)
    assert F_next is not F


def test_identity_stretched_by_velocity_gradient(grid):
    u = random_velocity(grid, seed=32).scaled(0.1)
    dt = 1e-3
    F_next = transport_step(TensorField.identity(grid), u, dt)
    expected = TensorField.identity(grid).values + dt * velocity_gradient(u).values
    np.testing.assert_allclose(F_next.values, expected, atol=1e-14)


def test_cfl_violation(grid):
    u = random_velocity(grid, seed=33)
    dt = 10.0 * grid.min_spacing / u.max_abs()
    with pytest.raises(CflViolation) as err:
        transport_step(TensorField.identity(grid), u, dt)
    assert err.value.suggested_dt == pytest.approx(0.9 * grid.min_spacing / u.max_abs())


def test_frobenius_growth_bound(grid):
    u = random_velocity(grid, seed=34).scaled(0.1)
    assert frobenius_growth_factor(MacVelocity.zeros(grid), 0.1) == 1.0
    assert frobenius_growth_factor(u, 1e-3) > 1.0


@pytest.mark.parametrize("matrix, trace", [
    (np.eye(2), 0.0),
    (np.diag([2.0, 1.0]), 3.0),
    ([[np.cos(0.7), -np.sin(0.7)], [np.sin(0.7), np.cos(0.7)]], 0.0),
])
def test_trace_elastic(grid, matrix, trace):
    np.testing.assert_allclose(trace_elastic(TensorField.constant(grid, matrix)).values, trace, atol=1e-12)


@pytest.mark.parametrize("matrix", [
    np.eye(2),
    [[np.cos(1.1), -np.sin(1.1)], [np.sin(1.1), np.cos(1.1)]],
    np.diag([2.0, 0.5]),
])
def test_det_drift_unimodular(grid, matrix):
    assert det_drift(TensorField.constant(grid, matrix)) < 1e-12


def test_det_drift_converges_under_joint_refinement():
    drifts = []
    for n in (16, 32, 64):
        grid = GridSpec((1.0, 1.0), (n, n), BCMode.PERIODIC)
        u = taylor_green_velocity(grid, 0.5)
        dt = 0.5 * grid.min_spacing
        F = TensorField.identity(grid)
        for _ in range(int(round(0.5 / dt))):
            F = transport_step(F, u, dt)
        drifts.append((grid.min_spacing, det_drift(F)))
    values = [d for _, d in drifts]
    assert values[0] > values[1] > values[2] > 0.0
    assert observed_order(drifts) >= 0.8


def test_uniform_stress_exerts_no_force(grid):
    phi = ScalarField.full(grid, 0.2)
    F = TensorField.constant(grid, np.diag([1.5, 1.0]))
    stress = elastic_stress(phi, F, 2.0)
    np.testing.assert_allclose(stress[0, 0], 2.0 * 0.8 * 1.25)
    for comp in elastic_force(phi, F, 2.0).components:
        np.testing.assert_allclose(comp, 0.0, atol=1e-12)


def test_numba_backend_matches_numpy(grid, periodic_grid):
    pytest.importorskip("numba")
    rng = np.random.default_rng(35)
    for g in (grid, periodic_grid):
        values = rng.standard_normal((4,) + g.shape)
        velocity = [rng.standard_normal(g.shape) for _ in range(2)]
        ref = upwind_advective_derivative(values, velocity, g, backend="numpy")
        fast = upwind_advective_derivative(values, velocity, g, backend="numba")
        np.testing.assert_allclose(fast, ref, rtol=1e-12, atol=1e-12)
