import numpy as np
import pytest

from core.grid import GridSpec, MacVelocity, ScalarField, TensorField, divergence, gradient_to_faces
from physics.momentum import (
    ViscousOperator, capillary_force, darcy_drag, drag_work, interior_mask, momentum_step, project,
    reconstruct_pressure, stokes_solve,
)
from physics.params import ModelParams
from physics.phasefield import double_well, double_well_prime
from tests.helpers import random_velocity


def test_uniform_phase_has_no_capillary_force(grid, params):
    phi = ScalarField.full(grid, 0.3)
    mu = ScalarField.full(grid, 1.7)
    for comp in capillary_force(mu, phi, TensorField.identity(grid), params).components:
        assert np.all(comp == 0.0)


def test_drag_vanishes_in_fluid(grid, params):
    u = random_velocity(grid, seed=41)
    for comp in darcy_drag(ScalarField.full(grid, 1.0), u, params).components:
        assert np.all(comp == 0.0)
    assert drag_work(ScalarField.full(grid, 0.2), MacVelocity.zeros(grid), params) == 0.0


def test_drag_in_solid_is_linear(periodic_grid):
    params = ModelParams(eta_range=(2.0, 2.0), kappa_range=(4.0, 4.0))
    u = random_velocity(periodic_grid, seed=42)
    drag = darcy_drag(ScalarField.zeros(periodic_grid), u, params)
    for d, c in zip(drag.components, u.components):
        np.testing.assert_allclose(d, -0.5 * c, rtol=1e-14)


def test_drag_work_dissipates(grid, params):
    rng = np.random.default_rng(43)
    phi = ScalarField(grid, rng.uniform(0.0, 1.0, grid.shape))
    assert drag_work(phi, random_velocity(grid, seed=44), params) < 0.0
    assert drag_work(phi, random_velocity(grid, seed=44), params, drag_sign=-1.0) > 0.0


def test_projection_removes_divergence(grid):
    u_star = random_velocity(grid, seed=45)
    u, p = project(u_star, rho=1.0, dt=1e-2, tol=1e-12)
    assert np.max(np.abs(divergence(u).values)) < 1e-8
    assert abs(float(np.mean(p.values))) < 1e-12


def _rest_inputs(grid, params, c=0.5):
    phi = ScalarField.full(grid, c)
    mu = ScalarField.full(grid, params.lam * params.gamma * float(double_well_prime(c, params.h)))
    return phi, mu, TensorField.identity(grid)


def test_rest_is_preserved(grid, params):
    phi, mu, F = _rest_inputs(grid, params)
    u, p = momentum_step(MacVelocity.zeros(grid), phi, phi, mu, F, 1e-3, params, tol=1e-12)
    assert u.max_abs() == 0.0
    assert np.all(p.values == 0.0)


def test_gradient_force_goes_into_pressure(grid, params):
    phi, mu, F = _rest_inputs(grid, params, c=1.0)
    q = ScalarField.from_function(grid, lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y))
    u, p = momentum_step(MacVelocity.zeros(grid), phi, phi, mu, F, 1e-3, params, tol=1e-12,
                         external=gradient_to_faces(q))
    assert u.max_abs() < 1e-8
    np.testing.assert_allclose(p.values, q.values - np.mean(q.values), atol=1e-8)


def test_taylor_green_decay():
    grid = GridSpec((1.0, 1.0), (32, 32), "periodic")
    params = ModelParams()
    k = 2.0 * np.pi
    speed = 0.01
    u = MacVelocity.from_functions(grid, [
        lambda x, y: speed * np.sin(k * x) * np.cos(k * y),
        lambda x, y: -speed * np.cos(k * x) * np.sin(k * y),
    ])
    u0 = u.copy()
    phi, mu, F = _rest_inputs(grid, params, c=1.0)
    mu = ScalarField.zeros(grid)
    dt, steps = 1e-4, 100
    for _ in range(steps):
        u, _ = momentum_step(u, phi, phi, mu, F, dt, params, tol=1e-12)
    decay = np.exp(-2.0 * k ** 2 * dt * steps)
    exact = u0.scaled(decay)
    err = max(float(np.max(np.abs(a - b))) for a, b in zip(u.components, exact.components))
    assert err / exact.max_abs() < 2e-2


def test_stokes_without_force_is_at_rest(grid, params):
    u, p = stokes_solve(MacVelocity.zeros(grid), ScalarField.full(grid, 0.5), params)
    assert u.max_abs() == 0.0
    assert np.all(p.values == 0.0)


def test_stokes_gradient_force_is_balanced_by_pressure(grid, params):
    q = ScalarField.from_function(grid, lambda x, y: np.cos(np.pi * x) + 0.5 * np.cos(np.pi * y))
    u, p = stokes_solve(gradient_to_faces(q), ScalarField.full(grid, 0.5), params, tol=1e-10)
    assert u.max_abs() < 1e-6
    np.testing.assert_allclose(p.values, q.values - np.mean(q.values), atol=1e-6)


def test_stokes_rotational_force_with_variable_viscosity(grid):
    params = ModelParams(eta_profile="linear", eta_range=(0.5, 2.0))
    phi = ScalarField.from_function(grid, lambda x, y: x)
    force = MacVelocity.from_functions(grid, [lambda x, y: np.sin(np.pi * y) + 0 * x,
                                              lambda x, y: 0 * x])
    u, p = stokes_solve(force, phi, params, tol=1e-10)
    eta = params.eta(phi.values)
    assert u.max_abs() > 1e-3
    assert np.max(np.abs(divergence(u).values)) < 1e-6
    assert abs(float(np.sum(p.values / eta))) < 1e-8

    viscous = ViscousOperator(grid, eta)
    grad_p = gradient_to_faces(p)
    scale = force.max_abs()
    for i in range(grid.dim):
        residual = -viscous.apply_component(u.components[i], i) + grad_p.components[i] - force.components[i]
        residual = np.where(interior_mask(grid, i), residual, 0.0)
        assert np.max(np.abs(residual)) < 1e-6 * scale


def test_reconstructed_pressure_for_uniform_phase(grid, params):
    phi = ScalarField.full(grid, 0.3)
    p = ScalarField.full(grid, 0.25)
    out = reconstruct_pressure(p, phi, params)
    np.testing.assert_allclose(out.values, 0.25 + params.lam * params.gamma * double_well(0.3, params.h))
