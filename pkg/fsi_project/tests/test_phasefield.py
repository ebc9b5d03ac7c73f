import numpy as np
import pytest

from core.errors import InputError
from core.grid import GridSpec, MacVelocity, ScalarField, TensorField
from physics.params import ModelParams
from physics.phasefield import (
    boundary_compatibility_residual, cahn_hilliard_step, ch_energy, chemical_potential,
    double_well, double_well_prime, double_well_second,
)


def test_double_well_values():
    assert double_well_prime(0.25, 1.0) == pytest.approx(0.046875)
    assert double_well(0.0, 1.0) == 0.0 and double_well(1.0, 1.0) == 0.0
    assert double_well(0.5, 1.0) == pytest.approx(1.0 / 64)
    assert double_well_second(0.0, 0.5) == pytest.approx(2.0)


def test_double_well_prime_matches_finite_difference():
    phi = np.linspace(-0.3, 1.3, 17)
    eps = 1e-6
    fd = (double_well(phi + eps, 0.1) - double_well(phi - eps, 0.1)) / (2 * eps)
    np.testing.assert_allclose(double_well_prime(phi, 0.1), fd, rtol=1e-6, atol=1e-6)


def test_chemical_potential_uniform(grid, params):
    mu = chemical_potential(ScalarField.full(grid, 0.5), TensorField.identity(grid), params)
    np.testing.assert_allclose(mu.values, 0.0, atol=1e-12)


def test_chemical_potential_elastic_shift(grid):
    params = ModelParams(h=1.0, lam_e=2.0)
    F = TensorField.constant(grid, np.diag([2.0, 1.0]))
    mu = chemical_potential(ScalarField.full(grid, 0.3), F, params)
    np.testing.assert_allclose(mu.values, double_well_prime(0.3, 1.0) - 3.0, atol=1e-12)


def test_uniform_phase_is_fixed_point(grid, params):
    phi = ScalarField.full(grid, 0.4)
    phi_next, mu_next = cahn_hilliard_step(phi, MacVelocity.zeros(grid), TensorField.identity(grid),
                                           1e-3, params, tol=1e-12)
    np.testing.assert_allclose(phi_next.values, 0.4, atol=1e-12)
    expected = params.lam * params.gamma * double_well_prime(0.4, params.h)
    np.testing.assert_allclose(mu_next.values, expected, rtol=1e-10)


def _spinodal(grid, seed=21):
    rng = np.random.default_rng(seed)
    return ScalarField(grid, 0.5 + 0.05 * rng.standard_normal(grid.shape))


def test_mass_conserved_and_energy_decreases():
    grid = GridSpec((1.0, 1.0), (16, 16))
    params = ModelParams(h=0.05)
    phi = _spinodal(grid)
    u, F = MacVelocity.zeros(grid), TensorField.identity(grid)
    mass0 = float(np.sum(phi.values))
    energies = [ch_energy(phi, params)]
    for _ in range(5):
        phi, _ = cahn_hilliard_step(phi, u, F, 1e-4, params, tol=1e-12)
        energies.append(ch_energy(phi, params))
    assert float(np.sum(phi.values)) == pytest.approx(mass0, rel=1e-10)
    assert all(b <= a + 1e-10 for a, b in zip(energies, energies[1:]))
    assert energies[-1] < energies[0]


def test_mass_conserved_under_advection(grid, params):
    from tests.helpers import random_velocity
    phi = _spinodal(grid, seed=22)
    u = random_velocity(grid, seed=23).scaled(0.1)
    phi_next, _ = cahn_hilliard_step(phi, u, TensorField.identity(grid), 1e-4, params, tol=1e-12)
    assert float(np.sum(phi_next.values)) == pytest.approx(float(np.sum(phi.values)), rel=1e-10)


def test_non_finite_input_rejected(grid, params):
    values = np.full(grid.shape, 0.5)
    values[2, 3] = np.nan
    with pytest.raises(InputError) as err:
        cahn_hilliard_step(ScalarField(grid, values), MacVelocity.zeros(grid),
                           TensorField.identity(grid), 1e-3, params)
    assert err.value.field == "phi"


def test_boundary_compatibility(grid, periodic_grid, params):
    assert boundary_compatibility_residual(ScalarField.full(grid, 0.5), TensorField.identity(grid),
                                           params) == 0.0
    assert boundary_compatibility_residual(_spinodal(periodic_grid), TensorField.identity(periodic_grid),
                                           params) == 0.0
