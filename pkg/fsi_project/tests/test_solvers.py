import numpy as np
import pytest

from core.errors import ConvergenceError
from core.grid import laplace_values
from core.solvers import SpectralLaplacian, cg_solve


@pytest.mark.parametrize("which", ["grid", "periodic_grid"])
def test_spectral_symbol_matches_stencil(which, request):
    grid = request.getfixturevalue(which)
    rng = np.random.default_rng(11)
    values = rng.standard_normal(grid.shape)
    spectral = SpectralLaplacian(grid).apply_function(values, lambda k: k)
    np.testing.assert_allclose(spectral, laplace_values(values, grid), atol=1e-10)


def test_spectral_solve_inverts_shifted_operator(grid):
    rng = np.random.default_rng(12)
    rhs = rng.standard_normal(grid.shape)
    lap = SpectralLaplacian(grid)
    x = lap.solve(rhs, lambda k: 1.0 - k)
    np.testing.assert_allclose(x - laplace_values(x, grid), rhs, atol=1e-10)


def test_spectral_solve_drops_null_mode(grid):
    rhs = np.ones(grid.shape)
    x = SpectralLaplacian(grid).solve(rhs, lambda k: k)
    np.testing.assert_allclose(x, 0.0, atol=1e-12)


def _spd_system(n=64, seed=13):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n), rng.standard_normal(n)


def test_cg_zero_rhs_short_circuits():
    matrix, _ = _spd_system()
    x, info = cg_solve(lambda v: matrix @ v, np.zeros(64), name="test")
    assert np.all(x == 0.0)
    assert info.iterations == 0 and info.residual == 0.0


def test_cg_solves_spd_system():
    matrix, rhs = _spd_system()
    x, info = cg_solve(lambda v: matrix @ v, rhs, name="test", tol=1e-12)
    np.testing.assert_allclose(matrix @ x, rhs, atol=1e-8)
    assert info.residual <= 1e-10


def test_cg_reports_non_convergence():
    matrix, rhs = _spd_system()
    with pytest.raises(ConvergenceError) as err:
        cg_solve(lambda v: matrix @ v, rhs, name="test", tol=1e-14, max_iter=1,
                 suggested_dt=0.5, track_history=True)
    assert err.value.residual > 1e-14
    assert err.value.suggested_dt == 0.5
    assert len(err.value.residual_history) == 1
