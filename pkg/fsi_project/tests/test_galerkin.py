import numpy as np
import pytest

from config.settings import parse_config
from core.errors import ConfigurationError
from core.grid import GridSpec, divergence
from galerkin.basis import (
    available_dimension, build_basis, cached_basis, field_vector, load_basis, save_basis, vector_field,
)
from galerkin.reduced import build_bases, convergence_study, galerkin_rhs, integrate_galerkin
from tests.helpers import rest_state


def test_scalar_spectrum_on_periodic_grid(periodic_grid):
    basis = build_basis("neumann_scalar", 5, periodic_grid)
    h = periodic_grid.spacing[0]
    second = 1.0 + (2.0 / h ** 2) * (1.0 - np.cos(2.0 * np.pi / 8))
    assert basis.eigenvalues[0] == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(basis.eigenvalues[1:], second, rtol=1e-10)
    assert basis.gram_error() < 1e-10


def test_stokes_basis_is_divergence_free():
    grid = GridSpec((1.0, 1.0), (6, 6))
    basis = build_basis("stokes", 8, grid)
    assert basis.gram_error() < 1e-10
    assert np.all(np.diff(basis.eigenvalues) >= -1e-10)
    for k in range(basis.size):
        field = vector_field("stokes", grid, basis.vectors[:, k])
        assert np.max(np.abs(divergence(field).values)) < 1e-8


def test_full_stokes_dimension():
    grid = GridSpec((1.0, 1.0), (4, 4))
    assert available_dimension("stokes", grid) == 2 * 3 * 4 - 15
    assert build_basis("stokes", 0, grid).size == 9


def test_projection_reproduces_span(grid):
    basis = build_basis("neumann_scalar", 6, grid)
    coeffs = np.arange(1.0, 7.0)
    np.testing.assert_allclose(basis.project(basis.lift(coeffs)), coeffs, atol=1e-10)


def test_tensor_basis_starts_with_constant_components(grid, params):
    basis = build_basis("tensor", 4, grid)
    np.testing.assert_allclose(basis.eigenvalues, 1.0, atol=1e-10)
    identity = field_vector("tensor", rest_state(grid, params).F)
    np.testing.assert_allclose(basis.lift(basis.project(identity)), identity, atol=1e-10)


@pytest.mark.parametrize("kind, n", [("neumann_scalar", 65), ("stokes", -1), ("curl", 2)])
def test_invalid_requests(grid, kind, n):
    with pytest.raises(ConfigurationError):
        build_basis(kind, n, grid)


def test_basis_cache(tmp_path, grid):
    first = cached_basis("neumann_scalar", 3, grid, 1e-8, tmp_path)
    files = list(tmp_path.glob("*.basis"))
    assert len(files) == 1
    again = load_basis(files[0])
    assert again.grid == grid and again.kind == "neumann_scalar"
    np.testing.assert_array_equal(again.vectors, first.vectors)
    assert cached_basis("neumann_scalar", 3, grid, 1e-8, tmp_path).size == 3
    save_basis(first, tmp_path / "copy.basis")
    np.testing.assert_array_equal(load_basis(tmp_path / "copy.basis").eigenvalues, first.eigenvalues)


def test_rest_is_steady_for_reduced_system(tiny_config, params):
    grid = GridSpec((1.0, 1.0), (6, 6))
    bases = build_bases(tiny_config, 4, grid)
    c0 = bases.project_state(rest_state(grid, params))
    np.testing.assert_allclose(galerkin_rhs(c0, bases, params), 0.0, atol=1e-10)
    trajectory = integrate_galerkin(c0, 0.0, 1e-3, bases, params)
    assert len(trajectory) == 1 and trajectory[0][0] == 0.0
    np.testing.assert_array_equal(trajectory[0][1], c0)


def test_integration_lands_on_end_time(tiny_config, params):
    grid = GridSpec((1.0, 1.0), (6, 6))
    bases = build_bases(tiny_config, 4, grid)
    c0 = bases.project_state(rest_state(grid, params))
    trajectory = integrate_galerkin(c0, 2.5e-3, 1e-3, bases, params)
    assert [t for t, _ in trajectory] == pytest.approx([0.0, 1e-3, 2e-3, 2.5e-3])
    with pytest.raises(ValueError):
        integrate_galerkin(c0, 1.0, 0.0, bases, params)


def test_convergence_study_table(tiny_config):
    table = convergence_study(tiny_config)
    assert list(table["n"]) == [1, 4]
    assert {"err_u", "err_phi", "err_F", "err_total", "grid_dt_halving"} <= set(table.columns)
    assert table.loc[table["n"] == 4, "err_total"].iloc[0] < 1e-8
    assert table["grid_dt_halving"].isna().all()
