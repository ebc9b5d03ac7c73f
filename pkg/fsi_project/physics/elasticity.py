"""
Deformation-gradient kinematics: velocity gradient, upwind transport of F,
the elastic trace and stress-divergence terms, det F drift.
"""

from typing import Optional

import numpy as np

from core.errors import CflViolation
from core.grid import (
    MacVelocity, ScalarField, TensorField, cell_difference, cell_to_face_average,
    centered_difference, face_to_cell_average, require_same_grid, zero_boundary_faces,
)
from core.kernels import upwind_advective_derivative
from utils.logging_conf import get_logger

logger = get_logger(__name__)

CFL_LIMIT = 0.9


def velocity_gradient(u: MacVelocity) -> TensorField:
    """Cell-centred G[i, j] = d u_i / d x_j."""
    grid = u.grid
    d = grid.dim
    values = np.zeros((d, d) + grid.shape)
    for i in range(d):
        comp = u.components[i]
        values[i, i] = cell_difference(comp, i, grid)
        centred = face_to_cell_average(comp, i, grid)
        for j in range(d):
            if j != i:
                # tangential no-slip: odd reflection across the wall
                values[i, j] = centered_difference(centred, j, grid, kind="odd")
    return TensorField(grid, values)


def cell_velocity(u: MacVelocity):
    return [face_to_cell_average(c, a, u.grid) for a, c in enumerate(u.components)]


def advective_limit(u: MacVelocity) -> float:
    """Largest stable dt for explicit upwind transport (inf when u = 0)."""
    speed = u.max_abs()
    if speed == 0.0:
        return float("inf")
    return CFL_LIMIT * u.grid.min_spacing / speed


def transport_step(F: TensorField, u: MacVelocity, dt: float, backend: str = "numpy",
                   source: Optional[np.ndarray] = None) -> TensorField:
    """
    F_next = F - dt * upwind(u . grad F) + dt * (grad u) F.

    No boundary data is needed: u vanishes on walls so no characteristic enters.

    Raises:
        CflViolation: dt * max|u| / min spacing exceeds 0.9
    """
    require_same_grid(F.grid, u.grid)
    grid = F.grid
    limit = advective_limit(u)
    if dt > limit:
        raise CflViolation(
            f"transport dt={dt:.3e} exceeds advective limit {limit:.3e}",
            suggested_dt=limit)
    if u.max_abs() == 0.0 and source is None:
        return F.copy()

    advection = upwind_advective_derivative(F.values, cell_velocity(u), grid, backend)
    grad_u = velocity_gradient(u).values
    stretch = np.einsum("ik...,kj...->ij...", grad_u, F.values)
    values = F.values - dt * advection + dt * stretch
    if source is not None:
        values = values + dt * source
    return TensorField(grid, values)


def frobenius_growth_factor(u: MacVelocity, dt: float) -> float:
    """1 + dt * max_cells |grad u|_F, the per-step bound on max |F|_F under CFL."""
    grad = velocity_gradient(u).values
    norms = np.sqrt(np.sum(grad ** 2, axis=(0, 1)))
    return 1.0 + dt * float(np.max(norms))


def trace_elastic(F: TensorField) -> ScalarField:
    """tr(F F^T - I) = |F|_F^2 - d per cell."""
    return ScalarField(F.grid, np.sum(F.values ** 2, axis=(0, 1)) - F.grid.dim)


def elastic_stress(phi: ScalarField, F: TensorField, lam_e: float) -> np.ndarray:
    """lam_e (1 - phi) (F F^T - I), shape (d, d, *cells)."""
    d = F.grid.dim
    ff = np.einsum("ik...,jk...->ij...", F.values, F.values)
    ff -= np.eye(d).reshape((d, d) + (1,) * d)
    return lam_e * (1.0 - phi.values) * ff


def elastic_stress_divergence(phi: ScalarField, F: TensorField, lam_e: float) -> np.ndarray:
    """Cell-centred div of the elastic stress, shape (d, *cells); edge ghosts."""
    require_same_grid(phi.grid, F.grid)
    grid = phi.grid
    stress = elastic_stress(phi, F, lam_e)
    out = np.zeros((grid.dim,) + grid.shape)
    for i in range(grid.dim):
        for j in range(grid.dim):
            out[i] += centered_difference(stress[i, j], j, grid, kind="even")
    return out


def elastic_force(phi: ScalarField, F: TensorField, lam_e: float) -> MacVelocity:
    """Elastic stress divergence interpolated to faces; wall faces 0."""
    grid = phi.grid
    cells = elastic_stress_divergence(phi, F, lam_e)
    comps = tuple(zero_boundary_faces(cell_to_face_average(cells[a], a, grid), a, grid)
                  for a in range(grid.dim))
    return MacVelocity(grid, comps)


def det_drift(F: TensorField) -> float:
    """max over cells of |det F - 1|."""
    return float(np.max(np.abs(np.linalg.det(F.cellwise_matrices()) - 1.0)))
