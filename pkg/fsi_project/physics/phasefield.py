"""
Cahn-Hilliard part of the model: double-well potential, chemical potential
and the stabilized linearly implicit phase-field step.

The step eliminates mu and solves the Schur-complement system

    phi/dt + tau*lam*L(L phi) - tau*lam*gamma*S*L phi = rhs

with L the Neumann Laplacian. The operator is symmetric positive definite and
diagonal in the DCT/FFT basis, so the spectral preconditioner is exact up to
round-off.
"""

from typing import Optional, Tuple

import numpy as np

from core.errors import InputError
from core.grid import (
    MacVelocity, ScalarField, TensorField, advect_scalar_conservative, face_difference,
    laplace_values, require_same_grid,
)
from core.solvers import DEFAULT_MAX_ITER, DEFAULT_TOL, SpectralLaplacian, cg_solve
from physics.elasticity import trace_elastic
from physics.params import ModelParams
from utils.logging_conf import get_logger

logger = get_logger(__name__)


def double_well(phi, h: float):
    phi = np.asarray(phi, dtype=np.float64)
    return phi ** 2 * (phi - 1.0) ** 2 / (4.0 * h ** 2)


def double_well_prime(phi, h: float):
    phi = np.asarray(phi, dtype=np.float64)
    return phi * (phi - 1.0) * (2.0 * phi - 1.0) / (2.0 * h ** 2)


def double_well_second(phi, h: float):
    phi = np.asarray(phi, dtype=np.float64)
    return (6.0 * phi ** 2 - 6.0 * phi + 1.0) / (2.0 * h ** 2)


def chemical_potential(phi: ScalarField, F: TensorField, params: ModelParams) -> ScalarField:
    """mu = -lam*Lap(phi) + lam*gamma*f'(phi) - (lam_e/2) tr(F F^T - I)."""
    require_same_grid(phi.grid, F.grid)
    values = (-params.lam * laplace_values(phi.values, phi.grid)
              + params.lam * params.gamma * double_well_prime(phi.values, params.h)
              - 0.5 * params.lam_e * trace_elastic(F).values)
    return ScalarField(phi.grid, values)


def ch_energy(phi: ScalarField, params: ModelParams) -> float:
    """Discrete mixing energy: sum of lam/2 |grad phi|^2 on faces plus lam*gamma*f on cells."""
    grid = phi.grid
    grad_sq = sum(float(np.sum(face_difference(phi.values, a, grid) ** 2)) for a in range(grid.dim))
    bulk = float(np.sum(double_well(phi.values, params.h)))
    return grid.cell_volume * (0.5 * params.lam * grad_sq + params.lam * params.gamma * bulk)


def _check_finite(**fields) -> None:
    for name, value in fields.items():
        if value is not None and not value.is_finite():
            raise InputError(name)


def cahn_hilliard_step(phi: ScalarField, u: MacVelocity, F: TensorField, dt: float,
                       params: ModelParams, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER,
                       source: Optional[np.ndarray] = None) -> Tuple[ScalarField, ScalarField]:
    """
    Advance the phase field by one step.

    Args:
        phi: phase field at level n
        u: velocity at level n (discretely divergence free)
        F: deformation gradient at level n (enters through the frozen trace term)
        dt: step size
        params: model coefficients
        tol: relative residual target of the CG solve
        max_iter: CG iteration cap
        source: optional cell source added to the phase equation (manufactured solutions)

    Returns:
        (phi_next, mu_next)

    Raises:
        InputError: non-finite input field
        ConvergenceError: CG did not reach ``tol``; carries the residual and dt/2
    """
    require_same_grid(phi.grid, u.grid, F.grid)
    _check_finite(phi=phi, u=u, F=F)
    if source is not None and not np.all(np.isfinite(source)):
        raise InputError("source")

    grid = phi.grid
    lam, gamma, tau, s = params.lam, params.gamma, params.tau, params.stabilization
    lap = lambda v: laplace_values(v, grid)

    frozen = (lam * gamma * (double_well_prime(phi.values, params.h) - s * phi.values)
              - 0.5 * params.lam_e * trace_elastic(F).values)
    rhs = phi.values / dt - advect_scalar_conservative(u, phi).values + tau * lap(frozen)
    if source is not None:
        rhs = rhs + source

    def apply(v_flat):
        v = v_flat.reshape(grid.shape)
        lv = lap(v)
        return (v / dt + tau * lam * lap(lv) - tau * lam * gamma * s * lv).ravel()

    spectral = SpectralLaplacian(grid)
    symbol = lambda k: 1.0 / dt + tau * lam * k ** 2 - tau * lam * gamma * s * k

    def precond(r_flat):
        return spectral.solve(r_flat.reshape(grid.shape), symbol).ravel()

    solution, info = cg_solve(apply, rhs.ravel(), "cahn_hilliard", tol=tol, max_iter=max_iter,
                              precond=precond, x0=phi.values.ravel(), suggested_dt=0.5 * dt)
    phi_next = solution.reshape(grid.shape)
    mu_next = -lam * lap(phi_next) + lam * gamma * s * phi_next + frozen
    logger.debug(f"[CahnHilliard] step dt={dt:.3e} iterations={info.iterations}")
    return ScalarField(grid, phi_next), ScalarField(grid, mu_next)


def boundary_compatibility_residual(phi: ScalarField, F: TensorField, params: ModelParams) -> float:
    """
    Largest wall-normal mismatch of lam*Lap(phi) + (lam_e/2) tr(F F^T - I).

    On a steady state with homogeneous Neumann data both sides of
    d_n Lap(phi) = -(lam_e / 2 lam) d_n tr(F F^T) agree; the one-sided
    difference between the wall cell and its neighbour is returned (0 on
    periodic grids, which have no walls).
    """
    grid = phi.grid
    if grid.periodic:
        return 0.0
    combo = params.lam * laplace_values(phi.values, grid) + 0.5 * params.lam_e * trace_elastic(F).values
    worst = 0.0
    for a in range(grid.dim):
        h = grid.spacing[a]
        low = np.take(combo, 1, axis=a) - np.take(combo, 0, axis=a)
        high = np.take(combo, -1, axis=a) - np.take(combo, -2, axis=a)
        worst = max(worst, float(np.max(np.abs(low))) / h, float(np.max(np.abs(high))) / h)
    return worst
