"""
Momentum balance on the MAC grid.

momentum_step performs, in order:
    (a) explicit upwind advection rho u.grad u at level n,
    (b) implicit variable-viscosity Helmholtz solve with the non-negative part
        of the Darcy coefficient on the diagonal,
    (c) addition of capillary, elastic, remaining drag and external forces,
    (d) pressure projection with homogeneous Neumann data.

The capillary force uses the potential form (mu + lam_e/2 tr) grad phi, so the
returned pressure is the redefined one; ``reconstruct_pressure`` adds back the
gradient terms for output.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from core.errors import InputError
from core.grid import (
    GridSpec, MacVelocity, ScalarField, TensorField, _sl, cell_difference, cell_to_face_average,
    divergence, face_difference, face_to_cell_average, gradient_to_faces, inner_faces,
    laplace_values, pad_axis, require_same_grid, zero_boundary_faces,
)
from core.solvers import DEFAULT_MAX_ITER, DEFAULT_TOL, SpectralLaplacian, cg_solve
from physics.elasticity import elastic_force, trace_elastic
from physics.params import ModelParams
from physics.phasefield import double_well
from utils.logging_conf import get_logger

logger = get_logger(__name__)


@dataclass
class ForceBundle:
    """Face forces entering one momentum step (all zero on wall faces)."""
    capillary: MacVelocity
    elastic: MacVelocity
    drag: MacVelocity
    external: MacVelocity

    def total(self) -> MacVelocity:
        return self.capillary.plus(self.elastic).plus(self.drag).plus(self.external)

    def is_finite(self) -> bool:
        return all(f.is_finite() for f in (self.capillary, self.elastic, self.drag, self.external))


# ---------------------------------------------------------------------------
# Forces
# ---------------------------------------------------------------------------

def capillary_force(mu: ScalarField, phi: ScalarField, F: TensorField, params: ModelParams) -> MacVelocity:
    """(mu + lam_e/2 tr(F F^T - I)) grad phi sampled on faces."""
    require_same_grid(mu.grid, phi.grid, F.grid)
    grid = phi.grid
    potential = mu.values + 0.5 * params.lam_e * trace_elastic(F).values
    comps = tuple(cell_to_face_average(potential, a, grid) * face_difference(phi.values, a, grid)
                  for a in range(grid.dim))
    return MacVelocity(grid, comps)


def darcy_coefficient(phi: ScalarField, params: ModelParams, axis: int,
                      drag_sign: float = 1.0) -> np.ndarray:
    """
    eta(phi_f) (1 - phi_f) / kappa(phi_f) on faces normal to ``axis``.

    eta and kappa see the clamped phase; the (1 - phi_f) factor does not, so
    the coefficient turns negative where phi_f > 1.
    """
    phi_f = cell_to_face_average(phi.values, axis, phi.grid)
    return drag_sign * params.eta(phi_f) * (1.0 - phi_f) / params.kappa(phi_f)


def darcy_drag(phi: ScalarField, u: MacVelocity, params: ModelParams,
               drag_sign: float = 1.0) -> MacVelocity:
    require_same_grid(phi.grid, u.grid)
    grid = phi.grid
    comps = tuple(zero_boundary_faces(-darcy_coefficient(phi, params, a, drag_sign) * c, a, grid)
                  for a, c in enumerate(u.components))
    return MacVelocity(grid, comps)


def drag_work(phi: ScalarField, u: MacVelocity, params: ModelParams, drag_sign: float = 1.0) -> float:
    """sum over faces of drag . u times cell volume; <= 0 when 0 <= phi <= 1."""
    return inner_faces(darcy_drag(phi, u, params, drag_sign), u)


# ---------------------------------------------------------------------------
# Advection and viscous operator
# ---------------------------------------------------------------------------

def advection(u: MacVelocity) -> MacVelocity:
    """First-order upwind (u . grad) u on faces; wall faces 0."""
    grid = u.grid
    comps = []
    for i, w in enumerate(u.components):
        out = np.zeros_like(w)
        for j in range(grid.dim):
            if j == i:
                vel = w
                kind = "even"
            else:
                vel = cell_to_face_average(face_to_cell_average(u.components[j], j, grid), i, grid)
                kind = "odd"
            padded = pad_axis(w, j, grid, kind)
            n = padded.ndim
            h = grid.spacing[j]
            back = (w - padded[_sl(n, j, slice(None, -2))]) / h
            fwd = (padded[_sl(n, j, slice(2, None))] - w) / h
            out += np.where(vel > 0, vel * back, vel * fwd)
        comps.append(zero_boundary_faces(out, i, grid))
    return MacVelocity(grid, tuple(comps))


def interior_mask(grid: GridSpec, axis: int) -> np.ndarray:
    mask = np.ones(grid.face_shape(axis), dtype=bool)
    if not grid.periodic:
        mask[_sl(mask.ndim, axis, slice(0, 1))] = False
        mask[_sl(mask.ndim, axis, slice(-1, None))] = False
    return mask


class ViscousOperator:
    """
    Componentwise div(eta grad u_i) on the faces of component i.

    eta sits at cell centres for the normal derivative and at cell edges
    (averaged twice) for tangential derivatives. Tangential no-slip enters
    through odd ghosts. Wall-normal faces are excluded from the operator.
    """

    def __init__(self, grid: GridSpec, eta_cells: np.ndarray):
        self.grid = grid
        self.eta_cells = eta_cells
        self.masks = [interior_mask(grid, a) for a in range(grid.dim)]
        self.eta_edges = {}
        for i in range(grid.dim):
            on_faces = cell_to_face_average(eta_cells, i, grid)
            for j in range(grid.dim):
                if j != i:
                    self.eta_edges[(i, j)] = cell_to_face_average(on_faces, j, grid)

    def apply_component(self, w: np.ndarray, i: int) -> np.ndarray:
        grid = self.grid
        w = np.where(self.masks[i], w, 0.0)
        out = np.zeros_like(w)
        for j in range(grid.dim):
            h = grid.spacing[j]
            if j == i:
                out += face_difference(self.eta_cells * cell_difference(w, i, grid), i, grid)
                continue
            eta_e = self.eta_edges[(i, j)]
            if grid.periodic:
                flux = eta_e * (w - np.roll(w, 1, axis=j)) / h
                out += (np.roll(flux, -1, axis=j) - flux) / h
            else:
                flux = eta_e * np.diff(pad_axis(w, j, grid, "odd"), axis=j) / h
                out += np.diff(flux, axis=j) / h
        return np.where(self.masks[i], out, 0.0)

    def diagonal_component(self, i: int) -> np.ndarray:
        """Diagonal of -apply_component (positive on interior faces)."""
        grid = self.grid
        diag = 2.0 * cell_to_face_average(self.eta_cells, i, grid) / grid.spacing[i] ** 2
        for j in range(grid.dim):
            if j == i:
                continue
            eta_e = self.eta_edges[(i, j)]
            h2 = grid.spacing[j] ** 2
            if grid.periodic:
                diag = diag + (eta_e + np.roll(eta_e, -1, axis=j)) / h2
            else:
                n = eta_e.ndim
                lo = eta_e[_sl(n, j, slice(None, -1))]
                hi = eta_e[_sl(n, j, slice(1, None))]
                part = lo + hi
                part[_sl(n, j, slice(0, 1))] += lo[_sl(n, j, slice(0, 1))]
                part[_sl(n, j, slice(-1, None))] += hi[_sl(n, j, slice(-1, None))]
                diag = diag + part / h2
        return np.where(self.masks[i], diag, 1.0)


def helmholtz_solve(rhs: MacVelocity, shift: List[np.ndarray], viscous: ViscousOperator,
                    tol: float, max_iter: int, x0: Optional[MacVelocity] = None,
                    name: str = "helmholtz", suggested_dt: Optional[float] = None) -> MacVelocity:
    """
    Solve shift_i * w_i - div(eta grad w_i) = rhs_i on interior faces, w = 0 on wall faces.

    ``shift`` holds a non-negative face array per component. Jacobi preconditioned CG.
    """
    grid = rhs.grid
    masks = viscous.masks

    def apply(flat):
        comps = MacVelocity.unflatten(grid, flat).components
        out = []
        for i, w in enumerate(comps):
            inner = shift[i] * w - viscous.apply_component(w, i)
            out.append(np.where(masks[i], inner, w))
        return np.concatenate([o.ravel() for o in out])

    diag = np.concatenate([np.where(masks[i], shift[i] + viscous.diagonal_component(i), 1.0).ravel()
                           for i in range(grid.dim)])
    b = np.concatenate([np.where(masks[i], c, 0.0).ravel() for i, c in enumerate(rhs.components)])
    start = x0.flatten() if x0 is not None else None
    solution, _ = cg_solve(apply, b, name, tol=tol, max_iter=max_iter,
                           precond=lambda r: r / diag, x0=start, suggested_dt=suggested_dt)
    return MacVelocity.unflatten(grid, solution)


# ---------------------------------------------------------------------------
# Projection
# ---------------------------------------------------------------------------

def pressure_poisson(rhs: np.ndarray, grid: GridSpec, tol: float, max_iter: int,
                     suggested_dt: Optional[float] = None) -> np.ndarray:
    """Solve Lap p = rhs (Neumann or periodic) for the mean-zero p; rhs mean removed first."""
    rhs = rhs - np.mean(rhs)
    spectral = SpectralLaplacian(grid)
    neg = lambda k: -k

    def apply(flat):
        return -laplace_values(flat.reshape(grid.shape), grid).ravel()

    def precond(r):
        return spectral.solve(r.reshape(grid.shape), neg).ravel()

    solution, _ = cg_solve(apply, -rhs.ravel(), "pressure", tol=tol, max_iter=max_iter,
                           precond=precond, suggested_dt=suggested_dt)
    p = solution.reshape(grid.shape)
    return p - np.mean(p)


def project(u_star: MacVelocity, rho: float, dt: float, tol: float = DEFAULT_TOL,
            max_iter: int = DEFAULT_MAX_ITER) -> Tuple[MacVelocity, ScalarField]:
    """Leray projection: u = u* - (dt/rho) grad p with Lap p = (rho/dt) div u*."""
    grid = u_star.grid
    rhs = (rho / dt) * divergence(u_star).values
    p = ScalarField(grid, pressure_poisson(rhs, grid, tol, max_iter, suggested_dt=0.5 * dt))
    u = u_star.plus(gradient_to_faces(p), -dt / rho).with_no_penetration()
    return u, p


# ---------------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------------

def force_bundle(u: MacVelocity, phi_next: ScalarField, mu_next: ScalarField, F_next: TensorField,
                 params: ModelParams, drag_sign: float = 1.0,
                 external: Optional[MacVelocity] = None) -> ForceBundle:
    """Forces at level n+1 plus the explicit (negative-coefficient) part of the drag on u."""
    grid = u.grid
    explicit_drag = []
    for a, c in enumerate(u.components):
        coeff = darcy_coefficient(phi_next, params, a, drag_sign)
        explicit_drag.append(zero_boundary_faces(-np.minimum(coeff, 0.0) * c, a, grid))
    return ForceBundle(
        capillary=capillary_force(mu_next, phi_next, F_next, params),
        elastic=elastic_force(phi_next, F_next, params.lam_e),
        drag=MacVelocity(grid, tuple(explicit_drag)),
        external=(external.with_no_penetration() if external is not None else MacVelocity.zeros(grid)),
    )


def momentum_step(u: MacVelocity, phi: ScalarField, phi_next: ScalarField, mu_next: ScalarField,
                  F_next: TensorField, dt: float, params: ModelParams, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER, drag_sign: float = 1.0,
                  external: Optional[MacVelocity] = None) -> Tuple[MacVelocity, ScalarField]:
    """
    One semi-implicit Navier-Stokes step.

    Viscosity is frozen at phi (level n); the drag coefficient and all forces
    use the level n+1 phase. ``drag_sign`` flips the drag for fault-injection
    checks. ``external`` is an optional face force (manufactured solutions).

    Returns:
        (u_next, p_next) with p_next of zero mean

    Raises:
        InputError: non-finite input field
        ConvergenceError: Helmholtz or pressure solve hit ``max_iter``
    """
    require_same_grid(u.grid, phi.grid, phi_next.grid, mu_next.grid, F_next.grid)
    for name, field in (("u", u), ("phi", phi), ("phi_next", phi_next), ("mu", mu_next), ("F", F_next)):
        if not field.is_finite():
            raise InputError(name)
    if external is not None and not external.is_finite():
        raise InputError("external")

    grid = u.grid
    rho = params.rho
    viscous = ViscousOperator(grid, params.eta(phi.values))

    shift = []
    for a in range(grid.dim):
        coeff = darcy_coefficient(phi_next, params, a, drag_sign)
        shift.append(rho / dt + np.maximum(coeff, 0.0))

    rhs = u.scaled(rho / dt).plus(advection(u), -rho)
    u_star = helmholtz_solve(rhs, shift, viscous, tol, max_iter, x0=u, suggested_dt=0.5 * dt)

    forces = force_bundle(u, phi_next, mu_next, F_next, params, drag_sign, external)
    u_star = u_star.plus(forces.total(), dt / rho)
    u_next, p_next = project(u_star, rho, dt, tol, max_iter)
    logger.debug(f"[Momentum] step dt={dt:.3e} max|u|={u_next.max_abs():.3e}")
    return u_next, p_next


def stokes_solve(force: MacVelocity, phi: ScalarField, params: ModelParams,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> Tuple[MacVelocity, ScalarField]:
    """
    Steady variable-viscosity Stokes problem -div(eta grad u) + grad p = f, div u = 0.

    Uzawa form: CG on the pressure Schur complement G^T A^-1 G with inner CG
    solves for A = -div(eta grad .). The pressure is shifted so that
    sum(p / eta) = 0.

    Raises:
        ConvergenceError: with the outer residual history attached
    """
    require_same_grid(force.grid, phi.grid)
    if not force.is_finite():
        raise InputError("force")
    grid = force.grid
    eta = params.eta(phi.values)
    viscous = ViscousOperator(grid, eta)
    zero_shift = [np.zeros(grid.face_shape(a)) for a in range(grid.dim)]
    inner_tol = tol * 1e-2

    def velocity_solve(f: MacVelocity) -> MacVelocity:
        if grid.periodic:
            f = MacVelocity(grid, tuple(c - np.mean(c) for c in f.components))
        w = helmholtz_solve(f, zero_shift, viscous, inner_tol, max_iter, name="stokes_velocity")
        if grid.periodic:
            w = MacVelocity(grid, tuple(c - np.mean(c) for c in w.components))
        return w

    def schur(flat):
        q = ScalarField(grid, flat.reshape(grid.shape))
        w = velocity_solve(gradient_to_faces(q))
        return -divergence(w).values.ravel()

    def precond(r):
        r = r.reshape(grid.shape)
        return (eta * (r - np.mean(r))).ravel()

    f = force.with_no_penetration()
    rhs = -divergence(velocity_solve(f)).values
    rhs = rhs - np.mean(rhs)
    solution, _ = cg_solve(schur, rhs.ravel(), "stokes", tol=tol, max_iter=max_iter,
                           precond=precond, track_history=True)
    p = solution.reshape(grid.shape)
    p = p - np.sum(p / eta) / np.sum(1.0 / eta)
    u = velocity_solve(f.plus(gradient_to_faces(ScalarField(grid, p)), -1.0)).with_no_penetration()
    return u, ScalarField(grid, p)


def reconstruct_pressure(p: ScalarField, phi: ScalarField, params: ModelParams) -> ScalarField:
    """Original pressure p + lam*gamma*f(phi) + lam |grad phi|^2 / 2 (output only)."""
    grid = phi.grid
    grad_sq = np.zeros(grid.shape)
    for a in range(grid.dim):
        grad_sq += face_to_cell_average(face_difference(phi.values, a, grid) ** 2, a, grid)
    values = p.values + params.lam * params.gamma * double_well(phi.values, params.h) + 0.5 * params.lam * grad_sq
    return ScalarField(grid, values)
