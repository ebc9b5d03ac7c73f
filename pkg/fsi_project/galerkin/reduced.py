"""
Reduced Galerkin system: lift coefficients to grid fields, evaluate the
nonlinear terms with the grid operators, test against the basis.

The chemical potential is the projected expression
    mu_n = P2(-lam Lap phi_n + lam gamma f'(phi_n) - lam_e/2 tr(F_n F_n^T - I)),
the phase equation uses tau Lap mu_n (which tested against psi gives
-tau (grad mu_n, grad psi)), and the pressure drops out because the velocity
basis is divergence free. Time integration is classical RK4 on the stacked
coefficient vector, with no operator splitting.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import RunConfig
from core.errors import NumericalInstability
from core.grid import (
    MacVelocity, ScalarField, TensorField, advect_scalar_conservative, laplace_values,
    norm_faces_sq,
)
from core.kernels import upwind_advective_derivative
from galerkin.basis import EigenBasis, available_dimension, cached_basis, field_vector, vector_field
from physics.elasticity import cell_velocity, elastic_force, trace_elastic, velocity_gradient
from physics.momentum import ViscousOperator, advection, capillary_force, darcy_drag
from physics.params import ModelParams
from physics.phasefield import double_well_prime
from simulation.presets import build_initial_state
from simulation.state import SimState, StepControl
from simulation.timeloop import step
from utils.logging_conf import get_logger

logger = get_logger(__name__)


@dataclass
class GalerkinBases:
    u: EigenBasis
    phi: EigenBasis
    F: EigenBasis

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return self.u.size, self.phi.size, self.F.size

    def split(self, coeffs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        nu, nphi, _ = self.sizes
        return coeffs[:nu], coeffs[nu:nu + nphi], coeffs[nu + nphi:]

    def project_state(self, state: SimState) -> np.ndarray:
        return np.concatenate([
            self.u.project(field_vector("stokes", state.u)),
            self.phi.project(field_vector("neumann_scalar", state.phi)),
            self.F.project(field_vector("tensor", state.F)),
        ])

    def lift(self, coeffs: np.ndarray) -> Tuple[MacVelocity, ScalarField, TensorField]:
        cu, cphi, cF = self.split(coeffs)
        grid = self.phi.grid
        return (vector_field("stokes", grid, self.u.lift(cu)),
                vector_field("neumann_scalar", grid, self.phi.lift(cphi)),
                vector_field("tensor", grid, self.F.lift(cF)))


def build_bases(config: RunConfig, n: int, grid=None) -> GalerkinBases:
    """Bases with ``n`` modes each (0 = full), capped at each operator's dimension."""
    grid = grid or config.grid_spec()
    settings = config["galerkin"]
    cache = settings["basis_cache"] or None
    bases = {}
    for key, kind in (("u", "stokes"), ("phi", "neumann_scalar"), ("F", "tensor")):
        count = 0 if n == 0 else min(n, available_dimension(kind, grid))
        bases[key] = cached_basis(kind, count, grid, settings["eig_tol"], cache)
    return GalerkinBases(**bases)


def projected_potential(phi: ScalarField, F: TensorField, params: ModelParams,
                        basis: EigenBasis) -> ScalarField:
    grid = phi.grid
    raw = (-params.lam * laplace_values(phi.values, grid)
           + params.lam * params.gamma * double_well_prime(phi.values, params.h)
           - 0.5 * params.lam_e * trace_elastic(F).values)
    return vector_field("neumann_scalar", grid, basis.lift(basis.project(raw.ravel())))


def galerkin_rhs(coeffs: np.ndarray, bases: GalerkinBases, params: ModelParams) -> np.ndarray:
    """d/dt of the stacked (u, phi, F) coefficient vector."""
    u, phi, F = bases.lift(coeffs)
    grid = phi.grid
    mu = projected_potential(phi, F, params, bases.phi)

    dphi = -advect_scalar_conservative(u, phi).values + params.tau * laplace_values(mu.values, grid)

    vel = cell_velocity(u)
    dF = (-upwind_advective_derivative(F.values, vel, grid)
          + np.einsum("ik...,kj...->ij...", velocity_gradient(u).values, F.values))

    viscous = ViscousOperator(grid, params.eta(phi.values))
    force = advection(u).scaled(-params.rho)
    force = force.plus(MacVelocity(grid, tuple(viscous.apply_component(c, i)
                                               for i, c in enumerate(u.components))))
    force = force.plus(capillary_force(mu, phi, F, params))
    force = force.plus(elastic_force(phi, F, params.lam_e))
    force = force.plus(darcy_drag(phi, u, params))
    du = force.scaled(1.0 / params.rho)

    return np.concatenate([
        bases.u.project(du.flatten()),
        bases.phi.project(dphi.ravel()),
        bases.F.project(dF.ravel()),
    ])


def integrate_galerkin(initial: np.ndarray, t_end: float, dt: float, bases: GalerkinBases,
                       params: ModelParams, sample_every: int = 1) -> List[Tuple[float, np.ndarray]]:
    """
    Classical RK4 from t = 0 to ``t_end`` (the last step shortened to land on it).

    Returns [(t, coeffs)] every ``sample_every`` steps, first and last included.

    Raises:
        NumericalInstability: non-finite coefficients, with the step index
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    c = np.array(initial, dtype=np.float64)
    t = 0.0
    trajectory = [(t, c.copy())]
    steps = int(np.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    for k in range(1, steps + 1):
        h = min(dt, t_end - t)
        k1 = galerkin_rhs(c, bases, params)
        k2 = galerkin_rhs(c + 0.5 * h * k1, bases, params)
        k3 = galerkin_rhs(c + 0.5 * h * k2, bases, params)
        k4 = galerkin_rhs(c + h * k3, bases, params)
        c = c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t_end if k == steps else t + h
        if not np.all(np.isfinite(c)):
            raise NumericalInstability("galerkin coefficients", k)
        if k % sample_every == 0 or k == steps:
            trajectory.append((t, c.copy()))
    return trajectory


def _grid_reference(state: SimState, params: ModelParams, config: RunConfig, t_end: float,
                    dt: float) -> SimState:
    solver = config["solver"]
    ctrl = StepControl(dt=dt, tol=solver["tol"], max_iter=solver["max_iter"], backend=solver["backend"])
    steps = int(round(t_end / dt))
    for _ in range(steps):
        state = step(state, params, ctrl)
    return state


def _distances(u: MacVelocity, phi: ScalarField, F: TensorField, ref: SimState) -> Dict[str, float]:
    grid = ref.grid
    vol = grid.cell_volume
    err_u = float(np.sqrt(norm_faces_sq(u.plus(ref.u, -1.0))))
    err_phi = float(np.sqrt(np.sum((phi.values - ref.phi.values) ** 2) * vol))
    err_F = float(np.sqrt(np.sum((F.values - ref.F.values) ** 2) * vol))
    return {"err_u": err_u, "err_phi": err_phi, "err_F": err_F,
            "err_total": float(np.sqrt(err_u ** 2 + err_phi ** 2 + err_F ** 2))}


def convergence_study(config: RunConfig, n_list: Optional[Sequence[int]] = None) -> pd.DataFrame:
    """
    Galerkin solution at ``galerkin.t_end`` for each n against the grid solver.

    n = 0 stands for the full dimension and is run last. The full-dimension row
    also carries the grid solver's own dt-halving discrepancy, the yardstick
    for comparing two different time integrators.
    """
    settings = config["galerkin"]
    grid = config.grid_spec().with_cells(settings["cells"])
    params = config.model_params()
    dt, t_end = settings["dt"], settings["t_end"]
    n_list = list(settings["n_list"] if n_list is None else n_list)
    n_list = sorted(n for n in n_list if n > 0) + [n for n in n_list if n == 0]

    initial = build_initial_state(config["initial"]["preset"], grid, params, config["initial"])
    reference = _grid_reference(initial, params, config, t_end, dt)
    logger.info(f"🧮 [Galerkin] study on {grid.cells}: n={n_list}, dt={dt:.1e}, t_end={t_end}")

    rows = []
    for n in n_list:
        bases = build_bases(config, n, grid)
        c0 = bases.project_state(initial)
        trajectory = integrate_galerkin(c0, t_end, dt, bases, params)
        u, phi, F = bases.lift(trajectory[-1][1])
        nu, nphi, nF = bases.sizes
        row = {"n": n if n else nphi, "n_u": nu, "n_phi": nphi, "n_F": nF}
        row.update(_distances(u, phi, F, reference))
        row["phi_mode0_drift"] = float(abs(trajectory[-1][1][nu] - c0[nu]))
        row["grid_dt_halving"] = np.nan
        if n == 0:
            halved = _grid_reference(initial, params, config, t_end, 0.5 * dt)
            row["grid_dt_halving"] = _distances(halved.u, halved.phi, halved.F, reference)["err_total"]
        rows.append(row)
        logger.info(f"✅ [Galerkin] n={row['n']}: L2 distance {row['err_total']:.3e}")
    return pd.DataFrame(rows)
