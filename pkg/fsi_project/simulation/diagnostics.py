"""
Per-step diagnostics: mass, discrete energy budget, Z and M functionals,
existence horizon, det F drift and divergence.

Time derivatives are backward differences with the step's actual dt. Norms
that need derivatives of cell data use ``one_sided_gradient`` (central inside,
first order at walls).
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from core.grid import (
    GridSpec, MacVelocity, cell_to_face_average, divergence, face_difference, face_to_cell_average,
    laplace_values, mean_value, norm_faces_sq, one_sided_gradient,
)
from physics.elasticity import det_drift, velocity_gradient
from physics.params import ModelParams
from physics.phasefield import double_well
from simulation.state import SimState


@dataclass
class EnergyReport:
    e_total: float
    d_visc: float
    d_chem: float
    d_drag: float
    rhs_elastic: float
    rhs_drag_phi: float
    residual: float


@dataclass
class ZReport:
    z_value: float
    grad_u: float
    u_t: float
    lap_phi: float
    grad_phi_t: float
    f_h2: float
    f_t: float
    m_value: float
    m_u_h2: float
    m_u_t_h1: float
    m_bilap_phi: float
    m_grad_lap_phi_t: float


# ---------------------------------------------------------------------------
# Discrete norms
# ---------------------------------------------------------------------------

def _sum_sq(values: np.ndarray, grid: GridSpec) -> float:
    return float(np.sum(values ** 2) * grid.cell_volume)


def _gradient(values: np.ndarray, grid: GridSpec):
    return [one_sided_gradient(values, a, grid) for a in range(grid.dim)]


def _laplacian(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    out = np.zeros_like(values)
    for a in range(grid.dim):
        out += one_sided_gradient(one_sided_gradient(values, a, grid), a, grid)
    return out


def sobolev_norm_sq(values: np.ndarray, grid: GridSpec, order: int) -> float:
    """
    Discrete |v|_s^2 for s = 0..3 on cell data (leading component axes allowed):
    |v|^2 + |grad v|^2 + |Lap v|^2 + |grad Lap v|^2, truncated at ``order``.
    """
    total = _sum_sq(values, grid)
    if order >= 1:
        total += sum(_sum_sq(g, grid) for g in _gradient(values, grid))
    if order >= 2:
        lap = _laplacian(values, grid)
        total += _sum_sq(lap, grid)
        if order >= 3:
            total += sum(_sum_sq(g, grid) for g in _gradient(lap, grid))
    return total


def velocity_cells(u: MacVelocity) -> np.ndarray:
    grid = u.grid
    return np.stack([face_to_cell_average(c, a, grid) for a, c in enumerate(u.components)])


def grad_u_sq(u: MacVelocity, weight: Optional[np.ndarray] = None) -> float:
    """sum over cells of w |grad u|^2 with the cell-centred velocity gradient."""
    grad = velocity_gradient(u).values
    dens = np.sum(grad ** 2, axis=(0, 1))
    if weight is not None:
        dens = weight * dens
    return float(np.sum(dens) * u.grid.cell_volume)


def grad_cells_sq(values: np.ndarray, grid: GridSpec) -> float:
    """sum over faces of |D values|^2 (Neumann face differences)."""
    return float(sum(np.sum(face_difference(values, a, grid) ** 2) for a in range(grid.dim))
                 * grid.cell_volume)


# ---------------------------------------------------------------------------
# Scalar diagnostics
# ---------------------------------------------------------------------------

def mass(state: SimState) -> float:
    return mean_value(state.phi)


def div_max(state: SimState) -> float:
    return float(np.max(np.abs(divergence(state.u).values)))


def existence_horizon(z0: float, c1: float = 1.0) -> float:
    """1 / (c1 2^26 (1 + z0)^26), evaluated in logs so large z0 underflows to 0."""
    if c1 <= 0:
        raise ValueError("c1 must be positive")
    return math.exp(-(math.log(c1) + 26.0 * math.log(2.0) + 26.0 * math.log1p(z0)))


def total_energy(state: SimState, params: ModelParams) -> float:
    """1/2 sum(rho |u|^2 + lam |grad phi|^2 + lam_e |F|^2 + 2 lam gamma f(phi))."""
    grid = state.grid
    kinetic = params.rho * norm_faces_sq(state.u)
    interface = params.lam * grad_cells_sq(state.phi.values, grid)
    elastic = params.lam_e * _sum_sq(state.F.values, grid)
    bulk = 2.0 * params.lam * params.gamma * float(np.sum(double_well(state.phi.values, params.h))) * grid.cell_volume
    return 0.5 * (kinetic + interface + elastic + bulk)


def _drag_terms(state: SimState, params: ModelParams):
    """(sum (eta/kappa) |u|^2, sum (eta/kappa) phi |u|^2) over faces."""
    grid = state.grid
    plain = weighted = 0.0
    for a, c in enumerate(state.u.components):
        phi_f = cell_to_face_average(state.phi.values, a, grid)
        ratio = params.eta(phi_f) / params.kappa(phi_f)
        plain += float(np.sum(ratio * c ** 2))
        weighted += float(np.sum(ratio * phi_f * c ** 2))
    return plain * grid.cell_volume, weighted * grid.cell_volume


def _dissipation(state: SimState, params: ModelParams):
    d_visc = grad_u_sq(state.u, params.eta(state.phi.values))
    d_chem = params.tau * grad_cells_sq(state.mu.values, state.grid)
    d_drag, rhs_drag_phi = _drag_terms(state, params)
    return d_visc, d_chem, d_drag, rhs_drag_phi


def energy_budget(state: SimState, prev: SimState, params: ModelParams,
                  forced: bool = False) -> EnergyReport:
    """
    Discrete energy identity between two consecutive states.

    residual = (E^{n+1} - E^n)/dt + D_visc + D_chem + D_drag - RHS_elastic - RHS_drag_phi,
    dissipation terms averaged over both levels. ``forced`` runs report a NaN
    residual: forcing work is not part of the identity.
    """
    e_new = total_energy(state, params)
    dt = state.t - prev.t
    if dt <= 0.0:
        return EnergyReport(e_new, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    new_terms = _dissipation(state, params)
    old_terms = _dissipation(prev, params)
    d_visc, d_chem, d_drag, rhs_drag_phi = (0.5 * (a + b) for a, b in zip(new_terms, old_terms))

    grid = state.grid
    trace_phi = lambda s: float(np.sum(np.sum(s.F.values ** 2, axis=(0, 1)) * s.phi.values) * grid.cell_volume)
    rhs_elastic = 0.5 * params.lam_e * (trace_phi(state) - trace_phi(prev)) / dt

    e_old = total_energy(prev, params)
    residual = (e_new - e_old) / dt + d_visc + d_chem + d_drag - rhs_elastic - rhs_drag_phi
    if forced:
        residual = float("nan")
    return EnergyReport(e_new, d_visc, d_chem, d_drag, rhs_elastic, rhs_drag_phi, residual)


def z_functional(state: SimState, prev: Optional[SimState], params: ModelParams) -> ZReport:
    """
    Z = |grad u|^2 + |u_t|^2 + |Lap phi|^2 + |grad phi_t|^2 + |F|_2^2 + |F_t|^2 and
    M = (alpha/4)|u|_2^2 + (alpha/4)|u_t|_1^2 + (tau lam/4)|Lap^2 phi|^2 + (tau lam/4)|grad Lap phi_t|^2.

    Without a previous state (or at dt_prev = 0) the time-derivative addends are 0.
    """
    grid = state.grid
    dt = state.dt_prev if prev is None else state.t - prev.t
    have_rate = dt > 0.0

    grad_u = grad_u_sq(state.u)
    lap = laplace_values(state.phi.values, grid)
    lap_phi = _sum_sq(lap, grid)
    f_h2 = sobolev_norm_sq(state.F.values, grid, 2)

    if have_rate:
        u_old = prev.u if prev is not None else state.u_prev
        phi_old = prev.phi if prev is not None else state.phi_prev
        F_old = prev.F if prev is not None else state.F_prev
        u_rate = state.u.plus(u_old, -1.0).scaled(1.0 / dt)
        phi_rate = (state.phi.values - phi_old.values) / dt
        f_rate = (state.F.values - F_old.values) / dt
        u_t = norm_faces_sq(u_rate)
        grad_phi_t = grad_cells_sq(phi_rate, grid)
        f_t = _sum_sq(f_rate, grid)
        u_t_h1 = sobolev_norm_sq(velocity_cells(u_rate), grid, 1)
        grad_lap_phi_t = grad_cells_sq(laplace_values(phi_rate, grid), grid)
    else:
        u_t = grad_phi_t = f_t = u_t_h1 = grad_lap_phi_t = 0.0

    u_h2 = sobolev_norm_sq(velocity_cells(state.u), grid, 2)
    bilap = _sum_sq(laplace_values(lap, grid), grid)
    m_u_h2 = 0.25 * params.alpha * u_h2
    m_u_t = 0.25 * params.alpha * u_t_h1
    m_bilap = 0.25 * params.tau * params.lam * bilap
    m_grad_lap_t = 0.25 * params.tau * params.lam * grad_lap_phi_t

    z_value = grad_u + u_t + lap_phi + grad_phi_t + f_h2 + f_t
    m_value = m_u_h2 + m_u_t + m_bilap + m_grad_lap_t
    return ZReport(z_value, grad_u, u_t, lap_phi, grad_phi_t, f_h2, f_t,
                   m_value, m_u_h2, m_u_t, m_bilap, m_grad_lap_t)


def diagnostics_row(state: SimState, prev: Optional[SimState], params: ModelParams,
                    forced: bool = False) -> Dict[str, float]:
    """One row of the time series (column names as written to CSV)."""
    energy = energy_budget(state, prev if prev is not None else state, params, forced)
    z = z_functional(state, prev, params)
    return {
        "t": state.t,
        "dt": state.dt_prev,
        "mass": mass(state),
        "E_total": energy.e_total,
        "D_visc": energy.d_visc,
        "D_chem": energy.d_chem,
        "D_drag": energy.d_drag,
        "residual": energy.residual,
        "Z": z.z_value,
        "Z_grad_u": z.grad_u,
        "Z_u_t": z.u_t,
        "Z_lap_phi": z.lap_phi,
        "Z_grad_phi_t": z.grad_phi_t,
        "Z_F_h2": z.f_h2,
        "Z_F_t": z.f_t,
        "M": z.m_value,
        "M_u_h2": z.m_u_h2,
        "M_u_t": z.m_u_t_h1,
        "M_bilap": z.m_bilap_phi,
        "M_grad_lap_t": z.m_grad_lap_phi_t,
        "det_drift": det_drift(state.F),
        "div_max": div_max(state),
    }