"""
Manufactured solutions for the coupled system.

Each case prescribes (stream function, p, phi, F) as finite sums of
separable trigonometric terms. Derivatives of any order are exact (a
derivative of a term is again a term), so the forcing for each equation is
assembled in closed form from those derivatives and the chain rule. Every
case checks its own forcing against finite differences of the continuous
operators before it is used.

The velocity is u = (d psi/dy, -d psi/dx), divergence free for any psi; the
initial velocity is built from psi sampled at cell corners so it is also
discretely divergence free. Cases are two-dimensional.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import RunConfig
from core.errors import ConfigurationError, FsiError
from core.grid import BCMode, GridSpec, MacVelocity, ScalarField, TensorField
from physics.params import ModelParams
from physics.phasefield import double_well_prime, double_well_second
from simulation.state import Forcing, SimState, StepControl
from simulation.timeloop import step
from utils.logging_conf import get_logger
from verify.orders import observed_order

logger = get_logger(__name__)

FORCING_CHECK_TOL = 1e-6
FORCING_CHECK_POINTS = 100

# 6 phi^2 - 6 phi + 1 >= 0.235 on [0.85, 0.95], so f'' > 0 there
PHI_BASE = 0.9
PHI_AMPLITUDE = 0.05
SPEED = 0.01

Coords = Sequence[np.ndarray]


# ---------------------------------------------------------------------------
# Separable trigonometric fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrigTerm:
    """coef * exp(rate t) * prod_a g_a(k_a x_a), g in {sin, cos}."""
    coef: float
    rate: float
    modes: Tuple[Tuple[str, float], ...]

    def __call__(self, X: Coords, t: float) -> np.ndarray:
        value = self.coef * math.exp(self.rate * t)
        out = np.full(np.shape(X[0]), value, dtype=np.float64)
        for (kind, k), x in zip(self.modes, X):
            out = out * (np.sin(k * x) if kind == "sin" else np.cos(k * x))
        return out

    def derivative(self, axis: int) -> "TrigTerm":
        kind, k = self.modes[axis]
        modes = list(self.modes)
        if kind == "sin":
            modes[axis] = ("cos", k)
            return TrigTerm(self.coef * k, self.rate, tuple(modes))
        modes[axis] = ("sin", k)
        return TrigTerm(-self.coef * k, self.rate, tuple(modes))


@dataclass(frozen=True)
class TrigField:
    terms: Tuple[TrigTerm, ...] = ()

    @classmethod
    def constant(cls, value: float, dim: int = 2) -> "TrigField":
        return cls((TrigTerm(value, 0.0, (("cos", 0.0),) * dim),))

    @classmethod
    def term(cls, coef: float, rate: float, *modes: Tuple[str, float]) -> "TrigField":
        return cls((TrigTerm(coef, rate, tuple(modes)),))

    def __call__(self, X: Coords, t: float) -> np.ndarray:
        out = np.zeros(np.shape(X[0]))
        for term in self.terms:
            out = out + term(X, t)
        return out

    def __add__(self, other: "TrigField") -> "TrigField":
        return TrigField(self.terms + other.terms)

    def scale(self, factor: float) -> "TrigField":
        return TrigField(tuple(TrigTerm(factor * t.coef, t.rate, t.modes) for t in self.terms))

    def d(self, axis: int) -> "TrigField":
        return TrigField(tuple(t.derivative(axis) for t in self.terms))

    def dt(self) -> "TrigField":
        return TrigField(tuple(TrigTerm(t.rate * t.coef, t.rate, t.modes) for t in self.terms))

    def lap(self, dim: int = 2) -> "TrigField":
        out = TrigField()
        for a in range(dim):
            out = out + self.d(a).d(a)
        return out


ZERO = TrigField()


@dataclass
class MmsCase:
    name: str
    psi: TrigField
    p: TrigField
    phi: TrigField
    F: List[List[TrigField]]
    bc_mode: BCMode = BCMode.PERIODIC
    dim: int = 2

    def velocity(self) -> List[TrigField]:
        return [self.psi.d(1), self.psi.d(0).scale(-1.0)]

    def exact_velocity(self, grid: GridSpec, t: float) -> MacVelocity:
        comps = self.velocity()
        return MacVelocity(grid, tuple(comps[a](grid.face_coordinates(a), t) for a in range(grid.dim)))

    def discrete_velocity(self, grid: GridSpec, t: float) -> MacVelocity:
        """u from psi at cell corners: exactly divergence free on the grid."""
        hx, hy = grid.spacing
        x0, y0 = grid.face_coordinates(0)
        x1, y1 = grid.face_coordinates(1)
        ux = (self.psi([x0, y0 + 0.5 * hy], t) - self.psi([x0, y0 - 0.5 * hy], t)) / hy
        uy = -(self.psi([x1 + 0.5 * hx, y1], t) - self.psi([x1 - 0.5 * hx, y1], t)) / hx
        return MacVelocity(grid, (ux, uy))

    def exact_phi(self, grid: GridSpec, t: float) -> ScalarField:
        return ScalarField(grid, self.phi(grid.cell_coordinates(), t))

    def exact_F(self, grid: GridSpec, t: float) -> TensorField:
        X = grid.cell_coordinates()
        values = np.stack([np.stack([self.F[i][j](X, t) for j in range(self.dim)])
                           for i in range(self.dim)])
        return TensorField(grid, values)

    def exact_p(self, grid: GridSpec, t: float) -> ScalarField:
        return ScalarField(grid, self.p(grid.cell_coordinates(), t))

    def initial_state(self, grid: GridSpec, params: ModelParams) -> SimState:
        return SimState.initial(self.discrete_velocity(grid, 0.0), self.exact_phi(grid, 0.0),
                                self.exact_F(grid, 0.0), params)


def _wavenumbers(extents: Sequence[float]) -> Tuple[float, float]:
    return 2.0 * math.pi / extents[0], 2.0 * math.pi / extents[1]


def _identity_plus(eps: float, rate: float, kx: float, ky: float) -> List[List[TrigField]]:
    one = TrigField.constant(1.0)
    return [
        [one + TrigField.term(eps, rate, ("sin", kx), ("sin", ky)),
         TrigField.term(eps, rate, ("cos", kx), ("sin", ky))],
        [TrigField.term(0.5 * eps, rate, ("sin", kx), ("cos", ky)),
         one + TrigField.term(-eps, rate, ("cos", kx), ("cos", ky))],
    ]


def _identity() -> List[List[TrigField]]:
    return [[TrigField.constant(1.0), ZERO], [ZERO, TrigField.constant(1.0)]]


def _convex_phi(kx: float, ky: float, second: str) -> TrigField:
    return (TrigField.constant(PHI_BASE)
            + TrigField.term(PHI_AMPLITUDE, -1.0, ("cos", kx), (second, ky)))


def make_case(name: str, params: ModelParams, extents: Sequence[float] = (1.0, 1.0)) -> MmsCase:
    """
    The fixed manufactured cases on a periodic box of the given extents.

    phi stays inside PHI_BASE +- PHI_AMPLITUDE, where f'' > 0; a phase field in
    the spinodal band grows at the unstable modes and cannot converge. The
    taylor-green and coupled velocities have amplitude SPEED so the first-order
    upwind advection error stays below the second-order error on 16..128 grids.
    """
    kx, ky = _wavenumbers(extents)
    if name == "rest":
        return MmsCase(name, ZERO, ZERO, TrigField.constant(0.5), _identity())
    if name == "taylor-green":
        # decaying vortex at the viscosity of phi = 1
        nu = float(params.eta(np.array(1.0))) / params.rho
        rate = -nu * (kx ** 2 + ky ** 2)
        speed = SPEED
        psi = TrigField.term(speed / ky, rate, ("sin", kx), ("sin", ky))
        p = (TrigField.term(-0.25 * params.rho * speed ** 2, 2 * rate, ("cos", 2 * kx), ("cos", 0.0))
             + TrigField.term(-0.25 * params.rho * speed ** 2 * (kx / ky) ** 2, 2 * rate,
                              ("cos", 0.0), ("cos", 2 * ky)))
        return MmsCase(name, psi, p, TrigField.constant(1.0), _identity())
    if name == "spinodal":
        return MmsCase(name, ZERO, ZERO, _convex_phi(kx, ky, "cos"), _identity())
    if name == "swirl":
        psi = TrigField.term(0.5 / ky, 0.0, ("sin", kx), ("sin", ky))
        return MmsCase(name, psi, ZERO, TrigField.constant(1.0), _identity_plus(0.1, -1.0, kx, ky))
    if name == "coupled":
        psi = TrigField.term(SPEED / ky, -1.0, ("sin", kx), ("sin", ky))
        p = TrigField.term(0.2, -1.0, ("cos", kx), ("cos", ky))
        return MmsCase(name, psi, p, _convex_phi(kx, ky, "sin"), _identity_plus(0.1, -0.5, kx, ky))
    raise ConfigurationError(f"unknown manufactured case '{name}'")


# ---------------------------------------------------------------------------
# Forcing: closed form
# ---------------------------------------------------------------------------

class ManufacturedForcing:
    """Source terms that make the case an exact solution of the continuous system."""

    def __init__(self, case: MmsCase, params: ModelParams):
        self.case = case
        self.params = params
        d = case.dim
        self.u = case.velocity()
        self.u_t = [c.dt() for c in self.u]
        self.u_grad = [[c.d(j) for j in range(d)] for c in self.u]
        self.u_lap = [c.lap(d) for c in self.u]
        self.p_grad = [case.p.d(a) for a in range(d)]
        self.phi_t = case.phi.dt()
        self.phi_grad = [case.phi.d(a) for a in range(d)]
        self.phi_lap = case.phi.lap(d)
        self.phi_bilap = self.phi_lap.lap(d)
        self.F_t = [[f.dt() for f in row] for row in case.F]
        self.F_grad = [[[f.d(k) for k in range(d)] for f in row] for row in case.F]
        self.F_lap = [[f.lap(d) for f in row] for row in case.F]

    def _F(self, X, t):
        return [[f(X, t) for f in row] for row in self.case.F]

    def phase(self, X: Coords, t: float) -> np.ndarray:
        """phi_t + u . grad phi - tau Lap mu."""
        p, d = self.params, self.case.dim
        phi = self.case.phi(X, t)
        grad = [g(X, t) for g in self.phi_grad]
        grad_sq = sum(g ** 2 for g in grad)
        lap = self.phi_lap(X, t)
        F = self._F(X, t)
        # Lap |F|^2 = 2 sum (|grad F_ij|^2 + F_ij Lap F_ij)
        lap_tr = 0.0
        for i in range(d):
            for j in range(d):
                lap_tr = lap_tr + 2.0 * (sum(g(X, t) ** 2 for g in self.F_grad[i][j])
                                         + F[i][j] * self.F_lap[i][j](X, t))
        third = (6.0 * phi - 3.0) / p.h ** 2
        lap_mu = (-p.lam * self.phi_bilap(X, t)
                  + p.lam * p.gamma * (third * grad_sq + double_well_second(phi, p.h) * lap)
                  - 0.5 * p.lam_e * lap_tr)
        advect = sum(self.u[a](X, t) * grad[a] for a in range(d))
        return self.phi_t(X, t) + advect - p.tau * lap_mu

    def tensor(self, X: Coords, t: float) -> np.ndarray:
        """F_t + (u . grad) F - (grad u) F, shape (d, d, ...)."""
        d = self.case.dim
        F = self._F(X, t)
        u = [c(X, t) for c in self.u]
        G = [[g(X, t) for g in row] for row in self.u_grad]
        out = []
        for i in range(d):
            row = []
            for j in range(d):
                value = self.F_t[i][j](X, t)
                value = value + sum(u[k] * self.F_grad[i][j][k](X, t) for k in range(d))
                value = value - sum(G[i][k] * F[k][j] for k in range(d))
                row.append(value)
            out.append(np.stack(row))
        return np.stack(out)

    def momentum(self, X: Coords, t: float) -> np.ndarray:
        """
        rho (u_t + u . grad u) + grad p - div(eta grad u) - (mu + lam_e/2 tr) grad phi
        - div(lam_e (1 - phi)(F F^T - I)) + c(phi) u, shape (d, ...).
        """
        p, d = self.params, self.case.dim
        phi = self.case.phi(X, t)
        phi_grad = [g(X, t) for g in self.phi_grad]
        eta = p.eta(phi)
        eta_prime = p.eta_prime(phi)
        drag = eta * (1.0 - phi) / p.kappa(phi)
        # the trace terms of mu and of the capillary potential cancel
        potential = -p.lam * self.phi_lap(X, t) + p.lam * p.gamma * double_well_prime(phi, p.h)
        F = self._F(X, t)
        F_grad = [[[g(X, t) for g in cell] for cell in row] for row in self.F_grad]
        u = [c(X, t) for c in self.u]
        out = []
        for i in range(d):
            G = [g(X, t) for g in self.u_grad[i]]
            inertia = p.rho * (self.u_t[i](X, t) + sum(u[j] * G[j] for j in range(d)))
            viscous = eta * self.u_lap[i](X, t) + eta_prime * sum(phi_grad[j] * G[j] for j in range(d))
            elastic = 0.0
            for j in range(d):
                stress = sum(F[i][k] * F[j][k] for k in range(d)) - (1.0 if i == j else 0.0)
                dstress = sum(F_grad[i][k][j] * F[j][k] + F[i][k] * F_grad[j][k][j] for k in range(d))
                elastic = elastic + p.lam_e * (-phi_grad[j] * stress + (1.0 - phi) * dstress)
            out.append(inertia + self.p_grad[i](X, t) - viscous - potential * phi_grad[i]
                       - elastic + drag * u[i])
        return np.stack(out)

    def as_forcing(self, grid: GridSpec) -> Forcing:
        cells = grid.cell_coordinates()
        faces = [grid.face_coordinates(a) for a in range(grid.dim)]
        return Forcing(
            phase=lambda t: self.phase(cells, t),
            tensor=lambda t: self.tensor(cells, t),
            momentum=lambda t: MacVelocity(grid, tuple(self.momentum(faces[a], t)[a]
                                                       for a in range(grid.dim))),
        )


# ---------------------------------------------------------------------------
# Forcing: finite-difference reference
# ---------------------------------------------------------------------------

FD_SPACE = 5e-3
FD_TIME = 1e-4


def _shift(X: Coords, axis: int, delta: float) -> List[np.ndarray]:
    out = list(X)
    out[axis] = X[axis] + delta
    return out


def _fd1(f: Callable, X: Coords, t: float, axis: int, h: float = FD_SPACE) -> np.ndarray:
    return (-f(_shift(X, axis, 2 * h), t) + 8 * f(_shift(X, axis, h), t)
            - 8 * f(_shift(X, axis, -h), t) + f(_shift(X, axis, -2 * h), t)) / (12 * h)


def _fd2(f: Callable, X: Coords, t: float, axis: int, h: float = FD_SPACE) -> np.ndarray:
    return (-f(_shift(X, axis, 2 * h), t) + 16 * f(_shift(X, axis, h), t) - 30 * f(X, t)
            + 16 * f(_shift(X, axis, -h), t) - f(_shift(X, axis, -2 * h), t)) / (12 * h * h)


def _fdt(f: Callable, X: Coords, t: float, h: float = FD_TIME) -> np.ndarray:
    return (-f(X, t + 2 * h) + 8 * f(X, t + h) - 8 * f(X, t - h) + f(X, t - 2 * h)) / (12 * h)


def fd_forcing(case: MmsCase, params: ModelParams, X: Coords, t: float) -> Dict[str, np.ndarray]:
    """All three source terms from finite differences of the analytic fields."""
    p, d = params, case.dim
    u = case.velocity()
    F = case.F

    def lap(f, X, t):
        return sum(_fd2(f, X, t, a) for a in range(d))

    def trace(X, t):
        return sum(F[i][j](X, t) ** 2 for i in range(d) for j in range(d)) - d

    def mu(X, t):
        return (-p.lam * lap(case.phi, X, t)
                + p.lam * p.gamma * double_well_prime(case.phi(X, t), p.h)
                - 0.5 * p.lam_e * trace(X, t))

    phase = (_fdt(case.phi, X, t)
             + sum(u[a](X, t) * _fd1(case.phi, X, t, a) for a in range(d))
             - p.tau * lap(mu, X, t))

    tensor = np.stack([np.stack([
        _fdt(F[i][j], X, t)
        + sum(u[k](X, t) * _fd1(F[i][j], X, t, k) for k in range(d))
        - sum(_fd1(u[i], X, t, k) * F[k][j](X, t) for k in range(d))
        for j in range(d)]) for i in range(d)])

    phi = case.phi(X, t)
    momentum = []
    for i in range(d):
        inertia = p.rho * (_fdt(u[i], X, t) + sum(u[j](X, t) * _fd1(u[i], X, t, j) for j in range(d)))

        def flux(j):
            return lambda Y, s: p.eta(case.phi(Y, s)) * _fd1(u[i], Y, s, j)

        def stress(j):
            return lambda Y, s: p.lam_e * (1.0 - case.phi(Y, s)) * (
                sum(F[i][k](Y, s) * F[j][k](Y, s) for k in range(d)) - (1.0 if i == j else 0.0))

        viscous = sum(_fd1(flux(j), X, t, j) for j in range(d))
        elastic = sum(_fd1(stress(j), X, t, j) for j in range(d))
        capillary = (mu(X, t) + 0.5 * p.lam_e * trace(X, t)) * _fd1(case.phi, X, t, i)
        drag = p.eta(phi) * (1.0 - phi) / p.kappa(phi) * u[i](X, t)
        momentum.append(inertia + _fd1(case.p, X, t, i) - viscous - capillary - elastic + drag)

    return {"phase": phase, "tensor": tensor, "momentum": np.stack(momentum)}


def check_forcing(case: MmsCase, params: ModelParams, extents: Sequence[float] = (1.0, 1.0),
                  points: int = FORCING_CHECK_POINTS, seed: int = 0, t_max: float = 0.1) -> Dict[str, float]:
    """
    Largest relative gap between closed-form and finite-difference forcing over
    random space-time points, per equation (scaled by max(1, max |forcing|)).
    """
    rng = np.random.default_rng(seed)
    X = [rng.uniform(0.0, L, points) for L in extents]
    t = float(rng.uniform(0.0, t_max))
    forcing = ManufacturedForcing(case, params)
    closed = {"phase": forcing.phase(X, t), "tensor": forcing.tensor(X, t),
              "momentum": forcing.momentum(X, t)}
    reference = fd_forcing(case, params, X, t)
    gaps = {}
    for name, value in closed.items():
        scale = max(1.0, float(np.max(np.abs(value))))
        gaps[name] = float(np.max(np.abs(value - reference[name]))) / scale
    return gaps


# ---------------------------------------------------------------------------
# Runs and studies
# ---------------------------------------------------------------------------

def _norms(numeric: np.ndarray, exact: np.ndarray, volume: float) -> Tuple[float, float]:
    diff = np.asarray(numeric) - np.asarray(exact)
    return float(np.sqrt(np.sum(diff ** 2) * volume)), float(np.max(np.abs(diff)))


def mms_run(case: MmsCase, params: ModelParams, grid: GridSpec, dt: float, t_end: float,
            tol: float = 1e-10, max_iter: int = 10_000, backend: str = "numpy") -> Dict[str, float]:
    """Integrate the forced system to t_end and measure L2 / Linf errors per field."""
    if grid.dim != case.dim or grid.bc_mode != case.bc_mode:
        raise ConfigurationError(f"case '{case.name}' needs a {case.dim}-D {case.bc_mode.value} grid")
    forcing = ManufacturedForcing(case, params)
    ctrl = StepControl(dt=dt, tol=tol, max_iter=max_iter, backend=backend,
                       forcing=forcing.as_forcing(grid))
    state = case.initial_state(grid, params)
    steps = max(0, int(round(t_end / dt)))
    for _ in range(steps):
        state = step(state, params, ctrl)

    t = state.t
    vol = grid.cell_volume
    exact_u = case.exact_velocity(grid, t)
    p_exact = case.exact_p(grid, t).values
    record = {"case": case.name, "cells": grid.cells[0], "h": grid.min_spacing, "dt": dt,
              "steps": steps, "t": t}
    u_num = state.u.flatten()
    u_ref = exact_u.flatten()
    record["err_u_L2"], record["err_u_Linf"] = _norms(u_num, u_ref, vol)
    record["err_phi_L2"], record["err_phi_Linf"] = _norms(state.phi.values, case.exact_phi(grid, t).values, vol)
    record["err_F_L2"], record["err_F_Linf"] = _norms(state.F.values, case.exact_F(grid, t).values, vol)
    record["err_p_L2"], record["err_p_Linf"] = _norms(state.p.values - np.mean(state.p.values),
                                                      p_exact - np.mean(p_exact), vol)
    logger.info(f"🧪 [Verify] mms '{case.name}' {grid.cells} dt={dt:.2e}: "
                f"u {record['err_u_L2']:.3e}, phi {record['err_phi_L2']:.3e}, F {record['err_F_L2']:.3e}")
    return record


ORDER_FIELDS = ("u", "phi", "F", "p")


@dataclass
class MmsStudy:
    errors: pd.DataFrame
    orders: pd.DataFrame
    forcing_gaps: Dict[str, float] = field(default_factory=dict)


def mms_study(config: RunConfig, case_name: Optional[str] = None, mode: Optional[str] = None) -> MmsStudy:
    """
    Refinement study for one case.

    space: one run per entry of mms.cells_list with dt = dt_factor * h^2, so the
    first-order time error stays below the spatial one; orders against h.
    time: one grid (the last of cells_list), one run per mms.dt_list; orders against dt.
    """
    settings = config["mms"]
    case_name = case_name or settings["case"]
    mode = mode or settings["mode"]
    params = config.model_params()
    extents = config.grid_spec().extents[:2]
    case = make_case(case_name, params, extents)

    gaps = check_forcing(case, params, extents)
    worst = max(gaps.values())
    if worst > FORCING_CHECK_TOL:
        raise FsiError(f"manufactured forcing for '{case_name}' is inconsistent: {gaps}")
    logger.debug(f"[Verify] forcing check for '{case_name}': {gaps}")

    solver = config["solver"]
    runs = []
    if mode == "space":
        for n in settings["cells_list"]:
            grid = GridSpec(extents, (n, n), BCMode.PERIODIC)
            dt = settings["dt_factor"] * grid.min_spacing ** 2
            runs.append(mms_run(case, params, grid, dt, settings["t_end"], solver["tol"],
                                solver["max_iter"], solver["backend"]))
        scale_column = "h"
    else:
        n = settings["cells_list"][-1]
        grid = GridSpec(extents, (n, n), BCMode.PERIODIC)
        for dt in settings["dt_list"]:
            runs.append(mms_run(case, params, grid, dt, settings["t_end"], solver["tol"],
                                solver["max_iter"], solver["backend"]))
        scale_column = "dt"

    errors = pd.DataFrame(runs)
    orders = []
    for name in ORDER_FIELDS:
        pairs = list(zip(errors[scale_column], errors[f"err_{name}_L2"]))
        orders.append({"case": case_name, "mode": mode, "field": name,
                       "order": observed_order(pairs) if len(pairs) >= 2 else float("nan")})
    return MmsStudy(errors, pd.DataFrame(orders), gaps)
