"""
Invariant suite: short canonical scenarios, each asserting the discrete
properties the modules promise. Every check becomes one report row
(scenario, invariant, measured, threshold, passed).

The ``drag_sign`` fault flips the sign of the drag coefficient everywhere it
is used, which the drag-work check must catch.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np
import pandas as pd

from config.settings import RunConfig
from core.grid import (
    BCMode, GridSpec, MacVelocity, ScalarField, TensorField, advect_scalar_conservative,
    divergence, gradient_to_faces, inner_cells, inner_faces, laplace_neumann, mean_value,
)
from galerkin.basis import build_basis, vector_field
from physics.elasticity import det_drift, frobenius_growth_factor, transport_step
from physics.momentum import drag_work, momentum_step, project
from physics.params import ModelParams
from physics.phasefield import ch_energy
from simulation.diagnostics import energy_budget
from simulation.presets import build_initial_state
from simulation.state import SimState, StepControl
from simulation.timeloop import step
from utils.logging_conf import get_logger

logger = get_logger(__name__)

FAULTS = ("none", "drag_sign")


@dataclass
class InvariantReport:
    rows: List[Dict[str, object]] = field(default_factory=list)

    def check(self, scenario: str, invariant: str, measured: float, threshold: float) -> bool:
        passed = bool(np.isfinite(measured) and measured <= threshold)
        self.rows.append({"scenario": scenario, "invariant": invariant, "measured": float(measured),
                          "threshold": float(threshold), "passed": passed})
        if not passed:
            logger.error(f"❌ [Verify] {scenario}/{invariant}: measured {measured:.3e} > {threshold:.3e}")
        return passed

    @property
    def passed(self) -> bool:
        return all(row["passed"] for row in self.rows)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["scenario", "invariant", "measured", "threshold", "passed"])

    def summary_text(self) -> str:
        lines = []
        for row in self.rows:
            mark = "PASS" if row["passed"] else "FAIL"
            lines.append(f"{mark}  {row['scenario']:<16} {row['invariant']:<28} "
                         f"{row['measured']:.3e} <= {row['threshold']:.3e}")
        failed = sum(not row["passed"] for row in self.rows)
        lines.append(f"{len(self.rows) - failed}/{len(self.rows)} invariants passed")
        return "\n".join(lines) + "\n"


@dataclass
class SuiteContext:
    grid: GridSpec
    params: ModelParams
    steps: int
    dt: float
    tol: float
    max_iter: int
    backend: str
    drag_sign: float
    initial: Dict[str, object]

    def control(self, dt: float = None) -> StepControl:
        return StepControl(dt=dt or self.dt, tol=self.tol, max_iter=self.max_iter,
                           backend=self.backend, drag_sign=self.drag_sign)

    def preset(self, name: str, grid: GridSpec = None, **options) -> SimState:
        opts = dict(self.initial)
        opts.update(options)
        return build_initial_state(name, grid or self.grid, self.params, opts)


def _max_change(a: SimState, b: SimState) -> float:
    return max(b.u.plus(a.u, -1.0).max_abs(),
               float(np.max(np.abs(b.phi.values - a.phi.values))),
               float(np.max(np.abs(b.F.values - a.F.values))))


def _rest(ctx: SuiteContext, report: InvariantReport) -> None:
    start = ctx.preset("rest")
    state, worst_residual, worst_div = start, 0.0, 0.0
    for _ in range(ctx.steps):
        new = step(state, ctx.params, ctx.control())
        worst_residual = max(worst_residual, abs(energy_budget(new, state, ctx.params).residual))
        worst_div = max(worst_div, float(np.max(np.abs(divergence(new.u).values))))
        state = new
    report.check("rest", "fields_unchanged", _max_change(start, state), 1e-12)
    report.check("rest", "energy_residual", worst_residual, 1e-10)
    report.check("rest", "div_max", worst_div, 1e-12)
    report.check("rest", "mass_drift", abs(mean_value(state.phi) - mean_value(start.phi)), 1e-14)


def _decoupled_ch(ctx: SuiteContext, report: InvariantReport) -> None:
    start = ctx.preset("spinodal", velocity=0.0)
    state, growth = start, -np.inf
    energy = ch_energy(start.phi, ctx.params)
    for _ in range(ctx.steps):
        state = step(state, ctx.params, ctx.control())
        new_energy = ch_energy(state.phi, ctx.params)
        growth = max(growth, new_energy - energy)
        energy = new_energy
    drift = abs(mean_value(state.phi) - mean_value(start.phi))
    report.check("decoupled_ch", "mass_drift", drift, 10 * ctx.steps * ctx.tol)
    report.check("decoupled_ch", "ch_energy_increase", max(growth, 0.0), 10 * ctx.tol)
    report.check("decoupled_ch", "F_unchanged", float(np.max(np.abs(state.F.values - start.F.values))), 0.0)


def _taylor_green(ctx: SuiteContext, report: InvariantReport) -> None:
    grid = GridSpec(ctx.grid.extents, ctx.grid.cells, BCMode.PERIODIC)
    start = ctx.preset("taylor-green", grid=grid, velocity=1.0, phi_mean=1.0)
    dt = min(ctx.dt, 0.25 * grid.min_spacing)
    state, worst_div = start, 0.0
    for _ in range(ctx.steps):
        state = step(state, ctx.params, ctx.control(dt))
        worst_div = max(worst_div, float(np.max(np.abs(divergence(state.u).values))))
    again, _ = project(state.u, ctx.params.rho, dt, ctx.tol, ctx.max_iter)
    report.check("taylor_green", "div_max", worst_div, 1e-8)
    report.check("taylor_green", "projection_idempotent", again.plus(state.u, -1.0).max_abs(), 1e-8)
    report.check("taylor_green", "mass_drift", abs(mean_value(state.phi) - mean_value(start.phi)), 1e-10)
    kinetic = lambda s: inner_faces(s.u, s.u)
    report.check("taylor_green", "kinetic_energy_growth", max(kinetic(state) - kinetic(start), 0.0), 1e-12)


def _swirl_F(ctx: SuiteContext, report: InvariantReport) -> None:
    start = ctx.preset("swirl", velocity=1.0)
    u = start.u
    dt = 0.25 * ctx.grid.min_spacing / max(u.max_abs(), 1e-300)
    F, worst = start.F, 0.0
    for _ in range(ctx.steps):
        F_next = transport_step(F, u, dt, backend=ctx.backend)
        bound = frobenius_growth_factor(u, dt) * _max_frobenius(F)
        worst = max(worst, _max_frobenius(F_next) - bound)
        F = F_next
    report.check("swirl_F", "frobenius_bound_excess", max(worst, 0.0), 1e-12)
    report.check("swirl_F", "det_drift_finite", 0.0 if np.isfinite(det_drift(F)) else np.inf, 0.0)
    identity = transport_step(start.F, MacVelocity.zeros(ctx.grid), dt)
    report.check("swirl_F", "rest_transport_identity",
                 float(np.max(np.abs(identity.values - start.F.values))), 0.0)


def _max_frobenius(F: TensorField) -> float:
    return float(np.max(np.sqrt(np.sum(F.values ** 2, axis=(0, 1)))))


def _gradient_force(ctx: SuiteContext, report: InvariantReport) -> None:
    state = ctx.preset("bubble", velocity=0.5)
    grid = state.grid
    coords = grid.cell_coordinates()
    q = ScalarField(grid, np.prod([np.cos(np.pi * c / L) for c, L in zip(coords, grid.extents)], axis=0))
    dt = 0.25 * grid.min_spacing
    args = (state.u, state.phi, state.phi, state.mu, state.F, dt, ctx.params)
    kwargs = dict(tol=ctx.tol, max_iter=ctx.max_iter, drag_sign=ctx.drag_sign)
    plain, _ = momentum_step(*args, **kwargs)
    pushed, _ = momentum_step(*args, external=gradient_to_faces(q), **kwargs)
    report.check("gradient_force", "velocity_change", pushed.plus(plain, -1.0).max_abs(), 1e-8)


def _operators(ctx: SuiteContext, report: InvariantReport) -> None:
    grid = ctx.grid
    rng = np.random.default_rng(1)
    s = ScalarField(grid, rng.standard_normal(grid.shape))
    r = ScalarField(grid, rng.standard_normal(grid.shape))
    v = MacVelocity(grid, tuple(rng.standard_normal(grid.face_shape(a))
                                for a in range(grid.dim))).with_no_penetration()
    div_v, grad_s = divergence(v), gradient_to_faces(s)
    scale = (np.sqrt(inner_cells(div_v.values, div_v.values, grid) * inner_cells(s.values, s.values, grid))
             + np.sqrt(inner_faces(v, v) * inner_faces(grad_s, grad_s)))
    adjoint = abs(inner_cells(div_v.values, s.values, grid) + inner_faces(v, grad_s)) / scale
    report.check("operators", "div_grad_adjoint", adjoint, 1e-12)
    lap_s, lap_r = laplace_neumann(s), laplace_neumann(r)
    sym = abs(inner_cells(lap_s.values, r.values, grid) - inner_cells(s.values, lap_r.values, grid))
    report.check("operators", "laplacian_symmetric", sym / np.max(np.abs(lap_s.values)), 1e-12)
    report.check("operators", "laplacian_mean", abs(mean_value(lap_s)) / np.max(np.abs(lap_s.values)), 1e-12)
    adv = advect_scalar_conservative(v, s)
    report.check("operators", "advection_mean", abs(mean_value(adv)) / np.max(np.abs(adv.values)), 1e-12)


def _drag(ctx: SuiteContext, report: InvariantReport) -> None:
    grid = ctx.grid
    rng = np.random.default_rng(2)
    phi = ScalarField(grid, rng.uniform(0.0, 1.0, grid.shape))
    u = MacVelocity(grid, tuple(rng.standard_normal(grid.face_shape(a))
                                for a in range(grid.dim))).with_no_penetration()
    report.check("drag", "drag_work", drag_work(phi, u, ctx.params, ctx.drag_sign), 0.0)


def _bases(ctx: SuiteContext, report: InvariantReport) -> None:
    grid = ctx.grid.with_cells([8] * ctx.grid.dim)
    scalar = build_basis("neumann_scalar", 16, grid)
    stokes = build_basis("stokes", 16, grid)
    report.check("galerkin", "scalar_gram", scalar.gram_error(), 1e-10)
    report.check("galerkin", "stokes_gram", stokes.gram_error(), 1e-10)
    report.check("galerkin", "scalar_first_eigenvalue", abs(scalar.eigenvalues[0] - 1.0), 1e-10)
    worst = max(float(np.max(np.abs(divergence(vector_field("stokes", grid, stokes.vectors[:, k])).values)))
                for k in range(stokes.size))
    report.check("galerkin", "stokes_divergence", worst, 1e-8)


SCENARIOS: Dict[str, Callable[[SuiteContext, InvariantReport], None]] = {
    "rest": _rest,
    "decoupled_ch": _decoupled_ch,
    "taylor_green": _taylor_green,
    "swirl_F": _swirl_F,
    "gradient_force": _gradient_force,
    "operators": _operators,
    "drag": _drag,
    "galerkin": _bases,
}


def suite_context(config: RunConfig, fault: str = None) -> SuiteContext:
    settings = config["verify"]
    fault = fault or settings["fault"]
    if fault not in FAULTS:
        raise ValueError(f"unknown fault '{fault}', expected one of {FAULTS}")
    base = config.grid_spec()
    grid = GridSpec(base.extents, tuple(settings["cells"]), BCMode.PHYSICAL)
    solver = config["solver"]
    return SuiteContext(grid=grid, params=config.model_params(), steps=settings["steps"],
                        dt=config["time"]["dt"], tol=solver["tol"], max_iter=solver["max_iter"],
                        backend=solver["backend"], drag_sign=-1.0 if fault == "drag_sign" else 1.0,
                        initial=dict(config["initial"]))


def invariant_suite(config: RunConfig, scenarios=None, fault: str = None) -> InvariantReport:
    """Run the named scenarios (all by default) and collect every check."""
    ctx = suite_context(config, fault)
    report = InvariantReport()
    for name in scenarios or SCENARIOS:
        logger.info(f"🧪 [Verify] scenario '{name}' on {ctx.grid.cells}")
        SCENARIOS[name](ctx, report)
    logger.info(f"{'✅' if report.passed else '❌'} [Verify] "
                f"{sum(r['passed'] for r in report.rows)}/{len(report.rows)} invariants passed")
    return report
