"""
Continuous dependence on the initial phase.

Two runs from the same configuration, the second with phi0 + delta * bump
(a smooth zero-mean mode compatible with the boundary condition). The
distance D(t) = (|u1 - u2|^2 + |F1 - F2|^2 + |phi1 - phi2|^2)^(1/2) (plain L2)
is recorded together with

    G(t) = |u2|_2^2 + |u1|_3 + |phi1|_3^4 + |phi2|_3^4 + |F1|_2^4 + |F2|_2^4

and a single Gronwall constant C is fitted so that
D(t) <= D(0) exp(C int_0^t G) holds along the measured series.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config.settings import RunConfig
from core.grid import ScalarField
from physics.params import ModelParams
from simulation.diagnostics import sobolev_norm_sq, velocity_cells
from simulation.presets import build_initial_state
from simulation.state import SimState, StepControl
from simulation.timeloop import step
from utils.logging_conf import get_logger

logger = get_logger(__name__)


@dataclass
class DependenceResult:
    summary: pd.DataFrame
    series: pd.DataFrame

    @property
    def ratio_spread(self) -> float:
        """max / min of D(t_end)/delta over the deltas (1 is perfect linearity)."""
        ratios = self.summary["ratio"].to_numpy()
        ratios = ratios[np.isfinite(ratios) & (ratios > 0)]
        if ratios.size == 0:
            return float("nan")
        return float(ratios.max() / ratios.min())


def bump(grid) -> np.ndarray:
    """Zero-mean cosine mode with unit amplitude (even at walls, periodic otherwise)."""
    coords = grid.cell_coordinates()
    factor = 2.0 if grid.periodic else 1.0
    shape = np.ones(grid.shape)
    for a in range(min(grid.dim, 2)):
        shape = shape * np.cos(factor * np.pi * coords[a] / grid.extents[a])
    return shape - np.mean(shape)


def distance(a: SimState, b: SimState) -> float:
    vol = a.grid.cell_volume
    du = sum(float(np.sum((x - y) ** 2)) for x, y in zip(a.u.components, b.u.components))
    dF = float(np.sum((a.F.values - b.F.values) ** 2))
    dphi = float(np.sum((a.phi.values - b.phi.values) ** 2))
    return float(np.sqrt((du + dF + dphi) * vol))


def growth_functional(first: SimState, second: SimState) -> float:
    grid = first.grid
    u1 = velocity_cells(first.u)
    u2 = velocity_cells(second.u)
    return (sobolev_norm_sq(u2, grid, 2)
            + np.sqrt(sobolev_norm_sq(u1, grid, 3))
            + sobolev_norm_sq(first.phi.values, grid, 3) ** 2
            + sobolev_norm_sq(second.phi.values, grid, 3) ** 2
            + sobolev_norm_sq(first.F.values, grid, 2) ** 2
            + sobolev_norm_sq(second.F.values, grid, 2) ** 2)


def _trajectory(state: SimState, params: ModelParams, ctrl: StepControl, steps: int) -> List[SimState]:
    states = [state]
    for _ in range(steps):
        state = step(state, params, ctrl)
        states.append(state)
    return states


def fit_gronwall(t: np.ndarray, D: np.ndarray, G: np.ndarray) -> float:
    """Smallest C >= 0 with D(t) <= D(0) exp(C int G) at every sample."""
    if D[0] <= 0:
        return float("nan")
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (G[1:] + G[:-1]) * np.diff(t))])
    mask = (integral > 0) & (D > 0)
    if not np.any(mask):
        return 0.0
    return float(max(0.0, np.max(np.log(D[mask] / D[0]) / integral[mask])))


def continuous_dependence(config: RunConfig, deltas: Optional[Sequence[float]] = None,
                          t_end: Optional[float] = None) -> DependenceResult:
    """
    Perturbation study; one summary row per delta (delta, D0, D_end, ratio, C_fit)
    and the D(t), G(t) series for each delta. The unperturbed run is shared.
    """
    settings = config["dependence"]
    deltas = list(settings["deltas"] if deltas is None else deltas)
    t_end = settings["t_end"] if t_end is None else t_end
    grid = config.grid_spec()
    params = config.model_params()
    solver = config["solver"]
    dt = config["time"]["dt"]
    steps = int(round(t_end / dt))
    ctrl = StepControl(dt=dt, tol=solver["tol"], max_iter=solver["max_iter"], backend=solver["backend"])

    base0 = build_initial_state(config["initial"]["preset"], grid, params, config["initial"])
    base = _trajectory(base0, params, ctrl, steps)
    shape = bump(grid)

    rows: List[Dict[str, float]] = []
    series: List[Dict[str, float]] = []
    for delta in deltas:
        phi0 = ScalarField(grid, base0.phi.values + delta * shape)
        start = SimState.initial(base0.u.copy(), phi0, base0.F.copy(), params, t=base0.t)
        other = _trajectory(start, params, ctrl, steps)
        t = np.array([s.t for s in base])
        D = np.array([distance(a, b) for a, b in zip(base, other)])
        G = np.array([growth_functional(a, b) for a, b in zip(base, other)])
        c_fit = fit_gronwall(t, D, G)
        ratio = D[-1] / delta if delta > 0 else float("nan")
        rows.append({"delta": delta, "D0": D[0], "D_end": D[-1], "ratio": ratio, "C_fit": c_fit})
        series.extend({"delta": delta, "t": ti, "D": di, "G": gi} for ti, di, gi in zip(t, D, G))
        logger.info(f"🧪 [Verify] dependence delta={delta:.1e}: D_end/delta={ratio:.4g}, C={c_fit:.3g}")
    return DependenceResult(pd.DataFrame(rows), pd.DataFrame(series))
