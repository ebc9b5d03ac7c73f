"""
Throughput benchmark per phase of the step (Cahn-Hilliard, F transport,
momentum, diagnostics), for each grid size, backend and thread count.
"""

from typing import Dict, List, Optional

import pandas as pd

from config.settings import RunConfig
from core.kernels import NUMBA_AVAILABLE, configure_threads
from physics.elasticity import transport_step
from physics.momentum import momentum_step
from physics.phasefield import cahn_hilliard_step
from simulation.diagnostics import diagnostics_row
from simulation.presets import build_initial_state
from simulation.state import SimState
from simulation.timeloop import cfl_dt
from utils.logging_conf import get_logger
from utils.time_utils import PhaseTimer

logger = get_logger(__name__)

PHASES = ("cahn_hilliard", "transport", "momentum", "diagnostics")


def _timed_step(state: SimState, params, dt: float, solver: Dict, backend: str,
                timer: PhaseTimer) -> SimState:
    """The splitting of ``timeloop.step`` with each phase under its own timer."""
    tol, max_iter = solver["tol"], solver["max_iter"]
    with timer.phase("cahn_hilliard"):
        phi_next, mu_next = cahn_hilliard_step(state.phi, state.u, state.F, dt, params, tol, max_iter)
    with timer.phase("transport"):
        F_next = transport_step(state.F, state.u, dt, backend=backend)
    with timer.phase("momentum"):
        u_next, p_next = momentum_step(state.u, state.phi, phi_next, mu_next, F_next, dt, params,
                                       tol, max_iter)
    new = SimState(t=state.t + dt, n=state.n + 1, u=u_next, p=p_next, phi=phi_next, mu=mu_next,
                   F=F_next, u_prev=state.u, phi_prev=state.phi, F_prev=state.F, dt_prev=dt)
    with timer.phase("diagnostics"):
        diagnostics_row(new, state, params)
    return new


def bench(config: RunConfig, sizes: Optional[List[int]] = None) -> pd.DataFrame:
    """
    One row per (size, backend, threads, phase): seconds over ``bench.steps``
    measured steps after ``bench.warmup`` unmeasured ones, and cells*steps/s.
    A ``scaling`` column gives each row's time relative to the smallest size.
    """
    settings = config["bench"]
    sizes = list(sizes or settings["sizes"])
    steps, warmup = settings["steps"], settings["warmup"]
    params = config.model_params()
    solver = config["solver"]
    base = config.grid_spec()
    backends = ["numpy"] + (["numba"] if NUMBA_AVAILABLE and base.dim == 2 else [])

    rows = []
    for n in sizes:
        grid = base.with_cells([n] * base.dim)
        initial = build_initial_state(config["initial"]["preset"], grid, params, config["initial"])
        dt = min(config["time"]["dt"], cfl_dt(initial, params, 0.25))
        for backend in backends:
            thread_list = settings["threads"] if backend == "numba" else [1]
            for threads in thread_list:
                in_effect = configure_threads(threads) if backend == "numba" else 1
                state = initial
                timer = PhaseTimer()
                for _ in range(warmup):
                    state = _timed_step(state, params, dt, solver, backend, timer)
                timer.reset()
                for _ in range(steps):
                    state = _timed_step(state, params, dt, solver, backend, timer)
                totals = timer.as_dict()
                cell_steps = grid.size * steps
                for phase in PHASES:
                    seconds = totals.get(phase, 0.0)
                    rows.append({"cells": grid.size, "size": n, "backend": backend, "threads": in_effect,
                                 "phase": phase, "steps": steps, "cell_steps": cell_steps,
                                 "seconds": seconds,
                                 "cell_steps_per_s": cell_steps / seconds if seconds > 0 else float("inf")})
                logger.info(f"⏱️ [Bench] {n}^{grid.dim} {backend} x{in_effect}: "
                            f"{sum(totals.values()):.3f}s for {steps} steps")

    frame = pd.DataFrame(rows)
    smallest = frame[frame["size"] == min(sizes)].set_index(["backend", "threads", "phase"])["seconds"]
    frame["scaling"] = [
        row.seconds / smallest.get((row.backend, row.threads, row.phase), float("nan"))
        for row in frame.itertuples()
    ]
    return frame
