"""
Run driver: initial state, time loop, periodic outputs and the final summary.

Output directory layout:
    series.csv                 diagnostics every ``diagnostics_every`` steps (step 0 included)
    checkpoint_<step>.pfsi     every ``checkpoint_every`` steps and on wall-clock flags
    final.pfsi                 last state reached (also written when the run fails)
    snapshot_<step>.vtk        every ``vtk_every`` steps
    config.toml                canonical resolved configuration
    summary.xlsx               run summary and series (when ``output.excel``)
"""

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from config.settings import RunConfig, serialize_config
from core.errors import CflViolation, NumericalInstability, StepFailure
from core.kernels import configure_threads
from physics.params import ModelParams
from reports.excel_templates import write_summary_workbook
from reports.scheduler import CheckpointScheduler, ScheduleConfig
from reports.series import series_frame, write_table
from reports.vtk_writer import write_vtk
from simulation.checkpoint import save_checkpoint
from simulation.diagnostics import diagnostics_row, existence_horizon
from simulation.presets import build_initial_state
from simulation.state import SimState, StepControl
from simulation.timeloop import cfl_dt, step
from utils.logging_conf import get_logger, log_step_event
from utils.time_utils import PhaseTimer, format_duration

logger = get_logger(__name__)


@dataclass
class RunResult:
    state: SimState
    series: pd.DataFrame
    out_dir: Path
    checkpoints: List[Path] = field(default_factory=list)
    failure: Optional[BaseException] = None
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.failure is None


def step_control(config: RunConfig, dt: float) -> StepControl:
    solver = config["solver"]
    return StepControl(dt=dt, tol=solver["tol"], max_iter=solver["max_iter"], backend=solver["backend"])


def threads_setting(config: RunConfig) -> int:
    """solver.threads, or FSI_THREADS when the config leaves it at 0."""
    threads = config["solver"]["threads"]
    if threads == 0:
        threads = int(os.getenv("FSI_THREADS", "0") or 0)
    return threads


def next_dt(state: SimState, params: ModelParams, config: RunConfig) -> float:
    timing = config["time"]
    if timing["dt_policy"] == "fixed":
        dt = timing["dt"]
    else:
        dt = min(cfl_dt(state, params, timing["safety"], timing["dt_max"]), timing["dt_max"])
    remaining = timing["t_end"] - state.t
    return min(dt, remaining)


def _finished(state: SimState, config: RunConfig) -> bool:
    timing = config["time"]
    t_end = timing["t_end"]
    if state.t >= t_end - 1e-12 * max(1.0, t_end):
        return True
    return timing["max_steps"] > 0 and state.n >= timing["max_steps"]


def run(config: RunConfig, out_dir, initial: Optional[SimState] = None) -> RunResult:
    """
    Integrate from the configured initial state to ``time.t_end``.

    A step failure (solver, CFL or non-finite field) stops the loop; the last
    good state is written to final.pfsi and the error is re-raised after the
    series has been flushed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = config.grid_spec()
    params = config.model_params()
    output = config["output"]
    configure_threads(threads_setting(config))
    (out_dir / "config.toml").write_text(serialize_config(config), encoding="utf-8")

    state = initial if initial is not None else build_initial_state(
        config["initial"]["preset"], grid, params, config["initial"])
    first = diagnostics_row(state, None, params)
    rows: List[Dict[str, float]] = [first]
    horizon = existence_horizon(first["Z"], config["run"]["c1"])
    logger.info(f"🚀 [Runner] '{config['run']['name']}' on {grid.cells} ({grid.bc_mode.value}), "
                f"t_end={config['time']['t_end']}, model_h={params.model_h}, T*={horizon:.3e}")

    timer = PhaseTimer()
    checkpoints: List[Path] = []
    failure: Optional[BaseException] = None
    schedule = ScheduleConfig(wall_minutes=output["checkpoint_wall_minutes"])

    with CheckpointScheduler(schedule) as scheduler:
        while not _finished(state, config):
            dt = next_dt(state, params, config)
            try:
                with timer.phase("step"):
                    new = step(state, params, step_control(config, dt))
                if new.n % output["diagnostics_every"] == 0:
                    with timer.phase("diagnostics"):
                        row = diagnostics_row(new, state, params)
                    if not math.isfinite(row["Z"]):
                        raise NumericalInstability("Z", new.n)
                    rows.append(row)
                    log_step_event(new.n, new.t, new.dt_prev, E_total=row["E_total"],
                                   residual=row["residual"], Z=row["Z"])
            except (StepFailure, NumericalInstability) as e:
                if isinstance(e, CflViolation):
                    logger.error(f"❌ [Runner] {e}")
                failure = e
                break
            state = new

            with timer.phase("output"):
                every = output["checkpoint_every"]
                if (every and state.n % every == 0) or scheduler.consume():
                    checkpoints.append(save_checkpoint(state, params, out_dir / f"checkpoint_{state.n:06d}.pfsi"))
                if output["vtk_every"] and state.n % output["vtk_every"] == 0:
                    write_vtk(state, params, out_dir / f"snapshot_{state.n:06d}.vtk")

    series = series_frame(rows)
    write_table(series, out_dir / "series.csv", kind="series")
    checkpoints.append(save_checkpoint(state, params, out_dir / "final.pfsi"))
    if output["vtk_every"] and state.n % output["vtk_every"] != 0:
        write_vtk(state, params, out_dir / f"snapshot_{state.n:06d}.vtk")

    timings = timer.as_dict()
    if output["excel"]:
        summary: Dict[str, Any] = {
            "name": config["run"]["name"],
            "steps": state.n,
            "t_final": state.t,
            "status": "failed" if failure else "completed",
            "model_h": params.model_h,
            "existence_horizon": horizon,
            "wall_time": format_duration(sum(timings.values())),
        }
        if failure is not None:
            summary["error"] = str(failure)
        write_summary_workbook(out_dir / "summary.xlsx", f"Run {config['run']['name']}", summary,
                               {"series": series}, chart={"table": "series", "x": "t", "y": ["E_total", "Z"]})

    result = RunResult(state, series, out_dir, checkpoints, failure, timings)
    if failure is not None:
        logger.error(f"❌ [Runner] stopped at step {state.n}, t={state.t:.6e}: {failure}")
        raise failure
    logger.info(f"✅ [Runner] finished {state.n} steps, t={state.t:.6e} "
                f"({format_duration(sum(timings.values()))})")
    return result

