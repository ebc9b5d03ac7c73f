"""
VTK legacy ASCII (STRUCTURED_POINTS) snapshots.

Cell-centred samples are written as point data on a lattice whose points sit at
the cell centres (origin h/2, spacing h). 2-D grids get a unit third dimension.
"""

from pathlib import Path

import numpy as np

from physics.elasticity import trace_elastic
from physics.momentum import reconstruct_pressure
from physics.params import ModelParams
from simulation.diagnostics import velocity_cells
from simulation.state import SimState
from utils.logging_conf import get_logger, log_output_event

logger = get_logger(__name__)


def _flat(values: np.ndarray) -> np.ndarray:
    # VTK point order: x fastest
    return np.asarray(values).ravel(order="F")


def _scalars(name: str, values: np.ndarray) -> str:
    body = "\n".join(f"{v:.9e}" for v in _flat(values))
    return f"SCALARS {name} double 1\nLOOKUP_TABLE default\n{body}\n"


def write_vtk(state: SimState, params: ModelParams, path) -> Path:
    """
    Write phi, p, p_original, mu, cell velocity (components and magnitude),
    tr(FF^T - I) and det F. p_original adds the capillary part back to the solver pressure.
    """
    path = Path(path)
    grid = state.grid
    dims = list(grid.cells) + [1] * (3 - grid.dim)
    spacing = list(grid.spacing) + [1.0] * (3 - grid.dim)
    origin = [0.5 * h for h in grid.spacing] + [0.0] * (3 - grid.dim)

    vel = velocity_cells(state.u)
    speed = np.sqrt(np.sum(vel ** 2, axis=0))
    det = np.linalg.det(state.F.cellwise_matrices())

    parts = [
        "# vtk DataFile Version 3.0\n",
        f"phase-field FSI t={state.t:.9e} step={state.n}\n",
        "ASCII\n",
        "DATASET STRUCTURED_POINTS\n",
        "DIMENSIONS {} {} {}\n".format(*dims),
        "ORIGIN {:.9e} {:.9e} {:.9e}\n".format(*origin),
        "SPACING {:.9e} {:.9e} {:.9e}\n".format(*spacing),
        f"POINT_DATA {grid.size}\n",
        _scalars("phi", state.phi.values),
        _scalars("p", state.p.values),
        _scalars("p_original", reconstruct_pressure(state.p, state.phi, params).values),
        _scalars("mu", state.mu.values),
        _scalars("u_magnitude", speed),
    ]
    for a, name in enumerate("xyz"[:grid.dim]):
        parts.append(_scalars(f"u_{name}", vel[a]))
    parts.append(_scalars("trace_elastic", trace_elastic(state.F).values))
    parts.append(_scalars("det_F", det))

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(parts), encoding="ascii")
    except OSError as e:
        log_output_event("vtk", str(path), "failed", error=e)
        raise
    log_output_event("vtk", str(path), "completed", step=state.n)
    return path
