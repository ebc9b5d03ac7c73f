"""
Named initial conditions.

Phase profiles are smooth and built from even (cosine / radial tanh) shapes so
the Neumann condition holds at walls. Initial velocities are projected once so
u0 starts discretely divergence free.
"""

from typing import Any, Callable, Dict, Mapping, Tuple

import numpy as np

from core.errors import ConfigurationError
from core.grid import GridSpec, MacVelocity, ScalarField, TensorField
from physics.momentum import project
from physics.params import ModelParams
from simulation.checkpoint import load_checkpoint
from simulation.state import SimState
from utils.logging_conf import get_logger

logger = get_logger(__name__)

DEFAULTS: Dict[str, Any] = {
    "phi_mean": 0.5,
    "amplitude": 0.05,
    "modes": 4,
    "radius": 0.2,
    "velocity": 0.0,
    "seed": 0,
    "checkpoint": "",
}


def _projected(u: MacVelocity) -> MacVelocity:
    if u.max_abs() == 0.0:
        return u
    projected, _ = project(u, rho=1.0, dt=1.0)
    return projected


def interface_profile(distance: np.ndarray, h: float) -> np.ndarray:
    """0 inside (distance < 0), 1 outside, tanh transition of width ~ h."""
    return 0.5 * (1.0 + np.tanh(distance / (np.sqrt(2.0) * h)))


def swirl_velocity(grid: GridSpec, speed: float) -> MacVelocity:
    """Single vortex from psi = A sin^2(pi x/Lx) sin^2(pi y/Ly); vanishes on the walls."""
    lx, ly = grid.extents[0], grid.extents[1]
    amp = speed * ly / np.pi

    def ux(x, y, *rest):
        return amp * np.sin(np.pi * x / lx) ** 2 * (np.pi / ly) * np.sin(2 * np.pi * y / ly)

    def uy(x, y, *rest):
        return -amp * (np.pi / lx) * np.sin(2 * np.pi * x / lx) * np.sin(np.pi * y / ly) ** 2

    funcs = [ux, uy] + [lambda *c: 0.0 * c[0]] * (grid.dim - 2)
    return MacVelocity.from_functions(grid, funcs)


def taylor_green_velocity(grid: GridSpec, speed: float) -> MacVelocity:
    kx = 2 * np.pi / grid.extents[0]
    ky = 2 * np.pi / grid.extents[1]

    def ux(x, y, *rest):
        return speed * np.sin(kx * x) * np.cos(ky * y)

    def uy(x, y, *rest):
        return -speed * np.cos(kx * x) * np.sin(ky * y)

    funcs = [ux, uy] + [lambda *c: 0.0 * c[0]] * (grid.dim - 2)
    return MacVelocity.from_functions(grid, funcs)


def _rest(grid, params, opts):
    return MacVelocity.zeros(grid), ScalarField.full(grid, opts["phi_mean"])


def _spinodal(grid, params, opts):
    rng = np.random.default_rng(opts["seed"])
    coords = grid.cell_coordinates()
    values = np.full(grid.shape, float(opts["phi_mean"]))
    modes = int(opts["modes"])
    perturbation = np.zeros(grid.shape)
    for index in np.ndindex(*([modes] * grid.dim)):
        if sum(index) == 0:
            continue
        shape = np.ones(grid.shape)
        for a, k in enumerate(index):
            scale = (2.0 if grid.periodic else 1.0) * np.pi * k / grid.extents[a]
            phase = rng.uniform(0.0, 2.0 * np.pi) if grid.periodic else 0.0
            shape = shape * np.cos(scale * coords[a] + phase)
        perturbation += rng.standard_normal() * shape
    peak = np.max(np.abs(perturbation))
    if peak > 0:
        values += opts["amplitude"] * perturbation / peak
    return MacVelocity.zeros(grid), ScalarField(grid, values)


def _bubble(grid, params, opts):
    coords = grid.cell_coordinates()
    r = np.sqrt(sum((c - 0.5 * L) ** 2 for c, L in zip(coords, grid.extents)))
    phi = interface_profile(r - opts["radius"], params.h)
    return swirl_velocity(grid, opts["velocity"]), ScalarField(grid, phi)


def _channel_thrombus(grid, params, opts):
    coords = grid.cell_coordinates()
    # clot attached to the lower y wall at mid-channel
    centre = [0.5 * L for L in grid.extents]
    centre[1] = 0.0
    r = np.sqrt(sum((c - x0) ** 2 for c, x0 in zip(coords, centre)))
    phi = interface_profile(r - opts["radius"], params.h)
    ly = grid.extents[1]
    speed = opts["velocity"]
    funcs = [lambda x, y, *rest: speed * np.sin(np.pi * y / ly) * np.ones_like(x)]
    funcs += [lambda *c: 0.0 * c[0]] * (grid.dim - 1)
    return MacVelocity.from_functions(grid, funcs), ScalarField(grid, phi)


def _taylor_green(grid, params, opts):
    if not grid.periodic:
        raise ConfigurationError("taylor-green preset needs a periodic grid")
    return taylor_green_velocity(grid, opts["velocity"]), ScalarField.full(grid, opts["phi_mean"])


def _swirl(grid, params, opts):
    return swirl_velocity(grid, opts["velocity"]), ScalarField.full(grid, opts["phi_mean"])


PRESET_BUILDERS: Dict[str, Callable] = {
    "rest": _rest,
    "spinodal": _spinodal,
    "bubble": _bubble,
    "channel-thrombus": _channel_thrombus,
    "taylor-green": _taylor_green,
    "swirl": _swirl,
}


def params_differences(stored: ModelParams, configured: ModelParams) -> Dict[str, Tuple[Any, Any]]:
    """name -> (checkpoint value, configured value) for every coefficient that differs."""
    old, new = stored.as_dict(), configured.as_dict()
    return {name: (old[name], new[name]) for name in new if old.get(name) != new[name]}


def build_initial_state(preset: str, grid: GridSpec, params: ModelParams,
                        options: Mapping[str, Any] = None) -> SimState:
    """
    Build the step-0 state for ``preset`` ("checkpoint" loads options["checkpoint"]).

    F starts at the identity for every analytic preset.
    """
    opts = dict(DEFAULTS)
    opts.update(options or {})
    if preset == "checkpoint":
        state, stored = load_checkpoint(opts["checkpoint"])
        if state.grid != grid:
            raise ConfigurationError(f"checkpoint grid {state.grid} does not match configured grid {grid}")
        changed = params_differences(stored, params)
        if changed:
            logger.warning(f"⚠️ [Timeloop] checkpoint was written with other parameters, "
                           f"continuing with the configured ones: {changed}")
        return state
    if preset not in PRESET_BUILDERS:
        raise ConfigurationError(f"unknown preset '{preset}'")
    u, phi = PRESET_BUILDERS[preset](grid, params, opts)
    logger.info(f"🧪 [Timeloop] initial preset '{preset}' on {grid.cells} ({grid.bc_mode.value})")
    return SimState.initial(_projected(u), phi, TensorField.identity(grid), params)
