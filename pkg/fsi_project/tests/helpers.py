"""Field builders shared by the test modules."""

import numpy as np

from core.grid import GridSpec, MacVelocity, ScalarField, TensorField
from physics.params import ModelParams
from simulation.state import SimState


def rest_state(grid: GridSpec, params: ModelParams, phi_value: float = 0.5) -> SimState:
    return SimState.initial(MacVelocity.zeros(grid), ScalarField.full(grid, phi_value),
                            TensorField.identity(grid), params)


def random_velocity(grid: GridSpec, seed: int = 0) -> MacVelocity:
    rng = np.random.default_rng(seed)
    comps = tuple(rng.standard_normal(grid.face_shape(a)) for a in range(grid.dim))
    return MacVelocity(grid, comps).with_no_penetration()
