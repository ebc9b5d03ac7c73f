"""
Simulation state, step control and optional manufactured forcing.
"""

from dataclasses import dataclass, replace
from typing import Callable, Iterator, Optional, Tuple

import numpy as np

from core.grid import GridSpec, MacVelocity, ScalarField, TensorField, require_same_grid
from core.solvers import DEFAULT_MAX_ITER, DEFAULT_TOL
from physics.params import ModelParams
from physics.phasefield import chemical_potential


@dataclass
class Forcing:
    """
    Time-dependent source terms, each a callable of t (any may be None).

    phase(t) -> cell array, tensor(t) -> (d, d, *cells) array,
    momentum(t) -> MacVelocity.
    """
    phase: Optional[Callable[[float], np.ndarray]] = None
    tensor: Optional[Callable[[float], np.ndarray]] = None
    momentum: Optional[Callable[[float], MacVelocity]] = None


@dataclass
class StepControl:
    dt: float
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    backend: str = "numpy"
    drag_sign: float = 1.0
    forcing: Optional[Forcing] = None

    @property
    def forced(self) -> bool:
        return self.forcing is not None


@dataclass
class SimState:
    """Fields at level n plus the level n-1 copies used by time-derivative diagnostics."""
    t: float
    n: int
    u: MacVelocity
    p: ScalarField
    phi: ScalarField
    mu: ScalarField
    F: TensorField
    u_prev: MacVelocity
    phi_prev: ScalarField
    F_prev: TensorField
    dt_prev: float = 0.0

    def __post_init__(self):
        require_same_grid(self.u.grid, self.p.grid, self.phi.grid, self.mu.grid, self.F.grid,
                          self.u_prev.grid, self.phi_prev.grid, self.F_prev.grid)

    @property
    def grid(self) -> GridSpec:
        return self.phi.grid

    @classmethod
    def initial(cls, u: MacVelocity, phi: ScalarField, F: TensorField, params: ModelParams,
                t: float = 0.0) -> "SimState":
        """State at step 0; mu assembled from phi and F, lagged fields equal to the current ones."""
        grid = phi.grid
        return cls(t=t, n=0, u=u, p=ScalarField.zeros(grid), phi=phi,
                   mu=chemical_potential(phi, F, params), F=F,
                   u_prev=u.copy(), phi_prev=phi.copy(), F_prev=F.copy(), dt_prev=0.0)

    def fields(self) -> Iterator[Tuple[str, object]]:
        yield "u", self.u
        yield "p", self.p
        yield "phi", self.phi
        yield "mu", self.mu
        yield "F", self.F

    def copy(self) -> "SimState":
        return replace(self, u=self.u.copy(), p=self.p.copy(), phi=self.phi.copy(), mu=self.mu.copy(),
                       F=self.F.copy(), u_prev=self.u_prev.copy(), phi_prev=self.phi_prev.copy(),
                       F_prev=self.F_prev.copy())
