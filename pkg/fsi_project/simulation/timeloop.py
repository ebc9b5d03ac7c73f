"""
One time step of the splitting scheme: Cahn-Hilliard, then F transport,
then momentum, each using the freshest fields available.
"""

import math
from typing import Optional

from core.errors import CflViolation, ConvergenceError, NumericalInstability
from physics.elasticity import advective_limit, transport_step
from physics.momentum import momentum_step
from physics.params import ModelParams
from physics.phasefield import cahn_hilliard_step
from simulation.state import SimState, StepControl
from utils.logging_conf import get_logger

logger = get_logger(__name__)


def cfl_dt(state: SimState, params: Optional[ModelParams] = None, safety: float = 0.5,
           dt_max: float = math.inf) -> float:
    """
    safety * min spacing / max|u|; ``dt_max`` when the fluid is at rest.

    Diffusion is implicit, so only the advective limit of the velocity (shared by
    phase advection and F transport) enters.
    """
    speed = state.u.max_abs()
    if speed == 0.0:
        return dt_max
    return safety * state.grid.min_spacing / speed


def _advance(state: SimState, params: ModelParams, ctrl: StepControl, dt: float) -> SimState:
    forcing = ctrl.forcing
    t_next = state.t + dt
    phase_source = forcing.phase(t_next) if forcing and forcing.phase else None
    tensor_source = forcing.tensor(state.t) if forcing and forcing.tensor else None
    momentum_source = forcing.momentum(t_next) if forcing and forcing.momentum else None

    phi_next, mu_next = cahn_hilliard_step(state.phi, state.u, state.F, dt, params,
                                           tol=ctrl.tol, max_iter=ctrl.max_iter, source=phase_source)
    F_next = transport_step(state.F, state.u, dt, backend=ctrl.backend, source=tensor_source)
    u_next, p_next = momentum_step(state.u, state.phi, phi_next, mu_next, F_next, dt, params,
                                   tol=ctrl.tol, max_iter=ctrl.max_iter, drag_sign=ctrl.drag_sign,
                                   external=momentum_source)
    return SimState(t=t_next, n=state.n + 1, u=u_next, p=p_next, phi=phi_next, mu=mu_next,
                    F=F_next, u_prev=state.u, phi_prev=state.phi, F_prev=state.F, dt_prev=dt)


def step(state: SimState, params: ModelParams, ctrl: StepControl) -> SimState:
    """
    Advance ``state`` by ``ctrl.dt``.

    A solver failure is retried once with dt/2 (the returned state then
    advanced by dt/2 only). CFL violations are not retried.

    Raises:
        CflViolation: ctrl.dt exceeds the advective limit; carries suggested_dt
        ConvergenceError: the retry failed as well
        NumericalInstability: a field became non-finite; names the field
    """
    dt = ctrl.dt
    limit = advective_limit(state.u)
    if dt > limit:
        raise CflViolation(f"dt={dt:.3e} exceeds the CFL limit, use dt <= {limit:.3e}",
                           suggested_dt=limit)
    try:
        new = _advance(state, params, ctrl, dt)
    except ConvergenceError as e:
        logger.warning(f"⚠️ [Timeloop] step {state.n + 1} failed ({e}); retrying with dt={dt / 2:.3e}")
        new = _advance(state, params, ctrl, dt / 2)

    for name, field in new.fields():
        if not field.is_finite():
            logger.error(f"❌ [Timeloop] non-finite '{name}' after step {new.n}")
            raise NumericalInstability(name, new.n)
    return new
