from .state import OdeState, sigma_level, to_ode_state, from_ode_state
from .euler import (
    Integrator,
    ddim_euler_step,
    prob_flow_euler_step,
    score_from_eps,
    encode,
    integrate,
    terminal_gap,
)

__all__ = [
    "OdeState",
    "sigma_level",
    "to_ode_state",
    "from_ode_state",
    "Integrator",
    "ddim_euler_step",
    "prob_flow_euler_step",
    "score_from_eps",
    "encode",
    "integrate",
    "terminal_gap",
]
