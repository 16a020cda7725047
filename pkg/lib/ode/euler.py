"""Euler discretizations of the deterministic generative ODE in (x_bar, sigma) coordinates."""

from __future__ import annotations

import logging
from enum import Enum
from typing import Callable, Optional

import numpy as np

from lib.denoiser import DenoiserModel, evaluate
from lib.gaussian import StateBatch
from lib.ode.state import OdeState, from_ode_state, sigma_level, to_ode_state
from lib.schedule import NoiseSchedule, Trajectory
from lib.utils import DomainError, ParameterError, as_matrix, check_same_shape

logger = logging.getLogger(__name__)


class Integrator(Enum):
    DDIM = "ddim"
    PROB_FLOW = "prob_flow"


def _slope(model: DenoiserModel, x: StateBatch, eps_hat: Optional[np.ndarray]) -> np.ndarray:
    if eps_hat is None:
        return evaluate(model, x)
    eps_hat = as_matrix(eps_hat, "eps_hat")
    check_same_shape(x.data, eps_hat, "frozen slope")
    return eps_hat


def _check_step(schedule: NoiseSchedule, x: StateBatch, t_from: int, t_to: int) -> None:
    if x.t != t_from:
        raise ParameterError(f"step starts at t={t_from}, state is at t={x.t}")
    if t_from == t_to:
        raise ParameterError(f"empty step at t={t_from}")
    schedule.check_index(t_from, low=0)
    schedule.check_index(t_to, low=0)


def ddim_euler_step(
    schedule: NoiseSchedule,
    x: StateBatch,
    t_from: int,
    t_to: int,
    model: DenoiserModel,
    eps_hat: Optional[np.ndarray] = None,
) -> StateBatch:
    """x_bar(t_to) = x_bar(t_from) + (sigma(t_to) - sigma(t_from)) * eps_hat.

    Works in both directions. ``eps_hat`` freezes the slope instead of evaluating the model.
    """
    _check_step(schedule, x, t_from, t_to)
    if t_from < 1 and eps_hat is None:
        raise DomainError("the slope is undefined at t = 0; pass eps_hat or start from t >= 1")

    state = to_ode_state(schedule, x)
    sigma_to = sigma_level(schedule, t_to)
    slope = _slope(model, x, eps_hat)

    moved = OdeState(state.x_bar + (sigma_to - state.sigma_level) * slope, sigma_to, x.chain_offset)
    return from_ode_state(schedule, moved, t_to)


def prob_flow_euler_step(
    schedule: NoiseSchedule,
    x: StateBatch,
    t_from: int,
    t_to: int,
    model: DenoiserModel,
    eps_hat: Optional[np.ndarray] = None,
) -> StateBatch:
    """x_bar(t_to) = x_bar(t_from) + 0.5 (sigma(t_to)^2 - sigma(t_from)^2) / sigma(t_from) * eps_hat."""
    _check_step(schedule, x, t_from, t_to)
    if t_from < 1:
        raise DomainError("the probability-flow step divides by sigma(t_from); needs t_from >= 1")

    state = to_ode_state(schedule, x)
    sigma_to = sigma_level(schedule, t_to)
    slope = _slope(model, x, eps_hat)

    increment = 0.5 * (sigma_to**2 - state.sigma_level**2) / state.sigma_level
    moved = OdeState(state.x_bar + increment * slope, sigma_to, x.chain_offset)
    return from_ode_state(schedule, moved, t_to)


STEPS: dict[Integrator, Callable[..., StateBatch]] = {
    Integrator.DDIM: ddim_euler_step,
    Integrator.PROB_FLOW: prob_flow_euler_step,
}


def score_from_eps(schedule: NoiseSchedule, eps_hat: np.ndarray, t: int) -> np.ndarray:
    """Score of the x_bar marginal at level t: -eps_hat / sigma(t)."""
    if t < 1:
        raise DomainError("the score bridge needs sigma(t) > 0, i.e. t >= 1")
    return -as_matrix(eps_hat, "eps_hat") / sigma_level(schedule, t)


def encode(schedule: NoiseSchedule, x0: StateBatch, traj: Trajectory, model: DenoiserModel) -> StateBatch:
    """Runs the DDIM iterate from t = 0 up to T over ``traj``.

    The opening step 0 -> tau_1 takes its slope from the model at tau_1 on sqrt(alpha_{tau_1}) x_0,
    since the noise prediction is undefined at t = 0. Later steps use the model at the step start.
    """
    if x0.t != 0:
        raise ParameterError(f"encoding starts at the data level, got t={x0.t}")
    if traj.T != schedule.T:
        raise ParameterError(f"trajectory ends at {traj.T}, schedule has T={schedule.T}")

    first = traj.at(1)
    carried = x0.at(np.sqrt(schedule.alphas[first]) * x0.data, first)
    x = ddim_euler_step(schedule, x0, 0, first, model, eps_hat=evaluate(model, carried))

    for i in range(1, traj.S):
        x = ddim_euler_step(schedule, x, traj.at(i), traj.at(i + 1), model)
    return x


def integrate(
    schedule: NoiseSchedule,
    x_T: StateBatch,
    traj: Trajectory,
    model: DenoiserModel,
    integrator: Integrator | str = Integrator.DDIM,
) -> StateBatch:
    """Generation direction: tau_S = T down to tau_0 = 0 with the chosen Euler iterate."""
    step = STEPS[Integrator(integrator)]
    if x_T.t != schedule.T or traj.T != schedule.T:
        raise ParameterError(f"integration starts at T={schedule.T}, got state at t={x_T.t}")

    x = x_T
    for i in range(traj.S, 0, -1):
        x = step(schedule, x, traj.at(i), traj.prev(i), model)
    return x


def terminal_gap(schedule: NoiseSchedule, x_T: StateBatch, traj: Trajectory, model: DenoiserModel) -> float:
    """Mean Euclidean distance between the DDIM and probability-flow terminal states."""
    ddim = integrate(schedule, x_T, traj, model, Integrator.DDIM)
    prob_flow = integrate(schedule, x_T, traj, model, Integrator.PROB_FLOW)
    gap = float(np.mean(np.linalg.norm(ddim.data - prob_flow.data, axis=1)))
    logger.debug("integrator gap at S=%d: %.4e", traj.S, gap)
    return gap
