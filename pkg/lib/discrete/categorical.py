"""Categorical analog of the sigma-family: x_t is a distribution over K categories and the
reverse kernel mixes x_t, x_0 and the uniform vector."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import rel_entr

from lib.utils import DomainError, ParameterError, ShapeError

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-12
# mixture weights this far below zero are round-off
WEIGHT_TOL = 1e-15


@dataclass(eq=False)
class CategoricalState:
    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.shape[0] < 1:
            raise ShapeError(f"a categorical state is a vector of length K >= 1, got shape {probs.shape}")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0.0):
            raise DomainError("category probabilities must be finite and nonnegative")
        if abs(probs.sum() - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"category probabilities must sum to 1, got {probs.sum()!r}")
        self.probs = probs

    @property
    def K(self) -> int:
        return self.probs.shape[0]

    @staticmethod
    def one_hot(k: int, K: int) -> CategoricalState:
        if not 0 <= k < K:
            raise ParameterError(f"category {k} outside [0, {K})")
        probs = np.zeros(K)
        probs[k] = 1.0
        return CategoricalState(probs)

    @staticmethod
    def uniform(K: int) -> CategoricalState:
        return CategoricalState(np.full(K, 1.0 / K))


@dataclass(frozen=True, eq=False)
class DiscreteSchedule:
    """alpha_0 = 1 non-increasing to alpha_T = 0."""

    alphas: np.ndarray

    def __post_init__(self) -> None:
        alphas = np.asarray(self.alphas, dtype=np.float64)
        if alphas.ndim != 1 or alphas.shape[0] < 2:
            raise ParameterError("alphas must be a vector of length T+1 with T >= 1")
        if alphas[0] != 1.0 or alphas[-1] != 0.0:
            raise ParameterError(f"endpoints must be exactly 1 and 0, got {alphas[0]!r} and {alphas[-1]!r}")
        if np.any(np.diff(alphas) > 0.0):
            raise ParameterError("alphas must be non-increasing")
        alphas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)

    @property
    def T(self) -> int:
        return self.alphas.shape[0] - 1

    def check_index(self, t: int, low: int = 1) -> None:
        if not low <= t <= self.T:
            raise ParameterError(f"timestep {t} outside [{low}, {self.T}]")

    @staticmethod
    def linear(T: int) -> DiscreteSchedule:
        if T < 1:
            raise ParameterError(f"T must be positive, got {T}")
        alphas = 1.0 - np.arange(T + 1) / T
        alphas[-1] = 0.0
        return DiscreteSchedule(alphas)

    @staticmethod
    def random(T: int, rng: np.random.Generator) -> DiscreteSchedule:
        interior = np.sort(rng.uniform(0.0, 1.0, size=T - 1))[::-1]
        return DiscreteSchedule(np.concatenate([[1.0], interior, [0.0]]))


def feasible_sigma_bound(schedule: DiscreteSchedule, t: int) -> float:
    """Largest sigma_t keeping all three mixture weights nonnegative."""
    schedule.check_index(t)
    prev, cur = schedule.alphas[t - 1], schedule.alphas[t]
    by_data = prev / cur if cur > 0.0 else np.inf
    by_uniform = (1.0 - prev) / (1.0 - cur) if cur < 1.0 else np.inf
    return float(min(by_data, by_uniform))


def mixture_weights(schedule: DiscreteSchedule, t: int, sigma_t: float) -> tuple[float, float, float]:
    """(weight on x_t, weight on x_0, weight on uniform) of the reverse kernel at step t."""
    schedule.check_index(t)
    prev, cur = schedule.alphas[t - 1], schedule.alphas[t]
    weights = {
        "x_t": sigma_t,
        "x_0": prev - sigma_t * cur,
        "uniform": (1.0 - prev) - (1.0 - cur) * sigma_t,
    }
    for name, value in weights.items():
        if value < -WEIGHT_TOL:
            raise DomainError(
                f"sigma_t={sigma_t:.6g} at t={t} gives negative {name} weight {value:.3e} "
                f"(feasible range [0, {feasible_sigma_bound(schedule, t):.6g}])"
            )
    return tuple(max(v, 0.0) for v in weights.values())


def _mix(weights: tuple[float, float, float], x_t: CategoricalState, x0: CategoricalState) -> CategoricalState:
    if x_t.K != x0.K:
        raise ShapeError(f"K mismatch: {x_t.K} and {x0.K}")
    w_t, w_0, w_u = weights
    probs = w_t * x_t.probs + w_0 * x0.probs + w_u / x_t.K
    return CategoricalState(probs)


def cat_forward_marginal(schedule: DiscreteSchedule, x0: CategoricalState, t: int) -> CategoricalState:
    """Cat(alpha_t x_0 + (1 - alpha_t) / K)."""
    schedule.check_index(t, low=0)
    alpha = schedule.alphas[t]
    return CategoricalState(alpha * x0.probs + (1.0 - alpha) / x0.K)


def cat_reverse_conditional(
    schedule: DiscreteSchedule, x_t: CategoricalState, x0: CategoricalState, t: int, sigma_t: float
) -> CategoricalState:
    return _mix(mixture_weights(schedule, t, sigma_t), x_t, x0)


Predictor = Callable[[CategoricalState, int], CategoricalState]


def identity_guess(x_t: CategoricalState, t: int) -> CategoricalState:
    return x_t


def uniform_guess(x_t: CategoricalState, t: int) -> CategoricalState:
    return CategoricalState.uniform(x_t.K)


def cat_reverse_model(
    schedule: DiscreteSchedule, x_t: CategoricalState, t: int, f: Predictor, sigma_t: float
) -> CategoricalState:
    """The reverse kernel with x_0 replaced by the prediction f(x_t, t)."""
    prediction = f(x_t, t)
    if not isinstance(prediction, CategoricalState):
        prediction = CategoricalState(prediction)
    return _mix(mixture_weights(schedule, t, sigma_t), x_t, prediction)


def cat_kl_and_bound(
    schedule: DiscreteSchedule,
    x_t: CategoricalState,
    x0: CategoricalState,
    t: int,
    sigma_t: float,
    f: Predictor,
) -> tuple[float, float]:
    """KL(q || p) of the reverse kernels and its convexity bound w_0 * KL(x_0 || f(x_t)).

    Either value may be +inf when the prediction misses mass of x_0.
    """
    q = cat_reverse_conditional(schedule, x_t, x0, t, sigma_t)
    p = cat_reverse_model(schedule, x_t, t, f, sigma_t)
    kl = float(rel_entr(q.probs, p.probs).sum())

    _, w_0, _ = mixture_weights(schedule, t, sigma_t)
    if w_0 == 0.0:
        return kl, 0.0
    prediction = f(x_t, t)
    prediction = prediction.probs if isinstance(prediction, CategoricalState) else np.asarray(prediction)
    bound = float(w_0 * rel_entr(x0.probs, prediction).sum())
    return kl, bound


def cat_reverse_chain(
    schedule: DiscreteSchedule,
    states: list[CategoricalState],
    sigmas: np.ndarray,
    f: Predictor,
    keep_path: bool = False,
) -> tuple[list[CategoricalState], Optional[list[list[CategoricalState]]]]:
    """Applies the model kernel from t = T down to 1 to every state in ``states``.

    ``sigmas[t-1]`` is the scale of step t; the whole vector is checked before any step.
    """
    sigmas = np.asarray(sigmas, dtype=np.float64).ravel()
    if sigmas.shape[0] != schedule.T:
        raise ShapeError(f"{sigmas.shape[0]} sigmas for T={schedule.T}")
    for t in range(1, schedule.T + 1):
        mixture_weights(schedule, t, float(sigmas[t - 1]))

    current = list(states)
    path = [current] if keep_path else None
    for t in range(schedule.T, 0, -1):
        current = [cat_reverse_model(schedule, x, t, f, float(sigmas[t - 1])) for x in current]
        if path is not None:
            path.append(current)

    logger.debug("ran categorical reverse chain over %d states, T=%d", len(states), schedule.T)
    return current, path


def marginalize_reverse(
    schedule: DiscreteSchedule, x0: CategoricalState, t: int, sigma_t: float
) -> CategoricalState:
    """sum over one-hot x_t of q(x_{t-1} | x_t, x_0) q(x_t | x_0), by exhaustive summation."""
    marginal = cat_forward_marginal(schedule, x0, t)
    total = np.zeros(x0.K)
    for k in range(x0.K):
        total += marginal.probs[k] * cat_reverse_conditional(schedule, CategoricalState.one_hot(k, x0.K), x0, t, sigma_t).probs
    return CategoricalState(total)
