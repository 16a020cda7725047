from __future__ import annotations

from dataclasses import dataclass
from typing import TypedDict

import numpy as np

from lib.denoiser import MixtureSpec
from lib.gaussian import StateBatch
from lib.sampler import NoiseStream
from lib.schedule import NoiseSchedule
from lib.utils import ParameterError, ShapeError, as_matrix


@dataclass(eq=False)
class WeightVector:
    """gamma_1..gamma_T, stored at index t-1."""

    gamma: np.ndarray

    def __post_init__(self) -> None:
        self.gamma = np.asarray(self.gamma, dtype=np.float64).ravel()
        if self.gamma.shape[0] < 1:
            raise ParameterError("a weight vector needs at least one entry")
        if not np.all(np.isfinite(self.gamma)) or np.any(self.gamma <= 0.0):
            raise ParameterError("all weights must be finite and strictly positive")

    @property
    def T(self) -> int:
        return self.gamma.shape[0]

    def at(self, t: int) -> float:
        return float(self.gamma[t - 1])

    def scaled(self, factor: float) -> WeightVector:
        return WeightVector(self.gamma * factor)

    @staticmethod
    def ones(T: int) -> WeightVector:
        return WeightVector(np.ones(T))


@dataclass(eq=False)
class SamplePlan:
    """A fixed x_0 batch with one noise matrix per timestep, shared by every objective evaluation."""

    x0: np.ndarray
    eps: np.ndarray

    def __post_init__(self) -> None:
        self.x0 = as_matrix(self.x0, "SamplePlan.x0")
        self.eps = np.asarray(self.eps, dtype=np.float64)
        if self.eps.ndim != 3 or self.eps.shape[1:] != self.x0.shape:
            raise ShapeError(f"plan noise must have shape (T, {self.x0.shape[0]}, {self.x0.shape[1]}), got {self.eps.shape}")

    @property
    def T(self) -> int:
        return self.eps.shape[0]

    @property
    def n(self) -> int:
        return self.x0.shape[0]

    @property
    def d(self) -> int:
        return self.x0.shape[1]

    def noise(self, t: int) -> np.ndarray:
        return self.eps[t - 1]

    def x_t(self, schedule: NoiseSchedule, t: int) -> StateBatch:
        self.check_schedule(schedule)
        alpha = schedule.alphas[t]
        return StateBatch(np.sqrt(alpha) * self.x0 + np.sqrt(1.0 - alpha) * self.noise(t), t=t)

    def check_schedule(self, schedule: NoiseSchedule) -> None:
        if schedule.T != self.T:
            raise ParameterError(f"plan covers T={self.T} steps, schedule has T={schedule.T}")

    @staticmethod
    def make(x0: np.ndarray, T: int, seed: int) -> SamplePlan:
        x0 = as_matrix(x0, "x0")
        stream = NoiseStream(seed=seed, d=x0.shape[1])
        eps = np.stack([stream.data_noise(t, 0, x0.shape[0]) for t in range(1, T + 1)])
        return SamplePlan(x0=x0, eps=eps)

    @staticmethod
    def from_mixture(spec: MixtureSpec, T: int, n: int, seed: int) -> SamplePlan:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDA7A]))
        return SamplePlan.make(spec.sample(n, rng), T=T, seed=seed)


class ReportRow(TypedDict):
    t: int
    kl_term: float
    l_term: float
    gamma_t: float
    residual: float


@dataclass
class ObjectiveTerms:
    """J_sigma split into the part that depends on the model and the part that does not.

    ``per_t`` holds the model-dependent term of each timestep at index t-1; ``constant_per_t``
    the model-free one (the t = 1 normalizer plus the prior KL on t = T).
    """

    per_t: np.ndarray
    constant_per_t: np.ndarray

    @property
    def theta_dependent(self) -> float:
        return float(self.per_t.sum())

    @property
    def theta_independent(self) -> float:
        return float(self.constant_per_t.sum())

    @property
    def total(self) -> float:
        return self.theta_dependent + self.theta_independent
