from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from lib.utils import ParameterError, array_hash

logger = logging.getLogger(__name__)

DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """The decreasing sequence alpha_1..alpha_T with alpha_0 = 1 prepended.

    ``alphas[t]`` is the cumulative signal level of step t, so ``alphas`` has length T+1.
    ``beta_start``/``beta_end`` are kept only when the schedule came from the linear
    heuristic, so the run config can serialize it compactly.
    """

    alphas: np.ndarray
    beta_start: Optional[float] = field(default=None)
    beta_end: Optional[float] = field(default=None)

    def __post_init__(self) -> None:
        alphas = np.asarray(self.alphas, dtype=np.float64)
        if alphas.ndim != 1 or alphas.shape[0] < 2:
            raise ParameterError("alphas must be a vector of length T+1 with T >= 1")
        if alphas[0] != 1.0:
            raise ParameterError(f"alphas[0] must be exactly 1, got {alphas[0]!r}")
        if not np.all(np.isfinite(alphas)) or np.any(alphas <= 0.0) or np.any(alphas > 1.0):
            raise ParameterError("all alphas must lie in (0, 1]")
        if np.any(np.diff(alphas) >= 0.0):
            raise ParameterError("alphas must be strictly decreasing")

        alphas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)

    @property
    def T(self) -> int:
        return self.alphas.shape[0] - 1

    @property
    def betas(self) -> np.ndarray:
        """Stepwise betas for t = 1..T (index 0 holds beta_1)."""
        return 1.0 - self.alphas[1:] / self.alphas[:-1]

    @property
    def digest(self) -> str:
        return array_hash(self.alphas)

    def alpha(self, t: int) -> float:
        self.check_index(t, low=0)
        return float(self.alphas[t])

    def check_index(self, t: int, low: int = 1) -> None:
        if not low <= t <= self.T:
            raise ParameterError(f"timestep {t} outside [{low}, {self.T}]")

    def to_dict(self) -> dict:
        if self.beta_start is not None and self.beta_end is not None:
            return {"T": self.T, "beta_start": self.beta_start, "beta_end": self.beta_end}
        return {"alphas": self.alphas[1:].tolist()}

    @staticmethod
    def load(data: dict) -> NoiseSchedule:
        """Inverse of ``to_dict``; explicit alphas are given for t = 1..T."""
        if "alphas" in data:
            return NoiseSchedule(alphas=np.concatenate([[1.0], np.asarray(data["alphas"], dtype=np.float64)]))
        return make_linear_beta_schedule(
            T=int(data["T"]),
            beta_start=float(data.get("beta_start", DEFAULT_BETA_START)),
            beta_end=float(data.get("beta_end", DEFAULT_BETA_END)),
        )


def make_linear_beta_schedule(
    T: int,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    if T < 1:
        raise ParameterError(f"T must be a positive integer, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ParameterError(
            f"need 0 < beta_start <= beta_end < 1, got beta_start={beta_start}, beta_end={beta_end}"
        )

    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alphas = np.concatenate([[1.0], np.cumprod(1.0 - betas)])

    logger.debug("linear schedule T=%d, alpha_T=%.3e", T, alphas[-1])
    return NoiseSchedule(alphas=alphas, beta_start=beta_start, beta_end=beta_end)


def stepwise(schedule: NoiseSchedule, t: int) -> tuple[float, float]:
    """Returns (beta_t, alpha_t / alpha_{t-1}) for 1 <= t <= T."""
    schedule.check_index(t)
    alpha_step = float(schedule.alphas[t] / schedule.alphas[t - 1])
    beta = 1.0 - alpha_step
    assert beta > 0.0
    return beta, alpha_step
