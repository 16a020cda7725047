from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lib.denoiser.base import ALPHA_FLOOR
from lib.gaussian import StateBatch
from lib.schedule import NoiseSchedule
from lib.utils import DomainError, ParameterError, as_matrix


def sigma_level(schedule: NoiseSchedule, t: int) -> float:
    """sigma(t) = sqrt((1 - alpha_t) / alpha_t), zero at the data level."""
    schedule.check_index(t, low=0)
    alpha = schedule.alphas[t]
    if alpha < ALPHA_FLOOR:
        raise DomainError(f"alpha_{t} = {alpha:.3e} underflows the rescaled coordinates")
    return float(np.sqrt((1.0 - alpha) / alpha))


@dataclass(eq=False)
class OdeState:
    """Rescaled coordinates x_bar = x / sqrt(alpha) at noise level sigma = sqrt((1 - alpha)/alpha)."""

    x_bar: np.ndarray
    sigma_level: float
    chain_offset: int = 0

    def __post_init__(self) -> None:
        self.x_bar = as_matrix(self.x_bar, "OdeState.x_bar")
        if not np.isfinite(self.sigma_level) or self.sigma_level < 0.0:
            raise ParameterError(f"sigma level must be finite and nonnegative, got {self.sigma_level}")
        self.sigma_level = float(self.sigma_level)


def to_ode_state(schedule: NoiseSchedule, x: StateBatch) -> OdeState:
    sigma = sigma_level(schedule, x.t)
    return OdeState(x_bar=x.data * np.sqrt(1.0 + sigma**2), sigma_level=sigma, chain_offset=x.chain_offset)


def from_ode_state(schedule: NoiseSchedule, s: OdeState, t: int) -> StateBatch:
    """x = x_bar / sqrt(sigma^2 + 1); ``s.sigma_level`` must be the level of ``t``."""
    expected = sigma_level(schedule, t)
    if not np.isclose(s.sigma_level, expected, rtol=1e-12, atol=0.0):
        raise ParameterError(f"state is at sigma={s.sigma_level:.6g}, timestep {t} has sigma={expected:.6g}")
    return StateBatch(data=s.x_bar / np.sqrt(s.sigma_level**2 + 1.0), t=t, chain_offset=s.chain_offset)
