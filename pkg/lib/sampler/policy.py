from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from lib.schedule import NoiseSchedule, Trajectory
from lib.utils import RADICAND_TOL, DomainError, ParameterError, ShapeError

logger = logging.getLogger(__name__)


class PolicyKind(Enum):
    ETA = "eta"
    SIGMA_HAT = "sigma_hat"
    EXPLICIT = "explicit"


def _levels(schedule: NoiseSchedule, traj: Trajectory, i: int) -> tuple[float, float]:
    """(alpha_{tau_{i-1}}, alpha_{tau_i}) for a transition 1 <= i <= S."""
    if not 1 <= i <= traj.S:
        raise ParameterError(f"transition index {i} outside [1, {traj.S}]")
    if traj.T != schedule.T:
        raise ParameterError(f"trajectory ends at {traj.T}, schedule has T={schedule.T}")
    return float(schedule.alphas[traj.prev(i)]), float(schedule.alphas[traj.at(i)])


def sigma_eta(schedule: NoiseSchedule, traj: Trajectory, i: int, eta: float) -> float:
    """eta * sqrt((1 - a_prev)/(1 - a)) * sqrt(1 - a/a_prev); 0 on the final transition (a_prev = 1)."""
    if eta < 0.0:
        raise ParameterError(f"eta must be nonnegative, got {eta}")
    alpha_prev, alpha = _levels(schedule, traj, i)
    return float(eta * np.sqrt((1.0 - alpha_prev) / (1.0 - alpha)) * np.sqrt(1.0 - alpha / alpha_prev))


def sigma_hat(schedule: NoiseSchedule, traj: Trajectory, i: int) -> float:
    """sqrt(1 - a/a_prev): the stepwise beta used as variance."""
    alpha_prev, alpha = _levels(schedule, traj, i)
    return float(np.sqrt(1.0 - alpha / alpha_prev))


@dataclass(frozen=True, eq=False)
class SigmaPolicy:
    """Rule for the per-transition noise scale of the generative step.

    ``resolve`` returns two scales: the one entering the direction radicand and the one
    multiplying the fresh noise. They coincide except for the sigma-hat variant, whose
    direction term keeps the eta = 1 scale.
    """

    kind: PolicyKind
    eta: float = field(default=0.0)
    values: Optional[np.ndarray] = field(default=None)

    def __post_init__(self) -> None:
        if self.kind is PolicyKind.ETA and (not np.isfinite(self.eta) or self.eta < 0.0):
            raise ParameterError(f"eta must be a nonnegative real, got {self.eta}")
        if self.kind is PolicyKind.EXPLICIT:
            if self.values is None:
                raise ParameterError("an explicit policy needs a sigma vector")
            values = np.asarray(self.values, dtype=np.float64)
            if values.ndim != 1:
                raise ShapeError(f"explicit sigma must be a vector, got shape {values.shape}")
            if np.any(~np.isfinite(values)) or np.any(values < 0.0):
                raise ParameterError("explicit sigma entries must be finite and nonnegative")
            object.__setattr__(self, "values", values)

    @staticmethod
    def from_eta(eta: float) -> SigmaPolicy:
        return SigmaPolicy(kind=PolicyKind.ETA, eta=float(eta))

    @staticmethod
    def hat() -> SigmaPolicy:
        return SigmaPolicy(kind=PolicyKind.SIGMA_HAT)

    @staticmethod
    def explicit(values: np.ndarray) -> SigmaPolicy:
        return SigmaPolicy(kind=PolicyKind.EXPLICIT, values=np.asarray(values, dtype=np.float64))

    @property
    def tag(self) -> str:
        if self.kind is PolicyKind.ETA:
            return f"eta={self.eta:g}"
        return self.kind.value

    def resolve(self, schedule: NoiseSchedule, traj: Trajectory, i: int) -> tuple[float, float]:
        """(sigma for the direction radicand, sigma on the noise) at transition i."""
        if self.kind is PolicyKind.ETA:
            sigma = sigma_eta(schedule, traj, i, self.eta)
            return sigma, sigma
        if self.kind is PolicyKind.SIGMA_HAT:
            return sigma_eta(schedule, traj, i, 1.0), sigma_hat(schedule, traj, i)

        _levels(schedule, traj, i)
        if self.values.shape[0] != traj.S:
            raise ShapeError(f"explicit sigma has {self.values.shape[0]} entries for S={traj.S} transitions")
        sigma = float(self.values[i - 1])
        return sigma, sigma

    def check(self, schedule: NoiseSchedule, traj: Trajectory) -> None:
        """Rejects a policy whose direction radicand goes negative on any transition of ``traj``."""
        for i in range(1, traj.S + 1):
            direction_sigma, _ = self.resolve(schedule, traj, i)
            bound = 1.0 - schedule.alphas[traj.prev(i)]
            if direction_sigma**2 > bound + RADICAND_TOL:
                raise DomainError(
                    f"{self.tag}: sigma^2 = {direction_sigma**2:.3e} exceeds 1 - alpha = {bound:.3e} "
                    f"at transition {i} ({traj.at(i)} -> {traj.prev(i)})"
                )

    def noise_scales(self, schedule: NoiseSchedule, traj: Trajectory) -> np.ndarray:
        """Noise-side scale per transition, index i-1 for transition i."""
        return np.array([self.resolve(schedule, traj, i)[1] for i in range(1, traj.S + 1)])
