from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from lib.schedule import NoiseSchedule
from lib.utils import DomainError, ParameterError, ShapeError, as_matrix, check_same_shape


@dataclass(eq=False)
class StateBatch:
    """A batch of points x_t in R^d, all living at timestep ``t``.

    Rows are chains; the row index is the chain id used by the noise streams, offset by
    ``chain_offset`` when the batch is one chunk of a larger run.
    """

    data: np.ndarray
    t: int
    chain_offset: int = field(default=0)

    def __post_init__(self) -> None:
        self.data = as_matrix(self.data, "StateBatch.data")
        if self.data.shape[1] < 1:
            raise ShapeError("StateBatch needs d >= 1")
        if not np.all(np.isfinite(self.data)):
            raise DomainError(f"StateBatch at t={self.t} holds non-finite entries")
        if self.t < 0:
            raise ParameterError(f"timestep must be nonnegative, got {self.t}")
        self.t = int(self.t)

    @property
    def batch(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def check_schedule(self, schedule: NoiseSchedule) -> None:
        if self.t > schedule.T:
            raise ParameterError(f"StateBatch timestep {self.t} beyond schedule T={schedule.T}")

    def at(self, data: np.ndarray, t: int) -> StateBatch:
        """New batch with the same chain ids at another timestep."""
        return StateBatch(data=data, t=t, chain_offset=self.chain_offset)

    @staticmethod
    def data_level(x0: np.ndarray, chain_offset: int = 0) -> StateBatch:
        return StateBatch(data=x0, t=0, chain_offset=chain_offset)


@dataclass(eq=False)
class GaussianParams:
    """Isotropic Gaussian N(mean, var * I) per row of ``mean``."""

    mean: np.ndarray
    var: float

    def __post_init__(self) -> None:
        self.mean = as_matrix(self.mean, "GaussianParams.mean")
        if not np.isfinite(self.var) or self.var < 0.0:
            raise DomainError(f"variance must be finite and nonnegative, got {self.var}")
        if not np.all(np.isfinite(self.mean)):
            raise DomainError("Gaussian mean holds non-finite entries")
        self.var = float(self.var)

    @property
    def std(self) -> float:
        return float(np.sqrt(self.var))

    def sample(self, noise: np.ndarray) -> np.ndarray:
        noise = as_matrix(noise, "noise")
        check_same_shape(self.mean, noise, "Gaussian sample noise")
        return self.mean + self.std * noise

    def log_density(self, x: np.ndarray) -> np.ndarray:
        """Row-wise log N(x; mean, var I)."""
        if self.var == 0.0:
            raise DomainError("log density of a degenerate Gaussian (var = 0)")
        x = as_matrix(x, "x")
        check_same_shape(self.mean, x, "log density")
        return norm.logpdf(x, loc=self.mean, scale=self.std).sum(axis=1)
