from __future__ import annotations

import logging

import numpy as np
from scipy.linalg import block_diag, lstsq

from lib.denoiser import DenoiserTag
from lib.gaussian import StateBatch
from lib.objective.structs import SamplePlan, WeightVector
from lib.schedule import NoiseSchedule
from lib.utils import DomainError, ShapeError

logger = logging.getLogger(__name__)


class PerStepLinearDenoiser:
    """eps_hat = [x, 1] @ coefficients[t-1]; one independent affine map per timestep."""

    tag = DenoiserTag.TRAINED

    def __init__(self, coefficients: np.ndarray) -> None:
        coefficients = np.asarray(coefficients, dtype=np.float64)
        if coefficients.ndim != 3 or coefficients.shape[1] != coefficients.shape[2] + 1:
            raise ShapeError(f"coefficients must have shape (T, d+1, d), got {coefficients.shape}")
        self.coefficients = coefficients

    @property
    def T(self) -> int:
        return self.coefficients.shape[0]

    @property
    def d(self) -> int:
        return self.coefficients.shape[2]

    def eval(self, x: StateBatch) -> np.ndarray:
        if not 1 <= x.t <= self.T:
            raise DomainError(f"no table entry for t={x.t}")
        if x.d != self.d:
            raise ShapeError(f"state dimension {x.d}, table dimension {self.d}")
        return _homogeneous(x.data) @ self.coefficients[x.t - 1]

    @staticmethod
    def random(T: int, d: int, rng: np.random.Generator, scale: float = 0.5) -> PerStepLinearDenoiser:
        return PerStepLinearDenoiser(scale * rng.standard_normal((T, d + 1, d)))


def _homogeneous(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def fit_per_step_linear(schedule: NoiseSchedule, plan: SamplePlan, gamma: WeightVector) -> PerStepLinearDenoiser:
    """Minimizes L_gamma over per-step affine maps with one block least-squares solve.

    Rows of step t are scaled by sqrt(gamma_t). The blocks share no unknowns, so the
    minimizer does not depend on gamma.
    """
    plan.check_schedule(schedule)
    if gamma.T != plan.T:
        raise ShapeError(f"weights cover {gamma.T} steps, plan covers {plan.T}")

    blocks = []
    targets = []
    for t in range(1, plan.T + 1):
        weight = np.sqrt(gamma.at(t))
        blocks.append(weight * _homogeneous(plan.x_t(schedule, t).data))
        targets.append(weight * plan.noise(t))

    solution, _, rank, _ = lstsq(block_diag(*blocks), np.vstack(targets))
    if rank < plan.T * (plan.d + 1):
        logger.warning("per-step fit is rank deficient (rank %d of %d)", rank, plan.T * (plan.d + 1))

    return PerStepLinearDenoiser(solution.reshape(plan.T, plan.d + 1, plan.d))
