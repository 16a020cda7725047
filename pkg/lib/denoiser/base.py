from __future__ import annotations

from enum import Enum
from typing import Protocol, runtime_checkable

import numpy as np

from lib.gaussian import StateBatch
from lib.schedule import NoiseSchedule
from lib.utils import DomainError, ParameterError, as_matrix, check_same_shape

# below this alpha_t the division in predict_x0 is meaningless in float64
ALPHA_FLOOR = 1e-12


class DenoiserTag(Enum):
    ANALYTIC_MIXTURE = "analytic-mixture"
    TRAINED = "trained"
    CONSTANT = "constant"


@runtime_checkable
class DenoiserModel(Protocol):
    """eps_theta^{(t)}: maps a batch at timestep x.t to noise predictions of the same shape."""

    tag: DenoiserTag

    def eval(self, x: StateBatch) -> np.ndarray: ...


class ConstantDenoiser:
    """Predicts the same vector everywhere (zero by default)."""

    tag = DenoiserTag.CONSTANT

    def __init__(self, value: float | np.ndarray = 0.0) -> None:
        self.value = np.asarray(value, dtype=np.float64)

    def eval(self, x: StateBatch) -> np.ndarray:
        if x.t < 1:
            raise DomainError("noise prediction is undefined at t = 0")
        return np.broadcast_to(self.value, x.shape).copy()


def evaluate(model: DenoiserModel, x: StateBatch) -> np.ndarray:
    """Runs the model and enforces its output contract."""
    eps_hat = np.asarray(model.eval(x), dtype=np.float64)
    check_same_shape(x.data, eps_hat, f"{model.tag.value} denoiser output")
    if not np.all(np.isfinite(eps_hat)):
        raise DomainError(f"{model.tag.value} denoiser produced non-finite output at t={x.t}")
    return eps_hat


def predict_x0(schedule: NoiseSchedule, x_t: StateBatch, t: int, eps_hat: np.ndarray) -> np.ndarray:
    """Denoised observation f(x_t) = (x_t - sqrt(1 - alpha_t) eps_hat) / sqrt(alpha_t)."""
    if t < 1:
        raise ParameterError(f"predict_x0 needs t >= 1, got {t}")
    schedule.check_index(t)
    eps_hat = as_matrix(eps_hat, "eps_hat")
    check_same_shape(x_t.data, eps_hat, "predict_x0")

    alpha = schedule.alphas[t]
    if alpha < ALPHA_FLOOR:
        raise DomainError(f"alpha_{t} = {alpha:.3e} underflows the x_0 prediction")
    return (x_t.data - np.sqrt(1.0 - alpha) * eps_hat) / np.sqrt(alpha)
