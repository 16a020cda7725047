from __future__ import annotations

import numpy as np

from lib.denoiser.base import DenoiserModel, evaluate
from lib.gaussian import StateBatch
from lib.schedule import NoiseSchedule
from lib.utils import ShapeError, as_matrix, check_same_shape


def denoising_risk(
    model: DenoiserModel, schedule: NoiseSchedule, x0: np.ndarray, t: np.ndarray, eps: np.ndarray
) -> np.ndarray:
    """Per-sample squared error ||eps_theta(x_t, t) - eps||^2 with x_t built from (x_0, t, eps).

    Models evaluate one timestep per call, so rows are grouped by t.
    """
    x0 = as_matrix(x0, "x0")
    eps = as_matrix(eps, "eps")
    check_same_shape(x0, eps, "risk noise")
    t = np.asarray(t, dtype=np.int64).ravel()
    if t.shape[0] != x0.shape[0]:
        raise ShapeError(f"{t.shape[0]} timesteps for {x0.shape[0]} samples")

    losses = np.empty(x0.shape[0])
    for level in np.unique(t):
        rows = np.flatnonzero(t == level)
        alpha = schedule.alphas[level]
        x_t = StateBatch(np.sqrt(alpha) * x0[rows] + np.sqrt(1.0 - alpha) * eps[rows], t=int(level))
        losses[rows] = np.sum((evaluate(model, x_t) - eps[rows]) ** 2, axis=1)
    return losses
