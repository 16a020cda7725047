from __future__ import annotations

import logging

import numpy as np

from lib.utils import ParameterError, ShapeError

logger = logging.getLogger(__name__)

# below this sin(theta) the two directions are treated as parallel
PARALLEL_TOL = 1e-7


def slerp(a: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    """Spherical linear interpolation; falls back to linear for (anti)parallel inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"slerp needs two vectors of equal length, got {a.shape} and {b.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ParameterError("slerp is undefined for a zero vector")

    theta = np.arccos(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))
    sin_theta = np.sin(theta)
    if sin_theta < PARALLEL_TOL:
        logger.warning("slerp inputs are parallel (sin theta = %.2e), interpolating linearly", sin_theta)
        return (1.0 - alpha) * a + alpha * b

    return np.sin((1.0 - alpha) * theta) / sin_theta * a + np.sin(alpha * theta) / sin_theta * b


def slerp_line(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """n points from a to b, endpoints included."""
    if n < 2:
        raise ParameterError(f"a line needs at least 2 points, got {n}")
    return np.stack([slerp(a, b, alpha) for alpha in np.linspace(0.0, 1.0, n)])


def slerp_grid(latents: np.ndarray, n: int) -> np.ndarray:
    """(n, n, d) grid from four latents.

    Row i interpolates inside the pairs (z0, z1) and (z2, z3) with coefficient i/(n-1);
    column j then interpolates between the two pair results with coefficient j/(n-1).
    """
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim != 2 or latents.shape[0] != 4:
        raise ShapeError(f"grid interpolation needs 4 latents, got shape {latents.shape}")
    if n < 2:
        raise ParameterError(f"a grid needs at least 2 points per axis, got {n}")

    alphas = np.linspace(0.0, 1.0, n)
    grid = np.empty((n, n, latents.shape[1]))
    for i, inner in enumerate(alphas):
        left = slerp(latents[0], latents[1], inner)
        right = slerp(latents[2], latents[3], inner)
        for j, outer in enumerate(alphas):
            grid[i, j] = slerp(left, right, outer)
    return grid
