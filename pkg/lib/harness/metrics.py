from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from lib.utils import ShapeError, as_matrix, check_same_shape


def energy_distance(x: np.ndarray, y: np.ndarray) -> float:
    """2 E|X - Y| - E|X - X'| - E|Y - Y'| with the within-sample terms over distinct pairs."""
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"samples live in different dimensions: {x.shape[1]} and {y.shape[1]}")
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise ShapeError("energy distance needs at least two points per sample")

    between = cdist(x, y).mean()
    within_x = cdist(x, x).sum() / (x.shape[0] * (x.shape[0] - 1))
    within_y = cdist(y, y).sum() / (y.shape[0] * (y.shape[0] - 1))
    return float(2.0 * between - within_x - within_y)


def per_dim_mse(a: np.ndarray, b: np.ndarray) -> float:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    check_same_shape(a, b, "mse")
    return float(np.mean((a - b) ** 2))


def replicate_band(values: np.ndarray, width: float = 3.0) -> tuple[float, float, float]:
    """(mean, low, high) with low/high at mean -/+ width standard deviations."""
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if values.shape[0] > 1 else 0.0
    return mean, mean - width * std, mean + width * std


def bands_overlap(a: tuple[float, float, float], b: tuple[float, float, float]) -> bool:
    return a[1] <= b[2] and b[1] <= a[2]
