from __future__ import annotations

import hashlib
from typing import Any, Iterable

import numpy as np


class DiffusionError(Exception):
    """Root of every error raised by the library."""


class ParameterError(DiffusionError, ValueError):
    pass


class DomainError(DiffusionError, ValueError):
    pass


class ShapeError(DiffusionError, ValueError):
    pass


class TrainingError(DiffusionError, RuntimeError):
    pass


class ConfigError(DiffusionError, ValueError):
    pass


# radicands within this band of zero are round-off and count as exactly zero
RADICAND_TOL = 1e-12


def unique_in_order(values: Iterable[int]) -> list[int]:
    seen = set()
    result = []
    for item in values:
        if item not in seen:
            seen.add(item)
            result.append(item)
    return result


def checked_sqrt(radicand: float, what: str) -> float:
    """Square root that refuses negative radicands beyond round-off."""
    if radicand < -RADICAND_TOL:
        raise DomainError(f"negative radicand for {what}: {radicand:.3e}")
    if abs(radicand) <= RADICAND_TOL:
        return 0.0
    return float(np.sqrt(radicand))


def as_matrix(data: Any, name: str = "data") -> np.ndarray:
    if not isinstance(data, (np.ndarray, list, tuple)):
        raise TypeError(f"{name} must be an array, got {type(data).__name__}")

    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional (batch, d), got shape {arr.shape}")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes {a.shape} and {b.shape} do not match")


def array_hash(values: np.ndarray) -> str:
    """Short stable digest of a float array, used to tie files to a schedule."""
    payload = np.ascontiguousarray(values, dtype="<f8").tobytes()
    return hashlib.sha256(payload).hexdigest()[:16]
