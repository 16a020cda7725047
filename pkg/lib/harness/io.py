from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional, TypedDict

import numpy as np
import pandas as pd

from lib.utils import ConfigError

logger = logging.getLogger(__name__)

TENSOR_DTYPE = "<f4"
METRIC_COLUMNS = ["experiment", "S", "policy", "metric", "value", "seconds"]


class MetricsRow(TypedDict):
    experiment: str
    S: int
    policy: str
    metric: str
    value: float
    seconds: float


def write_tensor(path: Path, values: np.ndarray, schedule_hash: str, seed: int) -> Path:
    """JSON header line then the row-major little-endian float32 payload."""
    values = np.ascontiguousarray(values, dtype=TENSOR_DTYPE)
    header = {
        "shape": list(values.shape),
        "dtype": TENSOR_DTYPE,
        "order": "C",
        "schedule_hash": schedule_hash,
        "seed": seed,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        f.write(values.tobytes(order="C"))
    logger.info("wrote %s %s", path, tuple(values.shape))
    return path


def read_tensor(path: Path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as f:
        raw = f.read()
    newline = raw.find(b"\n")
    if newline < 0:
        raise ConfigError(f"{path}: missing tensor header")
    header = json.loads(raw[:newline].decode("utf-8"))
    if header.get("dtype") != TENSOR_DTYPE or header.get("order") != "C":
        raise ConfigError(f"{path}: unsupported layout {header.get('dtype')}/{header.get('order')}")

    values = np.frombuffer(raw[newline + 1 :], dtype=TENSOR_DTYPE)
    shape = tuple(header["shape"])
    if values.size != int(np.prod(shape)):
        raise ConfigError(f"{path}: payload holds {values.size} values, header says {shape}")
    return values.reshape(shape).copy(), header


class MetricsLog:
    """Append-only metrics table with one row per (experiment, S, policy, metric)."""

    def __init__(self) -> None:
        self.rows: list[MetricsRow] = []
        self._keys: set[tuple] = set()

    def append(self, experiment: str, S: int, policy: str, metric: str, value: float, seconds: float) -> MetricsRow:
        key = (experiment, S, policy, metric)
        if key in self._keys:
            raise ConfigError(f"duplicate metrics row {key}")
        self._keys.add(key)
        row: MetricsRow = {
            "experiment": experiment,
            "S": int(S),
            "policy": policy,
            "metric": metric,
            "value": float(value),
            "seconds": float(seconds),
        }
        self.rows.append(row)
        return row

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=METRIC_COLUMNS)

    def write(self, path: Path) -> Path:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        logger.info("wrote %d metrics rows to %s", len(self.rows), path)
        return path


def read_metrics(path: Path) -> pd.DataFrame:
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != METRIC_COLUMNS:
        raise ConfigError(f"{path}: expected columns {METRIC_COLUMNS}, found {list(frame.columns)}")
    return frame


class OutputTracker:
    """Collects the files a command writes and removes them if the command fails."""

    def __init__(self, out: Path) -> None:
        self.out = Path(out)
        self.paths: list[Path] = []
        self._created_dir = False

    def __enter__(self) -> OutputTracker:
        if not self.out.exists():
            self.out.mkdir(parents=True)
            self._created_dir = True
        return self

    def path(self, name: str) -> Path:
        path = self.out / name
        self.paths.append(path)
        return path

    def __exit__(self, exc_type, exc, tb) -> Optional[bool]:
        if exc_type is None:
            return None
        for path in self.paths:
            if path.exists():
                path.unlink()
                logger.debug("removed partial output %s", path)
        if self._created_dir and self.out.exists() and not any(self.out.iterdir()):
            self.out.rmdir()
        return None
