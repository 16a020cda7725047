from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import torch
from torch import nn

from lib.denoiser.network import TimeConditionedMLP, TrainedDenoiser
from lib.schedule import NoiseSchedule
from lib.utils import ConfigError

logger = logging.getLogger(__name__)

PAYLOAD_DTYPE = "<f8"


def save_checkpoint(model: TrainedDenoiser, path: Path | str) -> Path:
    """One JSON header line, a newline, then the flat little-endian float64 parameters."""
    path = Path(path)
    params = model.parameter_vector().astype(PAYLOAD_DTYPE)
    header = {
        "architecture": model.module.architecture(),
        "schedule_hash": model.schedule.digest,
        "seed": model.seed,
        "n_params": int(params.shape[0]),
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        f.write(params.tobytes())

    logger.info("wrote checkpoint %s (%d parameters)", path, params.shape[0])
    return path


def read_checkpoint_header(path: Path | str) -> tuple[dict, bytes]:
    with open(path, "rb") as f:
        raw = f.read()
    newline = raw.find(b"\n")
    if newline < 0:
        raise ConfigError(f"{path}: missing checkpoint header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: unreadable checkpoint header ({e})") from e
    return header, raw[newline + 1 :]


def load_checkpoint(path: Path | str, schedule: NoiseSchedule) -> TrainedDenoiser:
    header, payload = read_checkpoint_header(path)
    if header.get("schedule_hash") != schedule.digest:
        raise ConfigError(
            f"{path}: checkpoint was trained on schedule {header.get('schedule_hash')}, "
            f"current schedule is {schedule.digest}"
        )

    params = np.frombuffer(payload, dtype=PAYLOAD_DTYPE)
    if params.shape[0] != header["n_params"]:
        raise ConfigError(f"{path}: expected {header['n_params']} parameters, found {params.shape[0]}")

    module = TimeConditionedMLP(**header["architecture"])
    expected = sum(p.numel() for p in module.parameters())
    if expected != params.shape[0]:
        raise ConfigError(f"{path}: architecture needs {expected} parameters, payload has {params.shape[0]}")
    nn.utils.vector_to_parameters(torch.from_numpy(params.astype(np.float64)), module.parameters())

    return TrainedDenoiser(module=module, schedule=schedule, seed=int(header["seed"]))
