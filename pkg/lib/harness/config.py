from __future__ import annotations

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from lib.denoiser import MixtureSpec, TrainConfig
from lib.sampler import SigmaPolicy
from lib.schedule import NoiseSchedule, SubsequenceMode, make_linear_beta_schedule
from lib.utils import ConfigError

logger = logging.getLogger(__name__)


class ScheduleSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T: int = Field(default=1000, ge=1, description="Number of diffusion steps")
    beta_start: float = Field(default=1e-4, gt=0.0, lt=1.0, description="First stepwise beta of the linear schedule")
    beta_end: float = Field(default=0.02, gt=0.0, lt=1.0, description="Last stepwise beta of the linear schedule")
    alphas: Optional[list[float]] = Field(
        default=None, description="Explicit alpha_1..alpha_T; overrides the linear betas when given"
    )

    @model_validator(mode="after")
    def _alphas_match_T(self) -> ScheduleSpec:
        if self.alphas is not None and len(self.alphas) != self.T:
            raise ValueError(f"alphas has {len(self.alphas)} entries but T={self.T}")
        return self

    def build(self) -> NoiseSchedule:
        if self.alphas is not None:
            return NoiseSchedule(alphas=np.concatenate([[1.0], np.asarray(self.alphas, dtype=np.float64)]))
        return make_linear_beta_schedule(self.T, self.beta_start, self.beta_end)


class DataKind(str, Enum):
    MIXTURE = "mixture"
    POINTS = "points"


class DataSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: DataKind = Field(default=DataKind.MIXTURE, description="Gaussian mixture or a point set read from CSV")
    weights: list[float] = Field(default=[0.3, 0.3, 0.4], description="Mixture weights")
    means: list[list[float]] = Field(
        default=[[-1.5, -1.0], [1.5, -1.0], [0.0, 1.6]], description="Component means, one row per component"
    )
    component_std: float = Field(default=0.3, ge=0.0, description="Isotropic component standard deviation")
    points_file: Optional[Path] = Field(default=None, description="CSV of points (one row per point) for kind=points")

    @model_validator(mode="after")
    def _points_file_exists(self) -> DataSpec:
        if self.kind is DataKind.POINTS:
            if self.points_file is None:
                raise ValueError("kind=points needs points_file")
            if not self.points_file.exists():
                raise ValueError(f"points_file {self.points_file} does not exist")
        return self

    def build(self) -> MixtureSpec:
        if self.kind is DataKind.POINTS:
            points = pd.read_csv(self.points_file).to_numpy(dtype=np.float64)
            return MixtureSpec.point_set(points)
        return MixtureSpec(weights=np.asarray(self.weights), means=np.asarray(self.means), component_std=self.component_std)


class ModelKind(str, Enum):
    ANALYTIC = "analytic"
    CHECKPOINT = "checkpoint"
    TRAIN = "train"


class ModelSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: ModelKind = Field(default=ModelKind.ANALYTIC, description="Where the noise predictor comes from")
    checkpoint: Optional[Path] = Field(default=None, description="Checkpoint file for kind=checkpoint")
    train: TrainConfig = Field(default_factory=TrainConfig, description="Training parameters for kind=train")

    @model_validator(mode="after")
    def _checkpoint_exists(self) -> ModelSpec:
        if self.kind is ModelKind.CHECKPOINT:
            if self.checkpoint is None:
                raise ValueError("kind=checkpoint needs a checkpoint path")
            if not self.checkpoint.exists():
                raise ValueError(f"checkpoint {self.checkpoint} does not exist")
        return self


class SamplerSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps: int = Field(default=50, ge=1, description="Trajectory length S")
    mode: SubsequenceMode = Field(default=SubsequenceMode.LINEAR, description="Trajectory spacing")
    eta: float = Field(default=0.0, ge=0.0, description="eta of the sigma family (0 = deterministic)")
    sigma_hat: bool = Field(default=False, description="Use the sigma-hat noise scale instead of eta")

    def policy(self) -> SigmaPolicy:
        return SigmaPolicy.hat() if self.sigma_hat else SigmaPolicy.from_eta(self.eta)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schedule: ScheduleSpec = Field(default_factory=ScheduleSpec)
    data: DataSpec = Field(default_factory=DataSpec)
    model: ModelSpec = Field(default_factory=ModelSpec)
    sampler: SamplerSpec = Field(default_factory=SamplerSpec)
    seed: int = Field(default=0, ge=0, description="Seed of every random stream of the run")
    out: Path = Field(default=Path("out"), description="Output directory")
    chains: int = Field(default=1024, ge=1, description="Number of parallel chains")
    plot: bool = Field(default=True, description="Write SVG plots for 2D data")
    intermediates: bool = Field(default=False, description="Also write every intermediate state of sample")
    reconstruct_steps: list[int] = Field(default=[10, 50, 100, 500], description="S levels of reconstruct")
    bench_steps: list[int] = Field(default=[10, 20, 50, 100], description="S levels of bench")
    sweep_steps: list[int] = Field(default=[10, 20, 50, 100, 1000], description="S levels of sweep")
    sweep_etas: list[float] = Field(default=[0.0, 0.2, 0.5, 1.0], description="eta levels of sweep")
    grid_size: int = Field(default=11, ge=2, description="Points per axis of the interpolation grid")

    @model_validator(mode="after")
    def _steps_within_T(self) -> RunConfig:
        T = self.schedule.T
        for name, levels in [
            ("sampler.steps", [self.sampler.steps]),
            ("reconstruct_steps", self.reconstruct_steps),
            ("bench_steps", self.bench_steps),
            ("sweep_steps", self.sweep_steps),
        ]:
            bad = [S for S in levels if not 1 <= S <= T]
            if bad:
                raise ValueError(f"{name} {bad} outside [1, T={T}]")
        if any(eta < 0.0 for eta in self.sweep_etas):
            raise ValueError("sweep_etas must be nonnegative")
        return self


def _format_errors(error: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in error.errors())


def validate_config(data: dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid run config: {_format_errors(e)}") from e


def load_config(path: Optional[Path]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    logger.debug("loaded config %s", path)
    return validate_config(data)


def apply_overrides(config: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """Sets dotted keys (``sampler.steps``) and re-validates the merged document."""
    data = config.model_dump(mode="json")
    for key, value in overrides.items():
        if value is None:
            continue
        *parents, leaf = key.split(".")
        node = data
        for part in parents:
            node = node[part]
        node[leaf] = value
    return validate_config(data)
