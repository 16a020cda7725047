from __future__ import annotations

import logging
import math
from typing import Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field
from torch import nn
from tqdm import tqdm

from lib.denoiser.base import DenoiserTag
from lib.denoiser.mixture import MixtureSpec
from lib.gaussian import StateBatch
from lib.schedule import NoiseSchedule
from lib.utils import DomainError, ParameterError, TrainingError, as_matrix

logger = logging.getLogger(__name__)

TrainingData = Union[MixtureSpec, np.ndarray]


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps: int = Field(default=3000, ge=0, description="Number of optimizer steps")
    batch_size: int = Field(default=256, ge=1, description="Samples (x_0, t, eps) per step")
    learning_rate: float = Field(default=2e-3, gt=0.0, description="Adam learning rate")
    seed: int = Field(default=0, description="Seeds initialization and the training draws")
    width: int = Field(default=64, ge=1, description="Hidden layer width")
    hidden_layers: int = Field(default=2, ge=1, description="Number of hidden layers")
    n_frequencies: int = Field(default=6, ge=1, description="Sinusoidal features per sin/cos of t/T")


def sinusoidal_features(t: torch.Tensor, T: int, n_frequencies: int) -> torch.Tensor:
    """sin/cos of pi * 2^k * (t / T) for k = 0..n_frequencies-1."""
    s = t.to(torch.float64)[:, None] / T
    freqs = math.pi * 2.0 ** torch.arange(n_frequencies, dtype=torch.float64)
    return torch.cat([torch.sin(s * freqs), torch.cos(s * freqs)], dim=1)


class TimeConditionedMLP(nn.Module):
    def __init__(self, d: int, T: int, width: int = 64, hidden_layers: int = 2, n_frequencies: int = 6) -> None:
        super().__init__()
        self.d = d
        self.T = T
        self.width = width
        self.hidden_layers = hidden_layers
        self.n_frequencies = n_frequencies

        layers: list[nn.Module] = []
        fan_in = d + 2 * n_frequencies
        for _ in range(hidden_layers):
            layers += [nn.Linear(fan_in, width), nn.SiLU()]
            fan_in = width
        layers.append(nn.Linear(fan_in, d))
        self.net = nn.Sequential(*layers).double()

    def forward(self, x: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([x, sinusoidal_features(t, self.T, self.n_frequencies)], dim=1))

    def architecture(self) -> dict:
        return {
            "d": self.d,
            "T": self.T,
            "width": self.width,
            "hidden_layers": self.hidden_layers,
            "n_frequencies": self.n_frequencies,
        }

    @staticmethod
    def build(d: int, T: int, config: TrainConfig) -> TimeConditionedMLP:
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(config.seed)
            return TimeConditionedMLP(
                d=d,
                T=T,
                width=config.width,
                hidden_layers=config.hidden_layers,
                n_frequencies=config.n_frequencies,
            )


class TrainedDenoiser:
    tag = DenoiserTag.TRAINED

    def __init__(self, module: TimeConditionedMLP, schedule: NoiseSchedule, seed: int) -> None:
        if module.T != schedule.T:
            raise ParameterError(f"network trained for T={module.T}, schedule has T={schedule.T}")
        self.module = module
        self.schedule = schedule
        self.seed = seed

    def eval(self, x: StateBatch) -> np.ndarray:
        if x.t < 1:
            raise DomainError("noise prediction is undefined at t = 0")
        with torch.no_grad():
            out = self.module(
                torch.from_numpy(np.ascontiguousarray(x.data)),
                torch.full((x.batch,), x.t, dtype=torch.int64),
            )
        return out.numpy()

    def parameter_vector(self) -> np.ndarray:
        return nn.utils.parameters_to_vector(self.module.parameters()).detach().numpy().copy()


def draw_training_batch(
    data: TrainingData, schedule: NoiseSchedule, batch_size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x_0, t, eps) with t uniform on 1..T."""
    if isinstance(data, MixtureSpec):
        x0 = data.sample(batch_size, rng)
    else:
        points = as_matrix(data, "training points")
        x0 = points[rng.integers(0, points.shape[0], size=batch_size)]
    t = rng.integers(1, schedule.T + 1, size=batch_size)
    eps = rng.standard_normal(x0.shape)
    return x0, t, eps


def l1_loss(
    module: TimeConditionedMLP, schedule: NoiseSchedule, x0: np.ndarray, t: np.ndarray, eps: np.ndarray
) -> torch.Tensor:
    """Unit-weight denoising loss: batch mean of ||eps_theta(x_t, t) - eps||^2."""
    alphas = torch.from_numpy(schedule.alphas[t])[:, None]
    x0_ = torch.from_numpy(x0)
    eps_ = torch.from_numpy(eps)
    x_t = torch.sqrt(alphas) * x0_ + torch.sqrt(1.0 - alphas) * eps_
    residual = module(x_t, torch.from_numpy(t)) - eps_
    return (residual**2).sum(dim=1).mean()


def train_toy_denoiser(
    data: TrainingData, schedule: NoiseSchedule, config: TrainConfig, progress: bool = True
) -> TrainedDenoiser:
    d = data.d if isinstance(data, MixtureSpec) else as_matrix(data, "training points").shape[1]
    module = TimeConditionedMLP.build(d=d, T=schedule.T, config=config)
    optimizer = torch.optim.Adam(module.parameters(), lr=config.learning_rate)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x7EA1]))

    last_finite = float("nan")
    for step in tqdm(range(config.steps), desc="train", disable=not progress):
        x0, t, eps = draw_training_batch(data, schedule, config.batch_size, rng)
        loss = l1_loss(module, schedule, x0, t, eps)
        value = float(loss.item())
        if not math.isfinite(value):
            raise TrainingError(f"loss became {value} at step {step} (last finite loss {last_finite:.4g})")
        last_finite = value

        optimizer.zero_grad()
        loss.backward()
        optimizer.step()

        if step % 500 == 0:
            logger.debug("step %d loss %.5f", step, value)

    logger.info("trained denoiser for %d steps, final batch loss %.5f", config.steps, last_finite)
    return TrainedDenoiser(module=module, schedule=schedule, seed=config.seed)


def gradient_check(
    model: TrainedDenoiser,
    data: TrainingData,
    n_coordinates: int = 20,
    batch_size: int = 64,
    step: float = 1e-6,
    seed: int = 0,
) -> float:
    """Max relative error between autograd and central finite-difference gradients of L_1.

    The loss is evaluated on one fixed batch so both gradients see the same function.
    """
    module = model.module
    rng = np.random.default_rng(seed)
    x0, t, eps = draw_training_batch(data, model.schedule, batch_size, rng)

    module.zero_grad()
    l1_loss(module, model.schedule, x0, t, eps).backward()
    analytic = torch.cat([p.grad.reshape(-1) for p in module.parameters()]).detach().numpy().copy()

    theta = nn.utils.parameters_to_vector(module.parameters()).detach().clone()
    coordinates = rng.choice(theta.numel(), size=min(n_coordinates, theta.numel()), replace=False)

    worst = 0.0
    with torch.no_grad():
        for index in coordinates:
            values = []
            for sign in (1.0, -1.0):
                shifted = theta.clone()
                shifted[index] += sign * step
                nn.utils.vector_to_parameters(shifted, module.parameters())
                values.append(float(l1_loss(module, model.schedule, x0, t, eps)))
            numeric = (values[0] - values[1]) / (2.0 * step)
            scale = max(abs(numeric), abs(analytic[index]), 1e-4)
            worst = max(worst, abs(numeric - analytic[index]) / scale)
        nn.utils.vector_to_parameters(theta, module.parameters())

    module.zero_grad()
    return worst
