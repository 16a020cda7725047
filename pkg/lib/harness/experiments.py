"""The experiment behind each CLI command. Every function writes through an ``OutputTracker``
so a failure leaves no partial files behind."""

from __future__ import annotations

import logging
import time

import numpy as np
from tqdm import tqdm

from lib.denoiser import (
    DenoiserModel,
    MixtureOptimalDenoiser,
    MixtureSpec,
    load_checkpoint,
    save_checkpoint,
    train_toy_denoiser,
)
from lib.gaussian import StateBatch
from lib.harness.bench import fit_linear, time_sampler
from lib.harness.config import ModelKind, RunConfig
from lib.harness.interpolation import slerp_grid, slerp_line
from lib.harness.io import MetricsLog, OutputTracker, write_tensor
from lib.harness.metrics import energy_distance, per_dim_mse
from lib.harness.plots import grid_plot, line_plot, scatter_plot
from lib.ode import Integrator, encode, integrate
from lib.sampler import NoiseStream, SigmaPolicy, Stream, run_chains, run_trajectory
from lib.schedule import NoiseSchedule, Trajectory, select_subsequence

logger = logging.getLogger(__name__)


class Run:
    """Objects every command needs, built once from the config."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self.schedule: NoiseSchedule = config.schedule.build()
        self.spec: MixtureSpec = config.data.build()
        self.stream = NoiseStream(config.seed, self.spec.d)
        self._model: DenoiserModel | None = None

    @property
    def model(self) -> DenoiserModel:
        if self._model is None:
            self._model = build_model(self.config, self.schedule, self.spec)
        return self._model

    def trajectory(self, S: int | None = None) -> Trajectory:
        return select_subsequence(self.schedule.T, S or self.config.sampler.steps, self.config.sampler.mode)

    def data(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([self.config.seed, int(Stream.DATA)]))
        return self.spec.sample(n, rng)

    def tensor(self, outputs: OutputTracker, name: str, values: np.ndarray) -> None:
        write_tensor(outputs.path(name), values, self.schedule.digest, self.config.seed)

    def wants_plot(self) -> bool:
        return self.config.plot and self.spec.d == 2


def build_model(config: RunConfig, schedule: NoiseSchedule, spec: MixtureSpec) -> DenoiserModel:
    kind = config.model.kind
    if kind is ModelKind.ANALYTIC:
        return MixtureOptimalDenoiser(spec, schedule)
    if kind is ModelKind.CHECKPOINT:
        return load_checkpoint(config.model.checkpoint, schedule)
    return train_toy_denoiser(spec, schedule, config.model.train)


def sample(run: Run, outputs: OutputTracker) -> np.ndarray:
    config = run.config
    traj = run.trajectory()
    policy = config.sampler.policy()
    latents = run.stream.latent(0, config.chains)

    if config.intermediates:
        x0, path = run_trajectory(
            run.schedule, StateBatch(latents, t=run.schedule.T), traj, run.model, policy, run.stream, keep_intermediates=True
        )
        samples = x0.data
        run.tensor(outputs, "intermediates.tensor", np.stack([x.data for x in path]))
    else:
        samples = run_chains(run.schedule, traj, run.model, policy, run.stream, config.chains, x_T=latents, progress=True)

    run.tensor(outputs, "samples.tensor", samples)
    if run.wants_plot():
        scatter_plot(outputs.path("samples.svg"), samples, run.data(config.chains), title=f"S={traj.S}, {policy.tag}")
    return samples


def _reconstruct_one(run: Run, x0: np.ndarray, S: int) -> tuple[np.ndarray, np.ndarray, float]:
    traj = run.trajectory(S)
    start = time.perf_counter()
    latents = encode(run.schedule, StateBatch.data_level(x0), traj, run.model)
    decoded = integrate(run.schedule, latents, traj, run.model, Integrator.DDIM)
    return latents.data, decoded.data, time.perf_counter() - start


def encode_command(run: Run, outputs: OutputTracker) -> float:
    config = run.config
    x0 = run.data(config.chains)
    latents, decoded, seconds = _reconstruct_one(run, x0, config.sampler.steps)
    mse = per_dim_mse(decoded, x0)

    run.tensor(outputs, "data.tensor", x0)
    run.tensor(outputs, "latents.tensor", latents)
    metrics = MetricsLog()
    metrics.append("encode", config.sampler.steps, "eta=0", "per_dim_mse", mse, seconds)
    metrics.write(outputs.path("encode.csv"))
    return mse


def reconstruct(run: Run, outputs: OutputTracker) -> MetricsLog:
    config = run.config
    x0 = run.data(config.chains)
    metrics = MetricsLog()
    errors = []
    for S in tqdm(config.reconstruct_steps, desc="reconstruct"):
        _, decoded, seconds = _reconstruct_one(run, x0, S)
        errors.append(per_dim_mse(decoded, x0))
        metrics.append("reconstruct", S, "eta=0", "per_dim_mse", errors[-1], seconds)
        logger.info("S=%d per-dim MSE %.3e", S, errors[-1])

    metrics.write(outputs.path("reconstruct.csv"))
    if config.plot:
        line_plot(outputs.path("reconstruct.svg"), np.array(config.reconstruct_steps), np.array(errors), "S", "per-dim MSE", log_y=True)
    return metrics


def interpolate(run: Run, outputs: OutputTracker, line: bool = False) -> np.ndarray:
    """Decodes slerp latents with the deterministic sampler: a line between two latents or
    the pair-then-cross grid over four."""
    config = run.config
    n = config.grid_size
    if line:
        ends = run.stream.latent(0, 2)
        latents = slerp_line(ends[0], ends[1], n)
    else:
        latents = slerp_grid(run.stream.latent(0, 4), n).reshape(n * n, run.spec.d)

    decoded = run_chains(
        run.schedule, run.trajectory(), run.model, SigmaPolicy.from_eta(0.0), run.stream, latents.shape[0], x_T=latents
    )
    if not line:
        decoded = decoded.reshape(n, n, run.spec.d)

    run.tensor(outputs, "interpolation_latents.tensor", latents)
    run.tensor(outputs, "interpolation.tensor", decoded)
    if run.wants_plot() and not line:
        grid_plot(outputs.path("interpolation.svg"), decoded, title=f"slerp grid, S={config.sampler.steps}")
    return decoded


def bench(run: Run, outputs: OutputTracker) -> tuple[float, float, float]:
    config = run.config
    policy = config.sampler.policy()
    metrics = MetricsLog()
    seconds = []
    for S in tqdm(config.bench_steps, desc="bench"):
        seconds.append(time_sampler(run.schedule, run.model, policy, S, config.chains, run.spec.d, config.seed, config.sampler.mode))
        metrics.append("bench", S, policy.tag, "wall_clock", seconds[-1], seconds[-1])

    a, b, r2 = fit_linear(np.array(config.bench_steps), np.array(seconds))
    top = max(config.bench_steps)
    metrics.append("bench_fit", top, policy.tag, "slope", a, 0.0)
    metrics.append("bench_fit", top, policy.tag, "intercept", b, 0.0)
    metrics.append("bench_fit", top, policy.tag, "r2", r2, 0.0)
    metrics.write(outputs.path("bench.csv"))
    if config.plot:
        line_plot(outputs.path("bench.svg"), np.array(config.bench_steps), np.array(seconds), "S", "seconds")
    logger.info("bench fit: %.3e s/step + %.3e s, R^2 %.4f", a, b, r2)
    return a, b, r2


def sweep(run: Run, outputs: OutputTracker) -> MetricsLog:
    """Energy distance to fresh data over the eta levels and sigma-hat, per trajectory length."""
    config = run.config
    reference = run.data(config.chains)
    policies = [SigmaPolicy.from_eta(eta) for eta in config.sweep_etas] + [SigmaPolicy.hat()]
    metrics = MetricsLog()

    for S in tqdm(config.sweep_steps, desc="sweep"):
        traj = run.trajectory(S)
        for policy in policies:
            start = time.perf_counter()
            generated = run_chains(run.schedule, traj, run.model, policy, run.stream, config.chains)
            seconds = time.perf_counter() - start
            metrics.append("sweep", S, policy.tag, "energy_distance", energy_distance(generated, reference), seconds)
        logger.info("sweep level S=%d done", S)

    metrics.write(outputs.path("sweep.csv"))
    return metrics


def train(run: Run, outputs: OutputTracker) -> None:
    model = train_toy_denoiser(run.spec, run.schedule, run.config.model.train)
    save_checkpoint(model, outputs.path("denoiser.ckpt"))
