from __future__ import annotations

import logging
import time

import numpy as np

from lib.denoiser import DenoiserModel
from lib.sampler import NoiseStream, SigmaPolicy, run_chains
from lib.schedule import NoiseSchedule, SubsequenceMode, select_subsequence
from lib.utils import ParameterError

logger = logging.getLogger(__name__)


def time_sampler(
    schedule: NoiseSchedule,
    model: DenoiserModel,
    policy: SigmaPolicy,
    S: int,
    chains: int,
    d: int,
    seed: int,
    mode: SubsequenceMode = SubsequenceMode.LINEAR,
    repeats: int = 3,
) -> float:
    """Best-of-``repeats`` wall-clock seconds of one serial sampling run."""
    traj = select_subsequence(schedule.T, S, mode)
    rng = NoiseStream(seed=seed, d=d)
    latents = rng.latent(0, chains)

    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        run_chains(schedule, traj, model, policy, rng, chains, x_T=latents, chunk_size=chains, max_workers=1)
        best = min(best, time.perf_counter() - start)
    logger.debug("S=%d: %.4fs", S, best)
    return float(best)


def fit_linear(steps: np.ndarray, seconds: np.ndarray) -> tuple[float, float, float]:
    """Least-squares seconds = a * S + b; returns (a, b, R^2)."""
    steps = np.asarray(steps, dtype=np.float64)
    seconds = np.asarray(seconds, dtype=np.float64)
    if steps.shape != seconds.shape or steps.shape[0] < 2:
        raise ParameterError("need at least two (S, seconds) pairs of equal length")

    design = np.column_stack([steps, np.ones_like(steps)])
    (a, b), *_ = np.linalg.lstsq(design, seconds, rcond=None)
    residual = seconds - design @ np.array([a, b])
    total = np.sum((seconds - seconds.mean()) ** 2)
    r2 = 1.0 - np.sum(residual**2) / total if total > 0.0 else 1.0
    return float(a), float(b), float(r2)
