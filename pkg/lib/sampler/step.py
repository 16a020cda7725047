from __future__ import annotations

import concurrent.futures
import logging
import threading
from typing import Optional

import numpy as np
from tqdm import tqdm

from lib.denoiser import DenoiserModel, evaluate, predict_x0
from lib.gaussian import StateBatch
from lib.sampler.noise import NoiseStream
from lib.sampler.policy import SigmaPolicy
from lib.schedule import NoiseSchedule, Trajectory
from lib.utils import ParameterError, as_matrix, check_same_shape, checked_sqrt

logger = logging.getLogger(__name__)

DEFAULT_CHUNK = 4096


def generalized_step(
    schedule: NoiseSchedule,
    x: StateBatch,
    traj: Trajectory,
    i: int,
    model: DenoiserModel,
    policy: SigmaPolicy,
    noise: Optional[np.ndarray] = None,
) -> StateBatch:
    """x_{tau_i} -> x_{tau_{i-1}}: predicted x_0, direction to x_t, fresh noise.

    ``noise`` may be None when the resolved noise scale is zero.
    """
    t = traj.at(i)
    t_prev = traj.prev(i)
    if x.t != t:
        raise ParameterError(f"transition {i} starts at t={t}, state is at t={x.t}")

    direction_sigma, noise_sigma = policy.resolve(schedule, traj, i)
    alpha_prev = schedule.alphas[t_prev]

    eps_hat = evaluate(model, x)
    x0_hat = predict_x0(schedule, x, t, eps_hat)
    direction = checked_sqrt(1.0 - alpha_prev - direction_sigma**2, f"direction term at {t}->{t_prev}")

    out = np.sqrt(alpha_prev) * x0_hat + direction * eps_hat
    if noise_sigma > 0.0:
        if noise is None:
            raise ParameterError(f"transition {i} has sigma={noise_sigma:.3e} but no noise was supplied")
        noise = as_matrix(noise, "noise")
        check_same_shape(x.data, noise, "step noise")
        out = out + noise_sigma * noise
    return x.at(out, t_prev)


def run_trajectory(
    schedule: NoiseSchedule,
    x_T: StateBatch,
    traj: Trajectory,
    model: DenoiserModel,
    policy: SigmaPolicy,
    rng: NoiseStream,
    keep_intermediates: bool = False,
) -> tuple[StateBatch, Optional[list[StateBatch]]]:
    """Applies the generalized step for i = S..1. Noise for chain c at level tau_i is
    ``rng.step_noise(tau_i, ...)`` row c, so the result does not depend on batching."""
    if traj.T != schedule.T or x_T.t != schedule.T:
        raise ParameterError(f"run starts at t={x_T.t}, trajectory ends at {traj.T}, schedule T={schedule.T}")
    if rng.d != x_T.d:
        raise ParameterError(f"noise stream dimension {rng.d} does not match state dimension {x_T.d}")
    policy.check(schedule, traj)
    noise_scales = policy.noise_scales(schedule, traj)

    start, stop = x_T.chain_offset, x_T.chain_offset + x_T.batch
    intermediates = [x_T] if keep_intermediates else None

    x = x_T
    for i in range(traj.S, 0, -1):
        noise = rng.step_noise(traj.at(i), start, stop) if noise_scales[i - 1] > 0.0 else None
        x = generalized_step(schedule, x, traj, i, model, policy, noise)
        if intermediates is not None:
            intermediates.append(x)
    return x, intermediates


def run_chains(
    schedule: NoiseSchedule,
    traj: Trajectory,
    model: DenoiserModel,
    policy: SigmaPolicy,
    rng: NoiseStream,
    n_chains: int,
    x_T: Optional[np.ndarray] = None,
    chunk_size: int = DEFAULT_CHUNK,
    max_workers: Optional[int] = None,
    progress: bool = False,
) -> np.ndarray:
    """Samples ``n_chains`` terminal states, chunked over a thread pool.

    Latents default to the stream's latent draws. Chunks write disjoint rows of the
    result, so the output is identical for any chunk size or worker count.
    """
    if n_chains < 1 or chunk_size < 1:
        raise ParameterError(f"need n_chains >= 1 and chunk_size >= 1, got {n_chains}, {chunk_size}")
    if x_T is None:
        x_T = rng.latent(0, n_chains)
    x_T = as_matrix(x_T, "x_T")
    if x_T.shape[0] != n_chains:
        raise ParameterError(f"{x_T.shape[0]} latents for {n_chains} chains")
    policy.check(schedule, traj)

    result = np.empty_like(x_T)
    lock = threading.Lock()
    bounds = [(s, min(s + chunk_size, n_chains)) for s in range(0, n_chains, chunk_size)]

    def run_chunk(start: int, stop: int) -> None:
        batch = StateBatch(x_T[start:stop], t=schedule.T, chain_offset=start)
        x0, _ = run_trajectory(schedule, batch, traj, model, policy, rng)
        with lock:
            result[start:stop] = x0.data

    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(run_chunk, start, stop) for start, stop in bounds]
        for future in tqdm(
            concurrent.futures.as_completed(futures), total=len(futures), desc="chains", disable=not progress
        ):
            future.result()

    logger.debug("sampled %d chains in %d chunks (S=%d, %s)", n_chains, len(bounds), traj.S, policy.tag)
    return result
