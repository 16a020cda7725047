"""Named numerical checks, one per acceptance property of the library.

Every check returns a ``CheckResult``; the CLI runs all of them, writes a JSON summary and
exits nonzero when any fails. Sizes come from ``VerifySizes`` so tests can run the same code
on smaller problems.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from tqdm import tqdm

from lib.denoiser import MixtureOptimalDenoiser, MixtureSpec, TrainConfig, evaluate, gradient_check, predict_x0, train_toy_denoiser
from lib.discrete import (
    CategoricalState,
    DiscreteSchedule,
    cat_forward_marginal,
    cat_kl_and_bound,
    feasible_sigma_bound,
    marginalize_reverse,
)
from lib.gaussian import (
    StateBatch,
    ddpm_posterior_params,
    forward_marginal_sample,
    reverse_conditional_params,
    reverse_mean_coefficients,
    sigma_ddpm,
)
from lib.harness.bench import fit_linear, time_sampler
from lib.harness.interpolation import slerp
from lib.harness.metrics import bands_overlap, energy_distance, replicate_band
from lib.objective import (
    GammaConvention,
    PerStepLinearDenoiser,
    SamplePlan,
    WeightVector,
    constancy_spread,
    ddpm_bound_terms,
    fit_per_step_linear,
    j_sigma,
    equivalence_gamma,
)
from lib.ode import Integrator, encode, integrate, terminal_gap
from lib.sampler import NoiseStream, SigmaPolicy, generalized_step, run_chains
from lib.schedule import NoiseSchedule, Trajectory, make_linear_beta_schedule, select_subsequence
from lib.utils import ParameterError

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str
    seconds: float = 0.0

    def __post_init__(self) -> None:
        # checks build these from numpy scalars; the summary is plain JSON
        self.passed = bool(self.passed)
        self.value = float(self.value)
        self.threshold = float(self.threshold)


@dataclass
class VerifySizes:
    marginal_sigmas: int = 100
    mc_samples: int = 200_000
    equivalence_T: int = 10
    equivalence_models: int = 5
    equivalence_sigmas: int = 10
    equivalence_samples: int = 256
    ddpm_batch: int = 16
    consistency_chains: int = 1024
    consistency_steps: int = 50
    reconstruct_steps: tuple[int, ...] = (10, 50, 100, 500)
    reconstruct_samples: int = 1024
    refinement_steps: tuple[int, ...] = (40, 80, 160, 320)
    refinement_chains: int = 256
    discrete_draws: int = 200
    discrete_instances: int = 1000
    hat_samples: int = 4096
    hat_replicates: int = 5
    hat_steps: int = 10
    bench_steps: tuple[int, ...] = (10, 20, 50, 100)
    bench_chains: int = 4096
    train_steps: int = 20
    slerp_pairs: int = 100
    skip: tuple[str, ...] = field(default=())

    @staticmethod
    def quick() -> VerifySizes:
        return VerifySizes(
            marginal_sigmas=10,
            equivalence_sigmas=3,
            equivalence_models=3,
            consistency_chains=256,
            reconstruct_samples=256,
            refinement_chains=64,
            discrete_draws=40,
            discrete_instances=200,
            hat_samples=1024,
            hat_replicates=3,
            bench_chains=1024,
            train_steps=5,
            slerp_pairs=20,
        )


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def check_marginals(schedule: NoiseSchedule, n_sigmas: int, mc_samples: int, seed: int) -> CheckResult:
    """Closed-form composition of q(x_t|x_0) with the reverse kernel returns q(x_{t-1}|x_0)."""
    rng = _rng(seed, 1)
    worst = 0.0
    for t in range(1, schedule.T + 1):
        alpha_to, alpha_from = schedule.alphas[t - 1], schedule.alphas[t]
        for sigma in rng.uniform(0.0, np.sqrt(1.0 - alpha_to), size=n_sigmas):
            a, b = reverse_mean_coefficients(schedule, t, t - 1, sigma)
            mean_err = abs(a * np.sqrt(alpha_from) + b - np.sqrt(alpha_to))
            var_err = abs(sigma**2 + a**2 * (1.0 - alpha_from) - (1.0 - alpha_to))
            worst = max(worst, mean_err, var_err)

    t = max(schedule.T // 2, 1)
    x0 = StateBatch.data_level(np.tile([1.0, -0.5], (mc_samples, 1)))
    sigma = 0.5 * np.sqrt(1.0 - schedule.alphas[t - 1])
    x_t = forward_marginal_sample(schedule, x0, t, rng.standard_normal(x0.shape))
    x_prev = reverse_conditional_params(schedule, x_t, x0, t, t - 1, sigma).sample(rng.standard_normal(x0.shape))
    mean_err = float(np.max(np.abs(x_prev.mean(axis=0) - np.sqrt(schedule.alphas[t - 1]) * x0.data[0])))
    var_rel = float(np.max(np.abs(x_prev.var(axis=0) / (1.0 - schedule.alphas[t - 1]) - 1.0)))

    passed = worst < 1e-12 and mean_err < 0.01 and var_rel < 0.02
    detail = f"closed-form max error {worst:.2e}; Monte-Carlo at t={t}: mean error {mean_err:.4f}, variance error {var_rel:.2%}"
    return CheckResult("marginals", passed, worst, 1e-12, detail)


def _random_sigmas(schedule: NoiseSchedule, rng: np.random.Generator) -> np.ndarray:
    """Positive sigma_t with sigma_t^2 below 1 - alpha_{t-1} (t >= 2) and below 1 - alpha_1 at t = 1."""
    limits = np.sqrt(1.0 - schedule.alphas[:-1])
    limits[0] = np.sqrt(1.0 - schedule.alphas[1])
    return rng.uniform(0.05, 0.95, size=schedule.T) * limits


def check_equivalence(spec: MixtureSpec, T: int, n_models: int, n_sigmas: int, n_samples: int, seed: int) -> CheckResult:
    """J_sigma - L_gamma is the same number for every model, and only for the exact weights."""
    schedule = make_linear_beta_schedule(T, 1e-2, 0.2)
    plan = SamplePlan.from_mixture(spec, T=T, n=n_samples, seed=seed)
    rng = _rng(seed, 2)
    models = [PerStepLinearDenoiser.random(T, spec.d, rng) for _ in range(n_models)]

    worst = 0.0
    control = np.inf
    for _ in range(n_sigmas):
        sigma = _random_sigmas(schedule, rng)
        gamma = equivalence_gamma(sigma, schedule, spec.d)
        worst = max(worst, constancy_spread(schedule, models, plan, sigma, gamma))

        perturbed = gamma.gamma.copy()
        perturbed[rng.integers(0, T)] *= 1.1
        per_dimension = equivalence_gamma(sigma, schedule, spec.d, GammaConvention.PER_DIMENSION)
        for wrong in (WeightVector(perturbed), per_dimension):
            control = min(control, constancy_spread(schedule, models, plan, sigma, wrong))

    passed = worst < 1e-8 and control > 1e-6
    detail = f"max relative spread {worst:.2e} with exact weights; smallest spread with wrong weights {control:.2e}"
    return CheckResult("equivalence", passed, worst, 1e-8, detail)


def check_objective_structure(spec: MixtureSpec, T: int, n_samples: int, seed: int) -> CheckResult:
    """Per-step fit is weight independent, and J_sigma at the Markovian sigma reproduces the DDPM bound."""
    schedule = make_linear_beta_schedule(T, 1e-2, 0.2)
    plan = SamplePlan.from_mixture(spec, T=T, n=n_samples, seed=seed)
    rng = _rng(seed, 3)

    sigma = _random_sigmas(schedule, rng)
    unit = fit_per_step_linear(schedule, plan, WeightVector.ones(T))
    weighted = fit_per_step_linear(schedule, plan, equivalence_gamma(sigma, schedule, spec.d))
    table_gap = float(np.max(np.abs(unit.coefficients - weighted.coefficients)))

    model = PerStepLinearDenoiser.random(T, spec.d, rng)
    markov = np.array([np.sqrt(schedule.betas[0])] + [sigma_ddpm(schedule, t) for t in range(2, T + 1)])
    terms = j_sigma(schedule, model, plan, markov).per_t[1:]
    bound_gap = float(np.max(np.abs(terms - ddpm_bound_terms(schedule, model, plan))))

    passed = table_gap < 1e-6 and bound_gap < 1e-10
    detail = f"per-step argmin difference {table_gap:.2e}; DDPM bound term difference {bound_gap:.2e}"
    return CheckResult("objective_structure", passed, max(table_gap, bound_gap), 1e-6, detail)


def check_ddpm_reduction(schedule: NoiseSchedule, spec: MixtureSpec, batch: int, seed: int) -> CheckResult:
    """eta = 1 on the full trajectory is the DDPM posterior law at every t."""
    rng = _rng(seed, 4)
    model = MixtureOptimalDenoiser(spec, schedule)
    traj = Trajectory.full(schedule.T)
    policy = SigmaPolicy.from_eta(1.0)

    worst = 0.0
    for t in range(1, schedule.T + 1):
        x_t = StateBatch(rng.standard_normal((batch, spec.d)), t=t)
        x0 = StateBatch.data_level(rng.standard_normal((batch, spec.d)))
        sigma = sigma_ddpm(schedule, t)

        family = reverse_conditional_params(schedule, x_t, x0, t, t - 1, sigma)
        markov = ddpm_posterior_params(schedule, x_t, x0, t)
        worst = max(worst, float(np.max(np.abs(family.mean - markov.mean))), abs(family.var - markov.var))

        noise = rng.standard_normal(x_t.shape)
        stepped = generalized_step(schedule, x_t, traj, t, model, policy, noise)
        f = StateBatch.data_level(predict_x0(schedule, x_t, t, evaluate(model, x_t)))
        expected = ddpm_posterior_params(schedule, x_t, f, t).mean + sigma * noise
        worst = max(worst, float(np.max(np.abs(stepped.data - expected))))

    return CheckResult("ddpm_reduction", worst < 1e-10, worst, 1e-10, f"max deviation {worst:.2e} over T={schedule.T}")


def check_ddim_consistency(schedule: NoiseSchedule, spec: MixtureSpec, chains: int, S: int, seed: int) -> CheckResult:
    """Deterministic runs ignore the noise seed; short and full trajectories land close together."""
    model = MixtureOptimalDenoiser(spec, schedule)
    policy = SigmaPolicy.from_eta(0.0)
    stream = NoiseStream(seed, spec.d)
    latents = stream.latent(0, chains)

    short = select_subsequence(schedule.T, S)
    first = run_chains(schedule, short, model, policy, stream, chains, x_T=latents)
    second = run_chains(schedule, short, model, policy, NoiseStream(seed + 1, spec.d), chains, x_T=latents)
    identical = bool(np.array_equal(first, second))

    full = run_chains(schedule, Trajectory.full(schedule.T), model, policy, stream, chains, x_T=latents)
    distance = float(np.mean(np.linalg.norm(first - full, axis=1)))
    data_std = float(np.sqrt(np.trace(spec.covariance) / spec.d))

    passed = identical and distance < 0.1 * data_std
    detail = f"bit-identical across seeds: {identical}; mean distance S={S} vs S={schedule.T}: {distance:.4f} (data std {data_std:.3f})"
    return CheckResult("ddim_consistency", passed, distance / data_std, 0.1, detail)


def reconstruction_errors(
    schedule: NoiseSchedule, spec: MixtureSpec, steps: tuple[int, ...], n: int, seed: int
) -> list[float]:
    """Per-dimension MSE of encode-then-decode with the analytic denoiser for each S."""
    model = MixtureOptimalDenoiser(spec, schedule)
    x0 = StateBatch.data_level(spec.sample(n, _rng(seed, 5)))
    errors = []
    for S in steps:
        traj = select_subsequence(schedule.T, S)
        decoded = integrate(schedule, encode(schedule, x0, traj, model), traj, model, Integrator.DDIM)
        errors.append(float(np.mean((decoded.data - x0.data) ** 2)))
    return errors


def decreasing_with_tolerance(values: list[float], tolerance: float = 0.05, allowed_inversions: int = 1) -> bool:
    inversions = 0
    for before, after in zip(values, values[1:]):
        if after > before:
            inversions += 1
            if after > (1.0 + tolerance) * before:
                return False
    return inversions <= allowed_inversions


def check_reconstruction(schedule: NoiseSchedule, spec: MixtureSpec, steps: tuple[int, ...], n: int, seed: int) -> CheckResult:
    errors = reconstruction_errors(schedule, spec, steps, n, seed)
    ratio = errors[-1] / errors[0]
    passed = decreasing_with_tolerance(errors) and ratio < 0.1
    detail = ", ".join(f"S={S}: {e:.3e}" for S, e in zip(steps, errors))
    return CheckResult("reconstruction", passed, ratio, 0.1, detail)


def check_integrator_refinement(
    schedule: NoiseSchedule, spec: MixtureSpec, steps: tuple[int, ...], chains: int, seed: int
) -> CheckResult:
    """The DDIM and probability-flow Euler iterates converge to each other as S doubles."""
    if len(steps) < 2:
        raise ParameterError(f"refinement needs at least two S levels, got {steps}")
    model = MixtureOptimalDenoiser(spec, schedule)
    x_T = StateBatch(NoiseStream(seed, spec.d).latent(0, chains), t=schedule.T)
    gaps = [terminal_gap(schedule, x_T, select_subsequence(schedule.T, S), model) for S in steps]
    ratios = [after / before for before, after in zip(gaps, gaps[1:])]
    worst = max(ratios)
    detail = ", ".join(f"S={S}: {g:.3e}" for S, g in zip(steps, gaps))
    return CheckResult("integrator_refinement", worst < 0.7, worst, 0.7, detail)


def check_discrete(draws: int, instances: int, seed: int) -> CheckResult:
    """Exhaustive marginalization of the categorical reverse kernel, and the convexity bound."""
    rng = _rng(seed, 6)
    worst = 0.0
    for _ in range(draws):
        K = int(rng.integers(2, 9))
        schedule = DiscreteSchedule.random(int(rng.integers(1, 17)), rng)
        for t in range(1, schedule.T + 1):
            sigma = rng.uniform(0.0, feasible_sigma_bound(schedule, t))
            for k in range(K):
                x0 = CategoricalState.one_hot(k, K)
                marginal = marginalize_reverse(schedule, x0, t, sigma)
                expected = cat_forward_marginal(schedule, x0, t - 1)
                worst = max(worst, float(np.max(np.abs(marginal.probs - expected.probs))))

    violations = 0
    for _ in range(instances):
        K = int(rng.integers(2, 6))
        schedule = DiscreteSchedule.random(int(rng.integers(1, 17)), rng)
        t = int(rng.integers(1, schedule.T + 1))
        sigma = rng.uniform(0.0, feasible_sigma_bound(schedule, t))
        x0 = CategoricalState.one_hot(int(rng.integers(0, K)), K)
        x_t = CategoricalState.one_hot(int(rng.integers(0, K)), K)
        guess = CategoricalState(rng.dirichlet(np.ones(K)))
        kl, bound = cat_kl_and_bound(schedule, x_t, x0, t, sigma, lambda x, t: guess)
        if kl > bound + 1e-12:
            violations += 1

    passed = worst <= 1e-12 and violations == 0
    detail = f"max marginalization error {worst:.2e}; bound violations {violations}/{instances}"
    return CheckResult("discrete_marginalization", passed, worst, 1e-12, detail)


def sweep_distances(
    schedule: NoiseSchedule,
    spec: MixtureSpec,
    policy: SigmaPolicy,
    S: int,
    n: int,
    replicates: int,
    seed: int,
) -> np.ndarray:
    """Energy distance between n generated samples and n fresh data samples, per replicate."""
    model = MixtureOptimalDenoiser(spec, schedule)
    traj = select_subsequence(schedule.T, S)
    distances = []
    for r in range(replicates):
        stream = NoiseStream(seed + r, spec.d)
        generated = run_chains(schedule, traj, model, policy, stream, n)
        reference = spec.sample(n, _rng(seed, 7, r))
        distances.append(energy_distance(generated, reference))
    return np.array(distances)


def check_sigma_hat_degradation(
    schedule: NoiseSchedule, spec: MixtureSpec, n: int, replicates: int, S: int, seed: int
) -> CheckResult:
    """sigma-hat is worse than eta = 0 on a short trajectory and indistinguishable on the full one."""
    hat, ddim = SigmaPolicy.hat(), SigmaPolicy.from_eta(0.0)
    short_hat = replicate_band(sweep_distances(schedule, spec, hat, S, n, replicates, seed))
    short_ddim = replicate_band(sweep_distances(schedule, spec, ddim, S, n, replicates, seed))
    full_hat = replicate_band(sweep_distances(schedule, spec, hat, schedule.T, n, replicates, seed))
    full_ddim = replicate_band(sweep_distances(schedule, spec, ddim, schedule.T, n, replicates, seed))

    passed = short_hat[0] > short_ddim[0] and bands_overlap(full_hat, full_ddim)
    detail = (
        f"S={S}: sigma_hat {short_hat[0]:.4f} vs eta=0 {short_ddim[0]:.4f}; "
        f"S={schedule.T}: sigma_hat {full_hat[0]:.4f} vs eta=0 {full_ddim[0]:.4f}"
    )
    return CheckResult("sigma_hat_degradation", passed, short_hat[0] - short_ddim[0], 0.0, detail)


def check_timing_linearity(schedule: NoiseSchedule, spec: MixtureSpec, steps: tuple[int, ...], chains: int, seed: int) -> CheckResult:
    model = MixtureOptimalDenoiser(spec, schedule)
    seconds = [time_sampler(schedule, model, SigmaPolicy.from_eta(0.0), S, chains, spec.d, seed) for S in steps]
    a, b, r2 = fit_linear(np.array(steps), np.array(seconds))
    detail = f"seconds = {a:.3e} * S + {b:.3e}, R^2 = {r2:.4f}"
    return CheckResult("timing_linearity", r2 > 0.99, r2, 0.99, detail)


def check_gradient(schedule: NoiseSchedule, spec: MixtureSpec, train_steps: int, seed: int) -> CheckResult:
    config = TrainConfig(steps=train_steps, batch_size=64, seed=seed)
    model = train_toy_denoiser(spec, schedule, config, progress=False)
    worst = gradient_check(model, spec, seed=seed)
    return CheckResult("gradient_check", worst < 1e-4, worst, 1e-4, f"max relative gradient error {worst:.2e}")


def check_slerp(pairs: int, seed: int) -> CheckResult:
    rng = _rng(seed, 8)
    exact = True
    for _ in range(pairs):
        a, b = rng.standard_normal(8), rng.standard_normal(8)
        exact &= bool(np.array_equal(slerp(a, b, 0.0), a) and np.array_equal(slerp(a, b, 1.0), b))
    antipodal = slerp(np.ones(4), -np.ones(4), 0.3)
    finite = bool(np.all(np.isfinite(antipodal)))
    return CheckResult("slerp_endpoints", exact and finite, float(exact and finite), 1.0, f"endpoints exact: {exact}; antipodal finite: {finite}")


def _within(steps: tuple[int, ...], T: int) -> tuple[int, ...]:
    """Keeps the S levels a schedule of length T can hold, plus T itself when any were dropped."""
    kept = tuple(S for S in steps if S <= T)
    if len(kept) < len(steps) and T not in kept:
        kept = kept + (T,)
    return kept


def run_checks(
    schedule: NoiseSchedule, spec: MixtureSpec, sizes: VerifySizes, seed: int, progress: bool = True
) -> list[CheckResult]:
    T = schedule.T
    checks: dict[str, Callable[[], CheckResult]] = {
        "marginals": lambda: check_marginals(schedule, sizes.marginal_sigmas, sizes.mc_samples, seed),
        "equivalence": lambda: check_equivalence(
            spec, sizes.equivalence_T, sizes.equivalence_models, sizes.equivalence_sigmas, sizes.equivalence_samples, seed
        ),
        "objective_structure": lambda: check_objective_structure(spec, sizes.equivalence_T, sizes.equivalence_samples, seed),
        "ddpm_reduction": lambda: check_ddpm_reduction(schedule, spec, sizes.ddpm_batch, seed),
        "ddim_consistency": lambda: check_ddim_consistency(
            schedule, spec, sizes.consistency_chains, min(sizes.consistency_steps, T), seed
        ),
        "reconstruction": lambda: check_reconstruction(
            schedule, spec, _within(sizes.reconstruct_steps, T), sizes.reconstruct_samples, seed
        ),
        "integrator_refinement": lambda: check_integrator_refinement(
            schedule, spec, _within(sizes.refinement_steps, T), sizes.refinement_chains, seed
        ),
        "discrete_marginalization": lambda: check_discrete(sizes.discrete_draws, sizes.discrete_instances, seed),
        "sigma_hat_degradation": lambda: check_sigma_hat_degradation(
            schedule, spec, sizes.hat_samples, sizes.hat_replicates, min(sizes.hat_steps, T), seed
        ),
        "timing_linearity": lambda: check_timing_linearity(schedule, spec, _within(sizes.bench_steps, T), sizes.bench_chains, seed),
        "gradient_check": lambda: check_gradient(schedule, spec, sizes.train_steps, seed),
        "slerp_endpoints": lambda: check_slerp(sizes.slerp_pairs, seed),
    }

    results = []
    for name, check in tqdm(checks.items(), desc="verify", disable=not progress):
        if name in sizes.skip:
            logger.info("skipping %s", name)
            continue
        start = time.perf_counter()
        result = check()
        result.seconds = time.perf_counter() - start
        logger.log(logging.INFO if result.passed else logging.ERROR, "%s %s: %s", name, "ok" if result.passed else "FAILED", result.detail)
        results.append(result)
    return results


def write_summary(path: Path, results: list[CheckResult]) -> Path:
    summary = {
        "passed": all(r.passed for r in results),
        "checks": [asdict(r) for r in results],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
    return path
