"""Denoising objective L_gamma, variational objective J_sigma and the weights tying them together.

For t >= 2 the model-dependent part of J_sigma is the KL between q_sigma(x_{t-1} | x_t, x_0)
and the same kernel with x_0 replaced by f(x_t). Both are N(a x_t + b x_0, sigma_t^2 I), so
the KL is b^2 ||x_0 - f(x_t)||^2 / (2 sigma_t^2). Since
||x_0 - f(x_t)||^2 = ((1 - alpha_t)/alpha_t) ||eps - eps_hat||^2, every term is a fixed multiple
of the corresponding L_gamma term.
"""

from __future__ import annotations

import logging
from enum import Enum

import numpy as np

from lib.denoiser import DenoiserModel, evaluate, predict_x0
from lib.gaussian import GaussianParams, StateBatch, ddpm_posterior_params, reverse_mean_coefficients
from lib.objective.structs import ObjectiveTerms, ReportRow, SamplePlan, WeightVector
from lib.schedule import NoiseSchedule
from lib.utils import DomainError, ShapeError, check_same_shape

logger = logging.getLogger(__name__)


class GammaConvention(Enum):
    EXACT = "exact"
    RECONSTRUCTION = "reconstruction"
    PER_DIMENSION = "per_dimension"


def _check_sigma(sigma: np.ndarray, T: int) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.float64).ravel()
    if sigma.shape[0] != T:
        raise ShapeError(f"sigma vector has {sigma.shape[0]} entries, expected T={T}")
    if np.any(~np.isfinite(sigma)) or np.any(sigma <= 0.0):
        raise DomainError("every sigma_t must be positive; sigma = 0 lies outside the equivalence")
    return sigma


def x0_coefficient(schedule: NoiseSchedule, t: int, sigma: float) -> float:
    """Weight of x_0 in the reverse mean of step t -> t-1; fixed to 1 at t = 1 where the
    model term is the reconstruction likelihood."""
    if t == 1:
        return 1.0
    _, b = reverse_mean_coefficients(schedule, t, t - 1, sigma)
    return b


def per_step_errors(schedule: NoiseSchedule, model: DenoiserModel, plan: SamplePlan, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample ||eps_hat - eps||^2 and ||x_0 - f(x_t)||^2 at timestep t."""
    x_t = plan.x_t(schedule, t)
    eps_hat = evaluate(model, x_t)
    eps_err = np.sum((eps_hat - plan.noise(t)) ** 2, axis=1)
    x0_err = np.sum((plan.x0 - predict_x0(schedule, x_t, t, eps_hat)) ** 2, axis=1)
    return eps_err, x0_err


def l_gamma(schedule: NoiseSchedule, model: DenoiserModel, plan: SamplePlan, gamma: WeightVector) -> float:
    """sum_t gamma_t * mean ||eps_theta(sqrt(a_t) x_0 + sqrt(1 - a_t) eps_t) - eps_t||^2."""
    plan.check_schedule(schedule)
    if gamma.T != plan.T:
        raise ShapeError(f"weights cover {gamma.T} steps, plan covers {plan.T}")

    total = 0.0
    for t in range(1, plan.T + 1):
        eps_err, _ = per_step_errors(schedule, model, plan, t)
        total += gamma.at(t) * float(eps_err.mean())
    return total


def prior_kl(schedule: NoiseSchedule, x0: np.ndarray) -> np.ndarray:
    """Per-sample KL(q(x_T | x_0) || N(0, I))."""
    alpha = schedule.alphas[-1]
    d = x0.shape[1]
    sq = np.sum(x0**2, axis=1)
    return 0.5 * (alpha * sq + d * (1.0 - alpha) - d - d * np.log(1.0 - alpha))


def j_sigma(schedule: NoiseSchedule, model: DenoiserModel, plan: SamplePlan, sigma: np.ndarray) -> ObjectiveTerms:
    """J_sigma from its closed-form KL decomposition, averaged over the plan."""
    plan.check_schedule(schedule)
    sigma = _check_sigma(sigma, plan.T)

    per_t = np.zeros(plan.T)
    constant = np.zeros(plan.T)
    for t in range(1, plan.T + 1):
        s = sigma[t - 1]
        c = x0_coefficient(schedule, t, s)
        _, x0_err = per_step_errors(schedule, model, plan, t)
        per_t[t - 1] = float((c**2 * x0_err / (2.0 * s**2)).mean())

    constant[0] += 0.5 * plan.d * np.log(2.0 * np.pi * sigma[0] ** 2)
    constant[-1] += float(prior_kl(schedule, plan.x0).mean())
    return ObjectiveTerms(per_t=per_t, constant_per_t=constant)


def equivalence_gamma(
    sigma: np.ndarray,
    schedule: NoiseSchedule,
    d: int,
    convention: GammaConvention | str = GammaConvention.EXACT,
) -> WeightVector:
    """Weights gamma with J_sigma = L_gamma + C.

    EXACT carries the squared x_0 coefficient of the reverse mean and is the one under
    which the residual is constant. RECONSTRUCTION drops that coefficient and PER_DIMENSION is
    1 / (2 d sigma_t^2 alpha_t); both are kept for comparison.
    """
    convention = GammaConvention(convention)
    sigma = _check_sigma(sigma, schedule.T)
    alphas = schedule.alphas[1:]

    if convention is GammaConvention.PER_DIMENSION:
        return WeightVector(1.0 / (2.0 * d * sigma**2 * alphas))

    gamma = (1.0 - alphas) / (2.0 * sigma**2 * alphas)
    if convention is GammaConvention.EXACT:
        coefficients = np.array([x0_coefficient(schedule, t, sigma[t - 1]) for t in range(1, schedule.T + 1)])
        gamma = coefficients**2 * gamma
    return WeightVector(gamma)


def gaussian_kl(p: GaussianParams, q: GaussianParams) -> np.ndarray:
    """Row-wise KL(N(mu_p, v_p I) || N(mu_q, v_q I))."""
    check_same_shape(p.mean, q.mean, "gaussian kl")
    if p.var <= 0.0 or q.var <= 0.0:
        raise DomainError("KL between degenerate Gaussians is undefined")
    d = p.mean.shape[1]
    ratio = p.var / q.var
    sq = np.sum((p.mean - q.mean) ** 2, axis=1)
    return 0.5 * (d * (ratio - 1.0 - np.log(ratio)) + sq / q.var)


def ddpm_bound_terms(schedule: NoiseSchedule, model: DenoiserModel, plan: SamplePlan) -> np.ndarray:
    """Mean KL(q(x_{t-1}|x_t, x_0) || p(x_{t-1}|x_t)) of the Markovian bound for t = 2..T
    (index t-2), with the generative mean given by the posterior at f(x_t)."""
    plan.check_schedule(schedule)
    terms = np.zeros(plan.T - 1)
    for t in range(2, plan.T + 1):
        x_t = plan.x_t(schedule, t)
        f = predict_x0(schedule, x_t, t, evaluate(model, x_t))
        target = ddpm_posterior_params(schedule, x_t, StateBatch.data_level(plan.x0), t)
        generative = ddpm_posterior_params(schedule, x_t, StateBatch.data_level(f), t)
        terms[t - 2] = float(gaussian_kl(target, generative).mean())
    return terms


def equivalence_report(
    schedule: NoiseSchedule, model: DenoiserModel, plan: SamplePlan, sigma: np.ndarray, gamma: WeightVector
) -> list[ReportRow]:
    """One row per t: J_sigma term (model part), gamma-weighted L term, and their difference."""
    terms = j_sigma(schedule, model, plan, sigma)
    rows: list[ReportRow] = []
    for t in range(1, plan.T + 1):
        eps_err, _ = per_step_errors(schedule, model, plan, t)
        l_term = gamma.at(t) * float(eps_err.mean())
        kl_term = float(terms.per_t[t - 1] + terms.constant_per_t[t - 1])
        rows.append({"t": t, "kl_term": kl_term, "l_term": l_term, "gamma_t": gamma.at(t), "residual": kl_term - l_term})
    return rows


def constancy_spread(
    schedule: NoiseSchedule,
    models: list[DenoiserModel],
    plan: SamplePlan,
    sigma: np.ndarray,
    gamma: WeightVector,
) -> float:
    """Relative spread of J_sigma - L_gamma across models; 0 when the residual is model-free."""
    totals = np.array([j_sigma(schedule, m, plan, sigma).total for m in models])
    residuals = totals - np.array([l_gamma(schedule, m, plan, gamma) for m in models])
    scale = max(float(np.max(np.abs(residuals))), float(np.max(np.abs(totals))), 1e-300)
    spread = float((residuals.max() - residuals.min()) / scale)
    logger.debug("residuals %s, relative spread %.3e", np.array2string(residuals, precision=6), spread)
    return spread
