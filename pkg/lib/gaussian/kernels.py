"""Exact Gaussian kernels of the sigma-parameterized inference family.

All kernels are isotropic, so a kernel is fully described by an affine mean in
(x_t, x_0) and one scalar variance.
"""

from __future__ import annotations

import numpy as np

from lib.gaussian.structs import GaussianParams, StateBatch
from lib.schedule import NoiseSchedule, stepwise
from lib.utils import DomainError, ParameterError, as_matrix, check_same_shape, checked_sqrt


def forward_marginal_sample(
    schedule: NoiseSchedule, x0: StateBatch, t: int, noise: np.ndarray
) -> StateBatch:
    """x_t = sqrt(alpha_t) x_0 + sqrt(1 - alpha_t) eps."""
    if x0.t != 0:
        raise ParameterError(f"forward marginal starts from data level, got t={x0.t}")
    schedule.check_index(t, low=0)
    noise = as_matrix(noise, "noise")
    check_same_shape(x0.data, noise, "forward marginal noise")

    alpha = schedule.alphas[t]
    return x0.at(np.sqrt(alpha) * x0.data + np.sqrt(1.0 - alpha) * noise, t)


def reverse_mean_coefficients(
    schedule: NoiseSchedule, t_from: int, t_to: int, sigma: float
) -> tuple[float, float]:
    """Coefficients (a, b) with mean = a * x_t + b * x_0 for q_sigma(x_{t_to} | x_{t_from}, x_0)."""
    if t_from <= t_to:
        raise ParameterError(f"reverse kernel needs t_from > t_to, got {t_from} -> {t_to}")
    schedule.check_index(t_from)
    schedule.check_index(t_to, low=0)
    if sigma < 0.0:
        raise ParameterError(f"sigma must be nonnegative, got {sigma}")

    alpha_from = schedule.alphas[t_from]
    alpha_to = schedule.alphas[t_to]
    direction = checked_sqrt(1.0 - alpha_to - sigma**2, f"direction coefficient at {t_from}->{t_to}")

    a = direction / np.sqrt(1.0 - alpha_from)
    b = np.sqrt(alpha_to) - a * np.sqrt(alpha_from)
    return float(a), float(b)


def reverse_conditional_params(
    schedule: NoiseSchedule,
    x_t: StateBatch,
    x0: StateBatch,
    t_from: int,
    t_to: int,
    sigma: float,
) -> GaussianParams:
    check_same_shape(x_t.data, x0.data, "reverse conditional")
    a, b = reverse_mean_coefficients(schedule, t_from, t_to, sigma)
    return GaussianParams(mean=a * x_t.data + b * x0.data, var=sigma**2)


def propagate_marginal(
    schedule: NoiseSchedule, x0: StateBatch, t_from: int, t_to: int, sigma: float
) -> GaussianParams:
    """Law of x_{t_to} given x_0 after composing q(x_{t_from}|x_0) with the reverse kernel.

    Marginal consistency means this equals N(sqrt(alpha_{t_to}) x_0, (1 - alpha_{t_to}) I).
    """
    a, b = reverse_mean_coefficients(schedule, t_from, t_to, sigma)
    alpha_from = schedule.alphas[t_from]

    mean = (a * np.sqrt(alpha_from) + b) * x0.data
    var = sigma**2 + a**2 * (1.0 - alpha_from)
    return GaussianParams(mean=mean, var=var)


def sigma_ddpm(schedule: NoiseSchedule, t: int) -> float:
    """Noise scale that makes the forward process Markovian (the DDPM posterior std)."""
    schedule.check_index(t)
    alpha_prev = schedule.alphas[t - 1]
    alpha = schedule.alphas[t]
    return float(np.sqrt((1.0 - alpha_prev) / (1.0 - alpha)) * np.sqrt(1.0 - alpha / alpha_prev))


def ddpm_posterior_params(schedule: NoiseSchedule, x_t: StateBatch, x0: StateBatch, t: int) -> GaussianParams:
    """q(x_{t-1} | x_t, x_0) of the Markovian chain: mean mu_tilde, variance beta_tilde."""
    schedule.check_index(t)
    check_same_shape(x_t.data, x0.data, "ddpm posterior")

    beta, alpha_step = stepwise(schedule, t)
    alpha_prev = schedule.alphas[t - 1]
    alpha = schedule.alphas[t]

    coef_x0 = np.sqrt(alpha_prev) * beta / (1.0 - alpha)
    coef_xt = np.sqrt(alpha_step) * (1.0 - alpha_prev) / (1.0 - alpha)
    var = (1.0 - alpha_prev) / (1.0 - alpha) * beta
    return GaussianParams(mean=coef_x0 * x0.data + coef_xt * x_t.data, var=var)


def bayes_forward_params(
    schedule: NoiseSchedule, x_prev: StateBatch, x0: StateBatch, t: int, sigma: float
) -> GaussianParams:
    """q_sigma(x_t | x_{t-1}, x_0) by Bayes' rule.

    With x_{t-1} | x_t, x_0 ~ N(a x_t + b x_0, sigma^2) and x_t | x_0 ~ N(sqrt(alpha_t) x_0,
    1 - alpha_t), the posterior over x_t is Gaussian with precision
    1/(1 - alpha_t) + a^2/sigma^2.
    """
    if sigma <= 0.0:
        raise DomainError("sigma = 0 makes x_{t-1} a deterministic function of (x_t, x_0); no forward density")
    check_same_shape(x_prev.data, x0.data, "bayes forward kernel")
    a, b = reverse_mean_coefficients(schedule, t, t - 1, sigma)
    alpha = schedule.alphas[t]

    precision = 1.0 / (1.0 - alpha) + a**2 / sigma**2
    var = 1.0 / precision
    mean = var * (np.sqrt(alpha) * x0.data / (1.0 - alpha) + a * (x_prev.data - b * x0.data) / sigma**2)
    return GaussianParams(mean=mean, var=var)


def bayes_forward_coefficients(schedule: NoiseSchedule, t: int, sigma: float) -> tuple[float, float]:
    """Coefficients (on x_{t-1}, on x_0) of the Bayes forward mean."""
    if sigma <= 0.0:
        raise DomainError("sigma must be positive for the forward kernel")
    a, b = reverse_mean_coefficients(schedule, t, t - 1, sigma)
    alpha = schedule.alphas[t]
    var = 1.0 / (1.0 / (1.0 - alpha) + a**2 / sigma**2)
    return float(var * a / sigma**2), float(var * (np.sqrt(alpha) / (1.0 - alpha) - a * b / sigma**2))
