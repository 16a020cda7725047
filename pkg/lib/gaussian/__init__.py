from .structs import StateBatch, GaussianParams
from .kernels import (
    forward_marginal_sample,
    reverse_mean_coefficients,
    reverse_conditional_params,
    propagate_marginal,
    sigma_ddpm,
    ddpm_posterior_params,
    bayes_forward_params,
    bayes_forward_coefficients,
)

__all__ = [
    "StateBatch",
    "GaussianParams",
    "forward_marginal_sample",
    "reverse_mean_coefficients",
    "reverse_conditional_params",
    "propagate_marginal",
    "sigma_ddpm",
    "ddpm_posterior_params",
    "bayes_forward_params",
    "bayes_forward_coefficients",
]
