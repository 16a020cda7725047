from .structs import WeightVector, SamplePlan, ObjectiveTerms, ReportRow
from .objectives import (
    GammaConvention,
    x0_coefficient,
    l_gamma,
    j_sigma,
    prior_kl,
    equivalence_gamma,
    gaussian_kl,
    ddpm_bound_terms,
    equivalence_report,
    constancy_spread,
)
from .lookup import PerStepLinearDenoiser, fit_per_step_linear

__all__ = [
    "WeightVector",
    "SamplePlan",
    "ObjectiveTerms",
    "ReportRow",
    "GammaConvention",
    "x0_coefficient",
    "l_gamma",
    "j_sigma",
    "prior_kl",
    "equivalence_gamma",
    "gaussian_kl",
    "ddpm_bound_terms",
    "equivalence_report",
    "constancy_spread",
    "PerStepLinearDenoiser",
    "fit_per_step_linear",
]
