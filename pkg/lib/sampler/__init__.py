from .policy import PolicyKind, SigmaPolicy, sigma_eta, sigma_hat
from .noise import NoiseStream, Stream
from .step import generalized_step, run_trajectory, run_chains

__all__ = [
    "PolicyKind",
    "SigmaPolicy",
    "sigma_eta",
    "sigma_hat",
    "NoiseStream",
    "Stream",
    "generalized_step",
    "run_trajectory",
    "run_chains",
]
