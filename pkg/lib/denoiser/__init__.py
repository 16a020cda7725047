from .base import DenoiserTag, DenoiserModel, ConstantDenoiser, evaluate, predict_x0
from .mixture import MixtureSpec, MixtureOptimalDenoiser, mixture_posterior_mean, mixture_optimal_eps
from .network import (
    TrainConfig,
    TimeConditionedMLP,
    TrainedDenoiser,
    draw_training_batch,
    l1_loss,
    train_toy_denoiser,
    gradient_check,
)
from .checkpoint import save_checkpoint, load_checkpoint, read_checkpoint_header
from .risk import denoising_risk

__all__ = [
    "DenoiserTag",
    "DenoiserModel",
    "ConstantDenoiser",
    "evaluate",
    "predict_x0",
    "MixtureSpec",
    "MixtureOptimalDenoiser",
    "mixture_posterior_mean",
    "mixture_optimal_eps",
    "TrainConfig",
    "TimeConditionedMLP",
    "TrainedDenoiser",
    "draw_training_batch",
    "l1_loss",
    "train_toy_denoiser",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
    "read_checkpoint_header",
    "denoising_risk",
]
