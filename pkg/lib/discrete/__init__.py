from .categorical import (
    CategoricalState,
    DiscreteSchedule,
    Predictor,
    feasible_sigma_bound,
    mixture_weights,
    cat_forward_marginal,
    cat_reverse_conditional,
    cat_reverse_model,
    cat_kl_and_bound,
    cat_reverse_chain,
    identity_guess,
    uniform_guess,
    marginalize_reverse,
)

__all__ = [
    "CategoricalState",
    "DiscreteSchedule",
    "Predictor",
    "feasible_sigma_bound",
    "mixture_weights",
    "cat_forward_marginal",
    "cat_reverse_conditional",
    "cat_reverse_model",
    "cat_kl_and_bound",
    "cat_reverse_chain",
    "identity_guess",
    "uniform_guess",
    "marginalize_reverse",
]
