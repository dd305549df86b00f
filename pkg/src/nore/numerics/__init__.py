"""Small numpy autodiff stack: tensors, layers, distributions, Adam, special functions."""

from .autodiff import (
    DimensionError,
    NumericsError,
    Tensor,
    as_tensor,
    concat,
    grad_enabled,
    log_softmax,
    logsumexp,
    no_grad,
    softmax,
    stack,
    stop_gradient,
    straight_through,
)
from .checkpoint import load_checkpoint, params_checksum, save_checkpoint
from .distributions import (
    bernoulli_entropy,
    bernoulli_nll,
    categorical_kl,
    categorical_log_prob,
    categorical_sample_st,
    gaussian_rsample,
    one_hot,
    sample_categorical_indices,
)
from .layers import MLP, GruCell, Linear, ParamSet, gru_step, mlp_forward, xavier_uniform
from .optim import MissingGradientError, adam_step
from .special import digamma, entropy_categorical

__all__ = [
    "DimensionError", "NumericsError", "Tensor", "as_tensor", "concat", "grad_enabled",
    "log_softmax", "logsumexp", "no_grad", "softmax", "stack", "stop_gradient",
    "straight_through", "load_checkpoint", "params_checksum", "save_checkpoint",
    "bernoulli_entropy", "bernoulli_nll", "categorical_kl", "categorical_log_prob",
    "categorical_sample_st", "gaussian_rsample", "one_hot", "sample_categorical_indices",
    "MLP", "GruCell", "Linear", "ParamSet", "gru_step", "mlp_forward", "xavier_uniform",
    "MissingGradientError", "adam_step", "digamma", "entropy_categorical",
]
