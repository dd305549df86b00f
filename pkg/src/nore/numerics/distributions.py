"""Categorical, Bernoulli and diagonal-Gaussian helpers on top of the autodiff core."""

from __future__ import annotations

import numpy as np

from .autodiff import NumericsError, Tensor, log_softmax, softmax, straight_through


def sample_categorical_indices(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw of one category per row of ``probs`` (last axis)."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1] + (1,)) * cdf[..., -1:]
    idx = (u > cdf).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def one_hot(indices: np.ndarray, n: int, dtype=np.float64) -> np.ndarray:
    return np.eye(n, dtype=dtype)[indices]


def categorical_sample_st(logits: Tensor, rng: np.random.Generator) -> Tensor:
    """One-hot sample along the last axis with straight-through gradients.

    The forward value is the one-hot draw; on the backward pass the sample
    behaves like ``softmax(logits)``.
    """
    if not np.all(np.isfinite(logits.data)):
        raise NumericsError("categorical logits must be finite")
    probs = softmax(logits)
    idx = sample_categorical_indices(probs.data, rng)
    hard = one_hot(idx, logits.shape[-1], dtype=logits.dtype)
    return straight_through(hard, probs)


def categorical_kl(logits_p: Tensor, logits_q: Tensor) -> Tensor:
    """KL(p || q) along the last axis, closed form."""
    logp = log_softmax(logits_p)
    logq = log_softmax(logits_q)
    p = logp.exp()
    return (p * (logp - logq)).sum(axis=-1)


def categorical_log_prob(logits: Tensor, sample: np.ndarray) -> Tensor:
    """log-probability of one-hot ``sample`` rows, summed over all but leading batch axes."""
    return (log_softmax(logits) * Tensor(sample)).sum(axis=-1)


def bernoulli_nll(logits: Tensor, target: np.ndarray) -> Tensor:
    """Elementwise -log Bernoulli(target | sigmoid(logits))."""
    return logits.softplus() - logits * Tensor(np.asarray(target, dtype=logits.dtype))


def bernoulli_entropy(p: np.ndarray) -> np.ndarray:
    """Elementwise entropy in nats, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log(p) + (1.0 - p) * np.log1p(-p))
    return np.where((p <= 0.0) | (p >= 1.0), 0.0, h)


def gaussian_rsample(mean: Tensor, log_var: Tensor, rng: np.random.Generator) -> Tensor:
    """Reparameterised draw from N(mean, diag(exp(log_var)))."""
    eps = rng.standard_normal(mean.shape).astype(mean.dtype)
    return mean + (log_var * 0.5).exp() * eps
