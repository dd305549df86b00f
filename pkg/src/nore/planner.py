"""Expected-free-energy evaluation of imagined rollouts and random-shooting MPC.

For each imagined step the cost is

    G(pi, tau) = H[P(o | h, s)]                      (observation ambiguity)
               + log Q(s* | h) - log P(s* | D)       (preference divergence, one prior sample s*)
               - Var_ensemble[P(o | h, s)]           (parameter information gain)

and a policy's G is the sum over its horizon.  Lower is better.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import N_ACTIONS
from .numerics import Tensor, bernoulli_entropy, no_grad, one_hot, sample_categorical_indices
from .numerics.autodiff import _sigmoid
from .world_model import LatentState, WorldModel, disagreement


@dataclass
class PlannerConfig:
    horizon: int = 15
    n_candidates: int = 64
    mode: str = "argmin"          # or "softmax"
    temperature: float = 1.0
    obs_entropy_weight: float = 1.0
    preference_weight: float = 1.0
    info_gain_weight: float = 1.0

    def __post_init__(self):
        if self.horizon < 1 or self.n_candidates < 1:
            raise ValueError("horizon and n_candidates must be >= 1")
        if self.mode not in ("argmin", "softmax"):
            raise ValueError(f"unknown selection mode {self.mode!r}")

    @classmethod
    def exploration(cls, **kw) -> "PlannerConfig":
        """Disagreement as the only drive."""
        return cls(obs_entropy_weight=0.0, preference_weight=0.0, info_gain_weight=1.0, **kw)


@dataclass
class GBreakdown:
    """Per-step terms for one or more candidate policies, shape (..., horizon)."""

    term1: np.ndarray
    term2: np.ndarray
    term3: np.ndarray
    weights: tuple = (1.0, 1.0, 1.0)

    @property
    def per_step(self) -> np.ndarray:
        w1, w2, w3 = self.weights
        return w1 * self.term1 + w2 * self.term2 - w3 * self.term3

    @property
    def total(self):
        return self.per_step.sum(axis=-1)

    def row(self, i: int) -> "GBreakdown":
        return GBreakdown(self.term1[i], self.term2[i], self.term3[i], self.weights)

    def summary(self) -> dict:
        return {"G": float(self.total), "term1": float(self.term1.sum()),
                "term2": float(self.term2.sum()), "term3": float(self.term3.sum())}


@dataclass
class CandidatePolicy:
    actions: np.ndarray
    G: float | None = None

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=np.int64)
        if self.actions.ndim != 1 or len(self.actions) < 1:
            raise ValueError("policy must be a non-empty 1-D action sequence")
        if np.any((self.actions < 0) | (self.actions >= N_ACTIONS)):
            raise ValueError("invalid action in policy")


@dataclass
class PlanResult:
    action: int
    index: int
    breakdown: GBreakdown
    totals: np.ndarray = field(repr=False)


def observation_entropy(probs: np.ndarray) -> np.ndarray:
    """Sum over bits of Bernoulli entropies (nats)."""
    return bernoulli_entropy(probs).sum(axis=-1)


def term1_obs_entropy(model: WorldModel, h, s) -> np.ndarray:
    return observation_entropy(model.decode_probs(h, s))


def check_preferences(pref_logp: np.ndarray, atol: float = 1e-6) -> np.ndarray:
    pref_logp = np.asarray(pref_logp, dtype=np.float64)
    if pref_logp.ndim != 1 or abs(np.exp(pref_logp).sum() - 1.0) > atol:
        raise ValueError("preference log-probabilities must form a normalised vector")
    return pref_logp


def preference_divergence(prior_logits: np.ndarray, sample_idx: np.ndarray,
                          pref_logp: np.ndarray) -> np.ndarray:
    """log Q(s*) - sum_dims log P(category of s* in that dim).

    ``prior_logits`` is (..., dims, categories), ``sample_idx`` is (..., dims).
    """
    logits = np.asarray(prior_logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    logq = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logq_s = np.take_along_axis(logq, sample_idx[..., None], axis=-1)[..., 0].sum(axis=-1)
    return logq_s - pref_logp[sample_idx].sum(axis=-1)


def term2_preference_divergence(prior_logits, pref_logp, rng: np.random.Generator):
    """Draw one prior sample per row; returns (term2 values, sampled category indices)."""
    pref_logp = check_preferences(pref_logp)
    logits = np.asarray(prior_logits.data if isinstance(prior_logits, Tensor) else prior_logits,
                        dtype=np.float64)
    probs = np.exp(logits - logits.max(axis=-1, keepdims=True))
    probs /= probs.sum(axis=-1, keepdims=True)
    idx = sample_categorical_indices(probs, rng)
    return preference_divergence(logits, idx, pref_logp), idx


def term3_info_gain(model: WorldModel, h, s) -> np.ndarray:
    return model.ensemble_disagreement(h, s)


def evaluate_policies(model: WorldModel, actions: np.ndarray, start: LatentState,
                      pref_logp: np.ndarray, rng: np.random.Generator,
                      weights: tuple = (1.0, 1.0, 1.0)) -> GBreakdown:
    """Imagine every row of ``actions`` (N, horizon) from ``start`` and score it.

    ``start`` holds a single batch row which is broadcast to all candidates.
    """
    actions = np.asarray(actions, dtype=np.int64)
    if actions.ndim != 2 or actions.shape[1] < 1:
        raise ValueError("actions must be (n_candidates, horizon) with horizon >= 1")
    pref_logp = check_preferences(pref_logp)
    n, horizon = actions.shape
    c = model.config
    t1 = np.zeros((n, horizon))
    t2 = np.zeros((n, horizon))
    t3 = np.zeros((n, horizon))
    with no_grad():
        h = Tensor(np.repeat(start.h.data, n, axis=0))
        s = Tensor(np.repeat(start.s.data, n, axis=0))
        for tau in range(horizon):
            h = model.recurrent_step(h, s, actions[:, tau])
            prior_logits = model.prior(h).data
            t2[:, tau], idx = term2_preference_divergence(prior_logits, pref_logp, rng)
            s = Tensor(one_hot(idx, c.state_categories, dtype=model.dtype))
            feat = model._features(h, s)
            t1[:, tau] = observation_entropy(_sigmoid(model.decoder(feat).data))
            t3[:, tau] = disagreement(model.ensemble_probs(h, s))
    return GBreakdown(t1, t2, t3, tuple(weights))


def expected_free_energy(model: WorldModel, policy, start: LatentState, pref_logp,
                         rng: np.random.Generator, weights: tuple = (1.0, 1.0, 1.0)) -> GBreakdown:
    policy = policy if isinstance(policy, CandidatePolicy) else CandidatePolicy(policy)
    bd = evaluate_policies(model, policy.actions[None, :], start, pref_logp, rng, weights).row(0)
    policy.G = float(bd.total)
    return bd


def choose_candidate(totals: np.ndarray, rng: np.random.Generator, mode: str = "argmin",
                     temperature: float = 1.0) -> int:
    """Index of the chosen candidate: argmin with random tie-breaking, or a softmax(-G/T) draw."""
    totals = np.asarray(totals, dtype=np.float64)
    if totals.size == 0:
        raise ValueError("empty candidate set")
    if mode == "argmin":
        best = np.flatnonzero(totals == totals.min())
        return int(best[0]) if len(best) == 1 else int(rng.choice(best))
    if mode == "softmax":
        z = -totals / temperature
        p = np.exp(z - z.max())
        return int(rng.choice(len(totals), p=p / p.sum()))
    raise ValueError(f"unknown selection mode {mode!r}")


def select_action(model: WorldModel, start: LatentState, pref_logp, rng: np.random.Generator,
                  config: PlannerConfig | None = None, candidates: np.ndarray | None = None
                  ) -> PlanResult:
    """Random-shooting MPC: score candidates by G and return the winner's first action."""
    config = config or PlannerConfig()
    if candidates is None:
        candidates = rng.integers(0, N_ACTIONS, size=(config.n_candidates, config.horizon))
    candidates = np.asarray(candidates, dtype=np.int64)
    if candidates.ndim != 2 or len(candidates) == 0:
        raise ValueError("empty candidate set")
    weights = (config.obs_entropy_weight, config.preference_weight, config.info_gain_weight)
    bd = evaluate_policies(model, candidates, start, pref_logp, rng, weights)
    totals = bd.total
    i = choose_candidate(totals, rng, config.mode, config.temperature)
    return PlanResult(action=int(candidates[i, 0]), index=i, breakdown=bd.row(i), totals=totals)
