"""Learned prior preferences over latent state categories.

Three interchangeable mechanisms share one interface (``logp``, ``update``,
``snapshot``):

``nore``
    Memories pass through an attention MLP (scaled by a learned precision
    gamma, with a diagonal-Gaussian stochastic head) into a gating GRU whose
    state ``w`` is folded into the preference logits ``d <- beta*d + alpha*w``.
    After each sweep the blocks take one Adam step that increases the entropy
    of ``softmax(d)``.
``pepper``
    Hebbian accumulation of exposure counts into Dirichlet concentrations.
``baseline-G``
    Fixed uniform preferences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .numerics import (
    MLP,
    GruCell,
    ParamSet,
    Tensor,
    adam_step,
    digamma,
    gaussian_rsample,
    log_softmax,
    softmax,
)

NORE, PEPPER, BASELINE = "nore", "pepper", "baseline-G"
MECHANISMS = (NORE, PEPPER, BASELINE)
REAL_FRACTION = 0.3


# -- Dirichlet helpers --------------------------------------------------------

def _positive(d) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if np.any(~(d > 0)) or not np.all(np.isfinite(d)):
        raise ValueError("Dirichlet concentrations must be finite and > 0")
    return d


def dirichlet_mean(d) -> np.ndarray:
    d = _positive(d)
    return d / d.sum(axis=0, keepdims=True)


def dirichlet_log_mean(d) -> np.ndarray:
    """E[log D_i] = psi(d_i) - psi(sum_k d_k)."""
    d = _positive(d)
    return digamma(d) - digamma(d.sum(axis=0, keepdims=True))


def _log_normalize(x: np.ndarray) -> np.ndarray:
    m = x.max()
    return x - (m + math.log(np.exp(x - m).sum()))


# -- memories -------------------------------------------------------------------

@dataclass
class Memory:
    state: np.ndarray   # (dims, categories) one-hot posterior sample
    source: str         # "real" | "imagined"


@dataclass
class MemoryBuffer:
    memories: list[Memory] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.memories)

    def __iter__(self):
        return iter(self.memories)

    @property
    def n_real(self) -> int:
        return sum(m.source == "real" for m in self.memories)

    def aggregated(self) -> np.ndarray:
        """(n_memories, categories): each memory averaged over latent dims."""
        return np.stack([aggregate(m.state) for m in self.memories])


def aggregate(state: np.ndarray) -> np.ndarray:
    return np.asarray(state, dtype=np.float64).mean(axis=0)


def encode_memories(real: Sequence[np.ndarray], imagined: Sequence[np.ndarray],
                    rng: np.random.Generator, real_fraction: float = REAL_FRACTION) -> MemoryBuffer:
    """Keep ceil(real_fraction * |real|) random real samples, add all imagined ones, shuffle."""
    if len(real) == 0 and len(imagined) == 0:
        raise ValueError("cannot encode memories from two empty inputs")
    k = math.ceil(real_fraction * len(real) - 1e-12)
    keep = rng.choice(len(real), size=k, replace=False) if k else []
    mems = [Memory(np.asarray(real[i]), "real") for i in sorted(keep)]
    mems += [Memory(np.asarray(x), "imagined") for x in imagined]
    order = rng.permutation(len(mems))
    return MemoryBuffer([mems[i] for i in order])


# -- stores -------------------------------------------------------------------

@dataclass
class PreferenceStore:
    d: np.ndarray
    alpha: float
    beta: float
    mechanism: str

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        self.d = np.array(self.d, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        if not np.all(np.isfinite(self.d)):
            raise ValueError("preference store has non-finite entries")
        if self.mechanism == PEPPER:
            _positive(self.d)

    @classmethod
    def uniform(cls, categories: int, mechanism: str, alpha: float = 0.1,
                beta: float = 0.9) -> "PreferenceStore":
        return cls(np.ones(categories), alpha, beta, mechanism)


def preference_logp(store: PreferenceStore) -> np.ndarray:
    """Normalised log-preferences over categories for the planner."""
    store.validate()
    if store.mechanism == NORE:
        return _log_normalize(store.d)
    if store.mechanism == PEPPER:
        return _log_normalize(dirichlet_log_mean(store.d))
    return np.full(len(store.d), -math.log(len(store.d)))


def preference_probs(store: PreferenceStore) -> np.ndarray:
    """The categorical P(s) the store describes, used for entropy readings.

    For Pepper this is the Dirichlet predictive d / sum(d); the digamma form
    in ``preference_logp`` is the expected log-probability the planner scores
    against, which is not itself a distribution over categories.
    """
    if store.mechanism == PEPPER:
        store.validate()
        return dirichlet_mean(store.d)
    return np.exp(preference_logp(store))


def pepper_update(store: PreferenceStore, buffer: MemoryBuffer) -> PreferenceStore:
    """d <- beta * d + alpha * (sum of dims-averaged memory one-hots)."""
    if len(buffer) == 0:
        raise ValueError("empty memory buffer")
    counts = buffer.aggregated().sum(axis=0)
    store.d = store.beta * store.d + store.alpha * counts
    store.validate()
    return store


# -- NORE blocks ------------------------------------------------------------------

class NoreBlocks:
    """Attention MLP + Gaussian head, gating GRU, and the precision gamma."""

    def __init__(self, categories: int, rng: np.random.Generator, hidden: int = 64,
                 lr: float = 1e-3, stochastic: bool = True):
        self.categories = categories
        self.params = ParamSet(np.float64)
        self.attention = MLP(self.params, "attention", [categories, hidden, 2 * categories], rng)
        self.gate = GruCell(self.params, "gate", categories, categories, rng)
        self.log_gamma = self.params.add("log_gamma", np.zeros(1))
        self.w = np.zeros(categories)
        self.lr = lr
        self.stochastic = stochastic

    @property
    def gamma(self) -> float:
        return float(np.exp(self.log_gamma.data[0]))

    def attend(self, memory: np.ndarray, rng: np.random.Generator) -> Tensor:
        """Dims-averaged memory -> precision-scaled MLP -> Gaussian sample of the gate input."""
        x = Tensor(aggregate(memory)) * self.log_gamma.exp()
        out = self.attention(x)
        mean, log_var = out[: self.categories], out[self.categories:]
        if not self.stochastic:
            return mean
        return gaussian_rsample(mean, log_var, rng)


@dataclass
class NoreSweep:
    d: Tensor
    w: Tensor
    trace: list[np.ndarray]


def nore_sweep(d0: np.ndarray, blocks: NoreBlocks, buffer: MemoryBuffer, alpha: float,
               beta: float, rng: np.random.Generator) -> NoreSweep:
    """Run the buffer through attention and gating, building the graph for d."""
    if len(buffer) == 0:
        raise ValueError("empty memory buffer")
    d = Tensor(np.asarray(d0, dtype=np.float64))
    w = Tensor(blocks.w)
    trace = [d.data]
    for mem in buffer:
        gated_in = blocks.attend(mem.state, rng)
        w = blocks.gate(gated_in, w)
        d = d * beta + w * alpha
        trace.append(d.data)
    return NoreSweep(d, w, trace)


def preference_entropy(d: Tensor) -> Tensor:
    """Entropy of softmax(d) as a differentiable scalar."""
    return -(softmax(d) * log_softmax(d)).sum()


@dataclass
class NoreStep:
    entropy: float
    trace: list[np.ndarray]


def nore_update(store: PreferenceStore, blocks: NoreBlocks, buffer: MemoryBuffer,
                rng: np.random.Generator) -> NoreStep:
    """One episode of NORE preference encoding; mutates ``store`` and ``blocks``."""
    sweep = nore_sweep(store.d, blocks, buffer, store.alpha, store.beta, rng)
    entropy = preference_entropy(sweep.d)
    if not np.isfinite(entropy.data):
        raise ArithmeticError("non-finite preference entropy")
    blocks.params.zero_grad()
    (-entropy).backward()
    for p in blocks.params.values():
        if p.grad is None:
            # unreachable when alpha == 0; keep Adam's contract of a full gradient set
            p.grad = np.zeros_like(p.data)
    adam_step(blocks.params, lr=blocks.lr)
    store.d = sweep.d.data.copy()
    blocks.w = sweep.w.data.copy()
    store.validate()
    return NoreStep(float(entropy.data), sweep.trace)


# -- mechanisms -------------------------------------------------------------------

class Mechanism(Protocol):
    name: str
    store: PreferenceStore

    def logp(self) -> np.ndarray: ...

    def update(self, buffer: MemoryBuffer, rng: np.random.Generator) -> None: ...

    def snapshot(self) -> np.ndarray: ...


class _Base:
    name = ""

    def __init__(self, store: PreferenceStore):
        self.store = store

    def logp(self) -> np.ndarray:
        return preference_logp(self.store)

    def probs(self) -> np.ndarray:
        return preference_probs(self.store)

    def snapshot(self) -> np.ndarray:
        return self.store.d.copy()


class NoreMechanism(_Base):
    name = NORE

    def __init__(self, categories: int, rng: np.random.Generator, alpha: float = 0.1,
                 beta: float = 0.9, hidden: int = 64, lr: float = 1e-3):
        super().__init__(PreferenceStore.uniform(categories, NORE, alpha, beta))
        self.blocks = NoreBlocks(categories, rng, hidden=hidden, lr=lr)
        self.last_entropy: float | None = None

    def update(self, buffer, rng):
        self.last_entropy = nore_update(self.store, self.blocks, buffer, rng).entropy


class PepperMechanism(_Base):
    name = PEPPER

    def __init__(self, categories: int, alpha: float = 0.1, beta: float = 1.0):
        super().__init__(PreferenceStore.uniform(categories, PEPPER, alpha, beta))

    def update(self, buffer, rng=None):
        pepper_update(self.store, buffer)


class FixedMechanism(_Base):
    name = BASELINE

    def __init__(self, categories: int):
        super().__init__(PreferenceStore.uniform(categories, BASELINE, 0.0, 1.0))

    def update(self, buffer, rng=None):
        if len(buffer) == 0:
            raise ValueError("empty memory buffer")


def make_mechanism(name: str, categories: int, rng: np.random.Generator, **kw):
    if name == NORE:
        return NoreMechanism(categories, rng, **kw)
    if name == PEPPER:
        return PepperMechanism(categories, **kw)
    if name == BASELINE:
        return FixedMechanism(categories)
    raise ValueError(f"unknown mechanism {name!r}; expected one of {MECHANISMS}")
