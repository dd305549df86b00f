"""Recurrent state-space world model with categorical latents.

Components, all conditioned on the deterministic GRU state ``h``:

* recurrent core   h_t = GRU(embed([s_{t-1}, a_{t-1}]), h_{t-1})
* posterior        logits of s_t given (h_t, o_t)
* prior            logits of s_t given h_t
* decoder          Bernoulli logits of o_t given (h_t, s_t)
* ensemble         K extra decoder heads trained on detached latents; their
                   spread is the novelty signal used for exploration.

Arrays are batch-first.  ``s`` has shape (batch, dims, categories).
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .env import N_ACTIONS
from .numerics import (
    MLP,
    GruCell,
    Linear,
    NumericsError,
    ParamSet,
    Tensor,
    adam_step,
    bernoulli_nll,
    categorical_kl,
    categorical_sample_st,
    concat,
    no_grad,
    one_hot,
    params_checksum,
    softmax,
)
from .numerics.checkpoint import load_checkpoint, read_manifest, save_checkpoint
from .numerics.autodiff import _sigmoid


@dataclass
class RssmConfig:
    obs_size: int
    state_dims: int = 50
    state_categories: int = 64
    deter_size: int = 200
    hidden_size: int = 200
    ensemble_size: int = 5
    ensemble_hidden: int = 64
    n_actions: int = N_ACTIONS
    kl_balance: float | None = 0.8
    free_bits: float = 1.0
    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    dtype: str = "float32"
    seed: int = 0

    def __post_init__(self):
        for name in ("obs_size", "state_dims", "state_categories", "deter_size",
                     "hidden_size", "ensemble_hidden", "n_actions"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.ensemble_size < 2:
            raise ValueError("ensemble_size must be >= 2")
        self.betas = tuple(self.betas)

    @classmethod
    def desk(cls, obs_size: int, **overrides) -> "RssmConfig":
        base = dict(state_dims=8, state_categories=16, deter_size=32, hidden_size=64,
                    ensemble_hidden=32)
        base.update(overrides)
        return cls(obs_size=obs_size, **base)

    @classmethod
    def paper(cls, obs_size: int, **overrides) -> "RssmConfig":
        return cls(obs_size=obs_size, **overrides)

    @property
    def stoch_size(self) -> int:
        return self.state_dims * self.state_categories


@dataclass
class LatentState:
    h: Tensor
    s: Tensor
    prior_logits: Tensor | None = None
    post_logits: Tensor | None = None

    def detach(self) -> "LatentState":
        return LatentState(self.h.detach(), self.s.detach(),
                           None if self.prior_logits is None else self.prior_logits.detach(),
                           None if self.post_logits is None else self.post_logits.detach())

    def take(self, idx) -> "LatentState":
        """Select batch rows."""
        pick = lambda t: None if t is None else Tensor(t.data[idx])
        return LatentState(pick(self.h), pick(self.s), pick(self.prior_logits),
                           pick(self.post_logits))

    def repeat(self, n: int) -> "LatentState":
        """Tile a single-row state ``n`` times along the batch axis."""
        rep = lambda t: None if t is None else Tensor(np.repeat(t.data, n, axis=0))
        return LatentState(rep(self.h), rep(self.s), rep(self.prior_logits),
                           rep(self.post_logits))


@dataclass
class Batch:
    obs: np.ndarray      # (B, T, obs_size) binary
    actions: np.ndarray  # (B, T) int; actions[:, t] is taken after obs[:, t]

    def __post_init__(self):
        self.obs = np.asarray(self.obs)
        self.actions = np.asarray(self.actions, dtype=np.int64)
        if self.obs.ndim != 3 or self.actions.shape != self.obs.shape[:2]:
            raise ValueError(f"bad batch shapes obs={self.obs.shape} actions={self.actions.shape}")
        if self.obs.shape[1] < 2:
            raise ValueError("sequence length must be >= 2")

    @property
    def size(self) -> int:
        return self.obs.shape[0]

    @property
    def length(self) -> int:
        return self.obs.shape[1]


@dataclass
class ElboDiagnostics:
    elbo: float
    recon_nll: float
    kl: float
    states: list = field(default_factory=list, repr=False)

    def as_row(self) -> dict:
        return {"elbo": self.elbo, "recon_nll": self.recon_nll, "kl": self.kl}


class FrozenModelError(RuntimeError):
    pass


class WorldModel:
    def __init__(self, config: RssmConfig):
        self.config = c = config
        self.params = ParamSet(np.dtype(c.dtype))
        rng = np.random.default_rng(c.seed)
        feat = c.deter_size + c.stoch_size
        self.embed = Linear(self.params, "embed", c.stoch_size + c.n_actions, c.hidden_size, rng)
        self.gru = GruCell(self.params, "gru", c.hidden_size, c.deter_size, rng)
        self.posterior_net = MLP(self.params, "posterior",
                                 [c.deter_size + c.obs_size, c.hidden_size, c.stoch_size], rng)
        self.prior_net = MLP(self.params, "prior", [c.deter_size, c.hidden_size, c.stoch_size], rng)
        self.decoder = MLP(self.params, "decoder", [feat, c.hidden_size, c.obs_size], rng)
        self.ensemble = [MLP(self.params, f"ensemble{k}", [feat, c.ensemble_hidden, c.obs_size], rng)
                         for k in range(c.ensemble_size)]
        self.frozen = False

    # -- helpers ------------------------------------------------------------
    @property
    def dtype(self):
        return self.params.dtype

    def _t(self, x) -> Tensor:
        if isinstance(x, Tensor):
            return x
        return Tensor(np.asarray(x, dtype=self.dtype))

    def _logit_shape(self, flat: Tensor) -> Tensor:
        c = self.config
        return flat.reshape(flat.shape[:-1] + (c.state_dims, c.state_categories))

    def _features(self, h: Tensor, s: Tensor) -> Tensor:
        c = self.config
        s_flat = s.reshape(s.shape[:-2] + (c.stoch_size,))
        return concat([h, s_flat], axis=-1)

    def initial_state(self, batch: int = 1) -> LatentState:
        c = self.config
        return LatentState(self._t(np.zeros((batch, c.deter_size))),
                           self._t(np.zeros((batch, c.state_dims, c.state_categories))))

    def action_one_hot(self, actions) -> Tensor:
        a = np.asarray(actions, dtype=np.int64)
        if np.any((a < 0) | (a >= self.config.n_actions)):
            raise ValueError("action out of range")
        return self._t(one_hot(a, self.config.n_actions))

    # -- model components ---------------------------------------------------
    def recurrent_step(self, h_prev, s_prev, a_prev) -> Tensor:
        """Advance the deterministic state; ``a_prev`` is integer codes or one-hot."""
        c = self.config
        h_prev, s_prev = self._t(h_prev), self._t(s_prev)
        a = a_prev if isinstance(a_prev, Tensor) else (
            self._t(a_prev) if np.ndim(a_prev) == h_prev.ndim else self.action_one_hot(a_prev))
        if s_prev.shape[-2:] != (c.state_dims, c.state_categories):
            raise ValueError(f"stochastic state shape {s_prev.shape}")
        s_flat = s_prev.reshape(s_prev.shape[:-2] + (c.stoch_size,))
        x = self.embed(concat([s_flat, a], axis=-1)).elu()
        return self.gru(x, h_prev)

    def posterior(self, h, o) -> Tensor:
        h, o = self._t(h), self._t(o)
        if o.shape[-1] != self.config.obs_size:
            raise ValueError(f"observation size {o.shape[-1]} != {self.config.obs_size}")
        return self._logit_shape(self.posterior_net(concat([h, o], axis=-1)))

    def prior(self, h) -> Tensor:
        return self._logit_shape(self.prior_net(self._t(h)))

    def decode(self, h, s) -> Tensor:
        return self.decoder(self._features(self._t(h), self._t(s)))

    def decode_probs(self, h, s) -> np.ndarray:
        with no_grad():
            return _sigmoid(self.decode(h, s).data)

    def _ensemble_stack(self):
        """Head weights stacked for a single batched evaluation; rebuilt when weights change."""
        arrays = tuple(p.data for head in self.ensemble for layer in head.layers
                       for p in (layer.W, layer.b))
        cached = getattr(self, "_stack_cache", None)
        if cached is not None and all(a is b for a, b in zip(cached[0], arrays)):
            return cached[1]
        first = [head.layers[0] for head in self.ensemble]
        second = [head.layers[1] for head in self.ensemble]
        stacked = (np.stack([l.W.data for l in first]),
                   np.stack([l.b.data for l in first])[:, None, :],
                   np.stack([l.W.data for l in second]),
                   np.stack([l.b.data for l in second])[:, None, :])
        self._stack_cache = (arrays, stacked)
        return stacked

    def ensemble_probs(self, h, s) -> np.ndarray:
        """(K, batch, obs_size) predicted bit probabilities from every head."""
        with no_grad():
            feat = self._features(self._t(h), self._t(s)).data
        squeeze = feat.ndim == 1
        feat = np.atleast_2d(feat)
        W1, b1, W2, b2 = self._ensemble_stack()
        # batched per-head matmuls so identical heads give bit-identical outputs
        hidden = np.matmul(feat, W1) + b1
        hidden = np.where(hidden > 0, hidden, np.expm1(np.minimum(hidden, 0.0)))
        out = _sigmoid(np.matmul(hidden, W2) + b2)
        return out[:, 0] if squeeze else out

    def ensemble_disagreement(self, h, s) -> np.ndarray:
        """Mean over bits of the population variance across ensemble heads; one value per row."""
        return disagreement(self.ensemble_probs(h, s))

    def clone_ensemble_from(self, k: int = 0) -> None:
        """Make every ensemble head a copy of head ``k`` (testing aid)."""
        src = f"ensemble{k}."
        for name, p in self.params.items():
            if name.startswith("ensemble") and not name.startswith(src):
                suffix = name.split(".", 1)[1]
                p.data = self.params[src + suffix].data.copy()

    def sample(self, logits: Tensor, rng: np.random.Generator, mode: str = "sample") -> Tensor:
        if mode == "sample":
            return categorical_sample_st(logits, rng)
        if mode == "soft":
            return softmax(logits)
        raise ValueError(f"unknown latent mode {mode!r}")

    # -- sequences ----------------------------------------------------------
    def observe(self, obs: np.ndarray, actions: np.ndarray, rng: np.random.Generator,
                mode: str = "sample") -> list[LatentState]:
        """Filter a (B, T) sequence; returns one LatentState per step with both logit heads."""
        obs = np.asarray(obs)
        B, T = obs.shape[:2]
        state = self.initial_state(B)
        h, s = state.h, state.s
        out = []
        for t in range(T):
            if t > 0:
                h = self.recurrent_step(h, s, actions[:, t - 1])
            post = self.posterior(h, obs[:, t])
            pri = self.prior(h)
            s = self.sample(post, rng, mode)
            out.append(LatentState(h, s, pri, post))
        return out

    def imagine_step(self, state: LatentState, actions, rng: np.random.Generator) -> LatentState:
        h = self.recurrent_step(state.h, state.s, actions)
        pri = self.prior(h)
        return LatentState(h, self.sample(pri, rng), pri, None)

    # -- objective ------------------------------------------------------------
    def elbo_loss(self, batch: Batch, rng: np.random.Generator, mode: str = "sample",
                  kl_balance: float | None | str = "config",
                  free_bits: float | str = "config") -> tuple[Tensor, ElboDiagnostics]:
        """Sequence-summed, batch-averaged negative ELBO.

        The reported ``elbo`` diagnostic is the raw reconstruction + KL; the
        returned loss additionally applies KL balancing and the free-bits floor.
        """
        kl_balance = self.config.kl_balance if kl_balance == "config" else kl_balance
        free_bits = self.config.free_bits if free_bits == "config" else free_bits
        B = batch.size
        states = self.observe(batch.obs, batch.actions, rng, mode)
        recon_terms, kl_terms, kl_raw = [], [], []
        for t, st in enumerate(states):
            logits = self.decode(st.h, st.s)
            recon_terms.append(bernoulli_nll(logits, batch.obs[:, t]).sum(axis=-1))
            kl = categorical_kl(st.post_logits, st.prior_logits).sum(axis=-1)
            kl_raw.append(kl.data)
            if kl_balance is None:
                term = kl.maximum(free_bits) if free_bits else kl
            else:
                lhs = categorical_kl(st.post_logits.detach(), st.prior_logits).sum(axis=-1)
                rhs = categorical_kl(st.post_logits, st.prior_logits.detach()).sum(axis=-1)
                if free_bits:
                    lhs, rhs = lhs.maximum(free_bits), rhs.maximum(free_bits)
                term = lhs * kl_balance + rhs * (1.0 - kl_balance)
            kl_terms.append(term)
        recon = _total(recon_terms) * (1.0 / B)
        klterm = _total(kl_terms) * (1.0 / B)
        loss = recon + klterm
        recon_v = float(recon.data)
        kl_v = float(np.sum(kl_raw) / B)
        for name, v in (("reconstruction", recon_v), ("dynamics", kl_v)):
            if not np.isfinite(v):
                raise NumericsError(f"non-finite {name} term in ELBO")
        return loss, ElboDiagnostics(elbo=recon_v + kl_v, recon_nll=recon_v, kl=kl_v,
                                     states=states)

    def ensemble_loss(self, states: list[LatentState], obs: np.ndarray) -> Tensor:
        B = obs.shape[0]
        terms = []
        for t, st in enumerate(states):
            feat = self._features(st.h.detach(), st.s.detach())
            for head in self.ensemble:
                terms.append(bernoulli_nll(head(feat), obs[:, t]).sum(axis=-1))
        return _total(terms) * (1.0 / B)

    def train_step(self, batch: Batch, rng: np.random.Generator, lr: float | None = None) -> dict:
        """One joint Adam step on all parameters.  No-op when frozen."""
        c = self.config
        if self.frozen:
            with no_grad():
                _, diag = self.elbo_loss(batch, rng)
            return {**diag.as_row(), "disagreement_mean": self._batch_disagreement(diag.states)}
        loss, diag = self.elbo_loss(batch, rng)
        total = loss + self.ensemble_loss(diag.states, batch.obs)
        self.params.zero_grad()
        total.backward()
        adam_step(self.params, c.lr if lr is None else lr, c.betas, c.eps)
        return {**diag.as_row(), "disagreement_mean": self._batch_disagreement(diag.states)}

    def _batch_disagreement(self, states: list[LatentState]) -> float:
        vals = [self.ensemble_disagreement(st.h.data, st.s.data) for st in states]
        return float(np.mean(vals))

    def reconstruction_accuracy(self, batch: Batch, rng: np.random.Generator) -> float:
        """Fraction of observation bits recovered by thresholding the decoder at 0.5."""
        with no_grad():
            states = self.observe(batch.obs, batch.actions, rng)
            hits = [((self.decode_probs(st.h, st.s) > 0.5) == (batch.obs[:, t] > 0.5)).mean()
                    for t, st in enumerate(states)]
        return float(np.mean(hits))

    # -- persistence ------------------------------------------------------------
    def checksum(self) -> str:
        return params_checksum(self.params)

    def save(self, path) -> tuple[Path, Path]:
        meta = {"rssm_config": asdict(self.config)}
        return save_checkpoint(self.params, path, metadata=meta)

    @classmethod
    def load(cls, path) -> "WorldModel":
        meta = read_manifest(path)["metadata"]
        cfg = dict(meta["rssm_config"])
        cfg["betas"] = tuple(cfg["betas"])
        model = cls(RssmConfig(**cfg))
        load_checkpoint(model.params, path)
        return model


def disagreement(member_probs: np.ndarray) -> np.ndarray:
    """``member_probs`` is (K, ..., bits); population variance over K, mean over bits."""
    p = np.asarray(member_probs, dtype=np.float64)
    # shifting by one member leaves the variance unchanged and makes identical heads exactly 0
    return np.var(p - p[:1], axis=0).mean(axis=-1)


def _total(terms: list[Tensor]) -> Tensor:
    out = terms[0].sum()
    for t in terms[1:]:
        out = out + t.sum()
    return out


class DiagnosticsLog:
    """Append-only CSV of training diagnostics."""

    FIELDS = ("step", "elbo", "recon_nll", "kl", "disagreement_mean")

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow(self.FIELDS)

    def append(self, step: int, row: dict) -> None:
        with self.path.open("a", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow([step] + [_fmt(row[k]) for k in self.FIELDS[1:]])


def _fmt(x: float) -> str:
    return repr(float(x))
