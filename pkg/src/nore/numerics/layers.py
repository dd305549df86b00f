"""Parameter containers and the two layer types used throughout: MLP and GRU."""

from __future__ import annotations

from collections import OrderedDict
from typing import Iterator

import numpy as np

from .autodiff import DimensionError, Tensor, concat


class ParamSet:
    """Named trainable tensors plus Adam state.

    Layers register their weights here under dotted names.  The optimizer
    moments live alongside so that a ParamSet is the single unit passed to
    :func:`nore.numerics.optim.adam_step` and to the checkpoint writer.
    """

    def __init__(self, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=self.dtype), requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def values(self):
        return self._params.values()

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def state(self) -> "OrderedDict[str, np.ndarray]":
        """Copy of parameter values, keyed by name."""
        return OrderedDict((k, p.data.copy()) for k, p in self._params.items())

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        if missing:
            raise KeyError(f"state is missing parameters: {sorted(missing)}")
        for k, p in self._params.items():
            arr = np.asarray(state[k])
            if arr.shape != p.shape:
                raise DimensionError(f"{k}: shape {arr.shape} != {p.shape}")
            p.data = arr.astype(self.dtype, copy=True)

    def n_elements(self) -> int:
        return sum(p.size for p in self._params.values())


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


_ACTIVATIONS = {
    "elu": Tensor.elu,
    "tanh": Tensor.tanh,
    "relu": Tensor.relu,
    "sigmoid": Tensor.sigmoid,
    None: lambda t: t,
}


class Linear:
    def __init__(self, params: ParamSet, name: str, n_in: int, n_out: int,
                 rng: np.random.Generator):
        self.n_in, self.n_out = n_in, n_out
        self.W = params.add(f"{name}.W", xavier_uniform(rng, n_in, n_out))
        self.b = params.add(f"{name}.b", np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.n_in:
            raise DimensionError(f"linear expects last dim {self.n_in}, got {x.shape}")
        return x @ self.W + self.b


class MLP:
    """Stack of affine layers; ``activation`` between layers, none after the last."""

    def __init__(self, params: ParamSet, name: str, sizes: list[int],
                 rng: np.random.Generator, activation: str | None = "elu"):
        if len(sizes) < 2:
            raise ValueError("MLP needs at least input and output sizes")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.sizes = list(sizes)
        self.activation = activation
        self.layers = [Linear(params, f"{name}.{i}", a, b, rng)
                       for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]

    def __call__(self, x: Tensor) -> Tensor:
        act = _ACTIVATIONS[self.activation]
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = act(x)
        return x


def mlp_forward(mlp: MLP, x) -> Tensor:
    return mlp(x if isinstance(x, Tensor) else Tensor(x))


class GruCell:
    """Gated recurrent unit.

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    c = tanh(x Wc + (r * h) Uc + bc)
    h' = (1 - z) * h + z * c
    """

    def __init__(self, params: ParamSet, name: str, input_size: int, hidden_size: int,
                 rng: np.random.Generator):
        self.input_size = input_size
        self.hidden_size = hidden_size
        n = hidden_size
        self.W = params.add(f"{name}.W", xavier_uniform(rng, input_size, 3 * n))
        self.U = params.add(f"{name}.U", np.concatenate(
            [xavier_uniform(rng, n, n) for _ in range(3)], axis=1))
        self.b = params.add(f"{name}.b", np.zeros(3 * n))

    def __call__(self, x: Tensor, h_prev: Tensor) -> Tensor:
        n = self.hidden_size
        if x.shape[-1] != self.input_size:
            raise DimensionError(f"GRU input size {self.input_size}, got {x.shape}")
        if h_prev.shape[-1] != n:
            raise DimensionError(f"GRU hidden size {n}, got {h_prev.shape}")
        xw = x @ self.W + self.b
        uz_ur = h_prev @ self.U[:, : 2 * n]
        z = (xw[..., :n] + uz_ur[..., :n]).sigmoid()
        r = (xw[..., n: 2 * n] + uz_ur[..., n:]).sigmoid()
        c = (xw[..., 2 * n:] + (r * h_prev) @ self.U[:, 2 * n:]).tanh()
        return h_prev + z * (c - h_prev)


def gru_step(cell: GruCell, x, h_prev) -> Tensor:
    x = x if isinstance(x, Tensor) else Tensor(x)
    h_prev = h_prev if isinstance(h_prev, Tensor) else Tensor(h_prev)
    return cell(x, h_prev)


def concat_inputs(*parts: Tensor) -> Tensor:
    return concat(parts, axis=-1)
