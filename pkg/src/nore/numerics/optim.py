from __future__ import annotations

import numpy as np

from .layers import ParamSet


class MissingGradientError(RuntimeError):
    pass


def adam_step(params: ParamSet, lr: float = 1e-3, betas: tuple[float, float] = (0.9, 0.999),
              eps: float = 1e-8, names=None) -> None:
    """One bias-corrected Adam update over ``params`` (or the subset ``names``).

    Gradients must be present on every selected parameter; they are cleared
    afterwards.
    """
    names = list(params) if names is None else list(names)
    for name in names:
        if params[name].grad is None:
            raise MissingGradientError(f"parameter {name!r} has no gradient")
    b1, b2 = betas
    params.step += 1
    t = params.step
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name in names:
        p = params[name]
        g = p.grad.astype(np.float64)
        m = params.m.get(name)
        v = params.v.get(name)
        if m is None:
            m = np.zeros(p.shape)
            v = np.zeros(p.shape)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        params.m[name], params.v[name] = m, v
        update = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.data = (p.data - update).astype(params.dtype)
        p.grad = None
