"""Finite-difference gradient checking shared by the test modules."""

import numpy as np


def numeric_grad(f, arr: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar ``f()`` with respect to ``arr`` (perturbed in place)."""
    g = np.zeros_like(arr, dtype=np.float64)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + h
        up = f()
        arr[i] = old - h
        down = f()
        arr[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8))


def check_param_grads(params, loss_fn, h: float = 1e-5) -> float:
    """Largest relative error between autodiff and finite differences over ``params``.

    ``loss_fn()`` must rebuild the graph from the current parameter values and
    return a scalar Tensor.
    """
    params.zero_grad()
    loss_fn().backward()
    # parameters outside the graph get no gradient; finite differences must then be ~0
    analytic = {n: np.zeros(p.shape) if p.grad is None else p.grad.copy()
                for n, p in params.items()}
    worst = 0.0
    for name, p in params.items():
        num = numeric_grad(lambda: float(loss_fn().data), p.data, h)
        worst = max(worst, rel_err(analytic[name], num))
    params.zero_grad()
    return worst
