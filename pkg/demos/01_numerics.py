"""Autodiff, special functions and Dirichlet statistics.

Builds a small MLP, checks its gradient against central differences, and
shows the digamma-based expected log-probability of a Dirichlet.
"""
# %%
import numpy as np

from nore.numerics import MLP, ParamSet, Tensor, digamma
from nore.preferences import dirichlet_log_mean, dirichlet_mean

rng = np.random.default_rng(0)

# %% a two-layer MLP and its parameter gradients
params = ParamSet()
mlp = MLP(params, "mlp", [3, 8, 2], rng)
x = rng.normal(size=(5, 3))
loss = (mlp(Tensor(x)) ** 2).sum()
params.zero_grad()
loss.backward()

# %% central differences on a single weight
name, p = next(iter(params.items()))
h = 1e-6
old = p.data[0, 0]
p.data[0, 0] = old + h
up = float((mlp(Tensor(x)) ** 2).sum().data)
p.data[0, 0] = old - h
down = float((mlp(Tensor(x)) ** 2).sum().data)
p.data[0, 0] = old
print(f"{name}[0, 0]: autodiff {p.grad[0, 0]:.8f}  finite difference {(up - down) / (2 * h):.8f}")

# %% digamma and the harmonic numbers: psi(n) = -gamma + H_(n-1)
for n in (1, 2, 5, 10):
    H = sum(1.0 / k for k in range(1, n))
    print(f"psi({n}) = {digamma(n):+.12f}   -gamma + H = {-0.5772156649015329 + H:+.12f}")

# %% Dirichlet concentrations: mean and expected log-probability
d = np.array([4.0, 1.0, 1.0, 2.0])
print("mean          ", np.round(dirichlet_mean(d), 4))
print("E[log p]      ", np.round(dirichlet_log_mean(d), 4))
print("log of mean   ", np.round(np.log(dirichlet_mean(d)), 4), "(always above E[log p])")
