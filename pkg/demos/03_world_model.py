"""Training the recurrent state-space world model on random walks.

A small model learns to reconstruct a static 4x4 map; the ELBO loss and the
bit-wise reconstruction accuracy are printed as training goes.
"""
# %%
import numpy as np

from nore.env import FrozenLakeEnv
from nore.world_model import Batch, RssmConfig, WorldModel

rng = np.random.default_rng(0)
env = FrozenLakeEnv(4, 4, seed=1)


def random_segments(n, length=10):
    obs, acts = [], []
    for _ in range(n):
        o = [env.reset()]
        a = rng.integers(0, 4, size=length)
        for act in a[:-1]:
            o.append(env.step(act))
        obs.append(np.stack(o))
        acts.append(a)
    return Batch(np.stack(obs), np.stack(acts))


# %% a desk-sized model
model = WorldModel(RssmConfig.desk(env.obs_size, seed=0))
data = random_segments(64)
print("parameters:", model.params.n_elements())

# %% training
for step in range(301):
    idx = rng.integers(len(data.obs), size=16)
    row = model.train_step(Batch(data.obs[idx], data.actions[idx]), rng)
    if step % 50 == 0:
        print(f"step {step:3d}  elbo loss {row['elbo']:8.2f}  kl {row['kl']:.2f}")

# %% reconstruction on held-out walks
print("bit accuracy", round(model.reconstruction_accuracy(random_segments(16), rng), 3))
