"""Pepper counting versus NORE on the same stream of memories.

Both mechanisms see episodes where category 2 dominates.  Pepper's counts
only ever grow, so its preferences sharpen; NORE decays its store and an
attention network keeps the entropy of its preferences high.
"""
# %%
import numpy as np

from nore.preferences import NORE, PEPPER, Memory, MemoryBuffer, make_mechanism

rng = np.random.default_rng(0)
cats, dims = 6, 4
p_cat = np.array([0.1, 0.1, 0.5, 0.1, 0.1, 0.1])


def episode():
    return MemoryBuffer([Memory(np.eye(cats)[rng.choice(cats, dims, p=p_cat)], "real")
                         for _ in range(12)])


mechs = {m: make_mechanism(m, cats, np.random.default_rng(1)) for m in (PEPPER, NORE)}

# %% twenty episodes of exposure
for ep in range(20):
    buf = episode()
    for mech in mechs.values():
        mech.update(buf, rng)
    if ep % 5 == 4:
        for name, mech in mechs.items():
            p = mech.probs()
            h = -(p * np.log(p)).sum()
            print(f"episode {ep + 1:2d} {name:>6}: entropy {h:.3f}  probs {np.round(p, 3)}")
