"""Scoring candidate policies by expected free energy.

G adds observation entropy and the divergence between the imagined latent
distribution and the preferences, and subtracts ensemble disagreement.
"""
# %%
import numpy as np

from nore.planner import PlannerConfig, evaluate_policies, select_action
from nore.world_model import RssmConfig, WorldModel

rng = np.random.default_rng(0)
model = WorldModel(RssmConfig.desk(80, seed=2))
start = model.initial_state(1)
cats = model.config.state_categories

# %% uniform preferences versus a sharp preference for category 0
uniform = np.full(cats, -np.log(cats))
sharp = np.log(np.r_[0.9, np.full(cats - 1, 0.1 / (cats - 1))])
actions = rng.integers(0, 4, size=(8, 5))
for name, pref in (("uniform", uniform), ("sharp", sharp)):
    bd = evaluate_policies(model, actions, start, pref, np.random.default_rng(1))
    print(f"{name:>7}: term1 {bd.term1.sum(1).mean():6.2f}  term2 {bd.term2.sum(1).mean():6.2f}"
          f"  term3 {bd.term3.sum(1).mean():.4f}  G {bd.total.mean():6.2f}")

# %% random shooting: the lowest-G candidate's first action is executed
plan = select_action(model, start, uniform, rng, PlannerConfig(horizon=15, n_candidates=64))
print("chosen action", plan.action, "of candidate", plan.index, plan.breakdown.summary())
