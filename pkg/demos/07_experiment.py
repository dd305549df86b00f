"""A miniature end-to-end experiment: pretrain, run two cells, sweep, figures.

Uses a scaled-down desk configuration so it finishes in well under a
minute.  The full-size version is ``nore sweep``.
"""
# %%
from pathlib import Path

from nore.runner.config import profile_config
from nore.runner.experiment import pretrain_world_model, run_cell, run_sweep, smoothed

out = Path("demo_out")
cfg = profile_config("desk", episodes=5, episode_length=20, planning_horizon=5, n_candidates=16,
                     pretrain_iterations=4, pretrain_random_iterations=2,
                     reset_periods=(1, 25, 100))

# %% pretraining: the checkpoint is frozen from here on
res = pretrain_world_model(cfg, out / "pretrain")
elbo = smoothed([d["elbo"] for d in res.diagnostics])
print(f"ELBO loss {elbo[0]:.1f} -> {elbo[-1]:.1f}, accuracy {res.reconstruction_accuracy:.3f}")

# %% one cell per mechanism on a static map
for mech in ("nore", "pepper", "baseline-G"):
    rec = run_cell(cfg, res.checkpoint, mech, None, 0, out / "runs")
    print(f"{mech:>10}: entropy {rec.entropy()[0][1]:.3f} -> {rec.entropy()[-1][1]:.3f}, "
          f"exploration {[round(x, 2) for x in rec.exploration()]}")

# %% the sweep writes CSVs, SVG figures and a manifest
report = run_sweep(cfg, res.checkpoint, out / "sweep")
print(len(report.records), "cells;", "manifest at", report.manifest)
