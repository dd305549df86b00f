"""World-model pretraining, preference-learning episodes and the volatility sweep."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..env import N_ACTIONS, FrozenLakeEnv, VolatilitySchedule
from ..metrics import (
    TrajectoryLog,
    TrajectoryStep,
    allpairs_mean,
    entropy_series,
    pairwise_exploration_scores,
)
from ..numerics import Tensor, no_grad
from ..numerics.autodiff import _sigmoid
from ..planner import select_action
from ..preferences import MECHANISMS, MemoryBuffer, encode_memories, make_mechanism, NORE, PEPPER
from ..world_model import Batch, DiagnosticsLog, LatentState, WorldModel
from .config import ExperimentConfig, period_label, volatility_label

log = logging.getLogger(__name__)

CHECKPOINT_STEM = "world_model"
STEP_FIELDS = ("episode", "step", "row", "col", "action", "G", "term1", "term2", "term3",
               "hole_reset", "layout_changed")


class ExperimentError(RuntimeError):
    pass


def _rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


# -- latent filtering ------------------------------------------------------------

class Filter:
    """Tracks the posterior latent state of a frozen or training model online."""

    def __init__(self, model: WorldModel, rng: np.random.Generator):
        self.model, self.rng = model, rng
        self.state: LatentState | None = None

    def start(self, obs: np.ndarray) -> LatentState:
        init = self.model.initial_state(1)
        return self._posterior(init.h, obs)

    def advance(self, action: int, obs: np.ndarray) -> LatentState:
        with no_grad():
            h = self.model.recurrent_step(self.state.h, self.state.s, np.array([action]))
        return self._posterior(h, obs)

    def _posterior(self, h: Tensor, obs: np.ndarray) -> LatentState:
        with no_grad():
            logits = self.model.posterior(h, obs[None, :])
            s = self.model.sample(logits, self.rng)
        self.state = LatentState(h, s, None, logits)
        return self.state


# -- pretraining ------------------------------------------------------------------

@dataclass
class PretrainResult:
    checkpoint: Path
    diagnostics: list[dict]
    reconstruction_accuracy: float
    model: WorldModel = field(repr=False)


def _collect_segment(env: FrozenLakeEnv, model: WorldModel, length: int, rng: np.random.Generator,
                     planner_cfg=None) -> tuple[np.ndarray, np.ndarray]:
    obs = [env.reset_agent()]
    actions = []
    filt = Filter(model, rng) if planner_cfg is not None else None
    if filt is not None:
        filt.start(obs[0])
    uniform = np.full(model.config.state_categories, -math.log(model.config.state_categories))
    for t in range(length):
        if filt is None:
            a = int(rng.integers(N_ACTIONS))
        else:
            a = select_action(model, filt.state, uniform, rng, planner_cfg).action
        actions.append(a)
        o = env.step(a)
        if t < length - 1:
            obs.append(o)
            if filt is not None:
                filt.advance(a, o)
    return np.array(obs), np.array(actions)


def pretrain_world_model(config: ExperimentConfig, out_dir) -> PretrainResult:
    """Alternate exploratory data collection and ELBO training; save a checkpoint.

    The first ``pretrain_random_iterations`` iterations act uniformly at
    random; later ones plan with ensemble disagreement as the only drive.
    The agent returns to the start every ``reset_agent_every`` steps, so the
    replay holds segments of that length.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    env_rng, data_rng, train_rng, eval_rng = _rngs(config.seed, 4)
    env = FrozenLakeEnv(config.grid_size, config.grid_size,
                        VolatilitySchedule(config.pretrain_reset_period, False),
                        seed=int(env_rng.integers(2**32)), hole_density=config.hole_density,
                        n_subgoals=config.n_subgoals)
    env.reset()
    model = WorldModel(config.rssm_config())
    explore = config.planner_config(exploration=True)
    seg_len = config.reset_agent_every
    if seg_len < 2:
        raise ExperimentError("reset_agent_every must be >= 2 to form training sequences")
    replay_obs, replay_act = [], []
    diag_log = DiagnosticsLog(out_dir / "train_log.csv")
    history: list[dict] = []
    step = 0
    for it in range(config.pretrain_iterations):
        planner_cfg = None if it < config.pretrain_random_iterations else explore
        for _ in range(config.pretrain_collect_segments):
            o, a = _collect_segment(env, model, seg_len, data_rng, planner_cfg)
            replay_obs.append(o)
            replay_act.append(a)
        if not replay_obs:
            continue
        for _ in range(config.pretrain_train_steps):
            idx = train_rng.integers(len(replay_obs), size=config.batch_size)
            batch = Batch(np.stack([replay_obs[i] for i in idx]),
                          np.stack([replay_act[i] for i in idx]))
            row = model.train_step(batch, train_rng)
            if not all(np.isfinite(v) for v in row.values()):
                raise ExperimentError(f"divergent world-model loss at step {step}: {row}")
            step += 1
            diag_log.append(step, row)
            history.append({"step": step, **row})
    # fresh random segments for evaluation
    eval_obs, eval_act = zip(*[_collect_segment(env, model, seg_len, eval_rng)
                               for _ in range(config.batch_size)])
    accuracy = model.reconstruction_accuracy(Batch(np.stack(eval_obs), np.stack(eval_act)),
                                             eval_rng)
    ckpt = out_dir / CHECKPOINT_STEM
    model.save(ckpt)
    (out_dir / "pretrain_summary.json").write_text(json.dumps(
        {"config_hash": config.hash(), "train_steps": step,
         "reconstruction_accuracy": accuracy,
         "final": history[-1] if history else None}, indent=2, sort_keys=True) + "\n")
    return PretrainResult(ckpt, history, accuracy, model)


def smoothed(values, window: int = 20) -> np.ndarray:
    """Trailing moving average."""
    v = np.asarray(values, dtype=np.float64)
    c = np.cumsum(np.insert(v, 0, 0.0))
    out = np.empty_like(v)
    for i in range(len(v)):
        lo = max(0, i + 1 - window)
        out[i] = (c[i + 1] - c[lo]) / (i + 1 - lo)
    return out


# -- preference-learning episodes -------------------------------------------------

@dataclass
class EpisodeResult:
    trajectory: TrajectoryLog
    rows: list[tuple]
    buffer: MemoryBuffer
    snapshot: np.ndarray
    probs: np.ndarray


def imagine(model: WorldModel, start: LatentState, steps: int,
            rng: np.random.Generator) -> list[np.ndarray]:
    """Uniform-random imagined rollout; returns posterior samples from predicted observations."""
    out = []
    h, s = start.h, start.s
    with no_grad():
        for _ in range(steps):
            a = np.array([rng.integers(N_ACTIONS)])
            h = model.recurrent_step(h, s, a)
            s_prior = model.sample(model.prior(h), rng)
            o_hat = _sigmoid(model.decode(h, s_prior).data)
            s = model.sample(model.posterior(h, o_hat), rng)
            out.append(s.data[0].copy())
    return out


def run_episode(model: WorldModel, mechanism, env: FrozenLakeEnv, config: ExperimentConfig,
                rng: np.random.Generator, episode: int = 0) -> EpisodeResult:
    """One episode: planned interaction, imagination, memory encoding, preference update."""
    if not model.frozen:
        raise ExperimentError("world model must be frozen during preference learning")
    planner_cfg = config.planner_config()
    pref_logp = mechanism.logp()
    filt = Filter(model, rng)
    obs = env.reset()
    filt.start(obs)
    real = [filt.state.s.data[0].copy()]
    traj = TrajectoryLog(episode)
    rows = []
    bounds = (env.height, env.width)
    for t in range(config.episode_length):
        if (config.reset_agent_during_episodes and t > 0
                and t % config.reset_agent_every == 0):
            obs = env.reset_agent()
            filt.start(obs)
        plan = select_action(model, filt.state, pref_logp, rng, planner_cfg)
        obs = env.step(plan.action)
        ev = env.last_event
        g = plan.breakdown.summary()
        traj.append(TrajectoryStep(t, env.position[0], env.position[1], plan.action, g["G"],
                                   ev.hole_reset), bounds)
        rows.append((episode, t, env.position[0], env.position[1], plan.action, g["G"],
                     g["term1"], g["term2"], g["term3"], ev.hole_reset, ev.layout_changed))
        filt.advance(plan.action, obs)
        if t < config.episode_length - 1:
            real.append(filt.state.s.data[0].copy())
    imagined = imagine(model, filt.state, config.imagination_steps, rng)
    buffer = encode_memories(real, imagined, rng, config.real_fraction)
    mechanism.update(buffer, rng)
    return EpisodeResult(traj, rows, buffer, mechanism.snapshot(), mechanism.probs())


# -- cells and sweeps ---------------------------------------------------------------

@dataclass
class RunRecord:
    config_hash: str
    mechanism: str
    reset_period: int | None
    seed: int
    rows: list[tuple] = field(repr=False)
    snapshots: list[np.ndarray] = field(repr=False)
    probs: list[np.ndarray] = field(repr=False)
    trajectories: list[TrajectoryLog] = field(repr=False)
    checkpoint: str = ""
    checksum_before: str = ""
    checksum_after: str = ""
    files: dict = field(default_factory=dict)

    @property
    def volatility(self) -> str:
        return volatility_label(self.reset_period)

    def entropy(self) -> list[tuple[int, float]]:
        return entropy_series(self.probs)

    def exploration(self) -> list[float]:
        return pairwise_exploration_scores(self.trajectories)


def cell_name(mechanism: str, period, seed: int) -> str:
    return f"{mechanism}_p{period_label(period)}_s{seed}"


def mechanism_kwargs(config: ExperimentConfig, name: str) -> dict:
    if name == NORE:
        return dict(alpha=config.nore_alpha, beta=config.nore_beta, hidden=config.nore_hidden,
                    lr=config.nore_lr)
    if name == PEPPER:
        return dict(alpha=config.pepper_alpha, beta=config.pepper_beta)
    return {}


def run_cell(config: ExperimentConfig, checkpoint, mechanism: str, reset_period, seed: int,
             out_dir=None) -> RunRecord:
    """All episodes for one (mechanism, reset period, seed) with a frozen world model."""
    model = WorldModel.load(checkpoint)
    model.frozen = True
    before = model.checksum()
    env_rng, agent_rng, mech_rng = _rngs(seed, 3)
    env = FrozenLakeEnv(config.grid_size, config.grid_size, config.schedule(reset_period),
                        seed=int(env_rng.integers(2**32)), hole_density=config.hole_density,
                        n_subgoals=config.n_subgoals)
    mech = make_mechanism(mechanism, model.config.state_categories, mech_rng,
                          **mechanism_kwargs(config, mechanism))
    rows, snaps, probs, trajs = [], [], [], []
    for ep in range(config.episodes):
        res = run_episode(model, mech, env, config, agent_rng, ep)
        rows += res.rows
        snaps.append(res.snapshot)
        probs.append(res.probs)
        trajs.append(res.trajectory)
    after = model.checksum()
    if after != before:
        raise ExperimentError("world-model weights changed during preference learning")
    rec = RunRecord(config.hash(), mechanism, reset_period, seed, rows, snaps, probs, trajs,
                    str(checkpoint), before, after)
    if out_dir is not None:
        write_cell(rec, Path(out_dir) / cell_name(mechanism, reset_period, seed))
    return rec


def write_cell(rec: RunRecord, cell_dir: Path) -> None:
    cell_dir.mkdir(parents=True, exist_ok=True)
    n_cat = len(rec.snapshots[0])
    rec.files["steps"] = str(write_csv(cell_dir / "steps.csv", STEP_FIELDS, rec.rows))
    rec.files["preferences"] = str(write_csv(
        cell_dir / "preferences.csv", ("episode",) + tuple(f"c{i}" for i in range(n_cat)),
        [(e, *snap) for e, snap in enumerate(rec.snapshots)]))
    rec.files["entropy"] = str(write_csv(cell_dir / "entropy.csv", ("episode", "entropy"),
                                         rec.entropy()))
    if len(rec.trajectories) >= 2:
        scores = rec.exploration()
        am = allpairs_mean(rec.trajectories)
        rec.files["exploration"] = str(write_csv(
            cell_dir / "exploration.csv", ("episode_pair", "hausdorff", "allpairs_mean"),
            [(f"{i}-{i + 1}", s, am) for i, s in enumerate(scores)]))
    (cell_dir / "run.json").write_text(json.dumps({
        "config_hash": rec.config_hash, "mechanism": rec.mechanism,
        "reset_period": period_label(rec.reset_period), "volatility": rec.volatility,
        "seed": rec.seed, "checkpoint": rec.checkpoint,
        "checksum_before": rec.checksum_before, "checksum_after": rec.checksum_after,
        "files": {k: Path(v).name for k, v in rec.files.items()}},
        indent=2, sort_keys=True) + "\n")


def _cell_job(args):
    config, checkpoint, mechanism, period, seed, out_dir = args
    return run_cell(config, checkpoint, mechanism, period, seed, out_dir)


@dataclass
class SweepReport:
    records: list[RunRecord]
    files: dict
    manifest: Path


def run_sweep(config: ExperimentConfig, checkpoint, out_dir, jobs: int = 1,
              figures: bool = True) -> SweepReport:
    """Every mechanism x reset period x seed; aggregates CSVs, figures and a manifest."""
    checkpoint = Path(checkpoint)
    if not checkpoint.with_suffix(".json").exists() or not checkpoint.with_suffix(".bin").exists():
        raise ExperimentError(f"missing checkpoint {checkpoint}")
    out_dir = Path(out_dir)
    cells_dir = out_dir / "cells"
    jobs_list = [(config, checkpoint, m, p, s, cells_dir)
                 for m in config.mechanisms for p in config.reset_periods for s in config.seeds]
    records: list[RunRecord] = []
    files: dict = {}
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                records = list(pool.map(_cell_job, jobs_list))
        else:
            for job in jobs_list:
                records.append(_cell_job(job))
                log.info("finished %s", cell_name(*job[2:5]))
    finally:
        # flush whatever finished, even on abort
        if records:
            files = write_aggregates(records, out_dir)
    if figures:
        from .figures import emit_figures
        files.update(emit_figures(out_dir))
    manifest = write_manifest(out_dir, config, checkpoint, records, files)
    return SweepReport(records, files, manifest)


def write_aggregates(records: list[RunRecord], out_dir: Path) -> dict:
    expl, ent, prefs = [], [], []
    for r in records:
        period = period_label(r.reset_period)
        if len(r.trajectories) >= 2:
            am = allpairs_mean(r.trajectories)
            for i, s in enumerate(r.exploration()):
                expl.append((r.mechanism, r.seed, period, r.volatility, f"{i}-{i + 1}", s, am))
        for e, h in r.entropy():
            ent.append((r.mechanism, r.seed, period, r.volatility, e, h))
        for e, snap in enumerate(r.snapshots):
            prefs.append((r.mechanism, r.seed, period, e, *snap))
    n_cat = len(records[0].snapshots[0])
    return {
        "exploration": str(write_csv(out_dir / "exploration.csv",
                                     ("mechanism", "seed", "reset_period", "volatility",
                                      "episode_pair", "hausdorff", "allpairs_mean"), expl)),
        "entropy": str(write_csv(out_dir / "entropy.csv",
                                 ("mechanism", "seed", "reset_period", "volatility", "episode",
                                  "entropy"), ent)),
        "preferences": str(write_csv(out_dir / "preferences.csv",
                                     ("mechanism", "seed", "reset_period", "episode")
                                     + tuple(f"c{i}" for i in range(n_cat)), prefs)),
    }


def write_manifest(out_dir: Path, config: ExperimentConfig, checkpoint, records, files) -> Path:
    manifest = {
        "config_hash": config.hash(),
        "checkpoint": str(checkpoint),
        "cells": [{"mechanism": r.mechanism, "reset_period": period_label(r.reset_period),
                   "volatility": r.volatility, "seed": r.seed,
                   "files": {k: str(Path(v).relative_to(out_dir)) for k, v in r.files.items()}}
                  for r in records],
        "files": {k: str(Path(v).relative_to(out_dir)) for k, v in sorted(files.items())},
    }
    path = out_dir / "report.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


__all__ = [
    "MECHANISMS", "EpisodeResult", "ExperimentError", "Filter", "PretrainResult", "RunRecord",
    "SweepReport", "cell_name", "imagine", "pretrain_world_model", "read_csv", "run_cell",
    "run_episode", "run_sweep", "smoothed", "write_csv",
]
