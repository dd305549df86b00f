"""Experiment configuration: profiles, INI-style config files, hashing."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..env import VolatilitySchedule, observation_size
from ..planner import PlannerConfig
from ..preferences import MECHANISMS
from ..world_model import RssmConfig

PERIOD_NEVER = "never"
TABLE2_PERIODS = (1, 25, 50, 75, 100)

# key -> config file section
SECTIONS = {
    "experiment": ("profile", "mechanism", "reset_period", "randomize_start", "episode_length",
                   "episodes", "imagination_steps", "reset_agent_during_episodes", "seed",
                   "out_dir"),
    "environment": ("grid_size", "hole_density", "n_subgoals"),
    "planner": ("planning_horizon", "n_candidates", "selection_mode", "selection_temperature"),
    "world_model": ("state_dims", "state_categories", "deter_size", "hidden_size",
                    "ensemble_size", "ensemble_hidden", "kl_balance", "free_bits", "wm_lr",
                    "wm_dtype"),
    "pretrain": ("pretrain_iterations", "pretrain_random_iterations", "pretrain_collect_segments",
                 "pretrain_train_steps", "batch_size", "reset_agent_every",
                 "pretrain_reset_period"),
    "preferences": ("nore_alpha", "nore_beta", "nore_hidden", "nore_lr", "pepper_alpha",
                    "pepper_beta", "real_fraction"),
    "sweep": ("mechanisms", "reset_periods", "seeds"),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    profile: str = "desk"
    mechanism: str = "nore"
    reset_period: int | None = None
    randomize_start: bool | None = None
    episode_length: int = 100
    episodes: int = 50
    imagination_steps: int = 15
    reset_agent_during_episodes: bool = False
    seed: int = 0
    out_dir: str = "runs"

    grid_size: int = 4
    hole_density: float = 0.25
    n_subgoals: int = 2

    planning_horizon: int = 15
    n_candidates: int = 64
    selection_mode: str = "argmin"
    selection_temperature: float = 1.0

    state_dims: int = 8
    state_categories: int = 16
    deter_size: int = 32
    hidden_size: int = 64
    ensemble_size: int = 5
    ensemble_hidden: int = 32
    kl_balance: float | None = 0.8
    free_bits: float = 1.0
    wm_lr: float = 1e-3
    wm_dtype: str = "float32"

    pretrain_iterations: int = 16
    pretrain_random_iterations: int = 4
    pretrain_collect_segments: int = 5
    pretrain_train_steps: int = 25
    batch_size: int = 16
    reset_agent_every: int = 10
    pretrain_reset_period: int | None = None

    nore_alpha: float = 0.1
    nore_beta: float = 0.9
    nore_hidden: int = 64
    nore_lr: float = 1e-3
    pepper_alpha: float = 0.1
    pepper_beta: float = 1.0
    real_fraction: float = 0.3

    mechanisms: tuple = MECHANISMS
    reset_periods: tuple = TABLE2_PERIODS
    seeds: tuple = (0,)

    def __post_init__(self):
        self.mechanisms = tuple(self.mechanisms)
        self.reset_periods = tuple(self.reset_periods)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.validate()

    def validate(self) -> None:
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")
        for m in (self.mechanism, *self.mechanisms):
            if m not in MECHANISMS:
                raise ConfigError(f"unknown mechanism {m!r}")
        positive = ("episode_length", "episodes", "imagination_steps", "grid_size",
                    "planning_horizon", "n_candidates", "state_dims", "state_categories",
                    "deter_size", "hidden_size", "ensemble_hidden", "batch_size",
                    "reset_agent_every", "nore_hidden")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("pretrain_iterations", "pretrain_random_iterations",
                     "pretrain_collect_segments", "pretrain_train_steps"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.ensemble_size < 2:
            raise ConfigError("ensemble_size must be >= 2")
        for p in (self.reset_period, self.pretrain_reset_period, *self.reset_periods):
            if p is not None and p < 1:
                raise ConfigError("reset periods must be >= 1 or 'never'")
        if not self.seeds:
            raise ConfigError("at least one seed is required")

    # -- derived objects ---------------------------------------------------
    @property
    def obs_size(self) -> int:
        return observation_size(self.grid_size, self.grid_size)

    def rssm_config(self) -> RssmConfig:
        return RssmConfig(obs_size=self.obs_size, state_dims=self.state_dims,
                          state_categories=self.state_categories, deter_size=self.deter_size,
                          hidden_size=self.hidden_size, ensemble_size=self.ensemble_size,
                          ensemble_hidden=self.ensemble_hidden, kl_balance=self.kl_balance,
                          free_bits=self.free_bits, lr=self.wm_lr, dtype=self.wm_dtype,
                          seed=self.seed)

    def planner_config(self, exploration: bool = False) -> PlannerConfig:
        kw = dict(horizon=self.planning_horizon, n_candidates=self.n_candidates,
                  mode=self.selection_mode, temperature=self.selection_temperature)
        return PlannerConfig.exploration(**kw) if exploration else PlannerConfig(**kw)

    def schedule(self, reset_period="config") -> VolatilitySchedule:
        period = self.reset_period if reset_period == "config" else reset_period
        randomize = self.randomize_start
        if randomize is None:
            randomize = period is not None
        return VolatilitySchedule(period, bool(randomize))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # -- config files --------------------------------------------------------
    def to_ini(self) -> str:
        lines = []
        values = self.to_dict()
        for section, keys in SECTIONS.items():
            lines.append(f"[{section}]")
            lines += [f"{k} = {_format_field(k, values[k])}" for k in keys]
            lines.append("")
        return "\n".join(lines)


PROFILES = {
    "desk": {},
    "paper": dict(grid_size=8, state_dims=50, state_categories=64, deter_size=200,
                  hidden_size=200, ensemble_hidden=200, nore_hidden=128,
                  pretrain_iterations=200, pretrain_random_iterations=20,
                  pretrain_collect_segments=10, pretrain_train_steps=100, batch_size=50),
}

_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}


def profile_config(profile: str = "desk", **overrides) -> ExperimentConfig:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    return ExperimentConfig(profile=profile, **{**PROFILES[profile], **overrides})


def _format_field(key: str, v) -> str:
    # None spells differently depending on what it means for the field
    if v is None and key == "randomize_start":
        return "auto"
    if v is None and key == "kl_balance":
        return "none"
    return _format_value(v)


def _format_value(v) -> str:
    if v is None:
        return PERIOD_NEVER
    if isinstance(v, (tuple, list)):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def parse_period(text: str) -> int | None:
    text = str(text).strip().lower()
    if text in (PERIOD_NEVER, "none", "static"):
        return None
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"invalid reset period {text!r}") from None


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    default = getattr(ExperimentConfig, key, None) if key in _FIELD_TYPES else None
    if key in ("reset_period", "pretrain_reset_period"):
        return parse_period(raw)
    if key == "randomize_start":
        return None if raw.lower() in ("auto", "none") else _parse_bool(raw)
    if key == "kl_balance":
        return None if raw.lower() in ("none", "off") else float(raw)
    if key == "mechanisms":
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    if key == "reset_periods":
        return tuple(parse_period(x) for x in raw.split(",") if x.strip())
    if key == "seeds":
        return tuple(int(x) for x in raw.split(",") if x.strip())
    if isinstance(default, bool):
        return _parse_bool(raw)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"invalid boolean {raw!r}")


def parse_config_text(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines grouped in sections; unknown keys are errors."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}".replace("\n", " ")) from None
    values: dict = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                values[key] = _parse_value(key, raw)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: {exc}") from None
    profile = overrides.pop("profile", None) or values.pop("profile", "desk")
    values.pop("profile", None)
    values.update(overrides)
    return profile_config(profile, **values)


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), **overrides)


def volatility_label(period: int | None, episode_length: int = 100) -> str:
    """Percentage label for a reset period.

    A map that survives a whole episode counts as 0%, a map changing every
    step as 100%, and intermediate periods scale linearly with the
    fraction of the episode the map is held.
    """
    if period is None:
        return "static"
    if period == 1:
        return "100%"
    frac = max(0.0, 1.0 - period / episode_length)
    return f"{round(100 * frac)}%"


def period_label(period: int | None) -> str:
    return PERIOD_NEVER if period is None else str(period)
