from .config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_config_text,
    profile_config,
    volatility_label,
)
from .experiment import (
    ExperimentError,
    RunRecord,
    SweepReport,
    pretrain_world_model,
    run_cell,
    run_episode,
    run_sweep,
)
from .figures import emit_figures

__all__ = [
    "ConfigError", "ExperimentConfig", "load_config", "parse_config_text", "profile_config",
    "volatility_label", "ExperimentError", "RunRecord", "SweepReport", "pretrain_world_model",
    "run_cell", "run_episode", "run_sweep", "emit_figures",
]
