"""climcoop: a deterministic multi-region climate-economy simulator.

Regions produce, trade, consume, emit, and warm a shared climate over a
20-step (100-year) episode; an optional negotiation stage lets them commit
each other to mitigation floors. Policies are pluggable and trainable at
desk scale with cross-entropy search, and an experiment harness compares
negotiation on/off and a grid of labor/technology perturbations.
"""

__version__ = "0.1.0"

from .actions import ActionBatch, ActionVector
from .climate import ClimateState, emissions, step_climate
from .engine import (
    EpisodeLog,
    EpisodeSummary,
    WorldState,
    build_observation,
    build_observations,
    episode_rewards,
    logs_equal,
    reset,
    run_episode,
    sanitize_actions,
    step,
    temperature_increase,
    with_floors,
)
from .errors import ClimcoopError, ConfigError, InvalidStateError
from .cem import TrainResult, train_cem
from .config_io import (
    load_config,
    load_region_config,
    save_config,
    save_region_config,
    synthetic_config,
)
from .experiments import (
    LTC,
    apply_ltc,
    apply_ltc_config,
    aggregate_stats,
    gain_ratio,
    rank_regions,
    run_experiment1,
    run_experiment2,
    spearman_rank_correlation,
)
from .negotiation import (
    NegotiationState,
    Proposal,
    compute_floors,
    mask_action,
    mask_batch,
)
from .params import (
    ClimateParams,
    GlobalEconParams,
    RegionParams,
    SimConfig,
    TrainBudget,
    config_hash,
    default_config,
)
from .policy import (
    FixedPolicy,
    LinearPolicy,
    PolicySpec,
    RandomPolicy,
    ZeroPolicy,
    build_policy,
    load_policy,
    save_policy,
)
from .reports import emit_episode_csv, emit_tables, read_report, write_report

__all__ = [name for name in dir() if not name.startswith("_")]
