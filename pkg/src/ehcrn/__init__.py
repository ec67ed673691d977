"""Energy-harvesting underlay cognitive-radio network simulator with a
from-scratch deep Q-learning agent and a reproducible experiment
harness."""

from .agent import (
    AgentConfig,
    DQNAgent,
    EpsilonSchedule,
    ReplayBuffer,
    StepMetrics,
    TrainResult,
    Transition,
    select_action,
)
from .baselines import RandomPolicy, evaluate_policy
from .env import (
    OBSERVATION_LAYOUT,
    OBSERVATION_SIZE,
    Action,
    ChannelDraw,
    CognitiveRadioEnv,
    ConfigError,
    EnvObservation,
    HarvestSource,
    ScenarioConfig,
    SlotOutcome,
    ambient_harvest_energy,
    battery_update,
    harvest_source,
    make_observation_normalizer,
    observation_scales,
    pu_occupancy,
    rate_pu1_active,
    rate_pu2_active,
    slot_time_share,
    ts_harvest_energy,
)
from .experiments import (
    AggregateCurve,
    CellResult,
    ExperimentResult,
    ExperimentSpec,
    PRESETS,
    apply_sweep,
    emit_csv,
    load_config,
    moving_average,
    preset_specs,
    read_aggregated_csv,
    read_per_seed_csv,
    report,
    run_experiment,
    run_single,
    summarize,
)
from .network import (
    GradientSet,
    QNetwork,
    TransitionBatch,
    clone_parameters,
    forward,
    init_network,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
    td_loss,
)
from .streams import (
    RandomStream,
    STREAM_NAMES,
    derive_streams,
    exponential_inverse_cdf,
    sample_exponential,
    sample_uniform,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AgentConfig",
    "AggregateCurve",
    "CellResult",
    "ChannelDraw",
    "CognitiveRadioEnv",
    "ConfigError",
    "DQNAgent",
    "EnvObservation",
    "EpsilonSchedule",
    "ExperimentResult",
    "ExperimentSpec",
    "GradientSet",
    "HarvestSource",
    "OBSERVATION_LAYOUT",
    "OBSERVATION_SIZE",
    "PRESETS",
    "QNetwork",
    "RandomPolicy",
    "RandomStream",
    "ReplayBuffer",
    "STREAM_NAMES",
    "ScenarioConfig",
    "SlotOutcome",
    "StepMetrics",
    "TrainResult",
    "Transition",
    "TransitionBatch",
    "ambient_harvest_energy",
    "apply_sweep",
    "battery_update",
    "clone_parameters",
    "derive_streams",
    "emit_csv",
    "evaluate_policy",
    "exponential_inverse_cdf",
    "forward",
    "harvest_source",
    "init_network",
    "load_checkpoint",
    "load_config",
    "make_observation_normalizer",
    "moving_average",
    "observation_scales",
    "preset_specs",
    "pu_occupancy",
    "rate_pu1_active",
    "rate_pu2_active",
    "read_aggregated_csv",
    "read_per_seed_csv",
    "report",
    "run_experiment",
    "run_single",
    "sample_exponential",
    "sample_uniform",
    "save_checkpoint",
    "select_action",
    "sgd_step",
    "slot_time_share",
    "summarize",
    "td_loss",
    "ts_harvest_energy",
]
