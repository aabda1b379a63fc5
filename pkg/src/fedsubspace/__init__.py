"""Simulator for FedAvg on multi-task linear representation learning.

Example
-------
>>> from fedsubspace import SimConfig, run_training
>>> result = run_training(SimConfig(d=20, k=3, M=10, T=100))
>>> len(result.metrics)
100
"""

from .concentration import (
    averaged_gram_deviation_experiment,
    gram_deviation_experiment,
    head_sampling_event_rate,
)
from .config import ExperimentConfig, load_config, parse_config
from .engine import (
    average_states,
    dgd_step,
    finetune,
    global_round,
    local_step_finite,
    local_step_population,
    run_local,
    run_training,
    sample_clients,
)
from .enums import ExperimentKind, MonitorLevel, Regime, StreamTag, TrainingMethod
from .exceptions import (
    ConfigParseError,
    ContainmentViolatedError,
    DegenerateHeadError,
    DegenerateMeanHeadError,
    DimensionError,
    DivergedError,
    FedSubspaceError,
    InvalidConfigError,
    InvalidSampleSizeError,
    NoConvergenceError,
    RankDeficientError,
    RankError,
    TargetInfeasibleError,
)
from .experiments import run_experiment
from .linalg import (
    min_singular_value,
    orthogonal_complement,
    orthonormalize,
    principal_angle_distance,
    spectral_norm,
)
from .lowerbound import (
    construct_adversarial,
    make_b0_containing_product,
    paired_dgd_experiment,
    pair_residuals,
)
from .models import (
    AdversarialPair,
    Batch,
    DeviationCurve,
    DiversityStats,
    EventRateReport,
    FineTuneTrace,
    GlobalHypothesisFlags,
    GroundTruth,
    LocalHypothesisFlags,
    LocalTrajectory,
    LowerBoundReport,
    ModelState,
    MonitorConstants,
    RoundMetrics,
    SimConfig,
    TrainingResult,
)
from .monitors import (
    Monitor,
    check_global_hypotheses,
    check_local_hypotheses,
    prior_weight_diagnostics,
)
from .problem import (
    diversity_stats,
    gen_ground_truth,
    gen_init,
    gen_new_client,
    head_sampling_threshold,
    sample_batch,
    theorem_step_size,
)

__version__ = "0.1.0"

__all__ = [
    # Linear algebra
    "min_singular_value",
    "orthogonal_complement",
    "orthonormalize",
    "principal_angle_distance",
    "spectral_norm",
    # Problem generation
    "diversity_stats",
    "gen_ground_truth",
    "gen_init",
    "gen_new_client",
    "head_sampling_threshold",
    "sample_batch",
    "theorem_step_size",
    # Training
    "average_states",
    "dgd_step",
    "finetune",
    "global_round",
    "local_step_finite",
    "local_step_population",
    "run_local",
    "run_training",
    "sample_clients",
    # Monitoring
    "Monitor",
    "check_global_hypotheses",
    "check_local_hypotheses",
    "prior_weight_diagnostics",
    # Lower bound
    "construct_adversarial",
    "make_b0_containing_product",
    "paired_dgd_experiment",
    "pair_residuals",
    # Concentration
    "averaged_gram_deviation_experiment",
    "gram_deviation_experiment",
    "head_sampling_event_rate",
    # Experiments
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "run_experiment",
    # Models
    "AdversarialPair",
    "Batch",
    "DeviationCurve",
    "DiversityStats",
    "EventRateReport",
    "FineTuneTrace",
    "GlobalHypothesisFlags",
    "GroundTruth",
    "LocalHypothesisFlags",
    "LocalTrajectory",
    "LowerBoundReport",
    "ModelState",
    "MonitorConstants",
    "RoundMetrics",
    "SimConfig",
    "TrainingResult",
    # Enums
    "ExperimentKind",
    "MonitorLevel",
    "Regime",
    "StreamTag",
    "TrainingMethod",
    # Exceptions
    "ConfigParseError",
    "ContainmentViolatedError",
    "DegenerateHeadError",
    "DegenerateMeanHeadError",
    "DimensionError",
    "DivergedError",
    "FedSubspaceError",
    "InvalidConfigError",
    "InvalidSampleSizeError",
    "NoConvergenceError",
    "RankDeficientError",
    "RankError",
    "TargetInfeasibleError",
    # Version
    "__version__",
]
