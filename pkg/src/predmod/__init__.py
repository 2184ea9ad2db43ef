"""Simulation lab for predictions that are pushed to come true.

Train a model on a synthetic world, fix its per-user predictions, deploy a
policy that nudges realized outcomes toward those predictions, and decompose
the resulting error into noise, treatment-effect-plus-bias, and model-variance
parts.
"""

from .config import (
    EXPERIMENTS,
    PRESETS,
    ExperimentConfig,
    from_dict,
    load_config,
    preset_config,
    to_dict,
    validate_config,
)
from .decomp import (
    DecompositionReport,
    DeltaReport,
    IdentityCheck,
    RegionReport,
    ShiftCurve,
    delta_epe,
    epe_modified,
    epe_unmodified,
    improvement_region,
    optimal_constant_shift,
    verify_identity,
)
from .errors import (
    ConfigurationError,
    InputError,
    PredmodError,
    TrainingError,
    ValidationError,
)
from .models import (
    BiasVarianceEstimate,
    ModelSpec,
    TrainedModel,
    estimate_bias_variance,
    predict,
    predict_batch,
    prediction_samples,
    train,
)
from .policies import (
    AgentConfig,
    CateEstimate,
    InterventionPolicy,
    ModifiedWorld,
    Trajectory,
    compute_intervention,
    constant_shift,
    idle,
    oracle_counter_bias,
    realize_modified_outcome,
    run_sequential_agent,
    sequential_agent,
    shrinkage,
    true_cate,
)
from .runner import (
    RunResult,
    VERSION,
    config_sha256,
    run_experiment,
    scenario1_result,
    scenario2_result,
    scenario3_result,
)
from .showcase import (
    ABTestReport,
    GeneralizationReport,
    ShowcaseConfig,
    ShowcaseResult,
    UserRecord,
    compare_generalization,
    config_digest,
    run_ab_test,
    run_showcase,
)
from .stats import ks_critical_value, ks_statistic, mean_and_se, welch_t
from .streams import as_path, stream
from .world import (
    DoseResponse,
    FeatureLaw,
    GroundTruth,
    PopulationSample,
    SensitivityLaw,
    default_world,
    eval_true_f,
    realize_outcome,
    sample_population,
    true_mean,
)

__version__ = VERSION

__all__ = [
    "ABTestReport",
    "AgentConfig",
    "BiasVarianceEstimate",
    "CateEstimate",
    "ConfigurationError",
    "DecompositionReport",
    "DeltaReport",
    "DoseResponse",
    "EXPERIMENTS",
    "ExperimentConfig",
    "FeatureLaw",
    "GeneralizationReport",
    "GroundTruth",
    "IdentityCheck",
    "InputError",
    "InterventionPolicy",
    "ModelSpec",
    "ModifiedWorld",
    "PRESETS",
    "PopulationSample",
    "PredmodError",
    "RegionReport",
    "RunResult",
    "SensitivityLaw",
    "ShiftCurve",
    "ShowcaseConfig",
    "ShowcaseResult",
    "TrainedModel",
    "TrainingError",
    "Trajectory",
    "UserRecord",
    "ValidationError",
    "as_path",
    "compare_generalization",
    "compute_intervention",
    "config_digest",
    "config_sha256",
    "constant_shift",
    "default_world",
    "delta_epe",
    "epe_modified",
    "epe_unmodified",
    "estimate_bias_variance",
    "eval_true_f",
    "from_dict",
    "idle",
    "improvement_region",
    "ks_critical_value",
    "ks_statistic",
    "load_config",
    "mean_and_se",
    "optimal_constant_shift",
    "oracle_counter_bias",
    "predict",
    "predict_batch",
    "prediction_samples",
    "preset_config",
    "realize_modified_outcome",
    "realize_outcome",
    "run_ab_test",
    "run_experiment",
    "run_sequential_agent",
    "run_showcase",
    "sample_population",
    "scenario1_result",
    "scenario2_result",
    "scenario3_result",
    "sequential_agent",
    "shrinkage",
    "stream",
    "to_dict",
    "train",
    "true_cate",
    "true_mean",
    "validate_config",
    "verify_identity",
    "welch_t",
]
