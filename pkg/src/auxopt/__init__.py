"""Stochastic optimization of a target f assisted by cheap gradients of a
similar helper h: bias-corrected local steps, momentum variants, multi-helper
averaging, theorem-prescribed hyperparameters, and an experiment harness."""

from .core import (
    Array,
    NoiseSpec,
    OraclePair,
    RandomToken,
    draw_gaussian_noise,
    gaussian_oracle,
    rng_from_token,
    stream_fork,
)
from .decentralized import (
    DecentralizedTrajectory,
    HelperSet,
    WeakConvexityReport,
    check_weak_convexity,
    decentralized_cycle,
    run_decentralized,
    sample_helpers,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    build_oracle,
    load_config,
    load_config_file,
    run_experiment,
    run_sweep,
    trajectory_from_csv,
    trajectory_to_csv,
)
from .optimizers import (
    ALGORITHMS,
    DivergenceError,
    OptimizerConfig,
    OptimizerState,
    Trajectory,
    local_update_step,
    run,
)
from .problems import (
    HelperBuild,
    LibsvmParseError,
    LogisticTask,
    build_coreset_helper,
    build_semisupervised,
    logistic_oracle,
    make_quadratic_nd,
    make_synthetic_classification,
    make_toy_pair,
    map_labels_to_pm1,
    parse_libsvm,
    write_libsvm,
)
from .theory import (
    BiasEstimate,
    TheoryParams,
    auxmom_beta,
    auxmom_params,
    auxmvr_params,
    default_probe_points,
    diagnostics,
    estimate_bias,
    estimate_delta,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "Array",
    "BiasEstimate",
    "ConfigError",
    "DecentralizedTrajectory",
    "DivergenceError",
    "ExperimentConfig",
    "HelperBuild",
    "HelperSet",
    "LibsvmParseError",
    "LogisticTask",
    "NoiseSpec",
    "OptimizerConfig",
    "OptimizerState",
    "OraclePair",
    "RandomToken",
    "TheoryParams",
    "Trajectory",
    "WeakConvexityReport",
    "auxmom_beta",
    "auxmom_params",
    "auxmvr_params",
    "build_coreset_helper",
    "build_oracle",
    "build_semisupervised",
    "check_weak_convexity",
    "decentralized_cycle",
    "default_probe_points",
    "diagnostics",
    "draw_gaussian_noise",
    "estimate_bias",
    "estimate_delta",
    "gaussian_oracle",
    "load_config",
    "load_config_file",
    "local_update_step",
    "logistic_oracle",
    "make_quadratic_nd",
    "make_synthetic_classification",
    "make_toy_pair",
    "map_labels_to_pm1",
    "parse_libsvm",
    "rng_from_token",
    "run",
    "run_decentralized",
    "run_experiment",
    "run_sweep",
    "sample_helpers",
    "stream_fork",
    "trajectory_from_csv",
    "trajectory_to_csv",
    "write_libsvm",
]
