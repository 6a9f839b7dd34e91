"""Structured total least squares via nuclear-norm relaxation with reweighting."""

from .alm import (
    AlmReport,
    AlmState,
    DivergenceError,
    RankInfeasibleError,
    alm_nn_stls,
    alm_weighted_nn_stls,
    alpha_search,
    reweighted_stls,
)
from .baseline import NongenericTlsError, UnsupportedStructureError, extract_beta, logdet_tls, plain_tls
from .experiments import (
    EXPERIMENTS,
    ExperimentSpec,
    TrialRecord,
    make_outlier_problem,
    run_experiment,
    summarize,
    trial_seed,
    write_records,
)
from .heterogeneity import (
    NOISY_SOLVE_DEFAULTS,
    CompoundSystem,
    HeterogeneityInstance,
    HeterogeneitySolution,
    NonIdentifiableWarning,
    SignIndefiniteError,
    build_system,
    solve_noiseless,
    solve_noisy,
    synthesize,
)
from .linalg import (
    StructureProjectionError,
    StructureProjector,
    SvdFactors,
    SylvesterSingularError,
    inv_sqrt_psd,
    min_right_singular_vector,
    numerical_rank,
    project_structure,
    solve_sylvester,
    svd,
)
from .matio import MatrixParseError, read_matrix, write_matrix
from .model import (
    DegenerateBaselineError,
    DegenerateIterateError,
    ErrorStructure,
    FixedMask,
    GeneralLinear,
    ProblemValidationError,
    SolverConfig,
    StlsError,
    StlsProblem,
    StlsSolution,
    Toeplitz,
    Unconstrained,
    relative_error,
    validate_problem,
)
from .prox import (
    ReweightPair,
    err_bound_nn,
    err_bound_rwnn,
    log_threshold_scalar,
    log_threshold_spectral,
    svt,
    update_reweight,
)

__version__ = "0.1.0"

__all__ = [
    "AlmReport",
    "AlmState",
    "CompoundSystem",
    "DegenerateBaselineError",
    "DegenerateIterateError",
    "DivergenceError",
    "ErrorStructure",
    "EXPERIMENTS",
    "ExperimentSpec",
    "FixedMask",
    "GeneralLinear",
    "HeterogeneityInstance",
    "HeterogeneitySolution",
    "MatrixParseError",
    "NOISY_SOLVE_DEFAULTS",
    "NonIdentifiableWarning",
    "NongenericTlsError",
    "ProblemValidationError",
    "RankInfeasibleError",
    "ReweightPair",
    "SignIndefiniteError",
    "SolverConfig",
    "StlsError",
    "StlsProblem",
    "StlsSolution",
    "StructureProjectionError",
    "StructureProjector",
    "SvdFactors",
    "SylvesterSingularError",
    "Toeplitz",
    "TrialRecord",
    "Unconstrained",
    "UnsupportedStructureError",
    "alm_nn_stls",
    "alm_weighted_nn_stls",
    "alpha_search",
    "build_system",
    "err_bound_nn",
    "err_bound_rwnn",
    "extract_beta",
    "inv_sqrt_psd",
    "log_threshold_scalar",
    "log_threshold_spectral",
    "logdet_tls",
    "min_right_singular_vector",
    "numerical_rank",
    "plain_tls",
    "project_structure",
    "read_matrix",
    "relative_error",
    "reweighted_stls",
    "make_outlier_problem",
    "run_experiment",
    "solve_noiseless",
    "solve_noisy",
    "solve_sylvester",
    "summarize",
    "svd",
    "svt",
    "synthesize",
    "trial_seed",
    "update_reweight",
    "validate_problem",
    "write_matrix",
    "write_records",
]
