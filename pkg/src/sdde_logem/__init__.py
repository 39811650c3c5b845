"""Positivity-preserving logarithmic Euler-Maruyama simulation of
jump-driven stochastic delay systems, with a Monte Carlo harness for
strong-convergence and positivity verification."""

from .errors import (
    AssumptionValidationError,
    ConfigurationError,
    ExperimentAbortError,
    NumericInputError,
    OverflowAbortError,
    PositivityBreachError,
    SddeError,
    SequencingError,
    UnsupportedOracleError,
    UsageError,
    ValidationUnsupportedError,
)
from .levy import (
    JumpLaw,
    JumpRealization,
    LevyComponentSpec,
    ShiftedExponentialJumps,
    TwoPointJumps,
    UniformJumps,
    empty_realization,
    events_in,
    increment,
    jump_law_from_dict,
    moment_integral,
    realization_to_json,
    sample_jump_realization,
)
from .coefficients import (
    AssumptionReport,
    BoundedAffine,
    CoefficientField,
    Constant,
    ConstantPath,
    HolderPowerPath,
    InitialPath,
    ScalarField,
    Sigmoid,
    evaluate_f,
    evaluate_g,
    initial_path_from_dict,
    off_diagonal_matrix,
    operator_norm_bound,
    scalar_field_from_dict,
    validate_assumptions,
)
from .scheme import (
    Grid,
    Scenario,
    SolutionPath,
    build_grid,
    compose,
    delayed_state,
    exact_frozen_solution,
    p_step,
    path_to_csv_text,
    simulate,
    x_step,
)
from .analysis import (
    ConvergenceLevel,
    ConvergenceReport,
    DeterministicReferenceReport,
    IncrementLevel,
    IncrementReport,
    MomentLevel,
    MomentReport,
    PositivityAudit,
    RateFit,
    coupled_strong_error,
    deterministic_reference_error,
    fit_rate,
    increment_scaling,
    moment_study,
    positivity_audit,
)
from .cli import RunConfig, parse_config
from . import presets

__version__ = "0.1.0"
