"""Linear analysis and spectral simulation of two-species reaction-diffusion systems near a Turing instability."""
from .errors import *  # noqa: F401,F403
from .kinetics import (
    BUILTIN_MODELS,
    Linearization,
    ReactionSystem,
    build_model,
    expression_model,
    find_steady_state,
    linearize,
)
from .linear_analysis import (
    GrowingModeSummary,
    ModeEigenData,
    ModeSpectrum,
    TuringWitness,
    classify_sign_pattern,
    dispersion_curve,
    dispersion_eigen,
    growing_mode_summary,
    has_turing_instability,
    rest_state_stable,
    turing_criterion_value,
)
from .simulator import SimulationConfig, Simulator, Trajectory, evenness_check, run, step
from .spectral import (
    EigenCoordinates,
    Grid,
    SpectralField,
    analyze,
    eigen_decompose,
    even_extension,
    evenness_defect,
    h2_norm,
    l2_norm,
    linear_propagate,
    mode_field,
    propagate_field,
    synthesize,
)
from .verification import (
    DeviationReport,
    ExperimentSpec,
    bootstrap_constant_c2,
    dominant_mode_prediction,
    escape_time,
    growth_bound_fit,
    mixed_profile,
    pure_mode_profile,
    run_theorem_experiment,
    scaling_study,
)

__version__ = "0.1.0"
