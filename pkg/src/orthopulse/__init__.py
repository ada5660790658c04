"""Orthogonal polyphase code pairs with minimum-ISL mismatched filters.

Synthesis (joint code/filter optimization), delay-Doppler ambiguity
analysis, and a pulsed-radar simulator demonstrating second-trip echo
suppression with alternating intra-pulse codes.
"""

from .waveform import (
    DB_FLOOR,
    CodeFilterPair,
    ConstraintReport,
    MismatchedFilter,
    OrthogonalSet,
    PolyphaseCode,
    autocorrelation,
    check_constraints,
    crosscorrelation,
    default_mainlobe_center,
    filtered_response,
    magnitude_db,
    power_db,
)
from .filter_solver import (
    SolverError,
    build_set,
    convolution_matrix,
    pair_error,
    set_isl_error,
    solve_isl_filter,
)
from .optimizer import (
    MultistartResult,
    OptimizationTrace,
    OptimizerConfig,
    PhaseVector,
    local_descent,
    quantize_code_set,
    random_code_set,
    scatter_multistart,
)
from .ambiguity import (
    AmbiguityGrid,
    SidelobeMetrics,
    ambiguity,
    cross_ambiguity_peak,
    cross_peak_matrix,
    metrics,
    zero_doppler_cut,
)
from .simulator import (
    PulseTrain,
    Scatterer,
    SimResult,
    TripScene,
    doppler_spectrum,
    power_profile,
    pulse_pair_velocity,
    receive,
    run_comparison,
    simulate,
    suppression_db,
    velocity_field,
)
from .fileio import (
    ConfigError,
    bundled_scene_path,
    load_scene,
    load_synth_config,
    load_waveform,
    save_waveform,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguityGrid",
    "CodeFilterPair",
    "ConfigError",
    "ConstraintReport",
    "DB_FLOOR",
    "MismatchedFilter",
    "MultistartResult",
    "OptimizationTrace",
    "OptimizerConfig",
    "OrthogonalSet",
    "PhaseVector",
    "PolyphaseCode",
    "PulseTrain",
    "Scatterer",
    "SidelobeMetrics",
    "SimResult",
    "SolverError",
    "TripScene",
    "ambiguity",
    "autocorrelation",
    "build_set",
    "bundled_scene_path",
    "check_constraints",
    "convolution_matrix",
    "cross_ambiguity_peak",
    "cross_peak_matrix",
    "crosscorrelation",
    "default_mainlobe_center",
    "doppler_spectrum",
    "filtered_response",
    "load_scene",
    "load_synth_config",
    "load_waveform",
    "local_descent",
    "magnitude_db",
    "metrics",
    "pair_error",
    "power_db",
    "power_profile",
    "pulse_pair_velocity",
    "quantize_code_set",
    "random_code_set",
    "receive",
    "run_comparison",
    "save_waveform",
    "scatter_multistart",
    "set_isl_error",
    "simulate",
    "solve_isl_filter",
    "suppression_db",
    "velocity_field",
    "zero_doppler_cut",
]
