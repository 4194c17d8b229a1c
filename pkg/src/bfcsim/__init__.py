"""Simulation and analysis toolkit for time-resolved correlations of
biphoton frequency combs: closed-form auto- and cross-correlation models,
a joint-spectral-amplitude density engine with a direct-quadrature oracle,
mode decomposition, thermal-statistics Monte Carlo with detector effects,
photon-counting estimators, and model fitting."""

from .comb import (
    CombSpec,
    GaussianJsaSpec,
    JsaGrid,
    JsiResult,
    PumpKind,
    PumpSpec,
    SampledSpectrum,
    accidental_floor_for_car,
    build_cw_marginal,
    build_gaussian_jsa,
    build_pulsed_jsa,
    car_from_matrix,
    compute_fp,
    jsi_and_car,
    lorentzian_line,
)
from .config import ExperimentConfig, config_from_dict, load_config
from .correlations import (
    CorrelationTrace,
    GaussianDensityResult,
    PhasePattern,
    TraceKind,
    coherence_kernel,
    comb_density_from_island,
    cross_correlation,
    g2_cw,
    g2_density_components,
    g2_density_direct_quadrature,
    g2_density_gaussian,
    g2_density_numeric,
    gaussian_schmidt_number,
    integrated_g2,
    jitter_average,
    time_transform,
)
from .counting import (
    CoincidenceRecord,
    DetectorModel,
    estimate_car,
    estimate_g2_cw,
    estimate_g2_density,
    simulate_from_density,
    simulate_thermal_signal,
    thermal_intensity_moment,
)
from .errors import (
    AliasingError,
    AmbiguousPeakError,
    ConfigError,
    DegenerateDetuningError,
    EqualizationError,
    FilterClippingError,
    FitConvergenceError,
    NoDataError,
    RegimeError,
    ResolutionError,
    ResourceLimitError,
    TruncationError,
)
from .fileio import (
    read_histogram_csv,
    read_metadata,
    read_timetags,
    read_trace_csv,
    write_histogram_csv,
    write_metadata,
    write_record_histogram,
    write_timetags,
    write_trace_csv,
)
from .fitting import (
    FitResult,
    VisibilityResult,
    fit_cw_model,
    measure_fwhm,
    visibility_and_threshold,
)
from .modulation import (
    ModulationSpec,
    equalizing_index,
    modulated_comb,
    sideband_weights,
    vernier_map,
)
from .schmidt import SchmidtResult, gbar_from_k, schmidt_number

__version__ = "0.1.0"

__all__ = [
    "AliasingError",
    "AmbiguousPeakError",
    "CoincidenceRecord",
    "CombSpec",
    "ConfigError",
    "CorrelationTrace",
    "DegenerateDetuningError",
    "DetectorModel",
    "EqualizationError",
    "ExperimentConfig",
    "FilterClippingError",
    "FitConvergenceError",
    "FitResult",
    "GaussianDensityResult",
    "GaussianJsaSpec",
    "JsaGrid",
    "JsiResult",
    "ModulationSpec",
    "NoDataError",
    "PhasePattern",
    "PumpKind",
    "PumpSpec",
    "RegimeError",
    "ResolutionError",
    "ResourceLimitError",
    "SampledSpectrum",
    "SchmidtResult",
    "TraceKind",
    "TruncationError",
    "VisibilityResult",
    "accidental_floor_for_car",
    "build_cw_marginal",
    "build_gaussian_jsa",
    "build_pulsed_jsa",
    "car_from_matrix",
    "coherence_kernel",
    "comb_density_from_island",
    "compute_fp",
    "config_from_dict",
    "cross_correlation",
    "equalizing_index",
    "estimate_car",
    "estimate_g2_cw",
    "estimate_g2_density",
    "fit_cw_model",
    "g2_cw",
    "g2_density_components",
    "g2_density_direct_quadrature",
    "g2_density_gaussian",
    "g2_density_numeric",
    "gaussian_schmidt_number",
    "gbar_from_k",
    "integrated_g2",
    "jitter_average",
    "jsi_and_car",
    "load_config",
    "lorentzian_line",
    "measure_fwhm",
    "modulated_comb",
    "read_histogram_csv",
    "read_metadata",
    "read_timetags",
    "read_trace_csv",
    "schmidt_number",
    "sideband_weights",
    "simulate_from_density",
    "simulate_thermal_signal",
    "thermal_intensity_moment",
    "time_transform",
    "vernier_map",
    "visibility_and_threshold",
    "write_histogram_csv",
    "write_metadata",
    "write_record_histogram",
    "write_timetags",
    "write_trace_csv",
]
