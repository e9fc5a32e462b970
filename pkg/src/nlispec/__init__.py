"""Simulation and analysis toolkit for undetected-photon spectroscopy with a
nonlinear interferometer: forward model, envelope retrieval, noise analysis,
OPLD calibration, crystal-length optimum and polymer identification."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DomainError,
    FitError,
    FormatError,
    NlispecError,
    ReferenceInvalidError,
)
from .spectral import AxisKind, BandLimits, EnvelopeFilter, Spectrum, analytic_envelope  # noqa: E402
from .forward import (  # noqa: E402
    AcquisitionConfig,
    Interferogram,
    SampleModel,
    SourceModel,
    VisibilityModel,
    default_operating_point,
    simulate_burst,
    simulate_frame,
)
from .retrieval import AbsorbanceSpectrum, RetrievalConfig, retrieve  # noqa: E402
from .noise import AllanCurve, FrameSeries, allan_deviation, fit_scaling_exponent  # noqa: E402
from .crystal import numeric_optimum, optimal_length, snr_relative  # noqa: E402
from .polymer import builtin_library, detect_peaks, match_polymer  # noqa: E402

__all__ = [
    "__version__",
    "AbsorbanceSpectrum",
    "AcquisitionConfig",
    "AllanCurve",
    "AxisKind",
    "BandLimits",
    "ConfigurationError",
    "DomainError",
    "EnvelopeFilter",
    "FitError",
    "FormatError",
    "FrameSeries",
    "Interferogram",
    "NlispecError",
    "ReferenceInvalidError",
    "RetrievalConfig",
    "SampleModel",
    "SourceModel",
    "Spectrum",
    "VisibilityModel",
    "allan_deviation",
    "analytic_envelope",
    "builtin_library",
    "detect_peaks",
    "fit_scaling_exponent",
    "match_polymer",
    "numeric_optimum",
    "optimal_length",
    "default_operating_point",
    "retrieve",
    "simulate_burst",
    "simulate_frame",
    "snr_relative",
]
