"""Raypath separation between a vertical source array and a vertical receiver array.

Fourth-order (trispectrum) subspace estimation with 3-D spatial-frequency
smoothing, plus second-order double-array and point-to-array baselines.
"""
from .cumulant import estimate_covariance, estimate_trispectrum
from .errors import ConfigError, FormatError, RaysepError, StorageError, ValidationError
from .geometry import (ArrayGeometry, FlatIndexLayout, RaypathParams, delay,
                       quadratic_steering, steering_vector)
from .pipeline import METHODS, estimate
from .smoothing import SmoothingPlan, default_plan, smoothed_steering, subcube_vectors
from .spectrum import (Axis, GridSpec, Peak, PseudoSpectrumGrid, eval_double2, eval_double4,
                       eval_smoothing_musical, extract_peaks, match_to_truth)
from .subspace import EigenSplit, eigensplit
from .synth import NoiseSpec, SpectralCube, generate_noise, measure_snr, synthesize

__version__ = "0.1.0"

__all__ = [
    "estimate_covariance",
    "estimate_trispectrum",
    "ConfigError",
    "FormatError",
    "RaysepError",
    "StorageError",
    "ValidationError",
    "ArrayGeometry",
    "FlatIndexLayout",
    "RaypathParams",
    "delay",
    "quadratic_steering",
    "steering_vector",
    "METHODS",
    "estimate",
    "SmoothingPlan",
    "default_plan",
    "smoothed_steering",
    "subcube_vectors",
    "Axis",
    "GridSpec",
    "Peak",
    "PseudoSpectrumGrid",
    "eval_double2",
    "eval_double4",
    "eval_smoothing_musical",
    "extract_peaks",
    "match_to_truth",
    "EigenSplit",
    "eigensplit",
    "NoiseSpec",
    "SpectralCube",
    "generate_noise",
    "measure_snr",
    "synthesize",
]
