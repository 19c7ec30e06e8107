"""Two-dimensional ARMA random-field modelling, estimation and texture segmentation."""

from armafield.core import (
    ArmaParams,
    ModelOrder,
    as_field,
    lag_order,
    theta_pack,
    theta_unpack,
    zero_mean,
)
from armafield.errors import (
    ArmaFieldError,
    DegenerateFieldError,
    EstimationError,
    PGMFormatError,
    UnstableParametersError,
)
from armafield.synthesis import SynthesisConfig, stability_check, synthesize
from armafield.autocorr import LagGrid, estimate_lags
from armafield.ar_yw import ArFit, build_yw_system, fit_ar, filter_residual, noise_variance, solve_yw
from armafield.ywls import ArmaFit, build_phi, estimate, solve_theta
from armafield.segmenter import (
    BlockFeatures,
    SegmentationMap,
    extract_features,
    kmeans,
    label_accuracy,
    segment,
)

__version__ = "0.1.0"

__all__ = [
    "ArFit",
    "ArmaFieldError",
    "ArmaFit",
    "ArmaParams",
    "BlockFeatures",
    "DegenerateFieldError",
    "EstimationError",
    "LagGrid",
    "ModelOrder",
    "PGMFormatError",
    "SegmentationMap",
    "SynthesisConfig",
    "UnstableParametersError",
    "as_field",
    "build_phi",
    "build_yw_system",
    "estimate",
    "estimate_lags",
    "extract_features",
    "filter_residual",
    "fit_ar",
    "kmeans",
    "label_accuracy",
    "lag_order",
    "noise_variance",
    "segment",
    "solve_theta",
    "solve_yw",
    "stability_check",
    "synthesize",
    "theta_pack",
    "theta_unpack",
    "zero_mean",
]
