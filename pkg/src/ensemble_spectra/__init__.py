"""Canonical and microcanonical random-graph ensembles and their largest eigenvalues."""

from .ensembles import (
    CalibrationError,
    CanonicalModel,
    MicSamplerConfig,
    calibrate,
    canonical_logprob,
    sample_canonical,
    sample_mic,
    sample_mic_degrees,
    sample_mic_edge_count,
)
from .entropy import EntropyReport, entropy_scaling_scan, relative_entropy_edge_count, relative_entropy_enumerated
from .graph import (
    ConstraintSpec,
    Graph,
    complement,
    constraint_value,
    degrees,
    in_gamma,
    is_graphical,
)
from .spectral import (
    degree_ratio,
    expansion_estimate,
    fk_prediction,
    lambda1,
    lambda2,
    residual_decomposition,
    spectral_summary,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "CanonicalModel",
    "ConstraintSpec",
    "EntropyReport",
    "Graph",
    "MicSamplerConfig",
    "calibrate",
    "canonical_logprob",
    "complement",
    "constraint_value",
    "degree_ratio",
    "degrees",
    "entropy_scaling_scan",
    "expansion_estimate",
    "fk_prediction",
    "in_gamma",
    "is_graphical",
    "lambda1",
    "lambda2",
    "relative_entropy_edge_count",
    "relative_entropy_enumerated",
    "residual_decomposition",
    "sample_canonical",
    "sample_mic",
    "sample_mic_degrees",
    "sample_mic_edge_count",
    "spectral_summary",
]
