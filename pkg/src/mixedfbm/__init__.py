"""
Simulation and parameter estimation for the mixed model ``a B^H + b W``
(fractional Brownian motion plus an independent Wiener process) from
power variations of one discretely observed path.
"""

__version__ = "0.1.0"

from .errors import (
    EmbeddingError,
    FormatError,
    InconclusiveError,
    LevelError,
    MixedModelError,
    ParameterError,
    RegimeError,
    ResolutionError,
    UndefinedEstimateError,
)
from .fgn import (
    CirculantSpectrum,
    GridPath,
    ModelParams,
    build_spectrum,
    fgn_autocovariance,
    read_path_csv,
    sample_fgn,
    sample_mixed_path,
    write_path_csv,
)
from .variation import (
    MixedVariationSpec,
    VariationLadder,
    centered_sum,
    dyadic_difference,
    mixed_variation,
    power_variation_ladder,
    z_statistic,
)
from .estimators import EstimateRecord, RegimeVerdict, classify_regime, log2_plus
from .asymptotics import SeriesEvaluation
from .montecarlo import ExperimentConfig, McSummary, run_table

__all__ = [
    "__version__",
    "EmbeddingError",
    "FormatError",
    "InconclusiveError",
    "LevelError",
    "MixedModelError",
    "ParameterError",
    "RegimeError",
    "ResolutionError",
    "UndefinedEstimateError",
    "CirculantSpectrum",
    "GridPath",
    "ModelParams",
    "build_spectrum",
    "fgn_autocovariance",
    "read_path_csv",
    "sample_fgn",
    "sample_mixed_path",
    "write_path_csv",
    "MixedVariationSpec",
    "VariationLadder",
    "centered_sum",
    "dyadic_difference",
    "mixed_variation",
    "power_variation_ladder",
    "z_statistic",
    "EstimateRecord",
    "RegimeVerdict",
    "classify_regime",
    "log2_plus",
    "SeriesEvaluation",
    "ExperimentConfig",
    "McSummary",
    "run_table",
]
