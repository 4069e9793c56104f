"""Robust kernel ridge regression with greedy outlier identification.

The model y = K alpha + c 1 + u + eta combines a Gaussian-kernel ridge
fit with a sparse outlier vector u selected greedily, one coordinate
per iteration.  The package also provides spectral identification
certificates, Monte-Carlo benchmark protocols, and a tiled
impulse-noise image denoising pipeline.
"""

from .core import (
    Dataset,
    KgardConfig,
    KgardSolution,
    KgardSolver,
    NumericalError,
    RegularizerKind,
    kgard_fit,
    predict,
)
from .denoise import DenoiseResult, RoiConfig, denoise_image, psnr
from .experiments import (
    AggregateStats,
    TrialResult,
    run_monte_carlo,
    support_metrics,
    sweep_outlier_magnitude,
)
from .kernel import KernelParams, cross_gram, gram_matrix, rbf_eval
from .noise import (
    NoiseSpec,
    StableParams,
    corrupt,
    make_lattice_dataset,
    make_sinc_dataset,
    rng_for,
)
from .pgm import PgmFormatError, read_pgm, write_pgm
from .theory import (
    BoundReport,
    SpectralDiagnostics,
    best_certificate,
    residual_oracle,
    spectral_diagnostics,
    theorem_check,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateStats",
    "BoundReport",
    "Dataset",
    "DenoiseResult",
    "KernelParams",
    "KgardConfig",
    "KgardSolution",
    "KgardSolver",
    "NoiseSpec",
    "NumericalError",
    "PgmFormatError",
    "RegularizerKind",
    "RoiConfig",
    "SpectralDiagnostics",
    "StableParams",
    "TrialResult",
    "best_certificate",
    "corrupt",
    "cross_gram",
    "denoise_image",
    "gram_matrix",
    "kgard_fit",
    "make_lattice_dataset",
    "make_sinc_dataset",
    "predict",
    "psnr",
    "rbf_eval",
    "read_pgm",
    "residual_oracle",
    "rng_for",
    "run_monte_carlo",
    "spectral_diagnostics",
    "support_metrics",
    "sweep_outlier_magnitude",
    "theorem_check",
    "write_pgm",
]
