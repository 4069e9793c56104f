"""Reproducible synthetic datasets and noise models.

Datasets mirror the benchmark protocols used throughout: a 1-D sinc
target split into interleaved train/validation grids, a 2-D lattice
target that is a sparse combination of Gaussian kernels, and a 1-D
pure-outlier protocol for support-identification studies.

Corruption combines sparse impulses of fixed magnitude with either
Gaussian inlier noise at a prescribed SNR or symmetric alpha-stable
noise sampled with the Chambers-Mallows-Stuck transform.

All randomness flows through numpy's PCG64 generator; identical seeds
give identical streams on every platform.  Monte-Carlo trial t should
use seed base_seed + t so results do not depend on scheduling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset
from .kernel import KernelParams, cross_gram

SINC_KERNEL_SIGMA = 0.15
LATTICE_KERNEL_SIGMA = 0.2
SUPPORT_KERNEL_SIGMA = 0.1


@dataclass(frozen=True)
class StableParams:
    """Symmetric alpha-stable parameters (skewness 0, location 0)."""

    alpha: float
    gamma_scale: float

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must be in (0, 2], got {self.alpha}")
        if not self.gamma_scale > 0:
            raise ValueError(f"gamma_scale must be positive, got {self.gamma_scale}")


@dataclass
class NoiseSpec:
    """Corruption model: impulses plus at most one inlier-noise family."""

    inlier_snr_db: Optional[float] = None
    inlier_sigma: Optional[float] = None
    impulse_fraction: float = 0.0
    impulse_magnitude: float = 15.0
    stable_params: Optional[StableParams] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.impulse_fraction < 1:
            raise ValueError(
                f"impulse_fraction must be in [0, 1), got {self.impulse_fraction}"
            )
        if self.impulse_magnitude < 0:
            raise ValueError("impulse_magnitude must be nonnegative")
        families = [
            self.inlier_snr_db is not None,
            self.inlier_sigma is not None,
            self.stable_params is not None,
        ]
        if sum(families) > 1:
            raise ValueError(
                "set at most one of inlier_snr_db, inlier_sigma, stable_params"
            )
        if self.inlier_sigma is not None and not self.inlier_sigma > 0:
            raise ValueError(f"inlier_sigma must be positive, got {self.inlier_sigma}")


def rng_for(seed: int) -> np.random.Generator:
    """The package-wide PRNG: PCG64 seeded deterministically."""
    return np.random.Generator(np.random.PCG64(seed))


def round_half_away(x: float) -> int:
    """round(x) with halves going away from zero (0.5 -> 1)."""
    return int(np.sign(x) * np.floor(np.abs(x) + 0.5))


def sinc_target(x: np.ndarray) -> np.ndarray:
    """20 * sinc(2 pi x) with the normalized sinc convention
    sinc(t) = sin(pi t) / (pi t); the peak value is 20 at x = 0."""
    return 20.0 * np.sinc(2.0 * np.pi * np.asarray(x, dtype=np.float64))


@dataclass
class RegressionData:
    """A train/validation pair whose targets are noise-free truths."""

    train: Dataset
    validation: Dataset

    @property
    def train_truth(self) -> np.ndarray:
        return self.train.targets

    @property
    def validation_truth(self) -> np.ndarray:
        return self.validation.targets


def make_sinc_dataset() -> RegressionData:
    """398 equidistant points on [-0.99, 1) with spacing 0.005; the 199
    odd-indexed points (first, third, ...) form the training set and
    the rest the validation set."""
    x = -0.99 + 0.005 * np.arange(398)
    f = sinc_target(x)
    return RegressionData(
        train=Dataset(x[0::2], f[0::2]),
        validation=Dataset(x[1::2], f[1::2]),
    )


@dataclass
class LatticeData(RegressionData):
    true_alpha: np.ndarray  # sparse coefficients over all 961 lattice nodes
    centers: np.ndarray  # the 961 lattice nodes


def _lattice(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aa, bb = np.meshgrid(a, b, indexing="ij")
    return np.column_stack([aa.ravel(), bb.ravel()])


def make_lattice_dataset(rng: np.random.Generator) -> LatticeData:
    """2-D target on the 31 x 31 lattice over [0,1]^2.

    The 16 odd-indexed axis points give the 256 training nodes and the
    remaining 15 the 225 validation nodes.  The target is a sparse
    combination of Gaussian kernels (sigma 0.2) centered at all 961
    nodes; the number of nonzero coefficients is uniform over 4%-17.5%
    of the 256 training points and their values are N(0, 25.6^2).
    """
    axis = np.linspace(0.0, 1.0, 31)
    centers = _lattice(axis, axis)
    train_pts = _lattice(axis[0::2], axis[0::2])
    val_pts = _lattice(axis[1::2], axis[1::2])

    n_train = train_pts.shape[0]
    lo = int(np.ceil(0.04 * n_train))
    hi = int(np.floor(0.175 * n_train))
    nnz = int(rng.integers(lo, hi + 1))
    alpha = np.zeros(centers.shape[0])
    alpha[rng.choice(centers.shape[0], size=nnz, replace=False)] = rng.normal(
        0.0, 25.6, size=nnz
    )

    params = KernelParams(LATTICE_KERNEL_SIGMA)
    return LatticeData(
        train=Dataset(train_pts, cross_gram(train_pts, centers, params) @ alpha),
        validation=Dataset(val_pts, cross_gram(val_pts, centers, params) @ alpha),
        true_alpha=alpha,
        centers=centers,
    )


def make_support_dataset(
    rng: np.random.Generator, n: int = 100
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pure-outlier identification protocol: n equidistant points on
    [0, 1], target a sparse kernel combination (sigma 0.1) with 2 to 23
    nonzero coefficients drawn from N(0, 0.5^2).

    Returns (inputs, truth, true_alpha).
    """
    x = np.linspace(0.0, 1.0, n)
    nnz = int(rng.integers(2, 24))
    alpha = np.zeros(n)
    alpha[rng.choice(n, size=nnz, replace=False)] = rng.normal(0.0, 0.5, size=nnz)
    params = KernelParams(SUPPORT_KERNEL_SIGMA)
    truth = cross_gram(x, x, params) @ alpha
    return x, truth, alpha


def sample_alpha_stable(
    rng: np.random.Generator, params: StableParams, size: int
) -> np.ndarray:
    """Symmetric alpha-stable samples via the Chambers-Mallows-Stuck
    transform (beta = 0, delta = 0)."""
    v = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=size)
    w = rng.exponential(1.0, size=size)
    a = params.alpha
    if a == 2.0:
        # the transform reduces to a Gaussian with variance 2 gamma^2
        return params.gamma_scale * 2.0 * np.sqrt(w) * np.sin(v)
    if a == 1.0:
        x = np.tan(v)
    else:
        x = (
            np.sin(a * v)
            / np.cos(v) ** (1.0 / a)
            * (np.cos(v - a * v) / w) ** ((1.0 - a) / a)
        )
    return params.gamma_scale * x


def corrupt(
    truth: np.ndarray,
    spec: NoiseSpec,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Apply the noise model to a noise-free target vector.

    Returns (observations, outlier support indices in draw order, dense
    outlier vector).  The impulse count is round(fraction * N) with
    halves away from zero; signs are independent equiprobable +/-.
    Gaussian inlier variance is mean(truth^2) / 10^(snr_db / 10).

    Passing ``rng`` overrides ``spec.seed``; a caller that generated the
    dataset from the same stream can keep consuming it here.
    """
    truth = np.asarray(truth, dtype=np.float64).ravel()
    n = truth.shape[0]
    if rng is None:
        rng = rng_for(spec.seed)

    count = round_half_away(spec.impulse_fraction * n)
    if count >= n:
        raise ValueError(f"impulse count {count} must be below N={n}")
    support = rng.choice(n, size=count, replace=False)
    u = np.zeros(n)
    signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
    u[support] = signs * spec.impulse_magnitude

    y = truth + u
    if spec.inlier_snr_db is not None:
        var = float(np.mean(truth**2)) / 10.0 ** (spec.inlier_snr_db / 10.0)
        y = y + rng.normal(0.0, np.sqrt(var), size=n)
    elif spec.inlier_sigma is not None:
        y = y + rng.normal(0.0, spec.inlier_sigma, size=n)
    elif spec.stable_params is not None:
        y = y + sample_alpha_stable(rng, spec.stable_params, n)
    return y, support, u


def dataset_to_csv(
    path,
    dataset: Dataset,
    observations: np.ndarray,
    outlier_support,
) -> None:
    """Write x_1..x_d, y, truth, is_outlier rows for inspection."""
    support = set(int(i) for i in outlier_support)
    d = dataset.inputs.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(d)] + ["y", "truth", "is_outlier"])
        for i in range(dataset.size):
            row = [repr(float(v)) for v in dataset.inputs[i]]
            row += [
                repr(float(observations[i])),
                repr(float(dataset.targets[i])),
                str(int(i in support)),
            ]
            writer.writerow(row)
