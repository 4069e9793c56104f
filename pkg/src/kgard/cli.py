"""Command-line front end.

Subcommands: regress, experiment, sweep, corrupt-image, denoise, psnr.
Exit codes: 0 success, 2 argument errors, 1 runtime or numerical
errors.  Errors go to stderr with the prefix "error: <category>:".
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .core import Dataset, KgardConfig, NumericalError, RegularizerKind, kgard_fit
from .denoise import RoiConfig, denoise_image, psnr
from .experiments import run_monte_carlo, sweep_outlier_magnitude
from .kernel import KernelParams, gram_matrix
from .noise import NoiseSpec, StableParams, corrupt, rng_for
from .pgm import PgmFormatError, read_pgm_file, write_pgm_file


def _threads_default() -> int:
    env = os.environ.get("KGARD_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _add_threads(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--threads",
        type=int,
        default=_threads_default(),
        help="worker thread cap (default: KGARD_THREADS or 1)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgard",
        description="Robust kernel ridge regression with outlier identification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("regress", help="fit one dataset from CSV")
    p.add_argument("--in", dest="infile", required=True, help="input CSV (x1..xd, y)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--sigma", type=float, required=True, help="kernel width")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument(
        "--regularizer",
        choices=["coefficient", "rkhs"],
        default="coefficient",
        help="penalty on (alpha; c) or on the RKHS norm (default: coefficient)",
    )
    p.add_argument("--stop-norm", choices=["l2", "linf"], default="l2")

    p = sub.add_parser("experiment", help="Monte-Carlo benchmark trials")
    p.add_argument("--protocol", choices=["sinc1d", "lattice2d", "stable1d"], required=True)
    p.add_argument("--snr-db", type=float, default=None, help="Gaussian inlier SNR")
    p.add_argument(
        "--inlier-sigma",
        type=float,
        default=None,
        help="fixed Gaussian inlier standard deviation",
    )
    p.add_argument("--outlier-frac", type=float, default=0.0)
    p.add_argument("--magnitude", type=float, default=15.0, help="impulse magnitude")
    p.add_argument("--stable-alpha", type=float, default=None)
    p.add_argument("--stable-gamma", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="per-trial CSV path")
    _add_threads(p)

    p = sub.add_parser("sweep", help="outlier-magnitude identification sweep")
    p.add_argument(
        "--magnitudes", required=True, help="comma-separated list, e.g. 100,300,600"
    )
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    _add_threads(p)

    p = sub.add_parser("corrupt-image", help="add impulses to a PGM image")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--magnitude", type=float, default=100.0)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask-out", default=None, help="optional impulse-mask PGM path")

    p = sub.add_parser("denoise", help="tiled impulse-noise removal")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True, help="denoised PGM path")
    p.add_argument("--outliers", default=None, help="outlier-map PGM path")
    p.add_argument(
        "--impulse-removed", default=None, help="input-minus-outliers PGM path"
    )
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--lambda0", type=float, default=1.0)
    p.add_argument("--e0", type=float, default=40.0)
    p.add_argument("--roi", type=int, default=12)
    p.add_argument("--core", type=int, default=8)
    p.add_argument("--diagnostics", default=None, help="per-ROI JSON path")
    _add_threads(p)

    p = sub.add_parser("psnr", help="peak signal-to-noise ratio of two PGMs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    return parser


def _read_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"empty CSV file: {path}")
    header = rows[0]
    x_cols = [i for i, name in enumerate(header) if name.strip().startswith("x")]
    try:
        y_col = header.index("y")
    except ValueError:
        raise ValueError(f"CSV {path} has no 'y' column") from None
    if not x_cols:
        raise ValueError(f"CSV {path} has no x columns")
    inputs, targets = [], []
    for row in rows[1:]:
        if not row:
            continue
        inputs.append([float(row[i]) for i in x_cols])
        targets.append(float(row[y_col]))
    return Dataset(np.array(inputs), np.array(targets))


def _cmd_regress(args) -> int:
    data = _read_dataset_csv(args.infile)
    kind = (
        RegularizerKind.COEFFICIENT_NORM
        if args.regularizer == "coefficient"
        else RegularizerKind.RKHS_NORM
    )
    config = KgardConfig(
        lam=args.lam, epsilon=args.epsilon, regularizer=kind, stop_norm=args.stop_norm
    )
    params = KernelParams(args.sigma)
    solution = kgard_fit(data, params, config)
    fitted = gram_matrix(data.inputs, params) @ solution.alpha + solution.bias
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "y", "fitted", "outlier"])
        for i in range(data.size):
            writer.writerow(
                [
                    i,
                    repr(float(data.targets[i])),
                    repr(float(fitted[i])),
                    repr(solution.outliers.get(i, 0.0)),
                ]
            )
    print(
        f"fit: {solution.iterations} outliers selected, "
        f"final residual {solution.residual_history[-1]:.6g}"
    )
    return 0


def _cmd_experiment(args) -> int:
    stable = None
    if (args.stable_alpha is None) != (args.stable_gamma is None):
        raise ValueError("--stable-alpha and --stable-gamma must be given together")
    if args.stable_alpha is not None:
        stable = StableParams(args.stable_alpha, args.stable_gamma)
    noise = NoiseSpec(
        inlier_snr_db=args.snr_db,
        inlier_sigma=args.inlier_sigma,
        impulse_fraction=args.outlier_frac,
        impulse_magnitude=args.magnitude,
        stable_params=stable,
        seed=args.seed,
    )
    config = KgardConfig(lam=args.lam, epsilon=args.epsilon)
    stats, _ = run_monte_carlo(
        args.protocol,
        noise,
        config,
        trials=args.trials,
        base_seed=args.seed,
        csv_path=args.out,
        threads=args.threads,
    )
    print(
        f"trials={stats.trials} failures={stats.failures} "
        f"mean_mse={stats.mean_mse:.6g} std_mse={stats.std_mse:.6g} "
        f"mean_correct={stats.mean_correct:.4f} mean_wrong={stats.mean_wrong:.4f} "
        f"mean_time={stats.mean_time:.4g}s"
    )
    return 0


def _cmd_sweep(args) -> int:
    try:
        magnitudes = [float(tok) for tok in args.magnitudes.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"bad --magnitudes list: {args.magnitudes!r}") from None
    points = sweep_outlier_magnitude(
        magnitudes,
        fraction=args.fraction,
        trials=args.trials,
        base_seed=args.seed,
        threads=args.threads,
    )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["magnitude", "mean_correct", "mean_wrong", "bound_hold_rate"])
        for pt in points:
            writer.writerow(
                [
                    repr(pt.magnitude),
                    repr(pt.mean_correct),
                    repr(pt.mean_wrong),
                    repr(pt.bound_hold_rate),
                ]
            )
    for pt in points:
        print(
            f"magnitude={pt.magnitude:g} correct={pt.mean_correct:.4f} "
            f"wrong={pt.mean_wrong:.4f} hold={pt.bound_hold_rate:.4f}"
        )
    return 0


def _cmd_corrupt_image(args) -> int:
    img = read_pgm_file(args.infile)
    spec = NoiseSpec(
        inlier_snr_db=args.snr_db,
        impulse_fraction=args.fraction,
        impulse_magnitude=args.magnitude,
        seed=args.seed,
    )
    y, support, _ = corrupt(img.ravel(), spec, rng=rng_for(args.seed))
    write_pgm_file(args.out, y.reshape(img.shape))
    if args.mask_out is not None:
        mask = np.zeros(img.size)
        mask[support] = 255.0
        write_pgm_file(args.mask_out, mask.reshape(img.shape))
    print(f"corrupted {img.shape[1]}x{img.shape[0]} image: {support.size} impulses")
    return 0


def _cmd_denoise(args) -> int:
    img = read_pgm_file(args.infile)
    cfg = RoiConfig(
        roi_size=args.roi,
        core_size=args.core,
        sigma=args.sigma,
        lambda0=args.lambda0,
        e0=args.e0,
    )
    result = denoise_image(img, cfg, threads=args.threads)
    write_pgm_file(args.out, result.denoised)
    if args.outliers is not None:
        # shift the signed map so both impulse polarities are visible
        write_pgm_file(args.outliers, np.abs(result.outlier_map))
    if args.impulse_removed is not None:
        write_pgm_file(args.impulse_removed, result.impulse_removed)
    if args.diagnostics is not None:
        payload = [
            {
                "index": d.index,
                "origin": list(d.origin),
                "lambda": d.lam,
                "epsilon": d.epsilon,
                "outliers": d.outliers,
                "iterations": d.iterations,
                "failed": d.failed,
            }
            for d in result.diagnostics
        ]
        with open(args.diagnostics, "w") as fh:
            json.dump(payload, fh, indent=2)
    failed = sum(1 for d in result.diagnostics if d.failed)
    total_outliers = sum(d.outliers for d in result.diagnostics)
    print(
        f"denoised {len(result.diagnostics)} ROIs "
        f"({failed} failed), {total_outliers} outliers flagged"
    )
    return 0


def _cmd_psnr(args) -> int:
    value = psnr(read_pgm_file(args.a), read_pgm_file(args.b))
    print("inf" if math.isinf(value) else f"{value:.4f}")
    return 0


_HANDLERS = {
    "regress": _cmd_regress,
    "experiment": _cmd_experiment,
    "sweep": _cmd_sweep,
    "corrupt-image": _cmd_corrupt_image,
    "denoise": _cmd_denoise,
    "psnr": _cmd_psnr,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ValueError as exc:
        print(f"error: argument: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return 1
    except PgmFormatError as exc:
        print(f"error: format: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
