"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
failure.  All file outputs are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bench as bench_mod
from .autoencoder import (
    TrainConfig,
    load_model,
    save_model,
    train_l2_baseline,
    train_robust,
)
from .config import load_config_file, resolve_config
from .core import (
    FormatError,
    NumericFailure,
    atomic_write_bytes,
    generate_phantom,
    read_tensor,
    write_pgm,
    write_tensor,
)
from .cs import cs_reconstruct_image
from .metrics import nmse, psnr, ssim
from .pipeline import (
    DegradationSpec,
    build_mask,
    build_training_set,
    degrade,
    reconstruct_image,
)
from .transforms import SparsifyingTransform, fft2, save_mask


def _add_degradation_flags(parser):
    parser.add_argument("--modality", choices=("mri", "ct", "impulse"), default="mri")
    parser.add_argument(
        "--mask-kind",
        choices=("random", "variable-density", "radial", "periodic"),
        default="random",
    )
    parser.add_argument("--mask-fraction", type=float, default=0.5)
    parser.add_argument("--mask-decay", type=float, default=1.0)
    parser.add_argument("--mask-lines", type=int, default=24)
    parser.add_argument("--mask-stride", type=int, default=2)
    parser.add_argument("--ct-spacing", type=float, default=5.0)
    parser.add_argument("--impulse-fraction", type=float, default=0.15)
    parser.add_argument("--seed", type=int, default=0)


def _spec_from_args(args) -> DegradationSpec:
    if args.modality == "mri":
        params = {
            "random": {"fraction": args.mask_fraction},
            "variable-density": {"decay": args.mask_decay},
            "radial": {"lines": args.mask_lines},
            "periodic": {"stride": args.mask_stride},
        }[args.mask_kind]
        return DegradationSpec(
            "mri", mask_kind=args.mask_kind, mask_params=params, seed=args.seed
        )
    if args.modality == "ct":
        return DegradationSpec("ct", ct_spacing_deg=args.ct_spacing, seed=args.seed)
    return DegradationSpec(
        "impulse", impulse_fraction=args.impulse_fraction, seed=args.seed
    )


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dealias",
        description="Learned de-aliasing of crudely inverted undersampled images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="write a deterministic test image")
    p.add_argument("--kind", choices=("shepp-logan", "disks"), default="shepp-logan")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--out", required=True)
    p.add_argument("--pgm", help="also export an 8-bit preview")

    p = sub.add_parser("degrade", help="simulate acquisition and crude inversion")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--save-mask", help="persist the sampling mask (mri only)")
    _add_degradation_flags(p)

    p = sub.add_parser("train", help="train a de-aliasing model on a corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="model bundle directory")
    p.add_argument("--method", choices=("robust", "l2"), default="robust")
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--rel-tol", type=float, default=1e-4)
    p.add_argument("--activation", choices=("tanh", "sigmoid"), default="tanh")
    p.add_argument(
        "--bregman", choices=("reflective", "additive"), default="reflective"
    )
    p.add_argument("--latent", choices=("coupled", "anchored"), default="coupled")
    p.add_argument("--train-seed", type=int, default=0)
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--patch-size", type=int, default=32)
    _add_degradation_flags(p)

    p = sub.add_parser("reconstruct", help="de-alias an image with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--overlap", action="store_true")

    p = sub.add_parser("cs-recon", help="ISTA compressed-sensing reconstruction")
    p.add_argument("--image", required=True, help="clean image; acquisition is simulated")
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.02)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--transform", choices=("haar-wavelet", "dct"), default="haar-wavelet")
    p.add_argument("--levels", type=int, default=3)
    _add_degradation_flags(p)

    p = sub.add_parser("metrics", help="compare two images")
    p.add_argument("--a", required=True, help="estimate")
    p.add_argument("--b", required=True, help="reference")
    p.add_argument("--out", help="write a one-row CSV instead of stdout only")

    p = sub.add_parser("diff", help="export |a - b| x 10 (clamped) as PGM")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="run the full method comparison")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--outdir", required=True)
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    return parser


def _cmd_phantom(args):
    image = generate_phantom(args.kind, args.size)
    write_tensor(args.out, image)
    if args.pgm:
        write_pgm(args.pgm, image, 8)
    return 0


def _cmd_degrade(args):
    image = read_tensor(args.image)
    spec = _spec_from_args(args)
    write_tensor(args.out, degrade(image, spec))
    if args.save_mask:
        if spec.modality != "mri":
            raise ValueError("--save-mask only applies to the mri modality")
        save_mask(args.save_mask, build_mask(spec, *image.shape))
    return 0


def _cmd_train(args):
    spec = _spec_from_args(args)
    tset = build_training_set(args.manifest, spec, args.patch_size)
    config = TrainConfig(
        hidden=args.hidden,
        lam=args.lam,
        mu=args.mu,
        max_iter=args.max_iter,
        rel_tol=args.rel_tol,
        activation=args.activation,
        bregman_update=args.bregman,
        latent_update=args.latent,
        seed=args.train_seed,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
    )
    if args.method == "robust":
        model, state = train_robust(tset, config)
        print(f"iterations={state.iteration}", file=sys.stderr)
    else:
        model = train_l2_baseline(tset, config)
    save_model(model, args.out)
    return 0


def _cmd_reconstruct(args):
    model = load_model(args.model)
    image = read_tensor(args.image)
    timing: dict = {}
    result = reconstruct_image(model, image, args.overlap, timing)
    write_tensor(args.out, result)
    print(
        f"seconds={timing['seconds']:.6f} "
        f"seconds_per_patch={timing['seconds_per_patch']:.6f}",
        file=sys.stderr,
    )
    return 0


def _cmd_cs_recon(args):
    if args.modality != "mri":
        raise ValueError("cs-recon supports the mri modality only")
    image = read_tensor(args.image)
    spec = _spec_from_args(args)
    mask = build_mask(spec, *image.shape)
    transform = SparsifyingTransform(args.transform, args.levels)
    result = cs_reconstruct_image(
        fft2(image, "forward"), mask, transform, args.lam, args.iters, args.tol
    )
    write_tensor(args.out, result)
    return 0


def _cmd_metrics(args):
    a = read_tensor(args.a)
    b = read_tensor(args.b)
    values = {"nmse": nmse(a, b), "psnr": psnr(a, b), "ssim": ssim(a, b)}
    print(" ".join(f"{k}={v!r}" for k, v in values.items()))
    if args.out:
        text = "nmse,psnr,ssim\n" + ",".join(repr(v) for v in values.values()) + "\n"
        atomic_write_bytes(args.out, text.encode())
    return 0


def _cmd_diff(args):
    a = read_tensor(args.a)
    b = read_tensor(args.b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    magnified = np.clip(np.abs(a - b) * 10.0, 0.0, 1.0)
    write_pgm(args.out, magnified, 8)
    return 0


def _cmd_bench(args):
    file_values = load_config_file(args.config) if args.config else None
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value
    config = resolve_config(file_values, overrides)
    result = bench_mod.run_benchmark(config, args.outdir)
    for method, report in result.reports.items():
        print(f"{method}: nmse={report.mean('nmse'):.4f} psnr={report.mean('psnr'):.2f}")
    return 0


_COMMANDS = {
    "phantom": _cmd_phantom,
    "degrade": _cmd_degrade,
    "train": _cmd_train,
    "reconstruct": _cmd_reconstruct,
    "cs-recon": _cmd_cs_recon,
    "metrics": _cmd_metrics,
    "diff": _cmd_diff,
    "bench": _cmd_bench,
}


def command_dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, nonzero for usage errors
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(command_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
