"""Benchmark harness: trains both autoencoders and compares four methods
(raw crude inversion, robust-ae, l2-ae, and ISTA compressed sensing when
the modality is mri) on a held-out corpus split, writing one CSV per
method, a summary CSV, and a timing CSV.

Every CSV embeds the fully resolved configuration as '# key=value'
comment lines; re-running from that header reproduces the metric CSVs
byte for byte (single-worker).  Only timing.csv carries wall-clock
measurements and is therefore not byte-reproducible.
"""

from __future__ import annotations

import os
import statistics
import time
from dataclasses import dataclass

from .autoencoder import TrainConfig, train_l2_baseline, train_robust
from .config import RunConfig
from .core import SeededRng, atomic_write_bytes, random_phantom, read_tensor, write_tensor
from .cs import cs_reconstruct_image
from .metrics import MetricReport, MetricRow, nmse, psnr, ssim
from .pipeline import (
    DegradationSpec,
    TEST_SEED_OFFSET,
    _entry_spec,
    build_mask,
    build_training_set,
    degrade,
    load_manifest,
    reconstruct_image,
)
from .transforms import SparsifyingTransform, fft2

METHODS = ("raw", "robust-ae", "l2-ae", "ista")


@dataclass
class BenchResult:
    reports: dict  # method name -> MetricReport
    timing: dict  # label -> seconds (plus the ista/robust-ae speed ratio)
    config: RunConfig


def degradation_from_config(config: RunConfig) -> DegradationSpec:
    modality = config["modality"]
    seed = config["degrade_seed"]
    if modality == "mri":
        kind = config["mask_kind"]
        params = {
            "random": {"fraction": config["mask_fraction"]},
            "variable-density": {"decay": config["mask_decay"]},
            "radial": {"lines": config["mask_lines"]},
            "periodic": {"stride": config["mask_stride"]},
        }[kind]
        return DegradationSpec("mri", mask_kind=kind, mask_params=params, seed=seed)
    if modality == "ct":
        return DegradationSpec("ct", ct_spacing_deg=config["ct_spacing_deg"], seed=seed)
    return DegradationSpec(
        "impulse", impulse_fraction=config["impulse_fraction"], seed=seed
    )


def train_config_from(config: RunConfig) -> TrainConfig:
    return TrainConfig(
        hidden=config["hidden"],
        lam=config["lambda"],
        mu=config["mu"],
        max_iter=config["max_iter"],
        rel_tol=config["rel_tol"],
        ridge_eps=config["ridge_eps"],
        activation=config["activation"],
        clamp_eps=config["clamp_eps"],
        bregman_update=config["bregman_update"],
        latent_update=config["latent_update"],
        seed=config["train_seed"],
        learning_rate=config["l2_learning_rate"],
        epochs=config["l2_epochs"],
    )


def _ensure_corpus(config: RunConfig, outdir):
    """Resolve the train/test manifests, generating a procedural corpus
    of seeded phantoms when explicit manifests are not configured."""
    if config["train_manifest"] and config["test_manifest"]:
        train = load_manifest(config["train_manifest"])
        test = load_manifest(config["test_manifest"])
    else:
        corpus_dir = config["corpus_dir"]
        if not os.path.isabs(corpus_dir):
            corpus_dir = os.path.join(outdir, corpus_dir)
        os.makedirs(corpus_dir, exist_ok=True)
        count, size = config["corpus_count"], config["corpus_size"]
        test_count = config["test_count"]
        if count < 2 or not 0 < test_count < count:
            raise ValueError("need corpus_count >= 2 and 0 < test_count < corpus_count")
        base = SeededRng(config["corpus_seed"])
        paths = []
        for i in range(count):
            path = os.path.join(corpus_dir, f"img_{i:04d}.rdt")
            write_tensor(path, random_phantom(size, base.split(i)))
            paths.append(path)
        train = [(p, None) for p in paths[: count - test_count]]
        test = [(p, None) for p in paths[count - test_count :]]
    train_paths = {p for p, _ in train}
    overlap_paths = train_paths & {p for p, _ in test}
    if overlap_paths:
        raise ValueError(f"train/test splits share images: {sorted(overlap_paths)[:3]}")
    return train, test


def _timed(fn, *args, **kwargs):
    start = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, time.perf_counter() - start


def run_benchmark(config: RunConfig, outdir) -> BenchResult:
    if config["workers"] != 1:
        raise ValueError("only single-worker mode is implemented (workers=1)")
    os.makedirs(outdir, exist_ok=True)
    train_entries, test_entries = _ensure_corpus(config, outdir)
    spec = degradation_from_config(config)
    patch_size = config["patch_size"]
    overlap = config["overlap"]

    tset = build_training_set(train_entries, spec, patch_size, config["train_overlap"])
    tconf = train_config_from(config)
    (robust_model, _), robust_seconds = _timed(train_robust, tset, tconf)
    l2_model, l2_seconds = _timed(train_l2_baseline, tset, tconf)

    transform = SparsifyingTransform(config["transform"], config["wavelet_levels"])
    use_ista = spec.modality == "mri"
    reports = {m: MetricReport(rows=[]) for m in METHODS if use_ista or m != "ista"}

    last_clean = last_degraded = None
    for index, (clean_path, degraded_path) in enumerate(test_entries):
        name = os.path.basename(clean_path)
        clean = read_tensor(clean_path)
        entry_spec = _entry_spec(spec, TEST_SEED_OFFSET + index)
        if degraded_path is None:
            degraded = degrade(clean, entry_spec)
        else:
            degraded = read_tensor(degraded_path)
        last_clean, last_degraded = clean, degraded

        def add(method, image, seconds):
            reports[method].rows.append(
                MetricRow(name, nmse(image, clean), psnr(image, clean),
                          ssim(image, clean), seconds)
            )

        add("raw", degraded, 0.0)
        timing: dict = {}
        robust_out = reconstruct_image(robust_model, degraded, overlap, timing)
        add("robust-ae", robust_out, timing["seconds"])
        timing = {}
        l2_out = reconstruct_image(l2_model, degraded, overlap, timing)
        add("l2-ae", l2_out, timing["seconds"])
        if use_ista:
            mask = build_mask(entry_spec, *clean.shape)
            kspace = fft2(clean, "forward")
            ista_out, seconds = _timed(
                cs_reconstruct_image, kspace, mask, transform,
                config["ista_lambda"], config["ista_iters"], config["ista_tol"],
            )
            add("ista", ista_out, seconds)

    timing = {
        "train_robust_seconds": robust_seconds,
        "train_l2_seconds": l2_seconds,
    }
    reps = config["timing_reps"]
    per_image = [
        _timed(reconstruct_image, robust_model, last_degraded, overlap)[1]
        for _ in range(reps)
    ]
    timing["reconstruct_seconds_median"] = statistics.median(per_image)
    if use_ista:
        mask = build_mask(spec, *last_clean.shape)
        kspace = fft2(last_clean, "forward")
        ista_times = [
            _timed(
                cs_reconstruct_image, kspace, mask, transform,
                config["ista_lambda"], config["timing_ista_iters"], 0.0,
            )[1]
            for _ in range(reps)
        ]
        timing["ista_seconds_median"] = statistics.median(ista_times)
        timing["ista_over_reconstruct_ratio"] = (
            timing["ista_seconds_median"] / timing["reconstruct_seconds_median"]
        )

    _write_outputs(config, outdir, reports, timing)
    return BenchResult(reports=reports, timing=timing, config=config)


def _header(config: RunConfig) -> str:
    return "".join(f"# {line}\n" for line in config.canonical_text().splitlines())


def _write_outputs(config, outdir, reports, timing):
    header = _header(config)
    for method, report in reports.items():
        body = report.to_csv(include_seconds=False)
        atomic_write_bytes(os.path.join(outdir, f"{method}.csv"), (header + body).encode())
    summary = ["method,nmse_mean,nmse_std,psnr_mean,psnr_std,ssim_mean,ssim_std"]
    for method, report in reports.items():
        summary.append(
            method + "," + ",".join(
                repr(v) for v in (
                    report.mean("nmse"), report.std("nmse"),
                    report.mean("psnr"), report.std("psnr"),
                    report.mean("ssim"), report.std("ssim"),
                )
            )
        )
    atomic_write_bytes(
        os.path.join(outdir, "summary.csv"),
        (header + "\n".join(summary) + "\n").encode(),
    )
    lines = ["label,seconds"] + [f"{k},{repr(v)}" for k, v in timing.items()]
    atomic_write_bytes(
        os.path.join(outdir, "timing.csv"),
        (header + "\n".join(lines) + "\n").encode(),
    )
