"""Flat key=value run configuration.

A config file holds one ``key=value`` pair per line (``#`` comments
allowed).  Unknown keys are rejected; values are coerced to the type of
the key's default.  Command-line overrides win over file values.  The
fully resolved configuration prints back as a canonical sorted listing
that is embedded as a comment header in every report, so any run can be
reproduced from its own outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULTS = {
    # procedural corpus (used when no explicit manifests are given)
    "corpus_dir": "corpus",
    "corpus_count": 40,
    "corpus_size": 128,
    "corpus_seed": 0,
    "test_count": 5,
    # explicit corpus manifests (override the procedural corpus)
    "train_manifest": "",
    "test_manifest": "",
    # acquisition / degradation
    "modality": "mri",
    "mask_kind": "random",
    "mask_fraction": 0.5,
    "mask_decay": 1.0,
    "mask_lines": 24,
    "mask_stride": 2,
    "ct_spacing_deg": 5.0,
    "impulse_fraction": 0.15,
    "degrade_seed": 0,
    # patch pipeline
    "patch_size": 32,
    "overlap": False,
    "train_overlap": False,
    # robust trainer
    "hidden": 256,
    "lambda": 1.0,
    "mu": 1.0,
    "max_iter": 500,
    "rel_tol": 1e-4,
    "ridge_eps": 1e-6,
    "activation": "tanh",
    "clamp_eps": 1e-6,
    "bregman_update": "reflective",
    "latent_update": "coupled",
    "train_seed": 0,
    # l2 baseline
    "l2_learning_rate": 1e-4,
    "l2_epochs": 200,
    # compressed-sensing solver
    "ista_lambda": 0.02,
    "ista_iters": 200,
    "ista_tol": 1e-6,
    "transform": "haar-wavelet",
    "wavelet_levels": 3,
    # benchmark harness
    "timing_reps": 5,
    "timing_ista_iters": 200,
    "workers": 1,
}


def _coerce(key: str, text: str):
    default = DEFAULTS[key]
    if isinstance(default, bool):
        lowered = text.strip().lower()
        if lowered in ("1", "true", "yes"):
            return True
        if lowered in ("0", "false", "no"):
            return False
        raise ValueError(f"config key {key!r}: expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text.strip()


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def canonical_text(self) -> str:
        """Sorted key=value listing; parsing it back reproduces the config."""
        return "".join(f"{k}={_render(v)}\n" for k, v in sorted(self.values.items()))


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_lines(lines) -> dict:
    """key=value lines to a validated, coerced dict (unknown keys rejected)."""
    values = {}
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, text = line.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS:
            raise ValueError(f"unknown config key: {key!r}")
        values[key] = _coerce(key, text)
    return values


def load_config_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_lines(fh)


def resolve_config(file_values=None, overrides=None) -> RunConfig:
    """Defaults, then file values, then overrides; returns the frozen result."""
    values = dict(DEFAULTS)
    for source in (file_values, overrides):
        if source:
            for key, val in source.items():
                if key not in DEFAULTS:
                    raise ValueError(f"unknown config key: {key!r}")
                values[key] = _coerce(key, val) if isinstance(val, str) else val
    return RunConfig(values)


def config_from_report_header(path) -> RunConfig:
    """Rebuild the resolved config embedded as '# key=value' CSV comments."""
    lines = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            lines.append(line[1:].strip())
    if not lines:
        raise ValueError(f"no config header found in {path}")
    return resolve_config(parse_config_lines(lines))
