"""Command-line dispatch, exit codes, config handling, benchmark harness."""

import numpy as np
import pytest

import dealias as d
from dealias.cli import command_dispatch
from dealias.config import DEFAULTS, config_from_report_header, resolve_config
from dealias.core import read_tensor, write_tensor


def run(*argv):
    return command_dispatch(list(argv))


class TestDispatch:
    def test_phantom_roundtrip(self, tmp_path):
        out = tmp_path / "p.rdt"
        assert run("phantom", "--kind", "shepp-logan", "--size", "128",
                   "--out", str(out)) == 0
        tensor = read_tensor(out)
        assert tensor.shape == (128, 128)

    def test_phantom_with_pgm(self, tmp_path):
        assert run("phantom", "--size", "64", "--out", str(tmp_path / "p.rdt"),
                   "--pgm", str(tmp_path / "p.pgm")) == 0
        assert (tmp_path / "p.pgm").read_bytes().startswith(b"P5\n")

    def test_unknown_flag_usage_error(self, tmp_path, capsys):
        assert run("phantom", "--bogus", "1", "--out", str(tmp_path / "p.rdt")) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_command(self, capsys):
        assert run("transmogrify") == 1

    def test_metrics_mismatched_dims_exit_2(self, tmp_path, capsys):
        write_tensor(tmp_path / "a.rdt", np.zeros((32, 32)))
        write_tensor(tmp_path / "b.rdt", np.zeros((64, 64)))
        assert run("metrics", "--a", str(tmp_path / "a.rdt"),
                   "--b", str(tmp_path / "b.rdt")) == 2
        assert "error" in capsys.readouterr().err

    def test_metrics_happy_path(self, tmp_path, capsys):
        img = d.generate_phantom("disks", 32)
        write_tensor(tmp_path / "a.rdt", img)
        write_tensor(tmp_path / "b.rdt", img)
        out = tmp_path / "m.csv"
        assert run("metrics", "--a", str(tmp_path / "a.rdt"),
                   "--b", str(tmp_path / "b.rdt"), "--out", str(out)) == 0
        assert "nmse=0.0" in capsys.readouterr().out
        assert out.read_text().startswith("nmse,psnr,ssim")

    def test_missing_file_exit_2(self, tmp_path):
        assert run("metrics", "--a", str(tmp_path / "no.rdt"),
                   "--b", str(tmp_path / "no.rdt")) == 2

    def test_degrade_and_diff(self, tmp_path):
        img = tmp_path / "img.rdt"
        deg = tmp_path / "deg.rdt"
        run("phantom", "--size", "64", "--out", str(img))
        assert run("degrade", "--image", str(img), "--out", str(deg),
                   "--modality", "mri", "--mask-kind", "random",
                   "--mask-fraction", "0.5", "--seed", "3",
                   "--save-mask", str(tmp_path / "mask.rdt")) == 0
        assert read_tensor(deg).shape == (64, 64)
        mask = read_tensor(tmp_path / "mask.rdt")
        assert set(np.unique(mask)) <= {0.0, 1.0}
        assert run("diff", "--a", str(img), "--b", str(deg),
                   "--out", str(tmp_path / "d.pgm")) == 0
        assert (tmp_path / "d.pgm").exists()

    def test_cs_recon(self, tmp_path):
        img = tmp_path / "img.rdt"
        run("phantom", "--size", "64", "--out", str(img))
        out = tmp_path / "cs.rdt"
        assert run("cs-recon", "--image", str(img), "--out", str(out),
                   "--mask-fraction", "0.6", "--iters", "20",
                   "--levels", "3") == 0
        assert read_tensor(out).shape == (64, 64)

    def test_train_and_reconstruct(self, tmp_path):
        paths = []
        for i in range(2):
            img = d.random_phantom(64, d.SeededRng(50 + i))
            path = tmp_path / f"img{i}.rdt"
            write_tensor(path, img)
            paths.append(path.name)
        manifest = tmp_path / "corpus.txt"
        manifest.write_text("".join(p + "\n" for p in paths))
        model_dir = tmp_path / "model"
        assert run("train", "--manifest", str(manifest), "--out", str(model_dir),
                   "--method", "robust", "--hidden", "8", "--max-iter", "3",
                   "--impulse-fraction", "0.1", "--modality", "impulse") == 0
        out = tmp_path / "rec.rdt"
        assert run("reconstruct", "--model", str(model_dir),
                   "--image", str(tmp_path / "img0.rdt"), "--out", str(out)) == 0
        rec = read_tensor(out)
        assert rec.shape == (64, 64)
        assert rec.min() >= 0.0 and rec.max() <= 1.0


class TestConfig:
    def test_defaults_resolve(self):
        config = resolve_config()
        assert config["hidden"] == DEFAULTS["hidden"]

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            resolve_config({"fraction_of_doom": "1"})

    def test_type_coercion(self):
        config = resolve_config({"hidden": "64", "lambda": "2.5", "overlap": "true"})
        assert config["hidden"] == 64
        assert config["lambda"] == 2.5
        assert config["overlap"] is True

    def test_canonical_text_roundtrip(self):
        config = resolve_config({"hidden": "64"})
        from dealias.config import parse_config_lines

        reparsed = resolve_config(parse_config_lines(config.canonical_text().splitlines()))
        assert reparsed.values == config.values

    def test_file_and_override_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("hidden=32\nlambda=3.0\n")
        from dealias.config import load_config_file

        config = resolve_config(load_config_file(cfg), {"hidden": "16"})
        assert config["hidden"] == 16
        assert config["lambda"] == 3.0


def bench_args(tmp_path, outdir):
    return [
        "bench", "--outdir", str(outdir),
        "--set", "corpus_count=6", "--set", "corpus_size=64",
        "--set", "test_count=2", "--set", "hidden=8",
        "--set", "max_iter=3", "--set", "rel_tol=0",
        "--set", "ista_iters=8", "--set", "timing_reps=1",
        "--set", "timing_ista_iters=8", "--set", "l2_epochs=3",
        "--set", "l2_learning_rate=1e-7", "--set", "wavelet_levels=3",
        "--set", "bregman_update=additive", "--set", "latent_update=anchored",
    ]


class TestBench:
    DETERMINISTIC = ["summary.csv", "raw.csv", "robust-ae.csv", "l2-ae.csv", "ista.csv"]

    def test_end_to_end_outputs_and_reproducibility(self, tmp_path):
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        assert command_dispatch(bench_args(tmp_path, out1)) == 0
        assert command_dispatch(bench_args(tmp_path, out2)) == 0
        for name in self.DETERMINISTIC:
            a = (out1 / name).read_bytes()
            b = (out2 / name).read_bytes()
            assert a == b, f"{name} differs between identical runs"
        assert (out1 / "timing.csv").exists()

    def test_rerun_from_embedded_header(self, tmp_path):
        out1 = tmp_path / "run1"
        assert command_dispatch(bench_args(tmp_path, out1)) == 0
        config = config_from_report_header(out1 / "summary.csv")
        from dealias.bench import run_benchmark

        out3 = tmp_path / "run3"
        run_benchmark(config, out3)
        for name in self.DETERMINISTIC:
            assert (out1 / name).read_bytes() == (out3 / name).read_bytes()

    def test_split_disjointness_enforced(self, tmp_path):
        img = tmp_path / "only.rdt"
        write_tensor(img, d.random_phantom(64, d.SeededRng(1)))
        manifest = tmp_path / "m.txt"
        manifest.write_text("only.rdt\n")
        from dealias.bench import run_benchmark

        config = resolve_config(
            {"train_manifest": str(manifest), "test_manifest": str(manifest)}
        )
        with pytest.raises(ValueError, match="share images"):
            run_benchmark(config, tmp_path / "out")

    def test_methods_in_summary(self, tmp_path):
        out = tmp_path / "run"
        assert command_dispatch(bench_args(tmp_path, out)) == 0
        text = (out / "summary.csv").read_text()
        for method in ("raw", "robust-ae", "l2-ae", "ista"):
            assert f"\n{method}," in text
        # reproducibility header present
        assert text.startswith("# ")
        assert "# hidden=8\n" in text
