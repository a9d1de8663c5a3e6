import json
import math

import numpy as np
import pytest
from PIL import Image
from skimage.metrics import structural_similarity

from ffinr.errors import ConfigError, FormatError, InvalidInputError
from ffinr.numerics import Rng, dft_uniform
from ffinr.tasks import (
    Composite, ExperimentConfig, ImageGrid, Sinusoid, Spike, load_config, load_image, make_signal,
    psnr, run_experiment, save_pgm, ssim, standard_image, sweep,
)
from ffinr.tasks.config import apply_overrides
from ffinr.tasks.images import grid_coords, read_pgm, smooth_image
from ffinr.tasks.signals import generator_from_dict, generator_to_dict, two_region_composite


class TestSignals:
    def test_sinusoid_samples(self):
        assert np.allclose(Sinusoid(1.0)(np.arange(4) / 4), [0, 1, 0, -1], atol=1e-15)

    def test_spike_geometry(self):
        s = Spike(0.5, 0.25, 1.0)
        assert s(np.array([0.5, 0.375, 0.625, 0.4375])).tolist() == [1.0, 0.0, 0.0, 0.5]

    def test_composite_spectrum(self):
        sig = make_signal(Composite((Sinusoid(2, 1.0), Sinusoid(5, 0.5))), 64)
        rep = dft_uniform(sig.ys)
        assert rep.magnitude_at(2) == pytest.approx(1.0) and rep.magnitude_at(5) == pytest.approx(0.5)
        assert np.max(np.delete(rep.magnitudes, [2, 5])) < 1e-12

    def test_grid(self):
        sig = make_signal(Sinusoid(1), 8)
        assert np.array_equal(sig.xs, np.arange(8) / 8)

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            make_signal(Sinusoid(1), 4)
        with pytest.raises(InvalidInputError):
            make_signal(Spike(0.05, 0.2), 64)
        with pytest.raises(InvalidInputError):
            make_signal(Spike(0.95, 0.2), 64)

    def test_dict_round_trip(self):
        g = two_region_composite()
        assert generator_from_dict(json.loads(json.dumps(generator_to_dict(g)))) == g
        with pytest.raises(ConfigError):
            generator_from_dict({"type": "square"})
        with pytest.raises(ConfigError):
            generator_from_dict({"type": "spike", "centre": 0.5})


class TestImages:
    def test_pgm_example(self):
        img = read_pgm(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
        assert img.pixels.ravel().tolist() == [0.0, 1.0, 128 / 255, 64 / 255]

    def test_pgm_comment_header(self):
        img = read_pgm(b"P5 # made by hand\n1 1\n255\n" + bytes([51]))
        assert img.pixels[0, 0] == pytest.approx(0.2)

    @pytest.mark.parametrize("data,msg", [
        (b"P5\n2 2\n255\n" + bytes([1, 2]), "truncated"),
        (b"P2\n1 1\n255\n1", "magic"),
        (b"P5\n1 1\n65535\n\x00\x00", "maxval"),
        (b"P5\n2", "header"),
    ])
    def test_pgm_errors(self, data, msg):
        with pytest.raises(FormatError, match=msg):
            read_pgm(data)

    def test_png_grayscale_and_rgb(self, tmp_path):
        Image.fromarray(np.array([[0, 255]], dtype=np.uint8), "L").save(tmp_path / "g.png")
        assert load_image(tmp_path / "g.png").pixels.tolist() == [[0.0, 1.0]]
        rgb = np.array([[[200, 100, 50]]], dtype=np.uint8)
        Image.fromarray(rgb, "RGB").save(tmp_path / "c.png")
        expected = (0.299 * 200 + 0.587 * 100 + 0.114 * 50) / 255
        assert load_image(tmp_path / "c.png").pixels[0, 0] == pytest.approx(expected, abs=1e-12)

    def test_unsupported_files(self, tmp_path):
        (tmp_path / "x.bmp").write_bytes(b"BM\x00\x00")
        with pytest.raises(FormatError):
            load_image(tmp_path / "x.bmp")
        Image.fromarray(np.zeros((2, 2), dtype=np.uint16)).save(tmp_path / "deep.png")
        with pytest.raises(FormatError):
            load_image(tmp_path / "deep.png")
        with pytest.raises(FormatError):
            load_image(tmp_path / "missing.pgm")

    def test_save_round_trip(self, tmp_path):
        img = standard_image(32)
        save_pgm(img, tmp_path / "r.pgm")
        back = load_image(tmp_path / "r.pgm")
        assert np.max(np.abs(back.pixels - img.pixels)) <= 0.5 / 255 + 1e-12

    def test_image_validation(self):
        with pytest.raises(InvalidInputError):
            ImageGrid(np.array([[1.5]]))

    def test_coords_are_pixel_centres(self):
        c = grid_coords(2, 4)
        assert c[0].tolist() == [0.125, 0.25] and c[1].tolist() == [0.375, 0.25] and c[4].tolist() == [0.125, 0.75]

    def test_builtins_in_range(self):
        for img in (standard_image(), smooth_image()):
            assert img.pixels.shape == (64, 64) and 0 <= img.pixels.min() and img.pixels.max() <= 1


def naive_ssim(a, b, w=7):
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    vals = []
    n = w * w
    for i in range(a.shape[0] - w + 1):
        for j in range(a.shape[1] - w + 1):
            x = a[i:i + w, j:j + w].ravel()
            y = b[i:i + w, j:j + w].ravel()
            mx, my = x.mean(), y.mean()
            vx = ((x - mx) ** 2).sum() / (n - 1)
            vy = ((y - my) ** 2).sum() / (n - 1)
            cxy = ((x - mx) * (y - my)).sum() / (n - 1)
            vals.append((2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


class TestMetrics:
    def test_identical(self):
        a = Rng(1).uniform((10, 10))
        assert psnr(a, a) == math.inf
        assert ssim(a, a) == pytest.approx(1.0)

    def test_uniform_images(self):
        assert psnr(np.full((4, 4), 0.5), np.zeros((4, 4))) == pytest.approx(6.0206, abs=1e-4)

    def test_against_naive_and_reference(self):
        r = Rng(7)
        a = r.uniform((20, 17))
        b = np.clip(a + 0.1 * r.normal((20, 17)), 0, 1)
        assert ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-10)
        assert ssim(a, b) == pytest.approx(structural_similarity(a, b, win_size=7, data_range=1.0), abs=1e-10)
        naive_mse = sum((x - y) ** 2 for x, y in zip(a.ravel(), b.ravel())) / a.size
        assert psnr(a, b) == pytest.approx(10 * math.log10(1 / naive_mse), abs=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            psnr(np.zeros(3), np.zeros(4))
        with pytest.raises(InvalidInputError):
            ssim(np.zeros((5, 5)), np.zeros((5, 5)))


def tiny_signal_config(**over):
    d = {
        "name": "tiny",
        "task": {"kind": "signal", "signal": {"type": "sinusoid", "freq": 4.0}, "n_samples": 64},
        "embedding": {"kind": "pe", "num_freqs": 4, "scale": 16.0},
        "inr": {"hidden_width": 16, "hidden_layers": 2},
        "filter": {"variant": "adaptive", "depth": 2},
        "optimizer": {"iterations": 30},
        "output": {"log_every": 10, "spectra_every": 10},
    }
    return ExperimentConfig.from_dict(apply_overrides(d, [f"{k}={json.dumps(v)}" for k, v in over.items()]))


class TestConfig:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="bogus"):
            ExperimentConfig.from_dict({"bogus": 1})
        with pytest.raises(ConfigError, match="optimizer"):
            ExperimentConfig.from_dict({"optimizer": {"lr": 1}})

    def test_schema_version(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"schema_version": 2})

    def test_dimension_consistency(self):
        with pytest.raises(ConfigError, match="filter.width"):
            tiny_signal_config(**{"filter.width": 6}).validate()
        with pytest.raises(ConfigError, match="inr.input_width"):
            tiny_signal_config(**{"inr.input_width": 10}).validate()
        tiny_signal_config(**{"filter.width": 8, "inr.input_width": 8}).validate()

    @pytest.mark.parametrize("key,value", [
        ("embedding.kind", "wavelet"), ("filter.variant", "lowpass"), ("optimizer.c1", 2.0),
        ("task.kind", "audio"), ("optimizer.alpha_min", 1.0), ("task.holdout", "checkerboard"),
    ])
    def test_invalid_values(self, key, value):
        with pytest.raises(ConfigError):
            tiny_signal_config(**{key: value}).validate()

    def test_pe_divisibility_for_images(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"embedding": {"num_freqs": 5}}).validate()

    def test_overrides(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(tiny_signal_config().to_json())
        cfg = load_config(path, ["optimizer.alpha_max=0.002", "name=renamed", "filter.variant=mask"])
        assert cfg.optimizer.alpha_max == 0.002 and cfg.name == "renamed" and cfg.filter.variant == "mask"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="missing.json"):
            load_config(tmp_path / "missing.json")

    def test_seed_resolution(self):
        cfg = tiny_signal_config(seed=10, **{"inr.seed": 99}).resolved()
        assert (cfg.embedding.seed, cfg.inr.seed, cfg.filter.seed, cfg.optimizer.seed) == (10, 99, 12, 13)


class TestExperiment:
    def test_outputs_and_determinism(self, tmp_path):
        cfg = tiny_signal_config()
        r1 = run_experiment(cfg, tmp_path / "a")
        run_experiment(load_config(tmp_path / "a" / "manifest.json"), tmp_path / "b")
        for name in ("metrics.csv", "train_log.csv", "train_log.jsonl", "recon.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        lines = (tmp_path / "a" / "metrics.csv").read_text().splitlines()
        assert lines[0] == "iter,mse,rms,psnr,ssim,alpha_A" and len(lines) == 4
        assert sorted(p.name for p in (tmp_path / "a" / "spectra").iterdir()) == [
            "residual_000000.json", "residual_000010.json", "residual_000020.json", "residual_000030.json"]
        log = [json.loads(l) for l in (tmp_path / "a" / "train_log.jsonl").read_text().splitlines()]
        assert set(log[0]) == {"iter", "loss", "alpha_A", "alpha_I", "branch", "armijo_applied", "k", "b", "psnr"}
        assert all(0 <= rec["alpha_A"] <= 1e-3 for rec in log)
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        assert manifest["data_sha256"] and manifest["seeds"]["filter"] == 2
        assert r1.final.iter == 30 and math.isfinite(r1.final.psnr)

    def test_image_outputs(self, tmp_path):
        cfg = ExperimentConfig.from_dict({
            "task": {"size": 16, "holdout": "checkerboard"}, "embedding": {"num_freqs": 4, "scale": 8.0},
            "inr": {"hidden_width": 8, "hidden_layers": 1}, "filter": {"variant": "mask"},
            "optimizer": {"iterations": 5}, "output": {"log_every": 5}})
        res = run_experiment(cfg, tmp_path)
        assert load_image(tmp_path / "recon.pgm").pixels.shape == (16, 16)
        assert res.final.ssim is not None and 0 < res.final.ssim <= 1
        assert res.data.train_idx.size == res.data.eval_idx.size == 128

    def test_minibatch_runs(self):
        res = run_experiment(tiny_signal_config(**{"optimizer.batch_size": 16}))
        assert len(res.logs) == 30

    def test_in_span_tone_is_learned(self):
        cfg = tiny_signal_config(**{
            "filter.variant": "identity", "task.n_samples": 256, "inr.hidden_width": 64,
            "optimizer.iterations": 2000, "optimizer.alpha_I": 5e-3, "output.log_every": 100,
            "output.spectra_every": 0})
        assert run_experiment(cfg).final.psnr >= 40

    @staticmethod
    def _two_region(variant, alpha_max=1e-3):
        cfg = tiny_signal_config(**{
            "task.signal": generator_to_dict(two_region_composite()), "task.n_samples": 256,
            "filter.variant": variant, "filter.depth": 3, "embedding.num_freqs": 32, "embedding.scale": 8.0,
            "inr.hidden_width": 64, "inr.hidden_layers": 1, "optimizer.iterations": 1000,
            "optimizer.alpha_max": alpha_max, "output.log_every": 1000, "output.spectra_every": 0})
        return run_experiment(cfg).final.mse

    @pytest.mark.xfail(strict=True, reason="in 1-D the random multiplicative filter init costs more than "
                                           "filter training recovers at this budget; see decision ledger")
    def test_adaptive_not_worse_on_two_region_signal(self):
        assert self._two_region("adaptive") <= self._two_region("identity")

    def test_trained_filter_beats_frozen_filter(self):
        assert self._two_region("adaptive") < self._two_region("adaptive", alpha_max=0.0)

    def test_sweep_records_long_table(self, tmp_path):
        rows = sweep(tiny_signal_config(**{"optimizer.iterations": 10}), "filter_depth", [1, 2, 3], tmp_path)
        assert [r["value"] for r in rows] == [1, 2, 3]
        table = (tmp_path / "sweep.csv").read_text().splitlines()
        assert table[0] == "axis,value,iter,mse,rms,psnr,ssim,alpha_A" and len(table) == 1 + 3
        with pytest.raises(ConfigError):
            sweep(tiny_signal_config(), "width", [1])
        with pytest.raises(ConfigError):
            sweep(tiny_signal_config(), "filter_depth", [])
