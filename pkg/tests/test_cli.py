import json

import pytest

from ffinr.cli import main
from ffinr.tasks import ExperimentConfig


@pytest.fixture
def cfg_path(tmp_path):
    cfg = ExperimentConfig.from_dict({
        "name": "cli",
        "task": {"kind": "signal", "signal": {"type": "sinusoid", "freq": 3.0}, "n_samples": 32},
        "embedding": {"kind": "pe", "num_freqs": 4, "scale": 8.0},
        "inr": {"hidden_width": 8, "hidden_layers": 1},
        "filter": {"depth": 2},
        "optimizer": {"iterations": 6},
        "output": {"log_every": 3},
    })
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    return path


def run(*argv):
    return main([*map(str, argv), "--quiet"])


def test_train_with_overrides(cfg_path, tmp_path):
    out = tmp_path / "run"
    assert run("train", "--config", cfg_path, "--out", out, "--seed", 5,
               "--override", "optimizer.alpha_max=0.0005", "--override", "filter.depth=1") == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["optimizer"]["alpha_max"] == 0.0005
    assert manifest["config"]["filter"]["depth"] == 1
    assert manifest["config"]["seed"] == 5
    assert len((out / "metrics.csv").read_text().splitlines()) == 3


def test_rerun_from_manifest_is_identical(cfg_path, tmp_path):
    assert run("train", "--config", cfg_path, "--out", tmp_path / "a") == 0
    assert run("train", "--config", tmp_path / "a" / "manifest.json", "--out", tmp_path / "b") == 0
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()


def test_spectra_after_train(cfg_path, tmp_path):
    assert run("train", "--config", cfg_path, "--out", tmp_path / "r") == 0
    assert run("spectra", "--run", tmp_path / "r", "--channels", "0,3", "--grid", 64, "--out", tmp_path / "s") == 0
    spec = json.loads((tmp_path / "s" / "channel_0003.json").read_text())
    assert spec["grid_size"] == 64 and len(spec["bins"]) == 33


def test_sweep(cfg_path, tmp_path):
    assert run("sweep", "--config", cfg_path, "--axis", "filter_variant", "--values", "identity,mask",
               "--out", tmp_path) == 0
    assert (tmp_path / "sweep.csv").exists() and (tmp_path / "sweep_summary.json").exists()


@pytest.mark.parametrize("argv", [
    ["train"],
    ["train", "--config", "/nonexistent/cfg.json"],
    ["theory", "span", "--override", "nope=1"],
    ["theory", "span", "--override", "B=[[0.5]]"],
    ["signal", "--generator", "{\"type\": \"sinusoid\", \"freq\": 1}", "--n", "3"],
    ["signal"],
    ["spectra", "--run", "/nonexistent"],
])
def test_config_errors_exit_2(argv, tmp_path):
    assert run(*argv, "--out", tmp_path) == 2


def test_bad_override_key_exits_2(cfg_path, tmp_path):
    assert run("train", "--config", cfg_path, "--override", "optimizer.lr=1", "--out", tmp_path) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numeric_abort_exits_3(cfg_path, tmp_path):
    assert run("train", "--config", cfg_path, "--override", "optimizer.alpha_I=1e300", "--out", tmp_path) == 3


def test_contract_failure_exits_4(tmp_path):
    assert run("theory", "floor", "--override", "iterations=5", "--override", "width=64", "--out", tmp_path) == 4
    assert json.loads((tmp_path / "theory_floor.json").read_text())["passed"] is False


def test_theory_span_report(tmp_path):
    assert run("theory", "span", "--override", "B=[[2]]", "--override", "budget=2", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "theory_span.json").read_text())
    assert sorted(tuple(e) for e in rep["span"]["entries"]) == [(-4,), (-2,), (0,), (2,), (4,)]


def test_theory_ntk_small(tmp_path):
    code = run("theory", "ntk", "--override", "width=2048", "--override", "trials=5", "--out", tmp_path)
    rep = json.loads((tmp_path / "theory_ntk.json").read_text())
    assert code == (0 if rep["passed"] else 4)
    assert [r["u"] for r in rep["rows"]] == [1.0, 0.5, 0.0, -0.5]


def test_signal_outputs(tmp_path):
    assert run("signal", "--generator", '{"type": "sinusoid", "freq": 2, "amp": 0.5}', "--n", 16,
               "--out", tmp_path) == 0
    lines = (tmp_path / "signal.csv").read_text().splitlines()
    assert lines[0] == "x,y" and len(lines) == 17
    spec = json.loads((tmp_path / "spectrum.json").read_text())
    assert spec["bins"][2]["freq"] == 2 and spec["bins"][2]["magnitude"] == pytest.approx(0.5)
