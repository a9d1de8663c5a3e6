"""Embedding -> filter -> INR regression runs, their output files and sweeps."""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .. import __version__, networks
from .._accel import backend
from ..embeddings import EmbeddingSpec, FrequencyMatrix, embed, sample_frequencies
from ..errors import ConfigError, NumericAbort
from ..filters import IDENTITY, FilterParams, FilterSpec, filter_apply, filter_backward, filter_to_dict, init_filter
from ..networks import MlpParams, MlpSpec
from ..numerics import Rng, dft2_radial, dft_uniform
from ..optim import TrainState, train_step
from .config import ExperimentConfig
from .images import BUILTIN, ImageGrid, load_image, save_pgm
from .metrics import mse as mse_fn, psnr as psnr_fn, ssim as ssim_fn
from .signals import generator_from_dict, make_signal

METRICS_HEADER = ["iter", "mse", "rms", "psnr", "ssim", "alpha_A"]
LOG_HEADER = ["iter", "loss", "alpha_A", "alpha_I", "branch", "armijo_applied", "k", "b", "psnr"]


@dataclass
class MetricsRow:
    iter: int
    mse: float
    rms: float
    psnr: float
    ssim: Optional[float]
    alpha_A: float


@dataclass
class TaskData:
    coords: np.ndarray            # (n, d)
    targets: np.ndarray           # (n,)
    shape: tuple                  # (H, W) for images, (n,) for signals
    train_idx: np.ndarray
    eval_idx: np.ndarray
    sha256: str

    @property
    def is_image(self) -> bool:
        return len(self.shape) == 2


def load_task(cfg: ExperimentConfig) -> TaskData:
    t = cfg.task
    if t.kind == "signal":
        sig = make_signal(generator_from_dict(t.signal), t.n_samples)
        coords, targets, shape = sig.xs[:, None], sig.ys, (t.n_samples,)
        digest = hashlib.sha256(np.ascontiguousarray(targets).tobytes()).hexdigest()
    else:
        img = BUILTIN[t.image](t.size) if t.image in BUILTIN else load_image(t.image)
        coords, targets, shape = img.coords(), img.pixels.ravel(), img.pixels.shape
        digest = img.sha256()
    every = np.arange(targets.size)
    if t.holdout == "checkerboard":
        h, w = shape
        parity = (np.arange(h)[:, None] + np.arange(w)[None, :]).ravel() % 2
        train_idx, eval_idx = every[parity == 0], every[parity == 1]
    else:
        train_idx = eval_idx = every
    return TaskData(coords, targets, shape, train_idx, eval_idx, digest)


class Pipeline:
    """Fixed embedding with trainable filter and INR parameters."""

    def __init__(self, cfg: ExperimentConfig, data: TaskData):
        cfg = cfg.resolved()
        e, f, i = cfg.embedding, cfg.filter, cfg.inr
        self.B = sample_frequencies(EmbeddingSpec(e.kind, cfg.input_dim, e.num_freqs, e.scale, e.sigma, e.seed))
        self.gamma = embed(self.B, data.coords)
        width = 2 * e.num_freqs
        self.filter_spec = FilterSpec(f.variant, width, f.depth, f.use_bias, f.seed)
        self.filter = init_filter(self.filter_spec)
        self.inr_spec = MlpSpec((width,) + (i.hidden_width,) * i.hidden_layers + (1,), use_bias=i.use_bias, seed=i.seed)
        self.inr = networks.init_params(self.inr_spec)
        self.targets = data.targets

    def predict(self, filter_arrays, inr_arrays, idx=None) -> np.ndarray:
        g = self.gamma if idx is None else self.gamma[idx]
        out, _ = filter_apply(self.filter.with_arrays(filter_arrays), g)
        y, _ = networks.forward(self.inr.with_arrays(inr_arrays), out)
        return y[:, 0]

    def objective(self, filter_arrays, inr_arrays, idx):
        """MSE on rows ``idx`` with gradients for both parameter groups."""
        fp = self.filter.with_arrays(filter_arrays)
        ip = self.inr.with_arrays(inr_arrays)
        g = self.gamma[idx]
        out, ftape = filter_apply(fp, g)
        y, tape = networks.forward(ip, out)
        r = y[:, 0] - self.targets[idx]
        loss = float(np.mean(r * r))
        up = (2.0 / r.size) * r[:, None]
        need = self.filter_spec.variant != IDENTITY
        ig, through = networks.backward(ip, tape, out, up, need_input_grad=need)
        fg = filter_backward(fp, ftape, g, through, need_input_grad=False)[0] if need else []
        return loss, fg, ig.arrays()


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    metrics: List[MetricsRow]
    logs: List[dict]
    reconstruction: np.ndarray
    spectra: dict
    manifest: dict
    state: TrainState
    pipeline: Pipeline
    data: TaskData
    runtime_s: float = 0.0

    @property
    def final(self) -> MetricsRow:
        return self.metrics[-1]

    def filter_params(self) -> FilterParams:
        return self.pipeline.filter.with_arrays(self.state.filter_params)

    def inr_params(self) -> MlpParams:
        return self.pipeline.inr.with_arrays(self.state.inr_params)


def _residual_spectrum(data: TaskData, pred: np.ndarray) -> dict:
    resid = data.targets - pred
    if data.is_image:
        return dft2_radial(resid.reshape(data.shape)).to_dict()
    return dft_uniform(resid).to_dict()


def _evaluate(pipe: Pipeline, data: TaskData, state: TrainState, alpha_A: float) -> tuple:
    pred = pipe.predict(state.filter_params, state.inr_params)
    m = mse_fn(pred[data.eval_idx], data.targets[data.eval_idx])
    s = None
    if data.is_image:
        s = ssim_fn(np.clip(pred, 0, 1).reshape(data.shape), data.targets.reshape(data.shape))
    p = math.inf if m == 0 else 10.0 * math.log10(1.0 / m)
    return MetricsRow(state.iteration, m, math.sqrt(m), p, s, alpha_A), pred


def _batches(data: TaskData, batch_size: Optional[int], seed: int):
    """Endless stream of index batches; a fresh permutation per epoch."""
    idx = data.train_idx
    if batch_size is None or batch_size >= idx.size:
        while True:
            yield idx
    rng = Rng(seed)
    epoch = 0
    while True:
        perm = idx[rng.derive(epoch).permutation(idx.size)]
        for s in range(0, perm.size - batch_size + 1, batch_size):
            yield perm[s:s + batch_size]
        epoch += 1


def build_manifest(cfg: ExperimentConfig, data: TaskData, B: FrequencyMatrix) -> dict:
    r = cfg.resolved()
    return {
        "manifest_version": 1,
        "package_version": __version__,
        "config": r.to_dict(),
        "seeds": {"master": r.seed, **{s: getattr(r, s).seed for s in ("embedding", "inr", "filter", "optimizer")}},
        "data_sha256": data.sha256,
        "frequency_matrix": B.to_dict(),
        "numpy_version": np.__version__,
        "kernel_backend": backend(),
    }


def run_experiment(cfg: ExperimentConfig, out_dir=None, progress=None) -> ExperimentResult:
    """Train the configured pipeline. Writes output files when ``out_dir`` is given.

    ``progress`` is an optional callable receiving each :class:`MetricsRow`.
    """
    cfg.validate()
    started = time.perf_counter()
    data = load_task(cfg)
    pipe = Pipeline(cfg, data)
    ls = cfg.line_search()
    state = TrainState.start(pipe.filter.arrays(), pipe.inr.arrays(), inr_frozen=pipe.inr.frozen_mask())
    batches = _batches(data, cfg.optimizer.batch_size, cfg.component_seed("optimizer"))
    T = cfg.optimizer.iterations
    log_every, spec_every = cfg.output.log_every, cfg.output.spectra_every

    row0, pred = _evaluate(pipe, data, state, 0.0)
    spectra = {0: _residual_spectrum(data, pred)}
    metrics: List[MetricsRow] = []
    logs: List[dict] = []
    for t in range(1, T + 1):
        try:
            state, diag = train_step(state, next(batches), ls, pipe.objective)
        except NumericAbort as exc:
            exc.dump = {**(exc.dump or {}), "iteration": t}
            raise
        logs.append({
            "iter": t, "loss": diag.loss, "alpha_A": diag.alpha_A_used, "alpha_I": diag.alpha_I,
            "branch": diag.branch, "armijo_applied": diag.armijo_applied,
            "k": diag.k_slope, "b": diag.b_intercept,
            "psnr": math.inf if diag.loss == 0 else 10.0 * math.log10(1.0 / diag.loss),
        })
        snap = spec_every and t % spec_every == 0
        if t % log_every == 0 or t == T or snap:
            row, pred = _evaluate(pipe, data, state, diag.alpha_A_used)
            if t % log_every == 0 or t == T:
                metrics.append(row)
                if progress is not None:
                    progress(row)
            if snap or t == T:
                spectra[t] = _residual_spectrum(data, pred)
    manifest = build_manifest(cfg, data, pipe.B)
    result = ExperimentResult(cfg, metrics, logs, pred, spectra, manifest, state, pipe, data,
                              time.perf_counter() - started)
    if out_dir is not None:
        write_outputs(result, Path(out_dir))
    return result


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    return repr(float(v)) if isinstance(v, float) else str(v)


def metrics_csv(rows: List[MetricsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for r in rows:
        w.writerow([_fmt(getattr(r, k)) for k in METRICS_HEADER])
    return buf.getvalue()


def write_outputs(result: ExperimentResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv(result.metrics))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_HEADER)
    for rec in result.logs:
        w.writerow([_fmt(rec[k]) for k in LOG_HEADER])
    (out / "train_log.csv").write_text(buf.getvalue())
    (out / "train_log.jsonl").write_text("".join(json.dumps(rec) + "\n" for rec in result.logs))
    spec_dir = out / "spectra"
    spec_dir.mkdir(exist_ok=True)
    for t, rep in result.spectra.items():
        (spec_dir / f"residual_{t:06d}.json").write_text(json.dumps(rep))
    if result.data.is_image:
        save_pgm(ImageGrid(np.clip(result.reconstruction, 0, 1).reshape(result.data.shape)), out / "recon.pgm")
    else:
        lines = ["x,target,prediction"] + [
            f"{x!r},{y!r},{p!r}" for x, y, p in zip(
                result.data.coords[:, 0].tolist(), result.data.targets.tolist(), result.reconstruction.tolist())
        ]
        (out / "recon.csv").write_text("\n".join(lines) + "\n")
    (out / "filter.json").write_text(json.dumps(filter_to_dict(result.filter_params())))
    networks.save_checkpoint(result.inr_params(), out / "inr.json", tag="inr")
    (out / "manifest.json").write_text(json.dumps(result.manifest, indent=2, sort_keys=True))
    final = result.final
    summary = {k: getattr(final, k) for k in METRICS_HEADER}
    summary["runtime_s"] = result.runtime_s
    (out / "summary.json").write_text(json.dumps(summary, indent=2))


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

SWEEP_AXES = {
    "rff_sigma": (("embedding", "kind", "rff"), ("embedding", "sigma", None)),
    "pe_scale": (("embedding", "kind", "pe"), ("embedding", "scale", None)),
    "filter_depth": (("filter", "depth", None),),
    "inr_depth": (("inr", "hidden_layers", None),),
    "bias_flag": (("filter", "use_bias", None),),
    "filter_variant": (("filter", "variant", None),),
}


def config_for(base: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    cfg = copy.deepcopy(base)
    for section, key, fixed in SWEEP_AXES[axis]:
        setattr(getattr(cfg, section), key, value if fixed is None else fixed)
    cfg.name = f"{base.name}:{axis}={value}"
    return cfg.validate()


def sweep(base: ExperimentConfig, axis: str, values, out_dir=None, progress=None) -> List[dict]:
    """One run per value with shared seeds. Returns one summary dict per value;
    with ``out_dir`` also writes per-run folders and a long-form ``sweep.csv``."""
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    cfgs = [config_for(base, axis, v) for v in values]  # validate all before any compute
    out = Path(out_dir) if out_dir is not None else None
    summary, long_rows = [], []
    for v, cfg in zip(values, cfgs):
        run_dir = out / f"{axis}={v}" if out is not None else None
        res = run_experiment(cfg, run_dir, progress)
        f = res.final
        summary.append({"axis": axis, "value": v, "mse": f.mse, "rms": f.rms, "psnr": f.psnr, "ssim": f.ssim,
                        "mean_alpha_A": float(np.mean(res.state.alpha_A_history))})
        long_rows += [[axis, v] + [getattr(r, k) for k in METRICS_HEADER] for r in res.metrics]
    if out is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis", "value"] + METRICS_HEADER)
        for r in long_rows:
            w.writerow([_fmt(x) for x in r])
        (out / "sweep.csv").write_text(buf.getvalue())
        (out / "sweep_summary.json").write_text(json.dumps(summary, indent=2))
    return summary
