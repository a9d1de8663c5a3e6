"""Experiment configuration: strict JSON schema, overrides and validation.

Every section is a dataclass; unknown keys anywhere are rejected. Component
seeds left as ``null`` are resolved from the top-level ``seed`` plus a fixed
offset (embedding 0, inr 1, filter 2, optimizer 3).
"""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Optional

from ..errors import ConfigError, InvalidInputError
from ..filters import VARIANTS

SCHEMA_VERSION = 1
SEED_OFFSETS = {"embedding": 0, "inr": 1, "filter": 2, "optimizer": 3}


@dataclass
class TaskConfig:
    kind: str = "image"              # "image" or "signal"
    image: str = "standard"          # "standard", "smooth" or a PGM/PNG path
    size: int = 64                   # side of built-in images
    signal: Optional[dict] = None    # generator description for signals
    n_samples: int = 256
    holdout: str = "none"            # "none" or "checkerboard" (images)


@dataclass
class EmbeddingConfig:
    kind: str = "pe"
    num_freqs: int = 128
    scale: float = 32.0
    sigma: float = 10.0
    seed: Optional[int] = None


@dataclass
class InrConfig:
    hidden_width: int = 256
    hidden_layers: int = 3
    use_bias: bool = True
    input_width: Optional[int] = None  # if set, must equal 2 * num_freqs
    seed: Optional[int] = None


@dataclass
class FilterConfig:
    variant: str = "adaptive"
    depth: int = 3
    use_bias: bool = False
    width: Optional[int] = None        # if set, must equal 2 * num_freqs
    seed: Optional[int] = None


@dataclass
class OptimizerConfig:
    iterations: int = 2000
    alpha_max: float = 1e-3
    alpha_min: float = 0.0
    epsilon: float = 1e-6
    c1: float = 1e-3
    alpha_I: float = 1e-3
    inr_schedule: str = "lambda"
    lambda_final: float = 0.1
    filter_lr_mode: str = "line_search"
    batch_size: Optional[int] = None   # None: full batch
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: Optional[int] = None


@dataclass
class OutputConfig:
    log_every: int = 10
    spectra_every: int = 0             # 0: initial and final snapshots only


@dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    name: str = "experiment"
    seed: int = 0
    task: TaskConfig = field(default_factory=TaskConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    inr: InrConfig = field(default_factory=InrConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
        return _build(cls, d, "")

    def component_seed(self, section: str) -> int:
        own = getattr(self, section).seed
        return int(own) if own is not None else int(self.seed) + SEED_OFFSETS[section]

    def resolved(self) -> "ExperimentConfig":
        """Copy with every component seed filled in."""
        out = copy.deepcopy(self)
        for s in SEED_OFFSETS:
            getattr(out, s).seed = self.component_seed(s)
        return out

    @property
    def input_dim(self) -> int:
        return 2 if self.task.kind == "image" else 1

    def validate(self) -> "ExperimentConfig":
        t, e, i, f, o = self.task, self.embedding, self.inr, self.filter, self.optimizer
        if t.kind not in ("image", "signal"):
            raise ConfigError(f"task.kind must be 'image' or 'signal', got {t.kind!r}")
        if t.kind == "signal" and t.signal is None:
            raise ConfigError("task.signal is required for signal tasks")
        if t.kind == "signal" and t.n_samples < 8:
            raise ConfigError("task.n_samples must be >= 8")
        if t.holdout not in ("none", "checkerboard"):
            raise ConfigError(f"unknown task.holdout {t.holdout!r}")
        if t.holdout != "none" and t.kind != "image":
            raise ConfigError("holdout is only supported for image tasks")
        if t.size < 8:
            raise ConfigError("task.size must be >= 8 (the SSIM window is 7)")
        if e.kind not in ("pe", "rff"):
            raise ConfigError(f"embedding.kind must be 'pe' or 'rff', got {e.kind!r}")
        if e.num_freqs < 1:
            raise ConfigError("embedding.num_freqs must be >= 1")
        if e.kind == "pe" and e.num_freqs % self.input_dim:
            raise ConfigError(f"embedding.num_freqs={e.num_freqs} not divisible by input dimension {self.input_dim}")
        if e.kind == "pe" and not e.scale > 1:
            raise ConfigError("embedding.scale must be > 1")
        if e.kind == "rff" and not e.sigma > 0:
            raise ConfigError("embedding.sigma must be > 0")
        channels = 2 * e.num_freqs
        for name, width in (("filter.width", f.width), ("inr.input_width", i.input_width)):
            if width is not None and width != channels:
                raise ConfigError(f"{name}={width} inconsistent with 2 * embedding.num_freqs = {channels}")
        if i.hidden_width < 1 or i.hidden_layers < 1:
            raise ConfigError("inr.hidden_width and inr.hidden_layers must be >= 1")
        if f.variant not in VARIANTS:
            raise ConfigError(f"filter.variant must be one of {VARIANTS}, got {f.variant!r}")
        if f.depth < 1:
            raise ConfigError("filter.depth must be >= 1")
        if o.iterations < 1:
            raise ConfigError("optimizer.iterations must be >= 1")
        if o.batch_size is not None and o.batch_size < 1:
            raise ConfigError("optimizer.batch_size must be >= 1")
        if self.output.log_every < 1 or self.output.spectra_every < 0:
            raise ConfigError("output.log_every >= 1 and output.spectra_every >= 0 required")
        try:
            self.line_search().validate()
        except InvalidInputError as exc:
            raise ConfigError(f"optimizer: {exc}") from None
        return self

    def line_search(self):
        from ..optim import LineSearchConfig

        o = self.optimizer
        return LineSearchConfig(
            alpha_max=o.alpha_max, alpha_min=o.alpha_min, epsilon=o.epsilon, c1=o.c1, alpha_I=o.alpha_I,
            inr_schedule=o.inr_schedule, lambda_final=o.lambda_final, total_iters=o.iterations,
            filter_lr_mode=o.filter_lr_mode, beta1=o.beta1, beta2=o.beta2, adam_eps=o.adam_eps,
        )


def _build(cls, d: dict, path: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(d) - set(known))
    if unknown:
        where = f" in {path.rstrip('.')}" if path else ""
        raise ConfigError(f"unknown config key(s){where}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in d.items():
        default = known[name].default_factory() if callable(known[name].default_factory) else None
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{path}{name}.")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def parse_override(text: str):
    """``"a.b.c=value"``; the value is JSON when it parses, else a plain string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    if not key:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(d: dict, overrides) -> dict:
    out = copy.deepcopy(d)
    for text in overrides:
        keys, value = parse_override(text)
        node = out
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {text!r} descends into a non-object")
        node[keys[-1]] = value
    return out


def load_config(path, overrides=()) -> ExperimentConfig:
    """Read a config file (or a run manifest, whose ``config`` entry is used)."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if isinstance(raw, dict) and "manifest_version" in raw:
        raw = raw["config"]
    return ExperimentConfig.from_dict(apply_overrides(raw, overrides)).validate()
