"""ReLU MLPs with optional additive terms.

Weights are stored ``(out, in)`` and applied to row-major batches, so a layer
computes ``z = h @ W.T + b``. Hidden layers use ReLU with derivative 0 at
exactly 0; the output layer is linear.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import FormatError, InvalidInputError, InvalidStateError
from .numerics import Rng

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    """``layer_widths`` lists input, hidden and output widths.

    ``init`` is ``"auto"`` (NTK scheme for a two-layer frozen-last network,
    fan-in uniform otherwise), ``"ntk"`` or ``"fan_in_uniform"``. The fan-in
    scheme draws weights from ``U(-gain*sqrt(3/fan_in), +gain*sqrt(3/fan_in))``
    (the default gain 1/sqrt(3) gives ``U(+-1/sqrt(fan_in))``, the usual
    framework default for linear layers) and biases from
    ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``.
    """

    layer_widths: tuple
    use_bias: bool = True
    freeze_last: bool = False
    init: str = "auto"
    gain: float = 1.0 / math.sqrt(3.0)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 2 or min(self.layer_widths) < 1:
            raise InvalidInputError(f"invalid layer widths {self.layer_widths}")
        if self.init not in ("auto", "ntk", "fan_in_uniform"):
            raise InvalidInputError(f"unknown init scheme {self.init!r}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_widths) - 1

    @property
    def scheme(self) -> str:
        if self.init != "auto":
            return self.init
        return "ntk" if self.freeze_last and self.n_layers == 2 else "fan_in_uniform"


@dataclass
class MlpParams:
    spec: MlpSpec
    weights: List[np.ndarray]
    biases: Optional[List[np.ndarray]] = None

    def arrays(self) -> List[np.ndarray]:
        """Canonical flat ordering ``[W1, b1, W2, b2, ...]`` (biases omitted if absent)."""
        if self.biases is None:
            return list(self.weights)
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "MlpParams":
        arrays = list(arrays)
        if self.biases is None:
            return MlpParams(self.spec, arrays, None)
        return MlpParams(self.spec, arrays[0::2], arrays[1::2])

    def frozen_mask(self) -> List[bool]:
        """Per-array flag in :meth:`arrays` order: True if the array never trains."""
        last = self.spec.n_layers - 1
        flags = []
        for l in range(self.spec.n_layers):
            f = self.spec.freeze_last and l == last
            flags += [f] if self.biases is None else [f, f]
        return flags

    def copy(self) -> "MlpParams":
        return self.with_arrays([a.copy() for a in self.arrays()])

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())


@dataclass
class Tape:
    inputs: List[np.ndarray]   # input to each layer, (n, width_l)
    pre: List[np.ndarray]      # pre-activations per layer
    masks: List[np.ndarray]    # ReLU masks for hidden layers (bool)
    single: bool = False


def init_params(spec: MlpSpec) -> MlpParams:
    rng = Rng(spec.seed)
    widths = spec.layer_widths
    weights, biases = [], []
    if spec.scheme == "ntk":
        if spec.n_layers != 2:
            raise InvalidInputError("NTK initialisation needs exactly two layers")
        d, m, out = widths
        weights.append(rng.normal((m, d)))
        biases.append(rng.normal(m))
        weights.append(rng.signs((out, m)) / math.sqrt(m))
        biases.append(np.zeros(out))
    else:
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = spec.gain * math.sqrt(3.0 / fan_in)
            weights.append(rng.uniform((fan_out, fan_in), -bound, bound))
            bb = 1.0 / math.sqrt(fan_in)
            biases.append(rng.uniform(fan_out, -bb, bb))
    return MlpParams(spec, weights, biases if spec.use_bias else None)


def _batch(params: MlpParams, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.spec.layer_widths[0]:
        raise InvalidInputError(
            f"input width {x.shape[-1]} != network input width {params.spec.layer_widths[0]}"
        )
    return x, single


def forward(params: MlpParams, x):
    """Evaluate the network on a point ``(d,)`` or batch ``(n, d)``."""
    h, single = _batch(params, x)
    inputs, pre, masks = [], [], []
    last = len(params.weights) - 1
    for l, w in enumerate(params.weights):
        inputs.append(h)
        z = h @ w.T
        if params.biases is not None:
            z += params.biases[l]
        pre.append(z)
        if l < last:
            masks.append(z > 0.0)
            h = np.maximum(z, 0.0)
        else:
            h = z
    tape = Tape(inputs, pre, masks, single)
    return (h[0] if single else h), tape


def backward(params: MlpParams, tape: Tape, x, upstream, need_input_grad: bool = True):
    """Gradients of ``<upstream, f(x)>`` w.r.t. parameters and input.

    Returns ``(grads, input_grad)`` where ``grads`` is an :class:`MlpParams`
    holding gradient arrays (frozen layers get exact zeros).
    """
    x, single = _batch(params, x)
    g = np.asarray(upstream, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    n_layers = len(params.weights)
    if (
        len(tape.inputs) != n_layers
        or tape.inputs[0].shape != x.shape
        or not np.array_equal(tape.inputs[0], x)
        or any(z.shape[1] != w.shape[0] for z, w in zip(tape.pre, params.weights))
    ):
        raise InvalidStateError("tape does not belong to this (params, x) pair")
    if g.shape != tape.pre[-1].shape:
        raise InvalidInputError(f"upstream shape {g.shape} != output shape {tape.pre[-1].shape}")
    gw = [None] * n_layers
    gb = [None] * n_layers if params.biases is not None else None
    frozen_last = params.spec.freeze_last
    for l in range(n_layers - 1, -1, -1):
        w = params.weights[l]
        if frozen_last and l == n_layers - 1:
            gw[l] = np.zeros_like(w)
            if gb is not None:
                gb[l] = np.zeros(w.shape[0])
        else:
            gw[l] = g.T @ tape.inputs[l]
            if gb is not None:
                gb[l] = g.sum(axis=0)
        if l == 0 and not need_input_grad:
            g = None
            break
        g = g @ w
        if l > 0:
            g *= tape.masks[l - 1]
    grads = MlpParams(params.spec, gw, gb)
    if g is not None and single:
        g = g[0]
    return grads, g


def local_linear_operator(params: MlpParams, x) -> np.ndarray:
    """The matrix ``A_x`` with ``f(x) = A_x x`` for a bias-free network."""
    if params.biases is not None:
        raise InvalidInputError("local_linear_operator needs a bias-free network")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("local_linear_operator takes a single point")
    _, tape = forward(params, x)
    a = params.weights[0]
    for l in range(1, len(params.weights)):
        d = tape.masks[l - 1][0].astype(np.float64)
        a = params.weights[l] @ (d[:, None] * a)
    return a


def local_affine_offset(params: MlpParams, x) -> np.ndarray:
    """``b_x = f(x) - A_x x`` for a network with biases (zero when bias-free)."""
    y, tape = forward(params, np.asarray(x, dtype=np.float64))
    stripped = MlpParams(params.spec, params.weights, None)
    a = stripped.weights[0]
    for l in range(1, len(stripped.weights)):
        d = tape.masks[l - 1][0].astype(np.float64)
        a = stripped.weights[l] @ (d[:, None] * a)
    return y - a @ x


def scale_invariance_check(params: MlpParams, x, alpha: float) -> float:
    """Relative error ``|f(alpha x) - alpha f(x)| / (|alpha f(x)| + 1e-30)``.

    Accepts bias networks as well so the failure of homogeneity can be shown.
    """
    if alpha < 0:
        raise InvalidInputError("positive homogeneity only holds for alpha >= 0")
    x = np.asarray(x, dtype=np.float64)
    fx, _ = forward(params, x)
    fax, _ = forward(params, alpha * x)
    return float(np.linalg.norm(fax - alpha * fx) / (np.linalg.norm(alpha * fx) + 1e-30))


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------

def params_to_dict(params: MlpParams, tag: str = "mlp") -> dict:
    spec = asdict(params.spec)
    spec["layer_widths"] = list(spec["layer_widths"])
    return {
        "format": "ffinr-checkpoint",
        "version": CHECKPOINT_VERSION,
        "tag": tag,
        "spec": spec,
        "weights": [{"shape": list(w.shape), "data": w.ravel().tolist()} for w in params.weights],
        "biases": None
        if params.biases is None
        else [{"shape": list(b.shape), "data": b.ravel().tolist()} for b in params.biases],
    }


def params_from_dict(d: dict) -> MlpParams:
    if d.get("format") != "ffinr-checkpoint":
        raise FormatError("not an ffinr checkpoint")
    if d.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {d.get('version')!r}")
    spec = MlpSpec(**d["spec"])

    def load(items):
        return [np.array(it["data"], dtype=np.float64).reshape(it["shape"]) for it in items]

    weights = load(d["weights"])
    biases = None if d["biases"] is None else load(d["biases"])
    widths = spec.layer_widths
    for l, w in enumerate(weights):
        if w.shape != (widths[l + 1], widths[l]):
            raise FormatError(f"layer {l} weight shape {w.shape} inconsistent with spec")
    return MlpParams(spec, weights, biases)


def save_checkpoint(params: MlpParams, path, tag: str = "mlp"):
    # json writes floats with repr, which round-trips float64 exactly
    with open(path, "w") as fh:
        json.dump(params_to_dict(params, tag), fh)


def load_checkpoint(path) -> MlpParams:
    with open(path) as fh:
        return params_from_dict(json.load(fh))
