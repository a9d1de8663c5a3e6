"""Filters applied to the embedding before the INR.

``adaptive``  out = f_a(gamma) * gamma, f_a a (default bias-free) ReLU MLP of
              constant width 2N
``mask``      out = w * gamma, one learnable weight per channel
``identity``  out = gamma
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import networks
from .embeddings import FrequencyMatrix, embed
from .errors import FormatError, InvalidInputError, InvalidStateError, UnsupportedDomainError
from .networks import MlpParams, MlpSpec
from .numerics import SpectrumReport, dft_uniform

ADAPTIVE = "adaptive"
MASK = "mask"
IDENTITY = "identity"
VARIANTS = (ADAPTIVE, MASK, IDENTITY)


@dataclass(frozen=True)
class FilterSpec:
    variant: str
    width: int
    depth: int = 3
    use_bias: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"unknown filter variant {self.variant!r}")
        if self.width < 1 or self.depth < 1:
            raise InvalidInputError("filter width and depth must be >= 1")

    def mlp_spec(self) -> MlpSpec:
        return MlpSpec((self.width,) * (self.depth + 1), use_bias=self.use_bias, seed=self.seed)


@dataclass
class FilterParams:
    spec: FilterSpec
    mlp: Optional[MlpParams] = None
    mask: Optional[np.ndarray] = None

    def arrays(self) -> List[np.ndarray]:
        if self.spec.variant == ADAPTIVE:
            return self.mlp.arrays()
        if self.spec.variant == MASK:
            return [self.mask]
        return []

    def with_arrays(self, arrays) -> "FilterParams":
        arrays = list(arrays)
        if self.spec.variant == ADAPTIVE:
            return FilterParams(self.spec, mlp=self.mlp.with_arrays(arrays))
        if self.spec.variant == MASK:
            return FilterParams(self.spec, mask=arrays[0])
        return FilterParams(self.spec)


@dataclass
class FilterTape:
    gamma: np.ndarray
    factor: Optional[np.ndarray] = None      # f_a(gamma) for the adaptive variant
    mlp_tape: Optional[networks.Tape] = None


def init_filter(spec: FilterSpec) -> FilterParams:
    if spec.variant == ADAPTIVE:
        return FilterParams(spec, mlp=networks.init_params(spec.mlp_spec()))
    if spec.variant == MASK:
        return FilterParams(spec, mask=np.ones(spec.width))
    return FilterParams(spec)


def neutral_filter(spec: FilterSpec, batch) -> FilterParams:
    """Adaptive filter whose f_a outputs all ones on every row of ``batch``.

    A direction ``u`` with ``gamma_k . u = 1`` for each row is found by least
    squares; the first hidden unit then carries the constant 1, later layers
    pass it along, and the output layer copies it to every channel. Exact when
    the batch has full row rank and at most ``width`` rows.
    """
    if spec.variant != ADAPTIVE or spec.use_bias:
        raise InvalidInputError("neutral construction is for bias-free adaptive filters")
    g = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    u, *_ = np.linalg.lstsq(g, np.ones(g.shape[0]), rcond=None)
    if np.max(np.abs(g @ u - 1.0)) > 1e-10:
        raise InvalidInputError("batch is too large or rank-deficient for an exact neutral filter")
    w = spec.width
    weights = []
    for l in range(spec.depth):
        m = np.zeros((w, w))
        if l == 0 and spec.depth == 1:
            m[:] = u
        elif l == 0:
            m[0] = u
        elif l == spec.depth - 1:
            m[:, 0] = 1.0
        else:
            m[0, 0] = 1.0
        weights.append(m)
    return FilterParams(spec, mlp=MlpParams(spec.mlp_spec(), weights, None))


def filter_apply(fp: FilterParams, gamma):
    g = np.asarray(gamma, dtype=np.float64)
    if g.shape[-1] != fp.spec.width:
        raise InvalidInputError(f"embedding width {g.shape[-1]} != filter width {fp.spec.width}")
    v = fp.spec.variant
    if v == IDENTITY:
        return g.copy(), FilterTape(g)
    if v == MASK:
        return fp.mask * g, FilterTape(g)
    factor, tape = networks.forward(fp.mlp, g)
    return factor * g, FilterTape(g, factor, tape)


def filter_backward(fp: FilterParams, tape: FilterTape, gamma, upstream, need_input_grad: bool = True):
    """Product-rule gradients. Returns ``(filter_grad_arrays, embedding_grad)``.

    ``filter_grad_arrays`` follows :meth:`FilterParams.arrays` ordering.
    """
    g = np.asarray(gamma, dtype=np.float64)
    up = np.asarray(upstream, dtype=np.float64)
    if tape.gamma.shape != g.shape or not np.array_equal(tape.gamma, g):
        raise InvalidStateError("filter tape does not match the embedding batch")
    if up.shape != g.shape:
        raise InvalidInputError(f"upstream shape {up.shape} != embedding shape {g.shape}")
    v = fp.spec.variant
    if v == IDENTITY:
        return [], up.copy()
    if v == MASK:
        gm = (up * g).reshape(-1, g.shape[-1]).sum(axis=0)
        return [gm], (up * fp.mask if need_input_grad else None)
    grads, through = networks.backward(fp.mlp, tape.mlp_tape, g, up * g, need_input_grad)
    emb_grad = up * tape.factor + through if need_input_grad else None
    return grads.arrays(), emb_grad


def channel_spectrum(fp: FilterParams, B: FrequencyMatrix, channel_index: int, grid_size: int) -> SpectrumReport:
    """DFT of one filtered channel sampled on ``j / grid_size`` over ``[0, 1)``."""
    if B.d != 1:
        raise UnsupportedDomainError("channel spectra are defined for 1-D inputs only")
    top = float(np.max(np.abs(B.rows)))
    if grid_size < 4 or grid_size & (grid_size - 1) or grid_size < 4 * top:
        raise InvalidInputError(f"grid_size must be a power of two >= max(4, 4*{top:g})")
    if not 0 <= channel_index < fp.spec.width:
        raise InvalidInputError(f"channel {channel_index} out of range")
    xs = np.arange(grid_size) / grid_size
    out, _ = filter_apply(fp, embed(B, xs[:, None]))
    return dft_uniform(out[:, channel_index], 1.0)


def filter_to_dict(fp: FilterParams) -> dict:
    base = {
        "format": "ffinr-checkpoint",
        "version": networks.CHECKPOINT_VERSION,
        "tag": f"filter:{fp.spec.variant}",
        "filter_spec": {
            "variant": fp.spec.variant,
            "width": fp.spec.width,
            "depth": fp.spec.depth,
            "use_bias": fp.spec.use_bias,
            "seed": fp.spec.seed,
        },
    }
    if fp.spec.variant == ADAPTIVE:
        base["mlp"] = networks.params_to_dict(fp.mlp, base["tag"])
    elif fp.spec.variant == MASK:
        base["mask"] = fp.mask.tolist()
    return base


def filter_from_dict(d: dict) -> FilterParams:
    if d.get("format") != "ffinr-checkpoint" or not str(d.get("tag", "")).startswith("filter:"):
        raise FormatError("not a filter checkpoint")
    spec = FilterSpec(**d["filter_spec"])
    if spec.variant == ADAPTIVE:
        return FilterParams(spec, mlp=networks.params_from_dict(d["mlp"]))
    if spec.variant == MASK:
        return FilterParams(spec, mask=np.array(d["mask"], dtype=np.float64))
    return FilterParams(spec)
