"""Fourier feature embeddings: positional encoding and random Fourier features.

Frequencies are stored in cycles per unit coordinate; the 2*pi factor lives in
:func:`embed`. Output channels are interleaved ``[sin_1, cos_1, sin_2, cos_2, ...]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .numerics import Rng

PE = "pe"
RFF = "rff"


@dataclass(frozen=True)
class EmbeddingSpec:
    kind: str
    input_dim: int
    num_freqs: int
    scale: float = 10.0
    sigma: float | Sequence[float] = 10.0
    seed: int = 0

    def validate(self):
        if self.kind not in (PE, RFF):
            raise InvalidInputError(f"unknown embedding kind {self.kind!r}")
        if self.input_dim < 1 or self.num_freqs < 1:
            raise InvalidInputError("input_dim and num_freqs must be >= 1")
        if self.kind == PE:
            if not self.scale > 1:
                raise InvalidInputError("positional encoding needs scale > 1")
            if self.num_freqs % self.input_dim:
                raise InvalidInputError(
                    f"num_freqs={self.num_freqs} not divisible by input_dim={self.input_dim}"
                )
        else:
            sig = np.atleast_1d(np.asarray(self.sigma, dtype=np.float64))
            if sig.size not in (1, self.input_dim) or not np.all(sig > 0):
                raise InvalidInputError("sigma must be positive (scalar or one per axis)")
        return self

    @property
    def channels(self) -> int:
        return 2 * self.num_freqs


@dataclass(frozen=True)
class FrequencyMatrix:
    rows: np.ndarray  # (N, d)
    kind: str = "custom"
    seed: int | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim == 1:
            rows = rows[:, None]
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise InvalidInputError("frequency matrix must be a non-empty (N, d) array")
        if not np.all(np.isfinite(rows)):
            raise InvalidInputError("frequency matrix has non-finite entries")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def N(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def is_integer(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.rows - np.rint(self.rows)) <= tol))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "d": self.d, "N": self.N, "rows": self.rows.tolist()}
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "FrequencyMatrix":
        fm = cls(np.array(d["rows"], dtype=np.float64).reshape(d["N"], d["d"]), d.get("kind", "custom"), d.get("seed"))
        return fm


def sample_frequencies(spec: EmbeddingSpec) -> FrequencyMatrix:
    spec.validate()
    d, n = spec.input_dim, spec.num_freqs
    if spec.kind == PE:
        per_axis = n // d
        levels = float(spec.scale) ** (np.arange(1, per_axis + 1) / per_axis)
        rows = np.zeros((n, d))
        for a in range(d):
            rows[a * per_axis : (a + 1) * per_axis, a] = levels
        return FrequencyMatrix(rows, PE)
    sigma = np.broadcast_to(np.asarray(spec.sigma, dtype=np.float64), (d,))
    rows = Rng(spec.seed).normal((n, d)) * sigma
    return FrequencyMatrix(rows, RFF, int(spec.seed))


def _as_points(B: FrequencyMatrix, v):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 0:
        v, single = v.reshape(1, 1), True
    elif v.ndim == 1 and B.d == 1 and v.shape[0] > 1:
        v, single = v[:, None], False
    elif v.ndim == 1:
        v, single = v[None, :], True
    elif v.ndim == 2:
        single = False
    else:
        raise InvalidInputError(f"expected a point or a batch of points, got shape {v.shape}")
    if v.shape[-1] != B.d:
        raise InvalidInputError(f"input dimension {v.shape[-1]} != frequency dimension {B.d}")
    return v, single


def embed(B: FrequencyMatrix, v) -> np.ndarray:
    """gamma(v) for one point ``(d,)`` or a batch ``(n, d)``; returns ``(2N,)`` or ``(n, 2N)``.

    For ``d == 1`` a flat array of length > 1 is treated as a batch of scalars.
    """
    pts, single = _as_points(B, v)
    phase = 2.0 * np.pi * (pts @ B.rows.T)  # (n, N)
    out = np.empty((pts.shape[0], 2 * B.N))
    out[:, 0::2] = np.sin(phase)
    out[:, 1::2] = np.cos(phase)
    return out[0] if single else out


def gamma_dot(B: FrequencyMatrix, x, z):
    """Both sides of ``gamma(x).gamma(z) = sum_i cos(2 pi b_i.(x - z))``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if x.shape != (B.d,) or z.shape != (B.d,):
        raise InvalidInputError(f"x and z must have shape ({B.d},)")
    lhs = float(embed(B, x[None, :])[0] @ embed(B, z[None, :])[0])
    rhs = float(np.sum(np.cos(2.0 * np.pi * (B.rows @ (x - z)))))
    return lhs, rhs
