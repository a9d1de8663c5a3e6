"""Dense-array plumbing: deterministic RNG, uniform-grid DFT, eigensolver,
central-difference gradients.

Vectors and matrices are plain ``float64`` numpy arrays throughout.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidInputError, NumericAbort

# --------------------------------------------------------------------------
# RNG
# --------------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _splitmix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class Rng:
    """SplitMix64 stream with Box-Muller normals.

    Draw ``k`` (0-based) of seed ``s`` is ``mix(s + (k+1) * 0x9E3779B97F4A7C15)``
    in wrapping 64-bit arithmetic, i.e. the reference SplitMix64 sequence.
    Because each draw depends only on its counter, blocks are generated
    vectorised. Uniform doubles take the top 53 bits; normals use Box-Muller
    on consecutive uniform pairs ``(u1, u2)``:
    ``sqrt(-2 ln(1-u1)) * (cos 2 pi u2, sin 2 pi u2)``, emitted in that order.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def derive(self, label: int) -> "Rng":
        """Independent child stream keyed by ``label`` (parent is not advanced)."""
        base = np.array([(self.seed ^ (int(label) * 0xD1B54A32D192ED03)) & _MASK64], dtype=np.uint64)
        return Rng(int(_splitmix(base + _GOLDEN)[0]))

    def next_u64(self, size: int) -> np.ndarray:
        k = np.arange(self.counter + 1, self.counter + 1 + size, dtype=np.uint64)
        self.counter += size
        with np.errstate(over="ignore"):
            return _splitmix(np.uint64(self.seed) + k * _GOLDEN)

    def uniform(self, size, low=0.0, high=1.0) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        return (low + (high - low) * u).reshape(shape)

    def normal(self, size, mean=0.0, std=1.0) -> np.ndarray:
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        t = 2.0 * np.pi * u[:, 1]
        z = np.stack([r * np.cos(t), r * np.sin(t)], axis=1).reshape(-1)[:n]
        return (mean + std * z).reshape(shape)

    def signs(self, size) -> np.ndarray:
        """Uniform draws from {-1, +1}."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        bits = self.next_u64(n) >> np.uint64(63)
        return (2.0 * bits.astype(np.float64) - 1.0).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        # sort by random keys; ties are impossible in practice at 53 bits
        return np.argsort(self.uniform(n), kind="stable")


# --------------------------------------------------------------------------
# DFT on a uniform grid
# --------------------------------------------------------------------------

AMPLITUDE = "amplitude"
COEFFICIENT = "coefficient"
RADIAL_POWER = "radial-power"


@dataclass
class SpectrumReport:
    """Per-bin magnitudes and phases of a uniformly sampled periodic signal.

    Conventions:

    ``amplitude``   one-sided; bin ``f`` holds ``A`` and ``phi`` such that the
                    signal contains ``A cos(2 pi f x + phi)``. A sine of
                    amplitude ``A`` reports ``A``. Parseval:
                    ``mean(x^2) = A_0^2 + sum_{0<f<Nyq} A_f^2 / 2 + A_Nyq^2``.
    ``coefficient`` one-sided ``|c_k|`` of the normalised DFT (a unit sine
                    reports 0.5). Parseval:
                    ``mean(x^2) = c_0^2 + 2 sum_{0<f<Nyq} c_f^2 + c_Nyq^2``.
    ``radial-power`` 2-D spectra binned by rounded radius; ``magnitude^2`` is
                    the bin's share of ``mean(x^2)``; phases are zero.
    """

    frequencies: np.ndarray
    magnitudes: np.ndarray
    phases: np.ndarray
    grid_size: int
    convention: str = AMPLITUDE
    weights: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.weights is None:
            self.weights = _parseval_weights(self.convention, len(self.magnitudes), self.grid_size)

    def energy(self) -> float:
        """Mean-square of the signal reconstructed from this report."""
        return float(np.sum(self.weights * self.magnitudes ** 2))

    def magnitude_at(self, freq: float, tol: float = 1e-9) -> float:
        hit = np.nonzero(np.abs(self.frequencies - freq) <= tol)[0]
        return float(self.magnitudes[hit[0]]) if hit.size else 0.0

    def energy_fraction(self, mask) -> float:
        """Share of the energy carried by bins selected by ``mask``."""
        total = self.energy()
        if total == 0.0:
            return 0.0
        return float(np.sum((self.weights * self.magnitudes ** 2)[mask]) / total)

    def to_dict(self) -> dict:
        return {
            "grid_size": int(self.grid_size),
            "convention": self.convention,
            "bins": [
                {"freq": float(f), "magnitude": float(m), "phase": float(p)}
                for f, m, p in zip(self.frequencies, self.magnitudes, self.phases)
            ],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "SpectrumReport":
        bins = d["bins"]
        return cls(
            frequencies=np.array([b["freq"] for b in bins], dtype=np.float64),
            magnitudes=np.array([b["magnitude"] for b in bins], dtype=np.float64),
            phases=np.array([b["phase"] for b in bins], dtype=np.float64),
            grid_size=int(d["grid_size"]),
            convention=d["convention"],
        )


def _parseval_weights(convention, n_bins, grid_size):
    w = np.ones(n_bins)
    if convention == RADIAL_POWER:
        return w
    nyq = grid_size % 2 == 0
    inner = slice(1, n_bins - 1 if nyq else n_bins)
    if convention == AMPLITUDE:
        w[inner] = 0.5
    elif convention == COEFFICIENT:
        w[inner] = 2.0
    else:
        raise InvalidInputError(f"unknown spectrum convention {convention!r}")
    return w


def dft_uniform(samples, domain_period: float = 1.0, convention: str = AMPLITUDE) -> SpectrumReport:
    """One-sided spectrum of samples taken on ``x_j = j * period / n``."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    n = x.shape[0]
    if n < 2:
        raise InvalidInputError(f"need at least 2 samples, got {n}")
    if not np.all(np.isfinite(x)):
        raise NumericAbort("non-finite sample passed to dft_uniform")
    if not domain_period > 0:
        raise InvalidInputError("domain_period must be positive")
    n_bins = n // 2 + 1
    re, im = kernels.dft(x, n_bins)
    mag = np.hypot(re, im)
    phase = np.arctan2(im, re)
    if convention == AMPLITUDE:
        nyq = n % 2 == 0
        mag = mag.copy()
        mag[1 : n_bins - 1 if nyq else n_bins] *= 2.0
    elif convention != COEFFICIENT:
        raise InvalidInputError(f"unknown spectrum convention {convention!r}")
    freqs = np.arange(n_bins) / domain_period
    return SpectrumReport(freqs, mag, phase, n, convention)


def idft_uniform(report: SpectrumReport) -> np.ndarray:
    """Reconstruct the grid samples from a one-sided report."""
    n = report.grid_size
    nb = len(report.magnitudes)
    j = np.arange(n)
    amp = report.magnitudes.copy()
    if report.convention == COEFFICIENT:
        nyq = n % 2 == 0
        amp[1 : nb - 1 if nyq else nb] *= 2.0
    elif report.convention != AMPLITUDE:
        raise InvalidInputError("only 1-D spectra can be inverted")
    k = np.arange(nb)
    arg = 2.0 * np.pi * ((np.outer(k, j) % n) / n) + report.phases[:, None]
    return amp @ np.cos(arg)


def dft2_radial(image, max_radius=None) -> SpectrumReport:
    """Energy of a 2-D grid binned by rounded integer radius ``|(kx, ky)|``."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    # separable full DFT via the 1-D kernel
    rows = np.array([_full_dft(r) for r in img])                 # (h, w) complex
    coef = np.array([_full_dft_complex(c) for c in rows.T]).T     # (h, w)
    ky = np.fft.fftfreq(h, 1.0 / h)
    kx = np.fft.fftfreq(w, 1.0 / w)
    rad = np.rint(np.hypot(ky[:, None], kx[None, :])).astype(int)
    power = np.abs(coef) ** 2
    nbins = int(rad.max()) + 1 if max_radius is None else int(max_radius) + 1
    binned = np.bincount(rad.ravel(), weights=power.ravel(), minlength=nbins)[:nbins]
    return SpectrumReport(
        frequencies=np.arange(nbins, dtype=np.float64),
        magnitudes=np.sqrt(binned),
        phases=np.zeros(nbins),
        grid_size=h * w,
        convention=RADIAL_POWER,
    )


def _full_dft(x):
    re, im = kernels.dft(x)
    return re + 1j * im


def _full_dft_complex(z):
    return _full_dft(z.real) + 1j * _full_dft(z.imag)


def dft2(image) -> np.ndarray:
    """Full normalised 2-D DFT coefficients, numpy ``fftfreq`` ordering."""
    img = np.asarray(image, dtype=np.float64)
    rows = np.array([_full_dft(r) for r in img])
    return np.array([_full_dft_complex(c) for c in rows.T]).T


# --------------------------------------------------------------------------
# Finite differences
# --------------------------------------------------------------------------

def finite_diff_grad(f, theta, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``theta`` (error O(h^2))."""
    if not h > 0:
        raise InvalidInputError("step h must be positive")
    theta = np.array(theta, dtype=np.float64, copy=True)
    flat = theta.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(theta))
        flat[i] = orig - h
        fm = float(f(theta))
        flat[i] = orig
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericAbort(f"non-finite objective at coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad.reshape(theta.shape)


# --------------------------------------------------------------------------
# Symmetric eigendecomposition
# --------------------------------------------------------------------------

def eigh(sym, sym_tol: float = 1e-10):
    """Eigenpairs of a symmetric matrix via cyclic Jacobi.

    Eigenvalues are returned in descending order; eigenvector columns are
    orthonormal and sign-fixed so that each column's largest-magnitude entry
    is positive.
    """
    a = np.asarray(sym, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"eigh needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericAbort("non-finite entry passed to eigh")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > sym_tol * scale:
        raise InvalidInputError(f"matrix is not symmetric (max |A - A^T| = {asym:.3e})")
    a = 0.5 * (a + a.T)
    w, v, _ = kernels.jacobi(a)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    if v.size:
        piv = np.argmax(np.abs(v), axis=0)
        signs = np.sign(v[piv, np.arange(v.shape[1])])
        signs[signs == 0] = 1.0
        v = v * signs
    return w, v
