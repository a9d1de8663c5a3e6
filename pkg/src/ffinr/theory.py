"""Numerical checks of the NTK analysis of Fourier-feature networks.

Frequencies are in cycles on the unit period: a target is
``y(x) = sum_n c_n exp(2 pi i n.x)`` with integer ``n`` and ``c_{-n} = conj(c_n)``.
Norms are RMS over one period, so by Parseval ``|y| = sqrt(sum_n |c_n|^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import networks
from .embeddings import FrequencyMatrix, embed
from .errors import ConfigError, InvalidInputError, ResourceError
from .networks import MlpParams, MlpSpec
from .numerics import Rng, dft2, dft_uniform, eigh
from .optim import AdamMoments, adam_step

# --------------------------------------------------------------------------
# Kernels
# --------------------------------------------------------------------------

_CLAMP = 1e-12


def _clamp_cos(u):
    u = np.asarray(u, dtype=np.float64)
    if np.any(np.abs(u) > 1.0 + _CLAMP):
        raise InvalidInputError("kernel argument must lie in [-1, 1]")
    return np.clip(u, -1.0, 1.0)


def ntk_closed_form(u):
    """``(u + 1)(pi - arccos u) / (4 pi)`` for unit inputs with ``<x, z> = u``."""
    u = _clamp_cos(u)
    out = (u + 1.0) * (np.pi - np.arccos(u)) / (4.0 * np.pi)
    return float(out) if out.ndim == 0 else out


def ntk_closed_form_random_bias(u):
    """Expected kernel when the bias weight is also drawn N(0, 1).

    The activation pattern then depends on the angle between the augmented
    inputs ``(x, 1)/sqrt(2)``, whose cosine is ``(u + 1)/2``.
    """
    u = _clamp_cos(u)
    v = (u + 1.0) / 2.0
    out = (u + 1.0) * (np.pi - np.arccos(v)) / (4.0 * np.pi)
    return float(out) if out.ndim == 0 else out


def _unit(x, name):
    x = np.asarray(x, dtype=np.float64).ravel()
    if abs(float(np.linalg.norm(x)) - 1.0) > 1e-10:
        raise InvalidInputError(f"{name} must have unit norm")
    return x


def ntk_empirical(x, z, width: int, n_trials: int = 20, seed: int = 0, bias_init: str = "zero"):
    """Monte-Carlo NTK of ``f(x) = (1/sqrt m) sum_r a_r relu(w_r . x_aug)``.

    ``x_aug = (x, 1)/sqrt(2)`` folds the additive term into the first layer so
    that the augmented input stays on the unit sphere. Only the first layer is
    trained; ``a_r = +-1`` is frozen. With ``bias_init="zero"`` the bias weights
    start at 0 and the expectation is :func:`ntk_closed_form`; with
    ``"normal"`` it is :func:`ntk_closed_form_random_bias`.

    Each trial draws a fresh network and evaluates the gradient inner product
    through :func:`networks.backward`. Returns ``(mean, stderr)`` over trials.
    """
    x = _unit(x, "x")
    z = _unit(z, "z")
    if x.shape != z.shape:
        raise InvalidInputError("x and z must have the same dimension")
    if bias_init not in ("zero", "normal"):
        raise InvalidInputError(f"unknown bias_init {bias_init!r}")
    d = x.size
    xa = np.append(x, 1.0) / math.sqrt(2.0)
    za = np.append(z, 1.0) / math.sqrt(2.0)
    spec = MlpSpec((d + 1, width, 1), use_bias=False, freeze_last=True, init="ntk")
    root = Rng(seed)
    vals = np.empty(n_trials)
    pts = np.stack([xa, za])
    for t in range(n_trials):
        rng = root.derive(t)
        w = rng.normal((width, d + 1))
        if bias_init == "zero":
            w[:, -1] = 0.0
        a = rng.signs((1, width)) / math.sqrt(width)
        params = MlpParams(spec, [w, a], None)
        grads = []
        for p in pts:
            _, tape = networks.forward(params, p)
            g, _ = networks.backward(params, tape, p, np.ones(1), need_input_grad=False)
            grads.append(g.weights[0])
        vals[t] = float(np.sum(grads[0] * grads[1]))
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(n_trials)) if n_trials > 1 else math.inf
    return mean, stderr


def ntk_tolerance(reference: float, stderr: float) -> float:
    return max(0.05 * abs(reference), 3.0 * stderr)


@dataclass
class NtkReport:
    points: np.ndarray
    gram: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    estimator: str = "closed_form"

    def to_dict(self, with_vectors: bool = False) -> dict:
        out = {
            "estimator": self.estimator,
            "n_points": int(self.points.shape[0]),
            "eigenvalues": self.eigenvalues.tolist(),
            "symmetry_error": float(np.max(np.abs(self.gram - self.gram.T))),
        }
        if with_vectors:
            out["gram"] = self.gram.tolist()
            out["eigenvectors"] = self.eigenvectors.tolist()
        return out


def ntk_gram(points, kernel=ntk_closed_form) -> NtkReport:
    """Gram matrix of a kernel of ``<p_i, p_j>`` over unit-norm rows, with eigenpairs."""
    p = np.asarray(points, dtype=np.float64)
    norms = np.linalg.norm(p, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-10):
        raise InvalidInputError("Gram points must have unit norm")
    g = kernel(np.clip(p @ p.T, -1.0, 1.0))
    g = 0.5 * (g + g.T)
    w, v = eigh(g)
    return NtkReport(p, g, w, v, "closed_form")


def normalized_embedding(B: FrequencyMatrix, xs) -> np.ndarray:
    """gamma(x)/sqrt(N): unit-norm rows so inner products stay in [-1, 1]."""
    return embed(B, xs) / math.sqrt(B.N)


def eigen_sinusoid_check(report: NtkReport, top: int = 10, threshold: float = 0.95) -> dict:
    """On a uniform periodic 1-D grid, check that each top eigenvector is a
    single sinusoid: at least ``threshold`` of its energy in one frequency bin."""
    rows = []
    for i in range(min(top, report.eigenvectors.shape[1])):
        spec = dft_uniform(report.eigenvectors[:, i])
        w = spec.weights * spec.magnitudes ** 2
        j = int(np.argmax(w))
        frac = float(w[j] / w.sum())
        rows.append({
            "index": i,
            "eigenvalue": float(report.eigenvalues[i]),
            "frequency": float(spec.frequencies[j]),
            "concentration": frac,
            "passed": frac >= threshold,
        })
    return {"threshold": threshold, "eigenvectors": rows, "passed": all(r["passed"] for r in rows)}


# --------------------------------------------------------------------------
# Spanned frequencies and target projection
# --------------------------------------------------------------------------

@dataclass
class FrequencySet:
    entries: frozenset
    budget: int

    def __contains__(self, n) -> bool:
        return tuple(int(v) for v in np.atleast_1d(n)) in self.entries

    def __len__(self):
        return len(self.entries)

    def sorted(self) -> List[tuple]:
        return sorted(self.entries)

    def to_dict(self) -> dict:
        return {"budget": self.budget, "size": len(self), "entries": [list(e) for e in self.sorted()]}


def spanned_frequencies(B_int, budget: int, cap: int = 10**6) -> FrequencySet:
    """All ``sum_j c_j b_j`` with integer ``c_j`` and ``sum |c_j| <= budget``.

    Built level by level: level ``t`` adds ``+-b_j`` to every point of level
    ``t - 1``, which reaches exactly the combinations with ``sum |c_j| <= t``.
    """
    rows = np.atleast_2d(np.asarray(B_int, dtype=np.float64))
    if rows.size == 0:
        raise InvalidInputError("frequency set must be non-empty")
    if budget < 0:
        raise InvalidInputError("budget must be >= 0")
    if np.any(rows != np.rint(rows)):
        raise InvalidInputError("spanned_frequencies needs integer frequency vectors")
    gens = [tuple(int(v) for v in r) for r in rows]
    gens = gens + [tuple(-v for v in g) for g in gens]
    zero = tuple(0 for _ in gens[0])
    seen = {zero}
    frontier = {zero}
    for _ in range(budget):
        nxt = set()
        for p in frontier:
            for g in gens:
                q = tuple(a + b for a, b in zip(p, g))
                if q not in seen:
                    nxt.add(q)
        seen |= nxt
        if len(seen) > cap:
            raise ResourceError(f"spanned set exceeds the enumeration cap of {cap} entries")
        frontier = nxt
        if not frontier:
            break
    return FrequencySet(frozenset(seen), int(budget))


@dataclass
class TargetFunction:
    """Finite Fourier series with conjugate-symmetric complex coefficients."""

    coefficients: Dict[tuple, complex]
    dim: int = 1

    def __post_init__(self):
        coeffs = {}
        for n, c in self.coefficients.items():
            key = tuple(int(v) for v in np.atleast_1d(n))
            if len(key) != self.dim:
                raise InvalidInputError(f"frequency {key} does not have dimension {self.dim}")
            if c != 0:
                coeffs[key] = complex(c)
        for n, c in coeffs.items():
            partner = coeffs.get(tuple(-v for v in n), 0.0)
            if abs(partner - c.conjugate()) > 1e-12 * max(1.0, abs(c)):
                raise InvalidInputError(f"coefficients at {n} and its negation are not conjugate")
        self.coefficients = coeffs

    @classmethod
    def from_tones(cls, tones: Iterable[tuple], dim: int = 1) -> "TargetFunction":
        """``tones`` items are ``(freq, amp, phase, kind)`` with kind ``"sin"``/``"cos"``;
        a tone contributes ``amp * kind(2 pi freq.x + phase)``."""
        acc: Dict[tuple, complex] = {}
        for tone in tones:
            freq, amp = tone[0], tone[1]
            phase = tone[2] if len(tone) > 2 else 0.0
            kind = tone[3] if len(tone) > 3 else "sin"
            n = tuple(int(v) for v in np.atleast_1d(freq))
            neg = tuple(-v for v in n)
            e = complex(math.cos(phase), math.sin(phase))
            if kind == "sin":
                c = amp * e / 2j
            elif kind == "cos":
                c = amp * e / 2.0
            else:
                raise InvalidInputError(f"unknown tone kind {kind!r}")
            if n == neg:
                acc[n] = acc.get(n, 0) + 2 * c.real
            else:
                acc[n] = acc.get(n, 0) + c
                acc[neg] = acc.get(neg, 0) + c.conjugate()
        return cls(acc, dim)

    def evaluate(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        if p.ndim == 1:
            p = p[:, None]
        out = np.zeros(p.shape[0], dtype=np.complex128)
        for n, c in self.coefficients.items():
            out += c * np.exp(2j * np.pi * (p @ np.asarray(n, dtype=np.float64)))
        return out.real

    def norm(self) -> float:
        return math.sqrt(sum(abs(c) ** 2 for c in self.coefficients.values()))


def project_target(y: TargetFunction, F: FrequencySet):
    """Split ``y`` into the part on ``F`` and the orthogonal remainder."""
    inside = {n: c for n, c in y.coefficients.items() if n in F.entries}
    outside = {n: c for n, c in y.coefficients.items() if n not in F.entries}
    y_b = TargetFunction(inside, y.dim)
    y_perp = TargetFunction(outside, y.dim)
    return y_b, y_perp, y_perp.norm()


# --------------------------------------------------------------------------
# Linearised dynamics
# --------------------------------------------------------------------------

def convergence_bound(eigenvalues, eigenvectors, y_samples, eta: float, k: int) -> float:
    """``sqrt(sum_i (1 - eta lambda_i)^(2k) <v_i, y>^2)``."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    v = np.asarray(eigenvectors, dtype=np.float64)
    y = np.asarray(y_samples, dtype=np.float64).ravel()
    if v.shape != (y.size, lam.size):
        raise InvalidInputError(f"eigenvector shape {v.shape} does not match {y.size} samples / {lam.size} eigenvalues")
    proj = v.T @ y
    return float(math.sqrt(np.sum((1.0 - eta * lam) ** (2 * k) * proj ** 2)))


def diverges(eigenvalues, eta: float) -> bool:
    return bool(eta * float(np.max(eigenvalues)) >= 2.0)


def simulate_linearized(gram, y_samples, eta: float, k: int, u0=None) -> np.ndarray:
    """Iterate ``u <- u + eta H (y - u)`` ``k`` times from ``u0`` (default 0)."""
    h = np.asarray(gram, dtype=np.float64)
    y = np.asarray(y_samples, dtype=np.float64).ravel()
    u = np.zeros_like(y) if u0 is None else np.array(u0, dtype=np.float64)
    for _ in range(k):
        u = u + eta * (h @ (y - u))
    return u


# --------------------------------------------------------------------------
# Two-layer frozen-second-layer training
# --------------------------------------------------------------------------

@dataclass
class TwoLayerConfig:
    width: int = 1024
    iterations: int = 3000
    lr: float = 1e-2
    optimizer: str = "adam"   # "adam" or "gd"
    seed: int = 0
    snapshot_every: int = 0   # 0: no snapshots
    budget: int = 8           # spanned-set budget for reports

    def validate(self):
        if self.optimizer not in ("adam", "gd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.width < 1 or self.iterations < 0 or self.lr < 0:
            raise ConfigError("width >= 1, iterations >= 0 and lr >= 0 required")
        return self


def fit_two_layer(features, targets, cfg: TwoLayerConfig, on_snapshot=None):
    """Full-batch MSE training of ``(1/sqrt m) sum_r a_r relu(w_r.x + b_r)``,
    second layer frozen. Returns the final params and predictions."""
    cfg.validate()
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(-1, 1)
    spec = MlpSpec((x.shape[1], cfg.width, 1), use_bias=True, freeze_last=True, init="ntk", seed=cfg.seed)
    params = networks.init_params(spec)
    arrays = params.arrays()
    moments = AdamMoments.zeros_like(arrays)
    n = y.size
    for t in range(cfg.iterations + 1):
        pred, tape = networks.forward(params, x)
        if cfg.snapshot_every and t % cfg.snapshot_every == 0 and on_snapshot is not None:
            on_snapshot(t, pred[:, 0])
        if t == cfg.iterations:
            break
        grads, _ = networks.backward(params, tape, x, 2.0 * (pred - y) / n, need_input_grad=False)
        g = grads.arrays()
        if cfg.optimizer == "adam":
            arrays, moments = adam_step(arrays, g, moments, cfg.lr)
            # the frozen layer's zero gradient leaves it at its initial value
        else:
            arrays = [a - cfg.lr * gi for a, gi in zip(arrays, g)]
        params = params.with_arrays(arrays)
    return params, pred[:, 0]


def _grid(n_points: int, dim: int) -> np.ndarray:
    axis = np.arange(n_points) / n_points
    if dim == 1:
        return axis[:, None]
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def loss_floor_experiment(y: TargetFunction, B: FrequencyMatrix, cfg: TwoLayerConfig,
                          n_points: int = 256, floor_slack: float = 0.9,
                          outside_energy_min: float = 0.8, in_span_rms: float = 1e-2) -> dict:
    """Train the two-layer network on ``y`` and compare with the projection floor."""
    if not B.is_integer():
        raise InvalidInputError("loss floor experiment needs integer frequencies")
    if y.dim != 1 or B.d != 1:
        raise InvalidInputError("loss floor experiment is implemented for 1-D targets")
    F = spanned_frequencies(np.rint(B.rows), cfg.budget)
    _, _, floor = project_target(y, F)
    xs = _grid(n_points, 1)
    ys = y.evaluate(xs)
    _, pred = fit_two_layer(normalized_embedding(B, xs), ys, cfg)
    resid = ys - pred
    final_rms = float(np.sqrt(np.mean(resid ** 2)))
    spec = dft_uniform(resid)
    freqs = np.rint(spec.frequencies).astype(int)
    outside = np.array([(f,) not in F.entries for f in freqs])
    odd = freqs % 2 == 1
    report = {
        "floor": floor,
        "final_rms": final_rms,
        "floor_slack": floor_slack,
        "span_budget": cfg.budget,
        "outside_span_energy_fraction": spec.energy_fraction(outside),
        "odd_energy_fraction": spec.energy_fraction(odd),
        "residual_spectrum": spec.to_dict(),
    }
    if floor > 0:
        checks = {
            "rms_above_floor": final_rms >= floor_slack * floor,
            "residual_outside_span": report["outside_span_energy_fraction"] >= outside_energy_min,
        }
    else:
        checks = {"in_span_fit": final_rms <= in_span_rms}
    report["checks"] = checks
    report["passed"] = all(checks.values())
    return report


# --------------------------------------------------------------------------
# Per-frequency decay rates
# --------------------------------------------------------------------------

def fit_decay_rate(iterations, magnitudes) -> float:
    """Least-squares slope of ``-log(magnitude)`` against iteration."""
    t = np.asarray(iterations, dtype=np.float64)
    m = np.asarray(magnitudes, dtype=np.float64)
    keep = m > 1e-14 * max(float(m[0]), 1e-300)
    t, m = t[keep], m[keep]
    if t.size < 2:
        return math.inf
    lm = np.log(m)
    tc = t - t.mean()
    return float(-np.sum(tc * (lm - lm.mean())) / np.sum(tc * tc))


def _residual_magnitude(resid, shape, n):
    if len(shape) == 1:
        return dft_uniform(resid).magnitude_at(float(n[0]))
    coef = dft2(resid.reshape(shape))
    h, w = shape
    # the residual is real: a +-n pair carries 2|c_n|
    return float(2.0 * abs(coef[n[0] % h, n[1] % w]) if any(n) else abs(coef[0, 0]))


def decay_rate_experiment(y: TargetFunction, B: FrequencyMatrix, cfg: TwoLayerConfig, n_points: int = 64) -> dict:
    """Fit an exponential decay rate to the residual magnitude at each target frequency."""
    if y.dim != B.d or y.dim not in (1, 2):
        raise InvalidInputError("target and frequencies must share dimension 1 or 2")
    if not cfg.snapshot_every or cfg.iterations // cfg.snapshot_every + 1 < 10:
        raise ConfigError("decay fit needs at least 10 residual snapshots")
    xs = _grid(n_points, y.dim)
    ys = y.evaluate(xs)
    shape = (n_points,) if y.dim == 1 else (n_points, n_points)
    targets = sorted({tuple(abs(v) for v in n) if y.dim == 1 else _canonical(n) for n in y.coefficients if any(n)})
    snaps_t, snaps = [], {n: [] for n in targets}

    def record(t, pred):
        resid = ys - pred
        snaps_t.append(t)
        for n in targets:
            snaps[n].append(_residual_magnitude(resid, shape, n))

    fit_two_layer(normalized_embedding(B, xs), ys, cfg, on_snapshot=record)
    rows = []
    for n in targets:
        rate = fit_decay_rate(snaps_t, snaps[n])
        rows.append({
            "frequency": list(n),
            "rate": rate,
            "half_life": math.log(2) / rate if rate > 0 else math.inf,
            "initial": snaps[n][0],
            "final": snaps[n][-1],
        })
    return {"B": B.rows.tolist(), "iterations": cfg.iterations, "snapshots": len(snaps_t), "rates": rows}


def _canonical(n):
    n = tuple(int(v) for v in n)
    neg = tuple(-v for v in n)
    return max(n, neg)


def decay_comparison_1d(n: int = 4, offsets: Sequence[float] = (0.0, 0.25, 0.5),
                        cfg: Optional[TwoLayerConfig] = None, n_points: int = 64) -> dict:
    """Single tone at integer ``n`` fitted with one embedding frequency ``n + offset``."""
    cfg = cfg or TwoLayerConfig(iterations=400, lr=0.5, optimizer="gd", snapshot_every=20)
    y = TargetFunction.from_tones([(n, 1.0)])
    rows = []
    for off in offsets:
        rep = decay_rate_experiment(y, FrequencyMatrix([[n + off]]), cfg, n_points)
        rows.append({"b": n + off, "rate": rep["rates"][0]["rate"], "final": rep["rates"][0]["final"]})
    rates = [r["rate"] for r in rows]
    fastest = int(np.argmax(rates))
    return {
        "target_frequency": n,
        "table": rows,
        "fastest_b": rows[fastest]["b"],
        "passed": abs(rows[fastest]["b"] - n) < 1e-12,
    }


def decay_comparison_2d(f: int = 2, far: int = 10, cfg: Optional[TwoLayerConfig] = None, n_points: int = 32) -> dict:
    """Tone at ``(0, f)``: on-axis frequency ``(0, f)`` against mixed ``(far, f)``."""
    cfg = cfg or TwoLayerConfig(iterations=400, lr=0.5, optimizer="gd", snapshot_every=20)
    y = TargetFunction.from_tones([((0, f), 1.0)], dim=2)
    pe = decay_rate_experiment(y, FrequencyMatrix([[0.0, float(f)]]), cfg, n_points)
    rff = decay_rate_experiment(y, FrequencyMatrix([[float(far), float(f)]]), cfg, n_points)
    r_pe, r_rff = pe["rates"][0]["rate"], rff["rates"][0]["rate"]
    return {
        "target": [0, f],
        "pe": {"b": [0, f], "rate": r_pe, "final": pe["rates"][0]["final"]},
        "rff": {"b": [far, f], "rate": r_rff, "final": rff["rates"][0]["final"]},
        "passed": r_pe >= r_rff,
    }
