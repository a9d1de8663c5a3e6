"""Image-quality metrics with dynamic range 1."""
from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidInputError

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 7


def _pair(pred, target):
    p = np.asarray(getattr(pred, "pixels", getattr(pred, "ys", pred)), dtype=np.float64)
    t = np.asarray(getattr(target, "pixels", getattr(target, "ys", target)), dtype=np.float64)
    if p.shape != t.shape:
        raise InvalidInputError(f"shape mismatch {p.shape} vs {t.shape}")
    return p, t


def mse(pred, target) -> float:
    p, t = _pair(pred, target)
    return float(np.mean((p - t) ** 2))


def psnr(pred, target) -> float:
    """``10 log10(1 / mse)``; ``math.inf`` when the inputs are identical."""
    m = mse(pred, target)
    return math.inf if m == 0 else 10.0 * math.log10(1.0 / m)


def _window_sums(a, w):
    # summed-area table gives every w x w window sum
    s = np.pad(a, ((1, 0), (1, 0))).cumsum(0).cumsum(1)
    return s[w:, w:] - s[:-w, w:] - s[w:, :-w] + s[:-w, :-w]


def ssim(pred, target, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over all fully contained ``window x window`` uniform windows.

    Constants ``C1 = (0.01)^2`` and ``C2 = (0.03)^2`` for range 1; variances and
    covariance use the unbiased ``1/(w^2 - 1)`` normalisation.
    """
    p, t = _pair(pred, target)
    if p.ndim != 2:
        raise InvalidInputError("ssim needs 2-D images")
    if window < 2 or window > min(p.shape):
        raise InvalidInputError(f"window {window} does not fit image {p.shape}")
    n = window * window
    c1, c2 = SSIM_K1 ** 2, SSIM_K2 ** 2
    mu_p = _window_sums(p, window) / n
    mu_t = _window_sums(t, window) / n
    cov = n / (n - 1.0)
    var_p = cov * (_window_sums(p * p, window) / n - mu_p ** 2)
    var_t = cov * (_window_sums(t * t, window) / n - mu_t ** 2)
    var_pt = cov * (_window_sums(p * t, window) / n - mu_p * mu_t)
    num = (2 * mu_p * mu_t + c1) * (2 * var_pt + c2)
    den = (mu_p ** 2 + mu_t ** 2 + c1) * (var_p + var_t + c2)
    return float(np.mean(num / den))
