"""Hot numeric loops: direct DFT and cyclic Jacobi eigensolver.

Each kernel exists twice: an explicit-loop version compiled by numba
(``*_numba``) and a vectorised numpy version (``*_numpy``). The public entry
points pick one according to :mod:`ffinr._accel`. Both versions perform the
same arithmetic; results agree to rounding (summation order differs in the DFT).
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit


# --------------------------------------------------------------------------
# DFT
# --------------------------------------------------------------------------

@njit(cache=True)
def dft_numba(x, n_bins):
    n = x.shape[0]
    # twiddles indexed by (j*k) mod n keep the phase argument exact
    cos_t = np.empty(n)
    sin_t = np.empty(n)
    for j in range(n):
        ang = 2.0 * np.pi * j / n
        cos_t[j] = np.cos(ang)
        sin_t[j] = np.sin(ang)
    re = np.zeros(n_bins)
    im = np.zeros(n_bins)
    for k in range(n_bins):
        sr = 0.0
        si = 0.0
        for j in range(n):
            idx = (j * k) % n
            sr += x[j] * cos_t[idx]
            si -= x[j] * sin_t[idx]
        re[k] = sr / n
        im[k] = si / n
    return re, im


def dft_numpy(x, n_bins):
    n = x.shape[0]
    ang = 2.0 * np.pi * np.arange(n) / n
    idx = np.outer(np.arange(n_bins), np.arange(n)) % n
    re = np.cos(ang)[idx] @ x / n
    im = -(np.sin(ang)[idx] @ x) / n
    return re, im


def dft(x, n_bins=None):
    """Normalised DFT coefficients ``c_k = (1/n) sum_j x_j exp(-2 pi i jk/n)``.

    Returns ``(re, im)`` for ``k = 0 .. n_bins-1`` (default: all ``n`` bins).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if n_bins is None:
        n_bins = x.shape[0]
    if HAVE_NUMBA:
        return dft_numba(x, n_bins)
    return dft_numpy(x, n_bins)


# --------------------------------------------------------------------------
# Jacobi
# --------------------------------------------------------------------------

@njit(cache=True)
def _rotation(app, aqq, apq):
    theta = (aqq - app) / (2.0 * apq)
    if theta >= 0.0:
        t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
    else:
        t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
    c = 1.0 / np.sqrt(t * t + 1.0)
    return c, t * c


@njit(cache=True)
def jacobi_numba(a, tol, max_sweeps):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    sweeps = 0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if off <= tol * tol * scale:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                c, s = _rotation(a[p, p], a[q, q], apq)
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i]
    return w, v, sweeps


def jacobi_numpy(a, tol, max_sweeps):
    n = a.shape[0]
    a = np.array(a, dtype=np.float64, copy=True)
    v = np.eye(n)
    scale = float(np.sum(a * a))
    iu = np.triu_indices(n, 1)
    sweeps = 0
    for _ in range(max_sweeps):
        if float(np.sum(a[iu] ** 2)) <= tol * tol * scale:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, sweeps


def jacobi(a, tol=1e-15, max_sweeps=60):
    """Cyclic Jacobi on a symmetric matrix. Returns unsorted ``(w, V, sweeps)``."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    if HAVE_NUMBA:
        return jacobi_numba(a, tol, max_sweeps)
    return jacobi_numpy(a, tol, max_sweeps)
