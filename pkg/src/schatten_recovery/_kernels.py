"""Hot loops: generalized soft thresholding over a vector of values.

Two interchangeable backends:

* ``numba`` -- the scalar routine below compiled with ``@njit`` and looped
  over the input (default when numba imports cleanly);
* ``numpy`` -- a vectorized fixed-point iteration over all values at once.

Set ``SCHATTEN_RECOVERY_BACKEND=numpy`` to force the fallback. Both paths are
importable as :func:`gst_numba` / :func:`gst_numpy` so tests and benchmarks
can compare them regardless of the flag.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
    _jit = numba.njit(cache=True, nogil=True)
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def _jit(fn):
        return fn


FIXED_POINT_MAX_ITER = 500
FIXED_POINT_TOL = 1e-12
_GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


def gst_threshold(lam: float, p: float) -> float:
    """Magnitude at or below which the lp prox returns exactly zero."""
    if p == 1.0:
        return lam
    base = (2.0 * lam * (1.0 - p)) ** (1.0 / (2.0 - p))
    return base + lam * p * base ** (p - 1.0)


@_jit
def _objective(w, a, lam, p):
    return lam * w**p + 0.5 * (w - a) * (w - a)


@_jit
def _golden_section(a, lam, p):
    # objective is convex on [inflection, a]; a nonzero minimizer lives there
    lo = (lam * p * (1.0 - p)) ** (1.0 / (2.0 - p))
    if lo > a:
        lo = 0.0
    hi = a
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1 = _objective(x1, a, lam, p)
    f2 = _objective(x2, a, lam, p)
    for _ in range(300):
        if hi - lo <= 1e-15 * max(1.0, a):
            break
        if f1 <= f2:
            hi = x2
            x2 = x1
            f2 = f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = _objective(x1, a, lam, p)
        else:
            lo = x1
            x1 = x2
            f1 = f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = _objective(x2, a, lam, p)
    return 0.5 * (lo + hi)


@_jit
def _gst_scalar(v, lam, p, max_iter):
    a = abs(v)
    if a == 0.0:
        return 0.0
    if p == 1.0:
        w = a - lam
        if w <= 0.0:
            return 0.0
        return w if v > 0.0 else -w
    base = (2.0 * lam * (1.0 - p)) ** (1.0 / (2.0 - p))
    tau = base + lam * p * base ** (p - 1.0)
    if a <= tau:
        return 0.0
    tol = FIXED_POINT_TOL * max(1.0, a)
    w = a
    converged = False
    for _ in range(max_iter):
        w_new = a - lam * p * w ** (p - 1.0)
        if w_new <= 0.0:
            break
        if abs(w_new - w) < tol:
            w = w_new
            converged = True
            break
        w = w_new
    if not converged:
        w = _golden_section(a, lam, p)
    # ties resolve to zero
    if _objective(w, a, lam, p) < 0.5 * a * a:
        return w if v > 0.0 else -w
    return 0.0


@_jit
def _gst_loop(values, lam, p, max_iter, out):
    for i in range(values.shape[0]):
        out[i] = _gst_scalar(values[i], lam, p, max_iter)
    return out


def _py(fn):
    return getattr(fn, "py_func", fn)


def _select_backend() -> str:
    requested = os.environ.get("SCHATTEN_RECOVERY_BACKEND", "").strip().lower()
    if requested in ("", "numba", "jit"):
        return "numba" if HAVE_NUMBA else "numpy"
    if requested in ("numpy", "python", "nojit"):
        return "numpy"
    raise ValueError(f"unknown SCHATTEN_RECOVERY_BACKEND={requested!r}")


BACKEND = _select_backend()


def gst_scalar(v: float, lam: float, p: float, max_iter: int = FIXED_POINT_MAX_ITER) -> float:
    """Global minimizer of ``lam * |w|**p + (w - v)**2 / 2``."""
    fn = _gst_scalar if BACKEND == "numba" else _py(_gst_scalar)
    return float(fn(float(v), float(lam), float(p), int(max_iter)))


def golden_section(a: float, lam: float, p: float) -> float:
    """Bracketed search for the nonzero local minimizer on ``[inflection, a]``."""
    fn = _golden_section if BACKEND == "numba" else _py(_golden_section)
    return float(fn(float(a), float(lam), float(p)))


def gst_numba(values, lam: float, p: float, max_iter: int = FIXED_POINT_MAX_ITER) -> np.ndarray:
    if not HAVE_NUMBA:  # pragma: no cover
        raise RuntimeError("numba backend unavailable")
    v = np.ascontiguousarray(values, dtype=np.float64).ravel()
    out = np.empty_like(v)
    return _gst_loop(v, float(lam), float(p), int(max_iter), out)


def gst_numpy(values, lam: float, p: float, max_iter: int = FIXED_POINT_MAX_ITER) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).ravel()
    a = np.abs(v)
    out = np.zeros_like(v)
    lam = float(lam)
    p = float(p)
    if p == 1.0:
        return np.sign(v) * np.maximum(a - lam, 0.0)
    idx = np.flatnonzero(a > gst_threshold(lam, p))
    if idx.size == 0:
        return out
    av = a[idx]
    tol = FIXED_POINT_TOL * np.maximum(1.0, av)
    w = av.copy()
    active = np.ones(av.size, dtype=bool)
    converged = np.zeros(av.size, dtype=bool)
    for _ in range(int(max_iter)):
        w_new = av - lam * p * w ** (p - 1.0)
        active &= w_new > 0.0
        step_ok = active & (np.abs(w_new - w) < tol)
        w = np.where(active, w_new, w)
        converged |= step_ok
        active &= ~step_ok
        if not active.any():
            break
    golden = _py(_golden_section)
    for i in np.flatnonzero(~converged):
        w[i] = golden(av[i], lam, p)
    keep = lam * w**p + 0.5 * (w - av) ** 2 < 0.5 * av * av
    out[idx[keep]] = np.sign(v[idx[keep]]) * w[keep]
    return out


def gst(values, lam: float, p: float, max_iter: int = FIXED_POINT_MAX_ITER) -> np.ndarray:
    """Elementwise lp prox with the selected backend."""
    if BACKEND == "numba":
        return gst_numba(values, lam, p, max_iter)
    return gst_numpy(values, lam, p, max_iter)
