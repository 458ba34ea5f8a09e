"""Dense real-matrix primitives.

Matrices are plain 2-D ``float64`` ndarrays. Vectorization is column-major
(Fortran order) everywhere in the package; see :func:`vec` / :func:`unvec`.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = [
    "SvdFactors",
    "as_matrix",
    "best_rank_r",
    "derive_seed",
    "frobenius",
    "gaussian_matrix",
    "low_rank_product",
    "max_abs",
    "rank_cutoff",
    "schatten_p",
    "singular_values",
    "svd",
    "unvec",
    "vec",
]


class SvdFactors(NamedTuple):
    """Full SVD ``M = U @ diag(singular_values) @ V.T`` (``U`` is m x m, ``V`` is n x n)."""

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        k = self.singular_values.size
        return (self.U[:, :k] * self.singular_values) @ self.V[:, :k].T


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return `M` as a finite 2-D float64 array, raising ``ValueError`` otherwise."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    return p


def vec(M: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(M, dtype=np.float64).ravel(order="F")


def unvec(v: np.ndarray, m: int, n: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v, dtype=np.float64).reshape((m, n), order="F")


def svd(M) -> SvdFactors:
    """Full SVD with canonical signs.

    Singular values come out nonincreasing; every left singular vector is
    flipped so that its first nonzero entry is positive, and the matching
    right singular vector is flipped with it.
    """
    A = as_matrix(M)
    m, n = A.shape
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    V = Vt.T.copy()
    k = s.size
    for j in range(m):
        col = U[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size and col[nz[0]] < 0:
            U[:, j] = -col
            if j < k:
                V[:, j] = -V[:, j]
    return SvdFactors(U, s, V)


def singular_values(M) -> np.ndarray:
    return np.linalg.svd(as_matrix(M), compute_uv=False)


def rank_cutoff(s: np.ndarray, shape) -> float:
    """Singular values at or below this are rounding noise.

    Same rule as ``numpy.linalg.matrix_rank``: ``max(shape) * eps * sigma_max``.
    """
    if s.size == 0:
        return 0.0
    return float(max(shape) * np.finfo(np.float64).eps * np.max(s))


def schatten_p(M, p: float) -> float:
    """Sum of ``sigma_i ** p``, the additive form of the Schatten quasi-norm.

    For ``p == 1`` this is the nuclear norm. The quasi-norm itself is
    ``schatten_p(M, p) ** (1 / p)``. Singular values below
    :func:`rank_cutoff` are dropped: for small ``p`` a rounding-level
    ``1e-16`` would otherwise contribute ``1e-16 ** p``, which is not small.
    """
    p = _check_p(p)
    A = as_matrix(M)
    s = singular_values(A)
    s = s[s > rank_cutoff(s, A.shape)]
    return float(np.sum(s**p))


def frobenius(M) -> float:
    return float(np.linalg.norm(as_matrix(M), "fro"))


def max_abs(M) -> float:
    """Entrywise max absolute value (``0`` for an empty array)."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr)))


def best_rank_r(M, r: int) -> np.ndarray:
    """Best rank-`r` approximation by SVD truncation (Eckart-Young).

    ``r >= min(m, n)`` returns a copy of `M`. The tail is ``M - best_rank_r(M, r)``.
    """
    A = as_matrix(M)
    r = int(r)
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if r >= min(A.shape):
        return A.copy()
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return (U[:, :r] * s[:r]) @ Vt[:r]


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for ``(seed, *keys)``."""
    # spawn_key keeps (s, 2) and (s, 2, 0) apart; a flat entropy list would not
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def gaussian_matrix(rows: int, cols: int, mean: float = 0.0, stddev: float = 1.0,
                    seed: int = 0) -> np.ndarray:
    if stddev < 0:
        raise ValueError(f"stddev must be >= 0, got {stddev}")
    if stddev == 0:
        return np.full((rows, cols), float(mean))
    rng = np.random.default_rng(int(seed))
    return rng.normal(mean, stddev, size=(rows, cols))


def low_rank_product(m: int, n: int, r: int, seed: int) -> np.ndarray:
    """``P @ Q`` with ``P`` (m x r) and ``Q`` (r x n) standard Gaussian."""
    if not 1 <= r <= min(m, n):
        raise ValueError(f"rank {r} outside [1, {min(m, n)}]")
    P = gaussian_matrix(m, r, seed=derive_seed(seed, 0))
    Q = gaussian_matrix(r, n, seed=derive_seed(seed, 1))
    return P @ Q
