"""Proximal operator of the Schatten-p quasi-norm.

The scalar problem ``min_w lam * |w|**p + (w - v)**2 / 2`` is solved by
generalized soft thresholding: a closed-form zero threshold, then a
fixed-point iteration for the nonzero stationary point, then a comparison
against ``w = 0``. The matrix prox applies it to the singular values, which
is valid by unitary invariance of the Schatten penalty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .matcore import as_matrix

__all__ = ["ScalarProxProblem", "matrix_prox", "prox_objective", "scalar_prox",
           "singular_value_prox", "soft_threshold"]


@dataclass(frozen=True)
class ScalarProxProblem:
    v: float
    lambda_eff: float
    p: float

    def __post_init__(self):
        if not self.lambda_eff > 0:
            raise ValueError(f"lambda_eff must be positive, got {self.lambda_eff}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")


def prox_objective(w, v, lambda_eff, p):
    return lambda_eff * np.abs(w) ** p + 0.5 * (np.asarray(w) - v) ** 2


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def scalar_prox(prob: ScalarProxProblem) -> float:
    """Global minimizer of ``lambda_eff * |w|**p + (w - v)**2 / 2``.

    Returns ``0`` on ties. For ``p == 1`` this is soft thresholding.
    """
    return _kernels.gst_scalar(prob.v, prob.lambda_eff, prob.p)


def singular_value_prox(sigma, lambda_eff: float, p: float) -> np.ndarray:
    """Vectorized scalar prox over a nonnegative vector."""
    if not lambda_eff > 0:
        raise ValueError(f"lambda_eff must be positive, got {lambda_eff}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    return _kernels.gst(sigma, lambda_eff, p)


def matrix_prox(V, lambda_eff: float, p: float, return_singular_values: bool = False):
    """``argmin_W lambda_eff * sum(sigma(W)**p) + ||W - V||_F**2 / 2``.

    Parameters
    ----------
    V : array_like
        Input matrix.
    lambda_eff : float
        Effective weight (``lambda / rho`` inside ADMM).
    p : float
        Exponent in (0, 1].
    return_singular_values : bool
        Also return the singular values of the output (useful for evaluating
        the penalty without a second SVD).
    """
    A = as_matrix(V, "V")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    s_new = singular_value_prox(s, lambda_eff, p)
    keep = s_new > 0
    W = (U[:, keep] * s_new[keep]) @ Vt[keep]
    if return_singular_values:
        return W, s_new
    return W
