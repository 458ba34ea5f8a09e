"""ADMM for Schatten-p regularized least squares with a perturbed operator.

Solves ``min_Z lam * sum(sigma(Z)**p) + ||A_hat vec(Z) - y_hat||**2 / 2`` by
splitting ``Z = W``. Each iteration runs, in order: Z-update (cached linear
solve), W-update (Schatten-p prox), dual update, continuation, stopping check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Literal

import numpy as np

from .matcore import max_abs, unvec, vec
from .prox import matrix_prox
from .sensing import ProblemInstance, SensingOperator

__all__ = [
    "FactorCache",
    "SolveResult",
    "SolverConfig",
    "SolverState",
    "SolverTrace",
    "TraceRecord",
    "build_cache",
    "data_tolerance",
    "dual_update",
    "penalty_schedule",
    "solve",
    "stopping_check",
    "w_update",
    "write_trace_csv",
    "z_update",
]


@dataclass(frozen=True)
class SolverConfig:
    """ADMM knobs.

    ``continuation="penalty"`` grows ``rho`` geometrically with ``lam`` fixed;
    ``"regularizer"`` grows ``lam`` instead with ``rho`` fixed at ``rho0``.
    ``data_tol=None`` picks ``max(tol, 1.05 * noise floor)`` per instance.
    """

    p: float = 0.7
    lam: float = 1e-6
    rho0: float = 1e-8
    gamma: float = 1.1
    penalty_max: float = 1e10
    tol: float = 1e-8
    max_iters: int = 2000
    continuation: Literal["penalty", "regularizer"] = "penalty"
    data_tol: float | None = None

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        for name in ("lam", "rho0", "penalty_max", "tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.continuation not in ("penalty", "regularizer"):
            raise ValueError(f"unknown continuation target {self.continuation!r}")
        if self.data_tol is not None and not self.data_tol > 0:
            raise ValueError("data_tol must be positive")

    def replace(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class SolverState:
    Z: np.ndarray
    W: np.ndarray
    Y: np.ndarray
    penalty: float
    lam: float
    iter: int = 0

    @classmethod
    def zeros(cls, m: int, n: int, config: SolverConfig) -> "SolverState":
        z = np.zeros((m, n))
        return cls(z, z.copy(), z.copy(), config.rho0, config.lam, 0)


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    rnie: float
    primal_residual: float
    data_residual: float
    objective: float
    penalty: float


@dataclass
class SolverTrace:
    records: list[TraceRecord] = field(default_factory=list)
    status: Literal["converged", "iteration_cap", "numerical_failure"] = "iteration_cap"

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


@dataclass
class SolveResult:
    estimate: np.ndarray
    trace: SolverTrace
    config: SolverConfig
    seed: int | None = None

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def status(self) -> str:
        return self.trace.status


# -- linear solve ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _Spectral:
    mode: str
    mu: np.ndarray
    B: np.ndarray  # Woodbury: Q^T A_hat (M x mn); dense: Q^T (mn x mn)
    Q: np.ndarray


@dataclass(frozen=True, eq=False)
class FactorCache:
    """Factorization of ``A_hat^T A_hat + rho I`` for one penalty value.

    The expensive part (a symmetric eigendecomposition of ``A A^T`` when
    ``M < m*n``, else of ``A^T A``) is shared between caches built from the
    same operator; :meth:`with_penalty` only swaps the diagonal.
    """

    op: SensingOperator
    penalty: float
    spectral: _Spectral

    @property
    def mode(self) -> str:
        return self.spectral.mode

    def with_penalty(self, penalty: float) -> "FactorCache":
        if penalty == self.penalty:
            return self
        if not penalty > 0:
            raise ValueError("penalty must be positive")
        return FactorCache(self.op, float(penalty), self.spectral)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """``(A_hat^T A_hat + rho I)^{-1} b``."""
        sp, rho = self.spectral, self.penalty
        if sp.mode == "woodbury":
            t = (sp.B @ b) / (rho + sp.mu)
            return (b - sp.B.T @ t) / rho
        return sp.Q @ ((sp.B @ b) / (rho + sp.mu))

    def solve_with_image(self, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Solve and also return ``A_hat @ z`` without another large product."""
        sp, rho = self.spectral, self.penalty
        if sp.mode == "woodbury":
            t = (sp.B @ b) / (rho + sp.mu)
            z = (b - sp.B.T @ t) / rho
            return z, sp.Q @ t
        z = sp.Q @ ((sp.B @ b) / (rho + sp.mu))
        return z, self.op.matrix @ z


def build_cache(op_hat: SensingOperator, penalty: float, mode: str | None = None) -> FactorCache:
    """Factor ``A_hat^T A_hat + penalty I``.

    `mode` defaults to ``"woodbury"`` when ``M < m*n`` (M x M factorization,
    ``(A^T A + rho I)^{-1} = (I - A^T (rho I + A A^T)^{-1} A) / rho``) and to
    ``"dense"`` otherwise.
    """
    if not penalty > 0:
        raise ValueError("penalty must be positive")
    A = op_hat.matrix
    M, N = A.shape
    if mode is None:
        mode = "woodbury" if M < N else "dense"
    if mode == "woodbury":
        mu, Q = np.linalg.eigh(A @ A.T)
        spectral = _Spectral("woodbury", np.maximum(mu, 0.0), Q.T @ A, Q)
    elif mode == "dense":
        mu, Q = np.linalg.eigh(A.T @ A)
        spectral = _Spectral("dense", np.maximum(mu, 0.0), np.ascontiguousarray(Q.T), Q)
    else:
        raise ValueError(f"unknown cache mode {mode!r}")
    return FactorCache(op_hat, float(penalty), spectral)


# -- ADMM steps -------------------------------------------------------------

def _check_cache(state: SolverState, cache: FactorCache, instance: ProblemInstance):
    if cache.penalty != state.penalty:
        raise RuntimeError(f"factor cache built for rho={cache.penalty}, state has rho={state.penalty}")
    if cache.op is not instance.op.hat:
        raise RuntimeError("factor cache was built for a different operator")


def z_update(state: SolverState, cache: FactorCache, instance: ProblemInstance,
             config: SolverConfig | None = None, _aty: np.ndarray | None = None) -> np.ndarray:
    """Solve ``(A^T A + rho I) z = A^T y + rho vec(W) - vec(Y)`` and reshape."""
    _check_cache(state, cache, instance)
    aty = _aty if _aty is not None else instance.op.hat.matrix.T @ instance.observed_y
    b = aty + state.penalty * vec(state.W) - vec(state.Y)
    return unvec(cache.solve(b), instance.m, instance.n)


def w_update(state: SolverState, config: SolverConfig, Z_new: np.ndarray | None = None) -> np.ndarray:
    """Schatten-p prox of ``Z + Y / rho`` with weight ``lam / rho``."""
    Z = state.Z if Z_new is None else Z_new
    rho = state.penalty
    return matrix_prox(Z + state.Y / rho, state.lam / rho, config.p)


def dual_update(state: SolverState, Z_new: np.ndarray, W_new: np.ndarray) -> np.ndarray:
    return state.Y + state.penalty * (Z_new - W_new)


def penalty_schedule(config: SolverConfig, steps: int) -> np.ndarray:
    """Continued parameter values ``v_0 .. v_steps`` (``v_{k+1} = min(gamma v_k, max)``)."""
    start = config.rho0 if config.continuation == "penalty" else config.lam
    out = np.empty(steps + 1)
    out[0] = start
    for k in range(steps):
        out[k + 1] = min(config.gamma * out[k], config.penalty_max)
    return out


def data_tolerance(instance: ProblemInstance, config: SolverConfig) -> float:
    if config.data_tol is not None:
        return config.data_tol
    return max(config.tol, 1.05 * instance.noise_floor)


def stopping_check(state: SolverState, prev_state: SolverState, instance: ProblemInstance,
                   config: SolverConfig, data_residual: float | None = None,
                   data_tol: float | None = None) -> bool:
    """All four max-abs conditions, each with ``<=``."""
    eps = config.tol
    if data_residual is None:
        data_residual = max_abs(instance.op.hat.apply(state.Z) - instance.observed_y)
    if data_tol is None:
        data_tol = data_tolerance(instance, config)
    return (max_abs(state.Z - prev_state.Z) <= eps
            and max_abs(state.W - prev_state.W) <= eps
            and data_residual <= data_tol
            and max_abs(state.Z - state.W) <= eps)


def solve(instance: ProblemInstance, config: SolverConfig | None = None,
          cache: FactorCache | None = None) -> SolveResult:
    """Run the ADMM loop from ``Z = W = Y = 0``; the estimate is ``W``.

    A prebuilt `cache` (any penalty) for ``instance.op.hat`` may be passed to
    share the factorization between solves on the same operator.
    """
    config = config or SolverConfig()
    m, n = instance.m, instance.n
    A_hat = instance.op.hat.matrix
    y_hat = instance.observed_y
    aty = A_hat.T @ y_hat
    if cache is None or cache.op is not instance.op.hat:
        cache = build_cache(instance.op.hat, config.rho0)
    data_tol = data_tolerance(instance, config)

    state = SolverState.zeros(m, n, config)
    trace = SolverTrace()
    for k in range(config.max_iters):
        cache = cache.with_penalty(state.penalty)
        rho, lam = state.penalty, state.lam
        b = aty + rho * vec(state.W) - vec(state.Y)
        z, az = cache.solve_with_image(b)
        Z_new = unvec(z, m, n)
        V = Z_new + state.Y / rho
        if not np.all(np.isfinite(V)):
            trace.status = "numerical_failure"
            break
        W_new, s_w = matrix_prox(V, lam / rho, config.p, return_singular_values=True)
        Y_new = state.Y + rho * (Z_new - W_new)
        if not np.all(np.isfinite(Y_new)):
            trace.status = "numerical_failure"
            break

        if config.continuation == "penalty":
            next_rho, next_lam = min(config.gamma * rho, config.penalty_max), lam
        else:
            next_rho, next_lam = rho, min(config.gamma * lam, config.penalty_max)

        w_norm = np.linalg.norm(state.W)
        step = np.linalg.norm(W_new - state.W)
        if w_norm > 0:
            rnie = step / w_norm
        else:
            rnie = 0.0 if step == 0 else math.inf
        data_residual = max_abs(az - y_hat)
        fit = A_hat @ vec(W_new) - y_hat
        objective = lam * float(np.sum(s_w**config.p)) + 0.5 * float(fit @ fit)
        trace.records.append(TraceRecord(k + 1, float(rnie), max_abs(Z_new - W_new),
                                         data_residual, objective, rho))

        prev = state
        state = SolverState(Z_new, W_new, Y_new, next_rho, next_lam, k + 1)
        if stopping_check(state, prev, instance, config, data_residual, data_tol):
            trace.status = "converged"
            break
    return SolveResult(state.W, trace, config, instance.seed)


def write_trace_csv(path, trace: SolverTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "rnie", "primal_residual", "data_residual", "objective", "penalty"])
        for r in trace.records:
            w.writerow([r.iter] + [format(getattr(r, c), ".17g") for c in
                                   ("rnie", "primal_residual", "data_residual", "objective", "penalty")])


def config_dict(config: SolverConfig) -> dict:
    return asdict(config)
