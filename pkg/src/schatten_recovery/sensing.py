"""Measurement model: Gaussian sensing operators, perturbations, noise.

An operator on ``m x n`` matrices is stored as its ``M x (m*n)`` matrix form
acting on column-major ``vec(X)``. The RIC and the rank-restricted operator
norm are NP-hard to compute; the estimators here return *lower bounds*
obtained by random starts refined with alternating maximization over a
rank-r factorization ``X = L @ R.T``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .matcore import (as_matrix, derive_seed, gaussian_matrix, low_rank_product,
                      max_abs, unvec, vec)

__all__ = [
    "PerturbedOperator",
    "ProblemInstance",
    "RicEstimate",
    "SensingOperator",
    "estimate_ric",
    "identity_operator",
    "load_instance",
    "make_gaussian_operator",
    "make_instance",
    "make_perturbation",
    "operator_norm",
    "restricted_operator_norm",
    "save_instance",
    "spectral_norm",
    "write_ric_csv",
]

INSTANCE_MAGIC = "schatten-recovery-instance"
INSTANCE_VERSION = 1


@dataclass(frozen=True, eq=False)
class SensingOperator:
    """Linear map ``R^{m x n} -> R^M`` held as an ``M x (m*n)`` matrix."""

    matrix: np.ndarray
    m: int
    n: int

    def __post_init__(self):
        mat = as_matrix(self.matrix, "operator matrix")
        if mat.shape[1] != self.m * self.n:
            raise ValueError(f"matrix has {mat.shape[1]} columns, expected m*n={self.m * self.n}")
        object.__setattr__(self, "matrix", mat)

    @property
    def M(self) -> int:
        return self.matrix.shape[0]

    def apply(self, X) -> np.ndarray:
        return self.matrix @ vec(X)

    def adjoint(self, v) -> np.ndarray:
        return unvec(self.matrix.T @ np.asarray(v, dtype=np.float64), self.m, self.n)

    def __add__(self, other: "SensingOperator") -> "SensingOperator":
        return SensingOperator(self.matrix + other.matrix, self.m, self.n)


def identity_operator(m: int, n: int, scale: float = 1.0) -> SensingOperator:
    return SensingOperator(scale * np.eye(m * n), m, n)


@dataclass(frozen=True, eq=False)
class PerturbedOperator:
    base: SensingOperator
    perturbation: np.ndarray
    epsilon_A: float
    hat: SensingOperator


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A synthetic recovery problem.

    ``clean_y = A vec(X) + z`` is generated with the *unperturbed* operator;
    the solver is handed ``observed_y`` together with ``op.hat``.
    """

    truth: np.ndarray
    op: PerturbedOperator
    noise: np.ndarray
    clean_y: np.ndarray
    observed_y: np.ndarray
    rank_r: int
    epsilon_y: float
    seed: int = 0
    a_seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.truth.shape[0]

    @property
    def n(self) -> int:
        return self.truth.shape[1]

    @property
    def M(self) -> int:
        return self.op.base.M

    @property
    def noise_floor(self) -> float:
        """``||A_hat vec(X) - y_hat||_inf``: the residual left by the truth itself."""
        return max_abs(self.op.hat.apply(self.truth) - self.observed_y)


@dataclass(frozen=True)
class RicEstimate:
    r: int
    delta_lower: float
    samples: int
    seed: int


def make_gaussian_operator(M: int, m: int, n: int, seed: int) -> SensingOperator:
    """Entries i.i.d. ``N(0, 1/M)``."""
    if min(M, m, n) < 1:
        raise ValueError("M, m, n must all be >= 1")
    return SensingOperator(gaussian_matrix(M, m * n, 0.0, 1.0 / math.sqrt(M), seed), m, n)


def spectral_norm(matrix) -> float:
    """Largest singular value via LAPACK (used for exact rescaling)."""
    return float(np.linalg.norm(np.asarray(matrix, dtype=np.float64), 2))


def make_perturbation(A: SensingOperator, epsilon_A: float, seed: int) -> PerturbedOperator:
    """Gaussian ``E`` rescaled so ``||E|| = epsilon_A * ||A||`` in spectral norm."""
    if epsilon_A < 0:
        raise ValueError(f"epsilon_A must be >= 0, got {epsilon_A}")
    if epsilon_A == 0:
        E = np.zeros_like(A.matrix)
        return PerturbedOperator(A, E, 0.0, SensingOperator(A.matrix.copy(), A.m, A.n))
    E = gaussian_matrix(A.M, A.m * A.n, seed=seed)
    norm_A = spectral_norm(A.matrix)
    E *= epsilon_A * norm_A / spectral_norm(E)
    achieved = spectral_norm(E) / norm_A
    return PerturbedOperator(A, E, achieved, SensingOperator(A.matrix + E, A.m, A.n))


def _noise_scale(Ax: np.ndarray, g: np.ndarray, eps: float) -> float:
    # positive root c of ||c g|| = eps * ||Ax + c g||
    gg = g @ g
    b = Ax @ g
    aa = Ax @ Ax
    qa = gg * (1.0 - eps * eps)
    qb = -2.0 * eps * eps * b
    qc = -eps * eps * aa
    return (-qb + math.sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa)


def make_instance(m: int, n: int, r: int, M: int, epsilon_A: float = 0.0,
                  epsilon_y_target: float = 0.0, seed: int = 0) -> ProblemInstance:
    """Generate ``X = P Q``, ``A``, ``E`` and ``z`` from independent child seeds.

    ``z`` is a Gaussian draw scaled so that ``||z|| / ||A vec(X) + z||``
    equals `epsilon_y_target` exactly.
    """
    if min(m, n, M) < 1:
        raise ValueError("dimensions must be positive")
    if not 1 <= r <= min(m, n):
        raise ValueError(f"rank {r} outside [1, {min(m, n)}]")
    if not 0 <= epsilon_y_target < 1:
        raise ValueError(f"epsilon_y_target must lie in [0, 1), got {epsilon_y_target}")
    if epsilon_A < 0:
        raise ValueError(f"epsilon_A must be >= 0, got {epsilon_A}")
    seed = int(seed)
    a_seed = derive_seed(seed, 2)
    X = low_rank_product(m, n, r, derive_seed(seed, 1))
    A = make_gaussian_operator(M, m, n, a_seed)
    op = make_perturbation(A, epsilon_A, derive_seed(seed, 3))
    Ax = A.apply(X)
    if epsilon_y_target == 0:
        z = np.zeros(M)
    else:
        g = np.random.default_rng(derive_seed(seed, 4)).standard_normal(M)
        z = _noise_scale(Ax, g, epsilon_y_target) * g
    y = Ax + z
    eps_y = float(np.linalg.norm(z) / np.linalg.norm(y)) if np.any(y) else 0.0
    return ProblemInstance(X, op, z, y, y.copy(), int(r), eps_y, seed, a_seed)


# -- norm estimation -------------------------------------------------------

def operator_norm(A: SensingOperator, rtol: float = 1e-13, max_iter: int = 50_000) -> float:
    """Largest singular value by power iteration on the smaller Gram matrix.

    Iterates until the relative change of the Rayleigh quotient drops below
    `rtol`; the quotient increases monotonically, and with this stopping rule
    the returned value is accurate to about 1e-10 relative.
    """
    mat = A.matrix
    M, N = mat.shape
    rng = np.random.default_rng(0)
    if M <= N:
        def gram(u):
            return mat @ (mat.T @ u)
        u = rng.standard_normal(M)
    else:
        def gram(u):
            return mat.T @ (mat @ u)
        u = rng.standard_normal(N)
    u /= np.linalg.norm(u)
    lam = 0.0
    for _ in range(max_iter):
        w = gram(u)
        lam_new = float(u @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        u = w / nw
        if abs(lam_new - lam) <= rtol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return math.sqrt(max(lam, 0.0))


def _tensor(A: SensingOperator) -> np.ndarray:
    # T[i, k, j] = A_i[j, k] for the column-major layout
    return A.matrix.reshape(A.M, A.n, A.m)


def _map_given_right(T, R):
    # columns act on vec(L) (m x k, column-major): <A_i, L R^T> = <A_i R, L>
    M, n, m = T.shape
    AR = np.einsum("ikj,kl->ilj", T, R, optimize=True)
    return AR.reshape(M, R.shape[1] * m)


def _map_given_left(T, L):
    # columns act on vec(R) (n x k, column-major): <A_i, L R^T> = <A_i^T L, R>
    M, n, m = T.shape
    AL = np.einsum("ikj,jl->ilk", T, L, optimize=True)
    return AL.reshape(M, L.shape[1] * n)


def _extreme(G, largest: bool):
    """(singular value, unit right singular vector) at the requested end."""
    if largest:
        _, s, Vt = np.linalg.svd(G, full_matrices=False)
        return s[0], Vt[0]
    M, N = G.shape
    if N > M:
        _, _, Vt = np.linalg.svd(G, full_matrices=True)
        return 0.0, Vt[-1]
    _, s, Vt = np.linalg.svd(G, full_matrices=False)
    return s[-1], Vt[-1]


def _refine(T, R, largest: bool, max_steps: int = 200, rtol: float = 1e-8):
    """Alternating optimization of ``||A(L R^T)||`` over unit-Frobenius pairs.

    `R` must have orthonormal columns. Returns ``(value, R)`` with orthonormal
    `R` at which `value` is attained by some unit ``L``.
    """
    M, n, m = T.shape
    k = R.shape[1]
    value, l_vec = _extreme(_map_given_right(T, R), largest)
    for _ in range(max_steps):
        L = l_vec.reshape((m, k), order="F")
        QL, TL = np.linalg.qr(L)
        new_value, r_vec = _extreme(_map_given_left(T, QL), largest)
        Rp = r_vec.reshape((n, k), order="F")
        R, _ = np.linalg.qr(Rp)
        new_value, l_vec = _extreme(_map_given_right(T, R), largest)
        if largest:
            gain = new_value - value
        else:
            gain = value - new_value
        value = new_value
        if gain <= rtol * max(abs(value), 1e-300):
            break
    return value, R


def _rank_chain(A: SensingOperator, r: int, sample: int, seed: int, largest: bool) -> list[float]:
    """Refined values for ranks 1..r, each warm-started from the previous rank."""
    T = _tensor(A)
    n = A.n
    out = []
    R = np.zeros((n, 0))
    for k in range(1, r + 1):
        g = np.random.default_rng(derive_seed(seed, sample, k)).standard_normal((n, 1))
        R, _ = np.linalg.qr(np.hstack([R, g]))
        value, R = _refine(T, R, largest)
        out.append(value)
    return out


def restricted_operator_norm(A: SensingOperator, r: int, samples: int = 8, seed: int = 0) -> float:
    """Lower estimate of ``sup ||A(X)|| / ||X||_F`` over ``rank(X) <= r``.

    Nondecreasing in `r` for a shared `seed`: the rank-r search for each
    sample starts from the rank-(r-1) optimum.
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    r = min(r, A.m, A.n)
    best = 0.0
    for s in range(samples):
        best = max(best, max(_rank_chain(A, r, s, seed, largest=True)))
    return float(best)


def estimate_ric(A: SensingOperator, r: int, samples: int = 8, seed: int = 0) -> RicEstimate:
    """Monte Carlo lower bound on the restricted isometry constant ``delta_r``."""
    if r < 1 or samples < 1:
        raise ValueError("r and samples must be >= 1")
    r_eff = min(r, A.m, A.n)
    delta = 0.0
    for s in range(samples):
        up = _rank_chain(A, r_eff, s, seed, largest=True)
        down = _rank_chain(A, r_eff, s, seed, largest=False)
        delta = max(delta, max(v * v - 1.0 for v in up), max(1.0 - v * v for v in down))
    return RicEstimate(int(r), float(max(delta, 0.0)), int(samples), int(seed))


def write_ric_csv(path, estimates) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "samples", "delta_lower", "seed"])
        for e in estimates:
            w.writerow([e.r, e.samples, format(e.delta_lower, ".17g"), e.seed])


# -- instance files --------------------------------------------------------

def _write_block(fh, name: str, values) -> None:
    flat = np.asarray(values, dtype=np.float64).ravel(order="F")
    fh.write(f"{name} {flat.size}\n")
    fh.write("\n".join(format(x, ".17g") for x in flat.tolist()))
    fh.write("\n")


def save_instance(path, inst: ProblemInstance) -> None:
    """Write a plain-text instance file.

    Layout: one header line with dimensions, seeds and achieved ratios, then
    blocks ``X``, ``E``, ``z``, ``y``, each a ``<name> <count>`` line followed
    by one value per line (17 significant digits, column-major for matrices).
    ``A`` itself is regenerated from ``a_seed``.
    """
    header = (f"{INSTANCE_MAGIC} v{INSTANCE_VERSION} m={inst.m} n={inst.n} M={inst.M} "
              f"r={inst.rank_r} seed={inst.seed} a_seed={inst.a_seed} "
              f"epsilon_A={inst.op.epsilon_A:.17g} epsilon_y={inst.epsilon_y:.17g}")
    with open(path, "w") as fh:
        fh.write(header + "\n")
        _write_block(fh, "X", inst.truth)
        _write_block(fh, "E", inst.op.perturbation)
        _write_block(fh, "z", inst.noise)
        _write_block(fh, "y", inst.clean_y)


def load_instance(path) -> ProblemInstance:
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    if len(head) < 2 or head[0] != INSTANCE_MAGIC or head[1] != f"v{INSTANCE_VERSION}":
        raise ValueError(f"{path}: not a v{INSTANCE_VERSION} instance file")
    kv = dict(tok.split("=", 1) for tok in head[2:])
    m, n, M, r = (int(kv[k]) for k in ("m", "n", "M", "r"))
    blocks = {}
    pos = 1
    while pos < len(lines):
        name, count = lines[pos].split()
        count = int(count)
        blocks[name] = np.array([float(x) for x in lines[pos + 1:pos + 1 + count]])
        pos += 1 + count
    X = blocks["X"].reshape((m, n), order="F")
    E = blocks["E"].reshape((M, m * n), order="F")
    A = make_gaussian_operator(M, m, n, int(kv["a_seed"]))
    op = PerturbedOperator(A, E, float(kv["epsilon_A"]), SensingOperator(A.matrix + E, m, n))
    y = blocks["y"]
    return ProblemInstance(X, op, blocks["z"], y, y.copy(), r, float(kv["epsilon_y"]),
                           int(kv["seed"]), int(kv["a_seed"]))
