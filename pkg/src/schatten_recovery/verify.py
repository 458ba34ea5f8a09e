"""Cross-module property checks with a machine-readable report.

Each check returns a :class:`PropertyResult` holding the number of cases,
the number of violations and the worst margin (``bound - value``; negative
means violated). ``hard=False`` checks are reported but never fail the suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .matcore import derive_seed, frobenius, schatten_p, svd
from .prox import ScalarProxProblem, prox_objective, scalar_prox
from .sensing import (SensingOperator, make_gaussian_operator, make_perturbation,
                      operator_norm, estimate_ric, restricted_operator_norm)
from .theory import _denominator, ric_admissible_level, hat_delta

__all__ = [
    "PropertyResult",
    "block_orthogonal_pair",
    "check_feasibility_coupling",
    "check_holder",
    "check_restricted_triangle",
    "check_orthogonal_inner_product",
    "check_block_additivity",
    "check_linearity",
    "check_perturbation_scaling",
    "check_prox_oracle",
    "check_svd_roundtrip",
    "prox_oracle",
    "random_prox_problems",
    "verify_suite",
]


@dataclass
class PropertyResult:
    name: str
    hard: bool
    cases: int
    violations: int
    worst_margin: float
    tolerance: float
    detail: dict

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _result(name, margins, tol, hard=True, **detail) -> PropertyResult:
    margins = np.asarray(margins, dtype=np.float64)
    return PropertyResult(name, hard, int(margins.size), int(np.sum(~(margins >= 0))),
                          float(np.min(margins)) if margins.size else math.inf, tol, detail)


# -- constructions -----------------------------------------------------------

def _orthogonal(k, rng):
    Q, R = np.linalg.qr(rng.standard_normal((k, k)))
    return Q * np.sign(np.diag(R))


def block_orthogonal_pair(m, n, r1, r2, rng):
    """``X`` (rank <= r1) and ``Y`` (rank <= r2) with ``X^T Y = 0`` and ``X Y^T = 0``.

    Built on disjoint row and column blocks, then rotated by shared random
    orthogonal matrices, which preserves both products being zero.
    """
    k = rng.integers(r1, m - r2 + 1)
    l = rng.integers(r1, n - r2 + 1)
    X = np.zeros((m, n))
    Y = np.zeros((m, n))
    X[:k, :l] = rng.standard_normal((k, r1)) @ rng.standard_normal((r1, l))
    Y[k:, l:] = rng.standard_normal((m - k, r2)) @ rng.standard_normal((r2, n - l))
    U, V = _orthogonal(m, rng), _orthogonal(n, rng)
    return U @ X @ V, U @ Y @ V


def prox_oracle(v: float, lam: float, p: float, grid: int = 2001) -> tuple[float, float]:
    """Brute-force ``(w, objective)`` minimizing ``lam |w|**p + (w - v)**2 / 2``.

    A uniform grid on ``[0, |v|]`` locates the best cell, a ternary search
    refines inside it, and ``w = 0`` is always a candidate.
    """
    a = abs(v)
    if a == 0.0:
        return 0.0, 0.0

    def f(w):
        return lam * w**p + 0.5 * (w - a) ** 2

    xs = np.linspace(0.0, a, grid)
    i = int(np.argmin(f(xs)))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    for _ in range(200):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
    w = 0.5 * (lo + hi)
    best = (0.0, f(0.0))
    if f(w) < best[1]:
        best = (w, f(w))
    return math.copysign(best[0], v), float(best[1])


def random_prox_problems(count: int, seed: int):
    """Signed ``v`` in ``[-10, 10]``, ``lam`` log-uniform in ``[1e-3, 10]``, ``p`` on the 0.1 grid."""
    rng = np.random.default_rng(seed)
    v = rng.uniform(-10.0, 10.0, count)
    lam = 10.0 ** rng.uniform(-3.0, 1.0, count)
    p = rng.integers(1, 11, count) / 10.0
    return [ScalarProxProblem(float(a), float(b), float(c)) for a, b, c in zip(v, lam, p)]


# -- checks -------------------------------------------------------------------

def check_block_additivity(seed: int, pairs: int = 1000, ps=(0.3, 0.5, 0.7, 1.0),
                 tol: float = 1e-10) -> PropertyResult:
    """``schatten_p(X + Y) == schatten_p(X) + schatten_p(Y)`` for block-orthogonal pairs."""
    rng = np.random.default_rng(derive_seed(seed, 9))
    margins = []
    for _ in range(pairs):
        m, n = rng.integers(4, 11, 2)
        r1 = int(rng.integers(1, 3))
        r2 = int(rng.integers(1, 3))
        X, Y = block_orthogonal_pair(int(m), int(n), r1, r2, rng)
        for p in ps:
            err = abs(schatten_p(X + Y, p) - schatten_p(X, p) - schatten_p(Y, p))
            margins.append(tol - err)
    return _result("block_additivity", margins, tol, pairs=pairs, p_values=list(ps))


def check_holder(seed: int, count: int = 10_000, tol: float = 1e-10) -> PropertyResult:
    """``schatten_p(B) <= r**(1 - p/2) * ||B||_F**p`` for ``rank(B) <= r``."""
    rng = np.random.default_rng(derive_seed(seed, 10))
    margins = []
    for _ in range(count):
        m, n = (int(x) for x in rng.integers(2, 9, 2))
        r = int(rng.integers(1, min(m, n) + 1))
        p = float(rng.integers(1, 11)) / 10.0
        B = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
        margins.append(r ** (1.0 - p / 2.0) * frobenius(B) ** p + tol - schatten_p(B, p))
    return _result("rank_restricted_holder", margins, tol, matrices=count)


def check_restricted_triangle(seed: int, m: int = 8, n: int = 8, M: int = 40, r: int = 2,
                          epsilon_A: float = 0.1, samples: int = 200,
                          tol: float = 1e-9) -> PropertyResult:
    """``||A_hat(X)|| <= ||A(X)|| + ||E||_op^(r) ||X||_F`` on sampled rank-r ``X``."""
    rng = np.random.default_rng(derive_seed(seed, 11))
    A = make_gaussian_operator(M, m, n, derive_seed(seed, 12))
    op = make_perturbation(A, epsilon_A, derive_seed(seed, 13))
    E_op = SensingOperator(op.perturbation, m, n)
    e_r = restricted_operator_norm(E_op, r, samples=4, seed=derive_seed(seed, 14))
    margins = []
    for _ in range(samples):
        X = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
        lhs = np.linalg.norm(op.hat.apply(X))
        rhs = np.linalg.norm(A.apply(X)) + e_r * frobenius(X)
        margins.append(rhs + tol - lhs)
    return _result("restricted_triangle", margins, tol, restricted_E_norm=e_r, epsilon_A=epsilon_A)


def check_orthogonal_inner_product(seed: int, m: int = 8, n: int = 8, M: int = 40, r1: int = 1, r2: int = 1,
                 epsilon_A: float = 0.05, samples: int = 200,
                 inflation: float = 1.5) -> PropertyResult:
    """Report ``|<A_hat X, A_hat Y>| / (||X||_F ||Y||_F)`` over block-orthogonal pairs.

    The reference is ``hat_delta`` of an inflated Monte Carlo RIC lower bound;
    both ingredients are sampled, so the check is report-only.
    """
    rng = np.random.default_rng(derive_seed(seed, 15))
    A = make_gaussian_operator(M, m, n, derive_seed(seed, 16))
    op = make_perturbation(A, epsilon_A, derive_seed(seed, 17))
    delta = estimate_ric(A, r1 + r2, samples=4, seed=derive_seed(seed, 18)).delta_lower
    ref = hat_delta(min(inflation * delta, 0.999), op.epsilon_A)
    ratios = []
    for _ in range(samples):
        X, Y = block_orthogonal_pair(m, n, r1, r2, rng)
        ratios.append(abs(op.hat.apply(X) @ op.hat.apply(Y)) / (frobenius(X) * frobenius(Y)))
    ratios = np.array(ratios)
    return _result("orthogonal_inner_product", ref - ratios, 0.0, hard=False,
                   max_ratio=float(ratios.max()), mean_ratio=float(ratios.mean()),
                   p95_ratio=float(np.quantile(ratios, 0.95)), delta_estimate=delta,
                   reference=ref)


def check_prox_oracle(seed: int, count: int = 1000, tol: float = 1e-8) -> PropertyResult:
    """Objective at :func:`scalar_prox` matches the brute-force minimum."""
    margins = []
    for prob in random_prox_problems(count, derive_seed(seed, 19)):
        w = scalar_prox(prob)
        got = float(prox_objective(w, prob.v, prob.lambda_eff, prob.p))
        _, best = prox_oracle(prob.v, prob.lambda_eff, prob.p)
        margins.append(tol - abs(got - best))
    return _result("prox_oracle", margins, tol)


def check_perturbation_scaling(seed: int, trials: int = 5, tol: float = 1e-9) -> PropertyResult:
    """``||A_hat||_op <= (1 + eps) ||A||_op`` with power-iteration norms."""
    margins = []
    for t in range(trials):
        eps = 0.05 * (t + 1)
        A = make_gaussian_operator(30, 6, 6, derive_seed(seed, 20, t))
        op = make_perturbation(A, eps, derive_seed(seed, 21, t))
        margins.append((1.0 + eps) * operator_norm(A) + tol - operator_norm(op.hat))
    return _result("perturbation_scaling", margins, tol)


def check_linearity(seed: int, trials: int = 50, tol: float = 1e-10) -> PropertyResult:
    rng = np.random.default_rng(derive_seed(seed, 22))
    A = make_gaussian_operator(40, 7, 5, derive_seed(seed, 23))
    margins = []
    for _ in range(trials):
        X, Y = rng.standard_normal((2, 7, 5))
        a, b = rng.standard_normal(2)
        lhs = A.apply(a * X + b * Y)
        rhs = a * A.apply(X) + b * A.apply(Y)
        scale = max(1.0, float(np.max(np.abs(rhs))))
        margins.append(tol - float(np.max(np.abs(lhs - rhs))) / scale)
    return _result("operator_linearity", margins, tol)


def check_svd_roundtrip(seed: int, trials: int = 50, tol: float = 1e-12) -> PropertyResult:
    rng = np.random.default_rng(derive_seed(seed, 24))
    margins = []
    for _ in range(trials):
        m, n = (int(x) for x in rng.integers(1, 12, 2))
        Mx = rng.standard_normal((m, n))
        f = svd(Mx)
        err = max(float(np.max(np.abs(f.reconstruct() - Mx))),
                  float(np.max(np.abs(f.U.T @ f.U - np.eye(m)))),
                  float(np.max(np.abs(f.V.T @ f.V - np.eye(n)))))
        margins.append(tol - err / max(1.0, float(np.max(np.abs(Mx)))))
    return _result("svd_roundtrip", margins, tol)


def check_feasibility_coupling(seed: int, count: int = 10_000,
                               variant: str = "power_p") -> PropertyResult:
    """An admissible RIC level implies a positive constant denominator.

    Tuples respect the rank ordering of RICs and perturbation ratios:
    ``delta_(a+1)r <= delta_2ar`` and ``eps_(a+1)r <= eps_2ar``.
    """
    rng = np.random.default_rng(derive_seed(seed, 25))
    margins = []
    feasible = 0
    for _ in range(count):
        p = rng.uniform(0.01, 1.0)
        a = 1.0 + 10.0 ** rng.uniform(-2, 1.5)
        d2 = rng.uniform(0.0, 1.0)
        d1 = rng.uniform(0.0, d2)
        e2 = 10.0 ** rng.uniform(-4, 0) if rng.random() < 0.8 else 0.0
        e1 = rng.uniform(0.0, e2)
        if not d2 < ric_admissible_level(p, a, e2):
            continue
        feasible += 1
        margins.append(_denominator(p, a, hat_delta(d1, e1), hat_delta(d2, e2), variant))
    return _result("feasibility_coupling", margins, 0.0, sampled=count, feasible=feasible)


CHECKS = (check_block_additivity, check_holder, check_restricted_triangle, check_orthogonal_inner_product, check_prox_oracle,
          check_perturbation_scaling, check_linearity, check_svd_roundtrip,
          check_feasibility_coupling)


def verify_suite(seed: int = 0) -> dict:
    """Run every property check; ``report["passed"]`` covers the hard ones."""
    results = [check(seed) for check in CHECKS]
    return {
        "seed": int(seed),
        "passed": all(r.passed for r in results if r.hard),
        "properties": [r.to_dict() for r in results],
    }


def write_report(path, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
