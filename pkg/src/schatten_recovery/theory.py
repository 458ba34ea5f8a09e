"""Closed-form recovery guarantees for perturbed Schatten-p minimization.

Everything here is scalar arithmetic on user-supplied RIC values and
perturbation ratios. True RICs cannot be computed; callers either assume
values or plug in the Monte Carlo lower bounds from
:func:`schatten_recovery.sensing.estimate_ric` (recorded in
``TheoryInputs.delta_source``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from typing import Literal

import numpy as np

from .matcore import as_matrix, best_rank_r, frobenius, rank_cutoff, singular_values

__all__ = [
    "InfeasibleConditionError",
    "MatrixStats",
    "TheoryInputs",
    "TheoryReport",
    "alpha",
    "check_head_tail_condition",
    "ric_admissible_level",
    "constants",
    "error_bounds",
    "evaluate",
    "format_report",
    "hat_delta",
    "kappa",
    "matrix_stats",
    "rank_limit_rhs",
    "total_noise",
    "write_reports_csv",
]

Variant = Literal["power_p", "power_half_p"]


class InfeasibleConditionError(ValueError):
    """A hypothesis of the recovery bound fails, so the bound is undefined."""

    def __init__(self, condition: str, detail: str):
        super().__init__(f"{condition} violated: {detail}")
        self.condition = condition


@dataclass(frozen=True)
class TheoryInputs:
    """RIC values, perturbation ratios and shape parameters.

    ``delta_2ar`` and ``delta_a1r`` are the RICs at ranks ``2ar`` and
    ``(a+1)r``; ``eps_A_*`` the matching rank-restricted perturbation ratios.
    ``op_norm`` is ``||A||_op`` (only enters through ``alpha``).
    """

    p: float
    a: float
    r: int
    delta_2ar: float
    delta_a1r: float
    delta_r: float
    eps_A: float = 0.0
    eps_A_r: float = 0.0
    eps_A_2ar: float = 0.0
    eps_A_a1r: float = 0.0
    eps_y: float = 0.0
    op_norm: float = 1.0
    delta_source: str = "assumed"

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if not self.a > 1.0:
            raise ValueError(f"a must exceed 1, got {self.a}")
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        for name in ("delta_2ar", "delta_a1r", "delta_r"):
            d = getattr(self, name)
            if not 0.0 <= d < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {d}")
        for name in ("eps_A", "eps_A_r", "eps_A_2ar", "eps_A_a1r", "eps_y", "op_norm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @classmethod
    def uniform(cls, p: float, a: float, r: int, delta: float, eps_A: float = 0.0,
                eps_y: float = 0.0, **kw) -> "TheoryInputs":
        """Same RIC at every rank and every restricted ratio equal to `eps_A`."""
        return cls(p=p, a=a, r=r, delta_2ar=delta, delta_a1r=delta, delta_r=delta,
                   eps_A=eps_A, eps_A_r=eps_A, eps_A_2ar=eps_A, eps_A_a1r=eps_A,
                   eps_y=eps_y, **kw)


@dataclass(frozen=True)
class MatrixStats:
    t_r: float
    s_r: float
    y_norm: float
    tail_schatten_p: float


@dataclass(frozen=True)
class TheoryReport:
    inputs: TheoryInputs
    variant: str
    hat_delta_a1r: float
    hat_delta_2ar: float
    ric_admissible_level: float
    ric_level_holds: bool
    head_tail_holds: bool
    kappa_r: float
    alpha: float
    total_noise: float
    C1: float
    C2: float
    C1p: float
    C2p: float
    bound_frobenius_p: float
    bound_schatten_p: float


def hat_delta(delta: float, eps: float) -> float:
    """RIC bound for the perturbed operator: ``(1 + delta)(1 + eps)**2 - 1``."""
    # expanded so that eps = 0 returns delta exactly
    return delta + (1.0 + delta) * eps * (2.0 + eps)


def ric_admissible_level(p: float, a: float, eps_2ar: float) -> float:
    t = math.sqrt(2.0) * a ** (0.5 - 1.0 / p)
    return (2.0 + t) / ((1.0 + t) * (1.0 + eps_2ar) ** 2) - 1.0


def rank_limit_rhs(eps_2ar: float) -> float:
    """The ``p -> 0`` limit of :func:`ric_admissible_level`."""
    return 2.0 / (1.0 + eps_2ar) ** 2 - 1.0


def kappa(delta_r: float) -> float:
    return math.sqrt(1.0 + delta_r) / math.sqrt(1.0 - delta_r)


def alpha(op_norm: float, delta_r: float) -> float:
    return op_norm / math.sqrt(1.0 - delta_r)


def check_head_tail_condition(t_r: float, s_r: float, kappa_r: float) -> bool:
    return t_r + s_r < 1.0 / kappa_r


def matrix_stats(X, r: int, p: float, y) -> MatrixStats:
    """Tail ratios of `X` around its best rank-`r` approximation."""
    X = as_matrix(X, "X")
    head = best_rank_r(X, r)
    head_fro = frobenius(head)
    if head_fro == 0.0:
        raise ValueError("best rank-r approximation is zero; tail ratios undefined")
    sv = singular_values(X)
    tail_sv = sv[r:]
    tail_sv = tail_sv[tail_sv > rank_cutoff(sv, X.shape)]
    tail_fro = float(np.sqrt(np.sum(tail_sv**2)))
    tail_nuc = float(np.sum(tail_sv))
    return MatrixStats(
        t_r=tail_fro / head_fro,
        s_r=tail_nuc / (math.sqrt(r) * head_fro),
        y_norm=float(np.linalg.norm(np.asarray(y, dtype=np.float64))),
        tail_schatten_p=float(np.sum(tail_sv**p)),
    )


def total_noise(inputs: TheoryInputs, stats: MatrixStats) -> float:
    kap = kappa(inputs.delta_r)
    denom = 1.0 - kap * (stats.t_r + stats.s_r)
    if denom <= 0.0:
        raise InfeasibleConditionError(
            "head_tail", f"t_r + s_r = {stats.t_r + stats.s_r:.6g} >= 1/kappa = {1 / kap:.6g}")
    al = alpha(inputs.op_norm, inputs.delta_r)
    lead = (inputs.eps_A_r * kap + inputs.eps_A * al * stats.t_r) / denom
    return (lead + inputs.eps_y) * stats.y_norm


def _denominator(p, a, h1, h2, variant: Variant) -> float:
    if h1 >= 1.0:
        return -math.inf
    expo = p if variant == "power_p" else p / 2.0
    return (1.0 - h1) ** expo - a ** (p / 2.0 - 1.0) * (h1 * h1 + h2 * h2) ** (p / 2.0)


def constants(inputs: TheoryInputs, variant: Variant = "power_p") -> tuple[float, float, float, float]:
    """``(C1, C2, C1', C2')``.

    ``variant="power_p"`` raises ``1 - hat_delta_(a+1)r`` to the power ``p``
    in the shared denominator, as the constants are stated; ``"power_half_p"`` uses
    ``p / 2``, as in the derivation that produces them.
    """
    p, a = inputs.p, inputs.a
    h1 = hat_delta(inputs.delta_a1r, inputs.eps_A_a1r)
    h2 = hat_delta(inputs.delta_2ar, inputs.eps_A_2ar)
    den = _denominator(p, a, h1, h2, variant)
    if not den > 0.0:
        raise InfeasibleConditionError("ric_level", f"constant denominator {den:.6g} <= 0")
    ap = a ** (p / 2.0 - 1.0)
    mix = (h1 * h1 + h2 * h2) ** (p / 2.0)
    grow = (1.0 + h1) ** (p / 2.0)
    C1 = 2.0**p * (1.0 + ap) * grow / den
    C2 = 2.0 * ap * (1.0 + (1.0 + ap) * mix / den)
    C1p = 2.0 ** (p + 1.0) * (1.0 + a) ** (1.0 - p / 2.0) * grow / den
    C2p = 2.0 + 4.0 * (1.0 + a) ** (1.0 - p / 2.0) * ap * mix / den
    return C1, C2, C1p, C2p


def error_bounds(inputs: TheoryInputs, stats: MatrixStats,
                 variant: Variant = "power_p") -> tuple[float, float]:
    """Upper bounds on ``||X - X*||_F**p`` and ``sum sigma_i(X - X*)**p``."""
    if not inputs.delta_2ar < ric_admissible_level(inputs.p, inputs.a, inputs.eps_A_2ar):
        raise InfeasibleConditionError("ric_level", "RIC delta_2ar above the admissible level")
    eps_total = total_noise(inputs, stats)
    C1, C2, C1p, C2p = constants(inputs, variant)
    p, r = inputs.p, inputs.r
    rr = r ** (1.0 - p / 2.0)
    noise_p = eps_total**p
    return (C1 * noise_p + C2 * stats.tail_schatten_p / rr,
            C1p * rr * noise_p + C2p * stats.tail_schatten_p)


def evaluate(inputs: TheoryInputs, stats: MatrixStats, variant: Variant = "power_p") -> TheoryReport:
    """Every bound quantity; infeasible parts come back as ``nan``."""
    h1 = hat_delta(inputs.delta_a1r, inputs.eps_A_a1r)
    h2 = hat_delta(inputs.delta_2ar, inputs.eps_A_2ar)
    rhs = ric_admissible_level(inputs.p, inputs.a, inputs.eps_A_2ar)
    ric_ok = inputs.delta_2ar < rhs
    kap = kappa(inputs.delta_r)
    head_tail_ok = check_head_tail_condition(stats.t_r, stats.s_r, kap)
    nan = float("nan")
    noise = total_noise(inputs, stats) if head_tail_ok else nan
    try:
        C1, C2, C1p, C2p = constants(inputs, variant)
    except InfeasibleConditionError:
        C1 = C2 = C1p = C2p = nan
    if ric_ok and head_tail_ok and not math.isnan(C1):
        bf, bs = error_bounds(inputs, stats, variant)
    else:
        bf = bs = nan
    return TheoryReport(inputs, variant, h1, h2, rhs, ric_ok, head_tail_ok, kap,
                        alpha(inputs.op_norm, inputs.delta_r), noise, C1, C2, C1p, C2p, bf, bs)


_REPORT_FIELDS = [f.name for f in fields(TheoryReport) if f.name != "inputs"]
_INPUT_FIELDS = [f.name for f in fields(TheoryInputs)]


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_reports_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_INPUT_FIELDS + _REPORT_FIELDS)
        for rep in reports:
            inp = asdict(rep.inputs)
            w.writerow([_fmt(inp[k]) for k in _INPUT_FIELDS]
                       + [_fmt(getattr(rep, k)) for k in _REPORT_FIELDS])


def format_report(rep: TheoryReport) -> str:
    rows = [(k, v) for k, v in asdict(rep.inputs).items()]
    rows += [(k, getattr(rep, k)) for k in _REPORT_FIELDS]
    width = max(len(k) for k, _ in rows)
    out = []
    for k, v in rows:
        if isinstance(v, float) and not isinstance(v, bool):
            v = f"{v:.10g}"
        elif isinstance(v, bool):
            v = "yes" if v else "no"
        out.append(f"{k:<{width}}  {v}")
    return "\n".join(out)
