"""Experiment harness: seeded trial sweeps, CSV/SVG output, config files.

A sweep varies one axis (``lambda``, ``p``, ``epsilon_A``, ``measurements``
or ``rank``) over a grid, runs ``trials`` independent problem instances per
grid point and solves each instance once per exponent in ``p_values``. All
exponents at a grid point see the same instance (paired trials). Trial
``t`` uses the seed ``base_seed ^ t``, so results do not depend on the order
in which trials are scheduled.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .matcore import frobenius
from .sensing import make_instance, spectral_norm
from .solver import SolverConfig, build_cache, solve
from .theory import InfeasibleConditionError, TheoryInputs, error_bounds, matrix_stats

__all__ = [
    "AXES",
    "ConfigError",
    "ExperimentSpec",
    "SCHEMA_VERSION",
    "TrialRecord",
    "aggregate",
    "bound_vs_error",
    "compare_convex",
    "count_inversions",
    "load_spec",
    "mean_curve",
    "run_experiment",
    "run_spec",
    "save_spec",
    "sweep_lambda",
    "trial_seed",
    "tune_lambda",
    "write_plot",
    "write_records_csv",
    "write_timing_json",
]

SCHEMA_VERSION = 1
AXES = ("lambda", "p", "epsilon_A", "measurements", "rank")
DEFAULT_P_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


def trial_seed(base_seed: int, trial: int) -> int:
    return int(base_seed) ^ int(trial)


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep.

    ``lam`` is either a single value or a mapping ``{p: lam}`` so that each
    exponent can run at its own tuned regularization weight. ``solver`` holds
    extra :class:`SolverConfig` fields (``rho0``, ``gamma``, ...). The fixed
    value of the swept parameter is ignored; ``grid=None`` means a single
    point at that fixed value. When
    ``theory`` is set (keys ``a`` and ``delta``, optional ``variant``) the
    sweep also evaluates the error bound for every trial.
    """

    name: str = "experiment"
    m: int = 30
    n: int = 30
    M: int = 660
    r: int = 6
    axis: str = "epsilon_A"
    grid: tuple | None = None
    p_values: tuple = (0.7,)
    epsilon_A: float = 0.0
    epsilon_y: float = 0.0
    lam: float | dict = 1e-6
    solver: dict = field(default_factory=dict)
    trials: int = 20
    base_seed: int = 0
    out: str = "results"
    theory: dict | None = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}, got {self.axis!r}")
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        if self.grid is None:
            fixed = {"epsilon_A": self.epsilon_A, "measurements": self.M, "rank": self.r,
                     "lambda": self.lam, "p": self.p_values}[self.axis]
            if isinstance(fixed, dict):
                raise ConfigError("a lambda sweep needs an explicit grid")
            object.__setattr__(self, "grid", tuple(fixed) if self.axis == "p" else (fixed,))
        object.__setattr__(self, "grid", tuple(self.grid))
        if not self.grid:
            raise ConfigError("grid must be nonempty")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if min(self.m, self.n, self.M, self.r) < 1:
            raise ConfigError("m, n, M, r must be positive")
        if self.axis != "p" and not self.p_values:
            raise ConfigError("p_values must be nonempty")
        for p in self.exponents():
            if not 0.0 < p <= 1.0:
                raise ConfigError(f"p must lie in (0, 1], got {p}")
        if isinstance(self.lam, dict):
            lam = {float(k): float(v) for k, v in self.lam.items()}
            missing = [p for p in self.exponents() if p not in lam]
            if missing and self.axis != "lambda":
                raise ConfigError(f"lam mapping has no entry for p={missing}")
            object.__setattr__(self, "lam", lam)
        allowed = {f.name for f in fields(SolverConfig)} - {"p", "lam"}
        unknown = set(self.solver) - allowed
        if unknown:
            raise ConfigError(f"unknown solver keys {sorted(unknown)}")
        if self.theory is not None:
            unknown = set(self.theory) - {"a", "delta", "variant"}
            if unknown or not {"a", "delta"} <= set(self.theory):
                raise ConfigError("theory block needs keys a, delta (optional variant)")
        try:
            self.solver_config(self.exponents()[0], 1e-6 if self.axis == "lambda" else None)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def exponents(self) -> tuple:
        return tuple(float(v) for v in self.grid) if self.axis == "p" else self.p_values

    def lam_for(self, p: float) -> float:
        if isinstance(self.lam, dict):
            return self.lam[float(p)]
        return float(self.lam)

    def solver_config(self, p: float, lam: float | None = None) -> SolverConfig:
        return SolverConfig(p=float(p), lam=self.lam_for(p) if lam is None else float(lam),
                            **self.solver)

    def replace(self, **changes) -> "ExperimentSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class TrialRecord:
    """One solve (``kind="trial"``) or a per-point mean (``kind="mean"``)."""

    kind: str
    axis: str
    value: float
    p: float
    lam: float
    epsilon_A: float
    epsilon_y: float
    m: int
    n: int
    M: int
    r: int
    trial: int
    seed: int
    rel_error: float
    iterations: float
    status: str
    wall_time: float = 0.0
    observed_fro_p: float = math.nan
    bound_frobenius_p: float = math.nan
    feasible: str = ""


# wall_time is excluded so reruns produce byte-identical files
CSV_COLUMNS = [f.name for f in fields(TrialRecord) if f.name != "wall_time"]


# -- running ----------------------------------------------------------------

def _point_params(spec: ExperimentSpec, value) -> dict:
    prm = dict(m=spec.m, n=spec.n, M=spec.M, r=spec.r,
               epsilon_A=spec.epsilon_A, epsilon_y=spec.epsilon_y)
    if spec.axis == "epsilon_A":
        prm["epsilon_A"] = float(value)
    elif spec.axis == "measurements":
        prm["M"] = int(value)
    elif spec.axis == "rank":
        prm["r"] = int(value)
    return prm


def _theory_bound(spec, inst, p, estimate, op_norm):
    th = spec.theory
    inputs = TheoryInputs.uniform(p, float(th["a"]), inst.rank_r, float(th["delta"]),
                                  eps_A=inst.op.epsilon_A, eps_y=inst.epsilon_y,
                                  op_norm=op_norm)
    observed = frobenius(inst.truth - estimate) ** p
    stats = matrix_stats(inst.truth, inst.rank_r, p, inst.observed_y)
    try:
        bound, _ = error_bounds(inputs, stats, th.get("variant", "power_p"))
    except InfeasibleConditionError:
        return observed, math.nan, "false"
    return observed, bound, "true"


def _shared_instance(spec: ExperimentSpec) -> bool:
    # on these axes the grid value only changes the solver, not the instance
    return spec.axis in ("lambda", "p")


def _run_point(spec: ExperimentSpec, values, trial: int) -> list[TrialRecord]:
    """Solve one instance for every grid value in `values` and every exponent."""
    prm = _point_params(spec, values[0])
    seed = trial_seed(spec.base_seed, trial)
    inst = make_instance(prm["m"], prm["n"], prm["r"], prm["M"], prm["epsilon_A"],
                         prm["epsilon_y"], seed)
    cache = None
    op_norm = spectral_norm(inst.op.base.matrix) if spec.theory is not None else 1.0
    out = []
    for value in values:
        exponents = (float(value),) if spec.axis == "p" else spec.exponents()
        for p in exponents:
            lam = float(value) if spec.axis == "lambda" else spec.lam_for(p)
            config = spec.solver_config(p, lam)
            if cache is None:
                cache = build_cache(inst.op.hat, config.rho0)
            t0 = time.perf_counter()
            res = solve(inst, config, cache)
            elapsed = time.perf_counter() - t0
            rel = frobenius(inst.truth - res.estimate) / frobenius(inst.truth)
            extra = {}
            if spec.theory is not None:
                obs, bound, feas = _theory_bound(spec, inst, p, res.estimate, op_norm)
                extra = dict(observed_fro_p=obs, bound_frobenius_p=bound, feasible=feas)
            out.append(TrialRecord("trial", spec.axis, float(value), p, lam, inst.op.epsilon_A,
                                   inst.epsilon_y, prm["m"], prm["n"], prm["M"], prm["r"],
                                   trial, seed, rel, float(res.iterations), res.status,
                                   elapsed, **extra))
    return out


def _sort_key(rec: TrialRecord):
    return (rec.value, rec.p, rec.kind != "trial", rec.trial)


def aggregate(records) -> list[TrialRecord]:
    """Mean rows per ``(value, p)`` over the trial rows."""
    groups: dict = {}
    for rec in records:
        if rec.kind == "trial":
            groups.setdefault((rec.value, rec.p), []).append(rec)
    out = []
    for (value, p), recs in sorted(groups.items()):
        first = recs[0]

        def mean(name):
            return float(np.mean([getattr(r, name) for r in recs]))

        feas = {r.feasible for r in recs}
        out.append(replace(
            first, kind="mean", trial=-1, seed=-1,
            lam=mean("lam"), epsilon_A=mean("epsilon_A"), epsilon_y=mean("epsilon_y"),
            rel_error=mean("rel_error"), iterations=mean("iterations"),
            status=f"{sum(r.status == 'converged' for r in recs)}/{len(recs)} converged",
            wall_time=sum(r.wall_time for r in recs),
            observed_fro_p=mean("observed_fro_p"), bound_frobenius_p=mean("bound_frobenius_p"),
            feasible=feas.pop() if len(feas) == 1 else "mixed"))
    return out


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> list[TrialRecord]:
    """Trial rows for every grid point, exponent and trial, then mean rows.

    A trial that ends in ``numerical_failure`` is recorded like any other.
    """
    if _shared_instance(spec):
        jobs = [(spec.grid, t) for t in range(spec.trials)]
    else:
        jobs = [((value,), t) for value in spec.grid for t in range(spec.trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda job: _run_point(spec, *job), jobs))
    else:
        chunks = [_run_point(spec, *job) for job in jobs]
    trials = sorted((rec for chunk in chunks for rec in chunk), key=_sort_key)
    return sorted(trials + aggregate(trials), key=_sort_key)


def sweep_lambda(spec: ExperimentSpec, grid=None, threads: int = 1) -> list[TrialRecord]:
    """RelError versus lambda; the default grid is log-spaced over ``[1e-6, 1]``."""
    if grid is None:
        grid = tuple(10.0 ** k for k in range(-6, 1))
    return run_experiment(spec.replace(axis="lambda", grid=tuple(grid)), threads)


def tune_lambda(spec: ExperimentSpec, grid=None, threads: int = 1) -> dict:
    """Per-exponent lambda with the smallest mean RelError on `spec`'s seeds.

    Run it with a ``base_seed`` disjoint from the evaluation seeds.
    """
    recs = sweep_lambda(spec, grid, threads)
    best: dict = {}
    for rec in recs:
        if rec.kind == "mean" and (rec.p not in best or rec.rel_error < best[rec.p][1]):
            best[rec.p] = (rec.value, rec.rel_error)
    return {p: v for p, (v, _) in best.items()}


def compare_convex(spec: ExperimentSpec, threads: int = 1) -> list[TrialRecord]:
    """Paired sweep over rank with exponents including ``p = 1``."""
    ps = spec.exponents()
    if 1.0 not in ps or not any(p < 1.0 for p in ps):
        raise ConfigError("compare_convex needs p = 1 and at least one p < 1")
    if spec.axis != "rank":
        raise ConfigError("compare_convex sweeps the rank axis")
    return run_experiment(spec, threads)


def bound_vs_error(spec: ExperimentSpec, a: float = 2.0, delta: float = 0.1,
                   variant: str = "power_p", threads: int = 1) -> list[TrialRecord]:
    """Observed ``||X - X*||_F**p`` next to the theoretical bound over a p grid.

    Instances have exact rank ``r``. The perturbation ratios fed to the bound
    are the achieved ones. Infeasible points keep ``bound = nan`` and
    ``feasible = "false"``.
    """
    grid = spec.grid if spec.axis == "p" else DEFAULT_P_GRID
    spec = spec.replace(axis="p", grid=tuple(grid), p_values=(),
                        theory={"a": a, "delta": delta, "variant": variant})
    return run_experiment(spec, threads)


def run_spec(spec: ExperimentSpec, threads: int = 1) -> list[TrialRecord]:
    """Dispatch used by the CLI: theory-augmented sweeps go through the bound path."""
    if spec.theory is not None:
        th = spec.theory
        return bound_vs_error(spec, float(th["a"]), float(th["delta"]),
                              th.get("variant", "power_p"), threads)
    return run_experiment(spec, threads)


# -- analysis helpers -------------------------------------------------------

def mean_curve(records, p: float) -> tuple[np.ndarray, np.ndarray]:
    """``(grid values, mean rel_error)`` for one exponent, in grid order."""
    rows = sorted((r for r in records if r.kind == "mean" and r.p == p), key=lambda r: r.value)
    return np.array([r.value for r in rows]), np.array([r.rel_error for r in rows])


def count_inversions(values, increasing: bool = True, rel_tol: float = 0.0) -> int:
    """Adjacent pairs that break the expected order by more than `rel_tol` relative."""
    v = np.asarray(values, dtype=np.float64)
    bad = 0
    for a, b in zip(v[:-1], v[1:]):
        if increasing and b < a * (1.0 - rel_tol):
            bad += 1
        if not increasing and b > a * (1.0 + rel_tol):
            bad += 1
    return bad


# -- output -----------------------------------------------------------------

def _cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_records_csv(path, records) -> None:
    """Fixed column order, header row, 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow([_cell(getattr(rec, c)) for c in CSV_COLUMNS])


def write_timing_json(path, records) -> None:
    rows = [{"value": r.value, "p": r.p, "trial": r.trial, "wall_time": r.wall_time}
            for r in records if r.kind == "trial"]
    Path(path).write_text(json.dumps(rows, indent=1) + "\n")


def write_plot(path, records, title: str = "", ylabel: str = "mean RelError") -> None:
    """One curve per exponent; SVG with fixed metadata so reruns are identical."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    recs = [r for r in records if r.kind == "mean"]
    if not recs:
        return
    axis = recs[0].axis
    with matplotlib.rc_context({"svg.hashsalt": "schatten-recovery", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        if axis == "p" and not math.isnan(recs[0].bound_frobenius_p):
            x = [r.value for r in recs]
            ax.plot(x, [r.observed_fro_p for r in recs], "o-", label="observed")
            ax.plot(x, [r.bound_frobenius_p for r in recs], "s--", label="bound")
            ax.set_ylabel("||X - X*||_F^p")
        else:
            for p in sorted({r.p for r in recs}):
                x, y = mean_curve(recs, p)
                ax.plot(x, y, "o-", label=f"p={p:g}")
            ax.set_ylabel(ylabel)
        if axis == "lambda":
            ax.set_xscale("log")
        ax.set_xlabel(axis)
        ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)


# -- config files -----------------------------------------------------------

def _spec_to_json(spec: ExperimentSpec) -> dict:
    d = asdict(spec)
    d["grid"] = list(spec.grid)
    d["p_values"] = list(spec.p_values)
    if isinstance(spec.lam, dict):
        d["lam"] = {format(k, "g"): v for k, v in spec.lam.items()}
    return {"schema_version": SCHEMA_VERSION, **d}


def save_spec(path, spec: ExperimentSpec) -> None:
    Path(path).write_text(json.dumps(_spec_to_json(spec), indent=2, sort_keys=True) + "\n")


def spec_from_dict(data: dict) -> ExperimentSpec:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    version = data.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    known = {f.name for f in fields(ExperimentSpec)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    try:
        return ExperimentSpec(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_spec(path) -> ExperimentSpec:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return spec_from_dict(data)
