"""Low-rank matrix recovery by Schatten-p minimization under operator perturbation."""

from .bench import (ConfigError, ExperimentSpec, TrialRecord, bound_vs_error, compare_convex,
                    load_spec, run_experiment, sweep_lambda, tune_lambda)
from .matcore import (best_rank_r, frobenius, schatten_p, singular_values, svd, unvec, vec)
from .prox import ScalarProxProblem, matrix_prox, scalar_prox, singular_value_prox
from .sensing import (ProblemInstance, SensingOperator, estimate_ric, load_instance,
                      make_instance, operator_norm, restricted_operator_norm, save_instance)
from .solver import SolveResult, SolverConfig, solve
from .theory import TheoryInputs, TheoryReport, constants, error_bounds, evaluate, matrix_stats
from .verify import verify_suite

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "ProblemInstance",
    "ScalarProxProblem",
    "SensingOperator",
    "SolveResult",
    "SolverConfig",
    "TheoryInputs",
    "TheoryReport",
    "TrialRecord",
    "best_rank_r",
    "bound_vs_error",
    "compare_convex",
    "constants",
    "error_bounds",
    "estimate_ric",
    "evaluate",
    "frobenius",
    "load_instance",
    "load_spec",
    "make_instance",
    "matrix_prox",
    "matrix_stats",
    "operator_norm",
    "restricted_operator_norm",
    "run_experiment",
    "save_instance",
    "scalar_prox",
    "schatten_p",
    "singular_value_prox",
    "singular_values",
    "solve",
    "svd",
    "sweep_lambda",
    "tune_lambda",
    "unvec",
    "vec",
    "verify_suite",
]
