"""Command line interface.

Exit codes: 0 success, 1 a hard property failed in ``verify``, 2 bad
configuration or arguments.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import bench, theory
from .matcore import frobenius
from .sensing import load_instance, make_instance, save_instance
from .solver import SolverConfig, solve, write_trace_csv
from .verify import verify_suite, write_report

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed")
    common.add_argument("--trials", type=int, default=None, help="trials per grid point")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--threads", type=int, default=1, help="concurrent trials")
    return common


def _instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=int, default=30)
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--r", type=int, default=6)
    p.add_argument("--M", type=int, default=660)
    p.add_argument("--epsilon-A", type=float, default=0.0)
    p.add_argument("--epsilon-y", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="schatten-recovery",
                                     description="Schatten-p low-rank recovery experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="write a problem instance file")
    _instance_flags(gen)

    sol = sub.add_parser("solve", parents=[common],
                         help="solve one instance, print RelError, write the trace CSV")
    sol.add_argument("--instance", default=None, help="instance file (else generate one)")
    _instance_flags(sol)
    sol.add_argument("--p", type=float, default=None)
    sol.add_argument("--lam", type=float, default=None)
    sol.add_argument("--max-iters", type=int, default=None)

    sub.add_parser("sweep", parents=[common], help="run an experiment config")

    th = sub.add_parser("theory", parents=[common], help="evaluate the recovery bound")
    th.add_argument("--p", type=float, required=True)
    th.add_argument("--a", type=float, required=True)
    th.add_argument("--r", type=int, required=True)
    th.add_argument("--delta", type=float, default=None, help="same RIC at every rank")
    th.add_argument("--delta-2ar", type=float, default=None)
    th.add_argument("--delta-a1r", type=float, default=None)
    th.add_argument("--delta-r", type=float, default=None)
    th.add_argument("--eps-A", type=float, default=0.0)
    th.add_argument("--eps-A-r", type=float, default=None)
    th.add_argument("--eps-A-2ar", type=float, default=None)
    th.add_argument("--eps-A-a1r", type=float, default=None)
    th.add_argument("--eps-y", type=float, default=0.0)
    th.add_argument("--op-norm", type=float, default=1.0)
    th.add_argument("--t-r", type=float, default=0.0)
    th.add_argument("--s-r", type=float, default=0.0)
    th.add_argument("--y-norm", type=float, default=1.0)
    th.add_argument("--tail", type=float, default=0.0, help="tail Schatten-p sum")
    th.add_argument("--variant", choices=("power_p", "power_half_p"), default="power_p")

    sub.add_parser("verify", parents=[common], help="run the property suite")
    return parser


def _out_dir(args, default: str) -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solver_config(args) -> SolverConfig:
    overrides = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise bench.ConfigError(f"cannot read {args.config}: {exc}") from exc
        if not isinstance(data, dict) or data.pop("schema_version", None) != bench.SCHEMA_VERSION:
            raise bench.ConfigError(f"schema_version must be {bench.SCHEMA_VERSION}")
        unknown = set(data) - {f.name for f in fields(SolverConfig)}
        if unknown:
            raise bench.ConfigError(f"unknown solver keys {sorted(unknown)}")
        overrides.update(data)
    for key, flag in (("p", args.p), ("lam", args.lam), ("max_iters", args.max_iters)):
        if flag is not None:
            overrides[key] = flag
    try:
        return SolverConfig(**overrides)
    except (TypeError, ValueError) as exc:
        raise bench.ConfigError(str(exc)) from exc


def _make_instance(args):
    try:
        return make_instance(args.m, args.n, args.r, args.M, args.epsilon_A, args.epsilon_y,
                             args.seed or 0)
    except ValueError as exc:
        raise bench.ConfigError(str(exc)) from exc


def cmd_gen(args) -> int:
    inst = _make_instance(args)
    path = _out_dir(args, ".") / f"instance_{inst.seed}.txt"
    save_instance(path, inst)
    print(path)
    return EXIT_OK


def cmd_solve(args) -> int:
    config = _solver_config(args)
    if args.instance:
        try:
            inst = load_instance(args.instance)
        except (OSError, ValueError, KeyError) as exc:
            raise bench.ConfigError(f"cannot load instance {args.instance}: {exc}") from exc
    else:
        inst = _make_instance(args)
    res = solve(inst, config)
    rel = frobenius(inst.truth - res.estimate) / frobenius(inst.truth)
    trace_path = _out_dir(args, ".") / f"trace_{inst.seed}.csv"
    write_trace_csv(trace_path, res.trace)
    print(f"RelError {rel:.6e}  iterations {res.iterations}  status {res.status}")
    print(trace_path)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.config:
        raise bench.ConfigError("sweep needs --config FILE")
    spec = bench.load_spec(args.config)
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.out is not None:
        changes["out"] = args.out
    if changes:
        try:
            spec = spec.replace(**changes)
        except (TypeError, ValueError) as exc:
            raise bench.ConfigError(str(exc)) from exc
    if args.threads < 1:
        raise bench.ConfigError("--threads must be >= 1")
    records = bench.run_spec(spec, args.threads)
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    bench.write_records_csv(out / f"{spec.name}.csv", records)
    bench.write_timing_json(out / f"{spec.name}.timing.json", records)
    bench.write_plot(out / f"{spec.name}.svg", records, title=spec.name)
    bench.save_spec(out / f"{spec.name}.spec.json", spec)
    for rec in records:
        if rec.kind == "mean":
            print(f"{spec.axis}={rec.value:<10g} p={rec.p:<4g} mean RelError {rec.rel_error:.6e}")
    print(out / f"{spec.name}.csv")
    return EXIT_OK


def cmd_theory(args) -> int:
    delta = args.delta

    def pick(value, fallback):
        return fallback if value is None else value

    try:
        if delta is None and None in (args.delta_2ar, args.delta_a1r, args.delta_r):
            raise ValueError("give --delta or all of --delta-2ar, --delta-a1r, --delta-r")
        inputs = theory.TheoryInputs(
            p=args.p, a=args.a, r=args.r,
            delta_2ar=pick(args.delta_2ar, delta), delta_a1r=pick(args.delta_a1r, delta),
            delta_r=pick(args.delta_r, delta), eps_A=args.eps_A,
            eps_A_r=pick(args.eps_A_r, args.eps_A), eps_A_2ar=pick(args.eps_A_2ar, args.eps_A),
            eps_A_a1r=pick(args.eps_A_a1r, args.eps_A), eps_y=args.eps_y,
            op_norm=args.op_norm)
    except ValueError as exc:
        raise bench.ConfigError(str(exc)) from exc
    stats = theory.MatrixStats(args.t_r, args.s_r, args.y_norm, args.tail)
    report = theory.evaluate(inputs, stats, args.variant)
    print(theory.format_report(report))
    if args.out:
        theory.write_reports_csv(_out_dir(args, ".") / "theory.csv", [report])
    return EXIT_OK


def cmd_verify(args) -> int:
    report = verify_suite(args.seed or 0)
    for prop in report["properties"]:
        mark = "PASS" if prop["passed"] else ("FAIL" if prop["hard"] else "WARN")
        print(f"{mark} {prop['name']:<24} cases={prop['cases']:<6} "
              f"violations={prop['violations']:<4} worst_margin={prop['worst_margin']:.3e}")
    if args.out:
        path = _out_dir(args, ".") / "verify.json"
        write_report(path, report)
        print(path)
    return EXIT_OK if report["passed"] else EXIT_VERIFY_FAILED


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "sweep": cmd_sweep,
            "theory": cmd_theory, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except bench.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
