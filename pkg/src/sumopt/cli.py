"""Benchmark harness: build a problem, run a method over a seed grid, and
emit a CSV trace; plus the `verify` subcommand for the inequality catalog.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
CSV schema sumopt-trace-v1: a leading `# schema=sumopt-trace-v1` comment
line, then a header row, then one row per (seed, checkpoint).  Reruns with
identical flags and seeds are byte-identical except for the wall_time_ns
column.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import diagnostics, verify
from .datasets import (
    load_libsvm,
    make_logistic,
    make_ridge_least_squares,
    worst_case_problem,
)
from .problem import UndefinedConditionError
from .solvers import METHODS, ConfigError, SolverConfig, run

SCHEMA = "sumopt-trace-v1"
COLUMNS = ("method", "ordering", "seed", "epoch", "grad_evals", "wall_time_ns",
           "step_size", "f_value", "suboptimality", "bound_value", "lyapunov")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _build_parser():
    p = argparse.ArgumentParser(
        prog="sumopt",
        description="Finite-sum solver benchmark; use the `verify` "
                    "subcommand for the inequality catalog.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="libsvm-format text file")
    src.add_argument("--synthetic", choices=("ridge", "logistic", "worstcase"))
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--loss", choices=("logistic", "squared"), default="logistic")
    p.add_argument("--l2", type=float, default=0.0, help="strong convexity mu")
    p.add_argument("--l1", type=float, default=0.0)
    p.add_argument("--standardize", action="store_true",
                   help="zero-mean unit-variance feature scaling (libsvm input)")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--ordering", choices=("cyclic", "permuted", "random", "weighted"),
                   default="random")
    p.add_argument("--step", default="auto",
                   help="'auto' for the theorem default, or a float")
    p.add_argument("--alpha", type=float, default=None,
                   help="finito inverse-step factor (default 2 under big data)")
    p.add_argument("--svrg-m", type=int, default=None)
    p.add_argument("--svrg-xtilde", choices=("last", "avg", "sampled"),
                   default="last")
    p.add_argument("--sdca-mode", choices=("exact", "linesearch", "constant"),
                   default="exact")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--reference", choices=("auto", "closedform", "longrun"),
                   default="auto")
    p.add_argument("--bounds", action="store_true",
                   help="add the theoretical envelope column")
    p.add_argument("--average", action="store_true",
                   help="checkpoint at the running average iterate (saga)")
    p.add_argument("--data-seed", type=int, default=0,
                   help="seed for synthetic data generation")
    p.add_argument("--out", required=True)
    return p


def _build_problem(args):
    if args.data is not None:
        try:
            return load_libsvm(args.data, loss=args.loss, l2=args.l2,
                               l1=args.l1, standardize=args.standardize)
        except OSError as exc:
            raise RuntimeError(f"cannot read {args.data}: {exc}") from exc
    if args.synthetic == "worstcase":
        return worst_case_problem(args.n)
    maker = make_logistic if args.loss == "logistic" else make_ridge_least_squares
    return maker(args.n, args.d, mu=args.l2, seed=args.data_seed, l1=args.l1)


def _validate(args, problem):
    needs_mu = ("finito", "proxfinito", "miso", "sdca", "sdca-primal")
    if args.method in needs_mu and problem.mu <= 0:
        raise ConfigError(f"{args.method} requires --l2 > 0")
    if args.l1 > 0 and args.method != "saga":
        raise ConfigError(f"--l1 is only supported with --method saga "
                          f"(got {args.method})")
    if args.ordering == "weighted" and problem.mu <= 0:
        raise ConfigError("weighted ordering needs --l2 > 0")
    if args.synthetic == "worstcase" and args.l1 > 0:
        raise ConfigError("the worst-case instance is non-composite")


def _reference(args, problem):
    if args.reference == "closedform":
        x = diagnostics._closed_form(problem)
        if x is None:
            raise ConfigError("no closed-form reference for this problem")
        return x, problem.objective(x)
    if args.reference == "longrun":
        x = diagnostics._long_run(problem, tol=1e-12, max_epochs=20000)
        return x, problem.objective(x)
    return diagnostics.reference_minimizer(problem)


def _rate_bound(args, problem, reference):
    method = args.method
    if method == "saga" and problem.mu <= 0:
        method = "saga_nonsc"
    if method in ("sgd", "sag", "saga2var", "sdca-primal"):
        raise ConfigError(f"--bounds is not available for {args.method}")
    try:
        return diagnostics.rate_bound(method, problem,
                                      alpha=args.alpha or 2.0,
                                      m=args.svrg_m, reference=reference)
    except diagnostics.HypothesisViolation as exc:
        raise ConfigError(str(exc)) from exc


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(f"# schema={SCHEMA}\n")
        fh.write(",".join(COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) for v in (
                r.method, r.ordering, r.seed, r.epoch, r.grad_evals,
                r.wall_time_ns, r.step_size, r.f_value, r.suboptimality,
                r.bound_value, r.lyapunov)) + "\n")


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    if argv and argv[0] == "verify":
        return EXIT_OK if verify.run_all() else 1

    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK

    try:
        problem = _build_problem(args)
        _validate(args, problem)
        reference = _reference(args, problem)
        bound = _rate_bound(args, problem, reference) if args.bounds else None
        ordering = "randomized" if args.ordering == "random" else args.ordering
        sdca_mode = ("line_search" if args.sdca_mode == "linesearch"
                     else args.sdca_mode)
        config = SolverConfig(
            method=args.method,
            step=args.step if args.step == "auto" else float(args.step),
            alpha=args.alpha,
            svrg_m=args.svrg_m,
            svrg_xtilde=args.svrg_xtilde,
            sdca_mode=sdca_mode,
        )
        seeds = range(args.seed_base, args.seed_base + args.seeds)

        def one(seed):
            return run(problem, config, ordering=ordering, epochs=args.epochs,
                       seed=seed, reference=reference, rate_bound_obj=bound,
                       record_average=args.average)

        threads = int(os.environ.get("SUMOPT_THREADS", "1"))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                traces = list(pool.map(one, seeds))
        else:
            traces = [one(s) for s in seeds]
    except (ConfigError, UndefinedConditionError, ValueError) as exc:
        print(f"sumopt: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, OSError) as exc:
        print(f"sumopt: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    rows = [row for tr in traces for row in tr.rows]
    rows.sort(key=lambda r: (r.method, r.seed, r.epoch))
    try:
        _write_csv(args.out, rows)
    except OSError as exc:
        print(f"sumopt: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def console_main():  # pragma: no cover - thin wrapper
    sys.exit(main())
