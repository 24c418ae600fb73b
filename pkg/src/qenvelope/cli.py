"""Command-line interface: solving, certification, diagnostics, experiments.

Exit codes: 0 success (or certificate holds), 1 usage or input error,
2 non-convergence (or certificate does not hold), 3 enumeration budget
exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, harness, io
from .errors import (
    BudgetExceededError,
    DeltaOutOfRangeError,
    DimensionMismatchError,
    NotTightPointError,
    ProxFailureError,
    StepTooLargeError,
)
from .penalty import QuadraticEnvelope, penalty_from_spec
from .solver import SolverConfig, fbs_solve


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="qenv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run the forward-backward solver")
    p_solve.add_argument("--problem", required=True, help="problem file")
    p_solve.add_argument("--penalty", required=True, help="penalty spec or @file.json")
    p_solve.add_argument("--config", required=True, help="solver config JSON file")
    p_solve.add_argument("--x0", help="start vector file (default: zero)")
    p_solve.add_argument("--truth", help="ground-truth vector file (adds rel_err)")
    p_solve.add_argument("--out", required=True, help="result JSON path")
    p_solve.add_argument("--trace-out", help="per-iteration CSV trace path")
    p_solve.set_defaults(func=_cmd_solve)

    p_cert = sub.add_parser("certify", help="evaluate a certificate at a point")
    p_cert.add_argument("--problem", required=True)
    p_cert.add_argument("--point", required=True, help="vector file with the point")
    p_cert.add_argument("--penalty", required=True)
    p_cert.add_argument("--theorem", required=True, choices=["1", "2", "3"])
    p_cert.add_argument("--delta-r", type=float, help="RIP constant for theorem 2")
    p_cert.add_argument("--delta-k", type=float, help="RIP constant of order k (theorem 3)")
    p_cert.add_argument("--delta-2k", type=float, help="RIP constant of order 2k (theorem 3)")
    p_cert.add_argument("--r", type=int, help="RIP order for theorem 2 (default 2k)")
    p_cert.add_argument(
        "--rip-bruteforce",
        action="store_true",
        help="compute missing RIP constants by enumeration",
    )
    p_cert.add_argument("--rip-budget", type=int, default=200000)
    p_cert.add_argument("--out", help="write the certificate JSON here")
    p_cert.set_defaults(func=_cmd_certify)

    p_rip = sub.add_parser("rip", help="restricted isometry constant")
    p_rip.add_argument("--problem", required=True)
    p_rip.add_argument("--r", type=int, required=True)
    p_rip.add_argument("--budget", type=int, required=True)
    p_rip.add_argument("--mode", choices=["auto", "exact", "sample"], default="auto")
    p_rip.add_argument("--seed", type=int, default=0)
    p_rip.set_defaults(func=_cmd_rip)

    p_coh = sub.add_parser("coherence", help="mutual coherence of the problem matrix")
    p_coh.add_argument("--problem", required=True)
    p_coh.set_defaults(func=_cmd_coherence)

    p_bench = sub.add_parser("bench", help="run a benchmark experiment")
    p_bench.add_argument(
        "--experiment",
        required=True,
        choices=["robustness", "sparsity", "localmin", "matrix"],
    )
    p_bench.add_argument("--config", required=True, help="experiment config JSON file")
    p_bench.set_defaults(func=_cmd_bench)

    return parser


def _load_solver_config(path) -> SolverConfig:
    opts = json.loads(Path(path).read_text())
    allowed = {"max_iter", "step", "x_tol", "prox_tol", "record_trace"}
    unknown = set(opts) - allowed
    if unknown:
        raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
    return SolverConfig(**opts)


def _cmd_solve(args) -> int:
    problem = io.read_problem(args.problem)
    seq = penalty_from_spec(args.penalty, problem.n)
    config = _load_solver_config(args.config)
    x0 = io.read_vector(args.x0) if args.x0 else None
    result = fbs_solve(problem, QuadraticEnvelope(seq), config, x0=x0)
    rel_err = None
    if args.truth:
        truth = io.read_vector(args.truth)
        rel_err = harness.relative_error(result.x, truth)
    io.write_result_json(args.out, result, rel_err=rel_err)
    if args.trace_out:
        io.write_trace_csv(args.trace_out, result)
    print(
        f"iterations={result.iterations} converged={result.converged} "
        f"objective={result.final_objective:.6g}"
    )
    return 0 if result.converged else 2


def _cmd_certify(args) -> int:
    problem = io.read_problem(args.problem)
    point = io.read_vector(args.point)
    seq = penalty_from_spec(args.penalty, problem.n)

    if args.theorem == "1":
        cert = analysis.check_theorem1(point, seq, problem.A, problem.b)
    elif args.theorem == "2":
        from .penalty import cardinality

        k = cardinality(point)
        r = args.r if args.r is not None else 2 * k
        delta = args.delta_r
        if delta is None:
            if not args.rip_bruteforce:
                raise ValueError("theorem 2 needs --delta-r or --rip-bruteforce")
            delta, _ = analysis.rip_delta_bruteforce(
                problem.A, r, args.rip_budget, mode="exact"
            )
        cert = analysis.check_theorem2(point, seq, delta, r, problem=problem)
    else:
        from .penalty import cardinality

        k = cardinality(point)
        dk, d2k = args.delta_k, args.delta_2k
        if dk is None or d2k is None:
            if not args.rip_bruteforce:
                raise ValueError("theorem 3 needs --delta-k and --delta-2k or --rip-bruteforce")
            if dk is None:
                dk, _ = analysis.rip_delta_bruteforce(
                    problem.A, k, args.rip_budget, mode="exact"
                )
            if d2k is None:
                d2k, _ = analysis.rip_delta_bruteforce(
                    problem.A, 2 * k, args.rip_budget, mode="exact"
                )
        eps = problem.b - problem.A @ point
        cert = analysis.check_theorem3(point, eps, seq, dk, d2k)

    print(cert.table())
    if args.out:
        Path(args.out).write_text(cert.to_json() + "\n")
    return 0 if cert.holds else 2


def _cmd_rip(args) -> int:
    problem = io.read_problem(args.problem)
    delta, exact = analysis.rip_delta_bruteforce(
        problem.A, args.r, args.budget, mode=args.mode, seed=args.seed
    )
    print(json.dumps({"delta": delta, "exact": exact, "r": args.r}))
    return 0


def _cmd_coherence(args) -> int:
    problem = io.read_problem(args.problem)
    mu = analysis.mutual_coherence(problem.A, realified=problem.realified)
    print(json.dumps({"mutual_coherence": mu}))
    return 0


def _cmd_bench(args) -> int:
    config = json.loads(Path(args.config).read_text())
    config["experiment"] = args.experiment
    if "out" not in config:
        raise ValueError("experiment config needs an 'out' CSV path")
    print(f"running {args.experiment} -> {config['out']}", file=sys.stderr)
    harness.run_experiment(config)
    return 0


_INPUT_ERRORS = (
    OSError,
    ValueError,
    KeyError,
    json.JSONDecodeError,
    DimensionMismatchError,
    DeltaOutOfRangeError,
    StepTooLargeError,
    NotTightPointError,
)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ProxFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _INPUT_ERRORS as exc:
        print(f"error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
