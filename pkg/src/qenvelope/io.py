"""Text formats for problems, vectors and solve results.

A problem file is a JSON header line ``{"m": ..., "n": ..., "realified": ...}``
followed by the matrix in row-major whitespace-separated text and then the
``b`` vector.  Vector files are plain whitespace-separated numbers.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .solver import SolveResult, VectorProblem

__all__ = [
    "read_problem",
    "write_problem",
    "read_vector",
    "write_vector",
    "result_to_dict",
    "write_result_json",
    "write_trace_csv",
]


def write_problem(path, problem: VectorProblem) -> None:
    lines = [json.dumps({"m": problem.m, "n": problem.n, "realified": problem.realified})]
    for row in problem.A:
        lines.append(" ".join(repr(v) for v in row.tolist()))
    lines.append(" ".join(repr(v) for v in problem.b.tolist()))
    Path(path).write_text("\n".join(lines) + "\n")


def read_problem(path) -> VectorProblem:
    text = Path(path).read_text()
    newline = text.index("\n")
    header = json.loads(text[:newline])
    m, n = int(header["m"]), int(header["n"])
    realified = bool(header.get("realified", False))
    tokens = np.array(text[newline:].split(), dtype=float)
    if tokens.shape[0] != m * n + m:
        raise ValueError(
            f"expected {m * n + m} numbers after the header, found {tokens.shape[0]}"
        )
    A = tokens[: m * n].reshape(m, n)
    b = tokens[m * n :]
    return VectorProblem(A=A, b=b, realified=realified)


def write_vector(path, v) -> None:
    v = np.asarray(v, dtype=float).reshape(-1)
    Path(path).write_text(" ".join(repr(x) for x in v.tolist()) + "\n")


def read_vector(path) -> np.ndarray:
    return np.array(Path(path).read_text().split(), dtype=float)


def result_to_dict(result: SolveResult, rel_err: float | None = None) -> dict:
    """JSON-ready view of a result, trace excluded."""
    out = {
        "iterations": result.iterations,
        "converged": result.converged,
        "final_objective": result.final_objective,
        "stationarity_residual": result.stationarity_residual,
        "step": result.step,
        "x": np.asarray(result.x, dtype=float).reshape(-1).tolist(),
    }
    if rel_err is not None:
        out["rel_err"] = rel_err
    return out


def write_result_json(path, result: SolveResult, rel_err: float | None = None) -> None:
    Path(path).write_text(json.dumps(result_to_dict(result, rel_err), indent=2) + "\n")


def write_trace_csv(path, result: SolveResult) -> None:
    """Per-iteration objective and residual norm, one row per iterate."""
    if result.objective_trace is None:
        raise ValueError("result carries no trace; solve with record_trace=True")
    lines = ["iteration,objective,residual"]
    res = result.residual_trace
    for i, obj in enumerate(result.objective_trace.tolist()):
        r = res[i] if res is not None else float("nan")
        lines.append(f"{i},{obj!r},{r!r}")
    Path(path).write_text("\n".join(lines) + "\n")
