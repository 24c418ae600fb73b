"""Seeded instance generation, metrics and desk-scale experiment protocols.

Every experiment is a pure function of a JSON-style config dict.  Instances
derive from a 64-bit seed through ``numpy`` ``SeedSequence`` spawn keys, so
reruns with the same config produce byte-identical CSV output regardless of
worker count.  The chosen generator (PCG64) is recorded in the metadata
sidecar next to each CSV.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import make_baseline
from .errors import InfeasibleNoiseLevelError, KernelConstructionFailedError
from .penalty import PenaltySequence, QuadraticEnvelope, cardinality
from .solver import (
    MatrixProblem,
    SolverConfig,
    VectorProblem,
    fbs_solve,
    fbs_solve_matrix,
    objective_value,
)

__all__ = [
    "InstanceSpec",
    "TrialRecord",
    "gen_instance",
    "fourier_identity_matrix",
    "metric_support_diff",
    "relative_error",
    "composite_score",
    "line_search_parameter",
    "make_method",
    "experiment_robustness",
    "experiment_sparsity",
    "experiment_local_minima",
    "experiment_matrix",
    "run_experiment",
    "write_rows_csv",
    "derive_seed",
    "MAG_FLOOR",
]

#: default ground-truth magnitude floor (2 * sqrt(2))
MAG_FLOOR = 2.0 * math.sqrt(2.0)

_PRNG_NOTE = "numpy PCG64 via SeedSequence(entropy=seed, spawn_key=...)"


# ---------------------------------------------------------------------------
# instance generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceSpec:
    """Recipe for one synthetic instance, deterministic in ``seed``."""

    kind: str  # gaussian_normalized | fourier_identity | matrix_gaussian_op
    m: int = 0
    n: int = 0
    rows: int = 0
    cols: int = 0
    p: int = 0
    card_min: int = 1
    card_max: int = 1
    mag_min: float = MAG_FLOOR
    noise_level: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in ("gaussian_normalized", "fourier_identity", "matrix_gaussian_op"):
            raise ValueError(f"unknown instance kind {self.kind!r}")
        if self.mag_min <= 0:
            raise ValueError("mag_min must be positive")
        if not 0.0 <= self.noise_level < 1.0:
            raise ValueError("noise_level must lie in [0, 1)")
        dim = min(self.rows, self.cols) if self.kind == "matrix_gaussian_op" else self.n
        if not 1 <= self.card_min <= self.card_max <= dim:
            raise ValueError("need 1 <= card_min <= card_max <= dimension")
        if self.kind == "fourier_identity" and self.n != 2 * self.m:
            raise ValueError("fourier_identity needs n = 2 m")


@dataclass(frozen=True)
class TrialRecord:
    """One solve outcome inside an experiment."""

    instance_id: str
    method: str
    param: float | str
    rel_err: float
    support_diff: int
    iterations: int
    wall_time: float


def _noise_scale(clean: np.ndarray, direction: np.ndarray, level: float) -> float:
    """Length ``t`` with ``t = level * ||clean + t * direction||``.

    Single positive root of the induced quadratic; ``level = 0`` gives 0.
    """
    if level == 0.0:
        return 0.0
    d = float(clean @ direction)
    cc = float(clean @ clean)
    lvl2 = level * level
    disc = lvl2 * d * d + (1.0 - lvl2) * cc
    if cc == 0.0 or disc < 0.0:
        raise InfeasibleNoiseLevelError(f"no positive noise length at level {level}")
    t = (lvl2 * d + level * math.sqrt(disc)) / (1.0 - lvl2)
    if t <= 0.0:
        raise InfeasibleNoiseLevelError(f"no positive noise length at level {level}")
    return t


def fourier_identity_matrix(m: int) -> np.ndarray:
    """Realified concatenation of the unitary DFT with the identity.

    The complex matrix has ``m`` rows and ``2 m`` unit-norm columns and
    mutual coherence ``1 / sqrt(m)``; stacking real over imaginary parts
    gives a ``2m x 2m`` real matrix acting on real unknowns.
    """
    j = np.arange(m)
    phase = -2.0 * np.pi * np.outer(j, j) / m
    f_re = np.cos(phase) / math.sqrt(m)
    f_im = np.sin(phase) / math.sqrt(m)
    top = np.hstack([f_re, np.eye(m)])
    bot = np.hstack([f_im, np.zeros((m, m))])
    return np.vstack([top, bot])


def _sparse_truth(rng, n, spec: InstanceSpec) -> np.ndarray:
    card = int(rng.integers(spec.card_min, spec.card_max + 1))
    support = rng.choice(n, size=card, replace=False)
    signs = rng.choice(np.array([-1.0, 1.0]), size=card)
    mags = rng.uniform(spec.mag_min, 4.0 * spec.mag_min, size=card)
    x0 = np.zeros(n)
    x0[support] = signs * mags
    return x0


def gen_instance(spec: InstanceSpec):
    """Build ``(problem, truth, noise)`` deterministically from the seed.

    Draw order: matrix, support, signs, magnitudes, noise direction.  The
    noise direction is uniform on the sphere and scaled so that
    ``||eps|| / ||b||`` equals ``noise_level`` exactly.
    """
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence(int(spec.seed)))

    if spec.kind == "matrix_gaussian_op":
        r, c, p = spec.rows, spec.cols, spec.p
        op = rng.standard_normal((p, r * c))
        op /= np.linalg.norm(op, axis=0)
        rank = int(rng.integers(spec.card_min, spec.card_max + 1))
        u, _ = np.linalg.qr(rng.standard_normal((r, rank)))
        v, _ = np.linalg.qr(rng.standard_normal((c, rank)))
        svals = rng.uniform(spec.mag_min, 4.0 * spec.mag_min, size=rank)
        truth = (u * svals) @ v.T
        clean = op @ truth.reshape(-1)
        direction = rng.standard_normal(p)
        direction /= np.linalg.norm(direction)
        t = _noise_scale(clean, direction, spec.noise_level)
        eps = t * direction
        return MatrixProblem(op=op, b=clean + eps, rows=r, cols=c), truth, eps

    if spec.kind == "gaussian_normalized":
        A = rng.standard_normal((spec.m, spec.n))
        A /= np.linalg.norm(A, axis=0)
        realified = False
    else:  # fourier_identity
        A = fourier_identity_matrix(spec.m)
        realified = True

    x0 = _sparse_truth(rng, spec.n, spec)
    clean = A @ x0
    direction = rng.standard_normal(clean.shape[0])
    direction /= np.linalg.norm(direction)
    t = _noise_scale(clean, direction, spec.noise_level)
    eps = t * direction
    return VectorProblem(A=A, b=clean + eps, realified=realified), x0, eps


def derive_seed(base: int, *key: int) -> int:
    """Stable 64-bit child seed for a trial index path."""
    ss = np.random.SeedSequence(entropy=int(base), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def metric_support_diff(x_hat, x0, zero_tol: float) -> int:
    """Cardinality of the symmetric difference of the two supports."""
    if zero_tol <= 0:
        raise ValueError("zero_tol must be positive")
    a = np.abs(np.asarray(x_hat, dtype=float)).reshape(-1) > zero_tol
    b = np.abs(np.asarray(x0, dtype=float)).reshape(-1) > zero_tol
    return int(np.sum(a ^ b))


def relative_error(x_hat, x0) -> float:
    x_hat = np.asarray(x_hat, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    return float(np.linalg.norm(x_hat - x0) / np.linalg.norm(x0))


def composite_score(x_hat, x0, zero_tol: float = 1e-6) -> float:
    """``0.8 * S_m / card(x0) + 0.2 * rel_err`` used for parameter selection."""
    sm = metric_support_diff(x_hat, x0, zero_tol)
    return 0.8 * sm / cardinality(x0, zero_tol) + 0.2 * relative_error(x_hat, x0)


# ---------------------------------------------------------------------------
# methods and parameter search
# ---------------------------------------------------------------------------


def make_method(mdef: dict, n: int, param: float | None = None):
    """Instantiate a regularizer from a method definition.

    Envelope methods: ``{"kind": "envelope", "family": "constant" |
    "capped" | "fixed_cardinality", "mu": ..., "kmax": ...}``.  Baselines
    take their weight from ``param`` (line search) or ``lambda`` (fixed).
    """
    kind = mdef["kind"]
    if kind == "envelope":
        family = mdef.get("family", "capped")
        mu = float(mdef.get("mu", 2.0))
        kmax = int(mdef.get("kmax", n))
        if family == "constant":
            seq = PenaltySequence.constant(mu, n)
        elif family == "capped":
            seq = PenaltySequence.capped(mu, kmax, n)
        elif family == "fixed_cardinality":
            seq = PenaltySequence.fixed_cardinality(kmax, n)
        else:
            raise ValueError(f"unknown envelope family {family!r}")
        return QuadraticEnvelope(seq)
    lam = param if param is not None else mdef.get("lambda")
    if lam is None:
        raise ValueError(f"method {mdef.get('name', kind)!r} needs a parameter")
    return make_baseline(kind, float(lam), a=float(mdef.get("a", 3.7)), p=mdef.get("p"))


def line_search_parameter(
    mdef: dict,
    problem: VectorProblem,
    x0_true,
    grid,
    score: str = "rel_err",
    start=None,
    config: SolverConfig | None = None,
    zero_tol: float = 1e-6,
):
    """Pick the grid parameter minimizing the selected score for one instance.

    ``score`` is ``rel_err`` or ``composite``; ties resolve toward the
    smaller parameter.  Returns ``(best_param, best_score)``.
    """
    if len(grid) == 0:
        raise ValueError("grid must be nonempty")
    config = config or SolverConfig(record_trace=False)
    best_param, best_score = None, math.inf
    for lam in sorted(float(v) for v in grid):
        reg = make_method(mdef, problem.n, param=lam)
        res = fbs_solve(problem, reg, config, x0=start)
        if score == "rel_err":
            s = relative_error(res.x, x0_true)
        elif score == "composite":
            s = composite_score(res.x, x0_true, zero_tol)
        else:
            raise ValueError(f"unknown score {score!r}")
        if s < best_score:
            best_param, best_score = lam, s
    return best_param, best_score


# ---------------------------------------------------------------------------
# experiment plumbing
# ---------------------------------------------------------------------------


def _n_workers() -> int:
    env = os.environ.get("QENV_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map_ordered(fn, items):
    workers = min(_n_workers(), max(1, len(items)))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt_cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows_csv(path, fieldnames, rows) -> None:
    """Deterministic CSV writer (repr floats, LF newlines)."""
    lines = [",".join(fieldnames)]
    for row in rows:
        lines.append(",".join(_fmt_cell(row[k]) for k in fieldnames))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def _write_metadata(path, config, extra) -> None:
    from . import __version__

    meta = {
        "config": config,
        "prng": _PRNG_NOTE,
        "numpy_version": np.__version__,
        "package": f"qenvelope {__version__}",
    }
    meta.update(extra)
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")


def _solver_config(config: dict, **overrides) -> SolverConfig:
    opts = dict(config.get("solver", {}))
    opts.setdefault("max_iter", 3000)
    opts.setdefault("x_tol", 1e-10)
    opts.setdefault("record_trace", True)
    opts.update(overrides)
    return SolverConfig(**opts)


def _max_ascent(result) -> float:
    if result.objective_trace is None or len(result.objective_trace) < 2:
        return 0.0
    return float(np.max(np.diff(result.objective_trace), initial=0.0))


def _std(values) -> float:
    arr = np.asarray(values, dtype=float)
    return float(np.std(arr))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def experiment_robustness(config: dict):
    """Mean recovery error per noise level and method.

    Envelope methods start from zero with their stated penalty; baselines
    are line-searched per instance or run at one fixed parameter chosen to
    minimize the overall mean error (``parameter_mode`` = ``line_search`` or
    ``fixed``).
    """
    t0 = time.perf_counter()
    base_seed = int(config.get("seed", 0))
    trials = int(config.get("trials", 10))
    levels = [float(v) for v in config.get("levels", [0.025 * i for i in range(11)])]
    inst = dict(config["instance"])
    methods = config["methods"]
    mode = config.get("parameter_mode", "line_search")
    zero_tol = float(config.get("zero_tol", 1e-6))
    solver_cfg = _solver_config(config)
    ascents = []

    def run_trial(args):
        li, ti = args
        spec = InstanceSpec(
            **{**inst, "noise_level": levels[li], "seed": derive_seed(base_seed, li, ti)}
        )
        problem, x0_true, _ = gen_instance(spec)
        out = {}
        for mdef in methods:
            name = mdef["name"]
            if mdef["kind"] == "envelope":
                reg = make_method(mdef, problem.n)
                res = fbs_solve(problem, reg, solver_cfg)
                ascents.append(_max_ascent(res))
                out[name] = {
                    "param": float(mdef.get("mu", 0.0)),
                    "rel_err": relative_error(res.x, x0_true),
                    "sm": metric_support_diff(res.x, x0_true, zero_tol),
                }
            else:
                per_param = {}
                for lam in mdef["grid"]:
                    reg = make_method(mdef, problem.n, param=float(lam))
                    res = fbs_solve(problem, reg, solver_cfg)
                    ascents.append(_max_ascent(res))
                    per_param[float(lam)] = {
                        "rel_err": relative_error(res.x, x0_true),
                        "sm": metric_support_diff(res.x, x0_true, zero_tol),
                    }
                out[name] = per_param
        return out

    jobs = [(li, ti) for li in range(len(levels)) for ti in range(trials)]
    results = _map_ordered(run_trial, jobs)

    by_cell = {}
    for (li, ti), out in zip(jobs, results):
        by_cell[(li, ti)] = out

    # fixed-parameter mode: per method, one grid value minimizing the mean
    # error across all levels and trials
    fixed_param = {}
    for mdef in methods:
        if mdef["kind"] == "envelope":
            continue
        if mode == "fixed":
            grid = [float(v) for v in mdef["grid"]]
            means = {
                lam: float(
                    np.mean(
                        [by_cell[j][mdef["name"]][lam]["rel_err"] for j in jobs]
                    )
                )
                for lam in grid
            }
            fixed_param[mdef["name"]] = min(sorted(grid), key=lambda lam: means[lam])

    rows = []
    for li, level in enumerate(levels):
        for mdef in methods:
            name = mdef["name"]
            errs, sms, params = [], [], []
            for ti in range(trials):
                cell = by_cell[(li, ti)][name]
                if mdef["kind"] == "envelope":
                    errs.append(cell["rel_err"])
                    sms.append(cell["sm"])
                    params.append(cell["param"])
                elif mode == "fixed":
                    lam = fixed_param[name]
                    errs.append(cell[lam]["rel_err"])
                    sms.append(cell[lam]["sm"])
                    params.append(lam)
                else:
                    lam = min(sorted(cell), key=lambda v: (cell[v]["rel_err"], v))
                    errs.append(cell[lam]["rel_err"])
                    sms.append(cell[lam]["sm"])
                    params.append(lam)
            rows.append(
                {
                    "level": level,
                    "method": name,
                    "param": float(np.mean(params)),
                    "rel_err_mean": float(np.mean(errs)),
                    "rel_err_std": _std(errs),
                    "sm_mean": float(np.mean(sms)),
                    "sm_std": _std(sms),
                    "trials": trials,
                }
            )

    fieldnames = [
        "level",
        "method",
        "param",
        "rel_err_mean",
        "rel_err_std",
        "sm_mean",
        "sm_std",
        "trials",
    ]
    extra = {"max_trace_ascent": max(ascents, default=0.0), "elapsed_s": time.perf_counter() - t0}
    if "out" in config:
        write_rows_csv(config["out"], fieldnames, rows)
        _write_metadata(config["out"], config, extra)
    return rows, extra


def experiment_sparsity(config: dict):
    """Mean and spread of error and support mismatch across starts.

    ``start_mode = "random_ball"`` runs many starts on one instance with
    start norms uniform in ``ball`` times the truth norm;
    ``"pseudoinverse"`` runs one minimum-norm least-squares start on each of
    many instances.  Baseline parameters are line-searched per instance on
    the composite score.
    """
    t0 = time.perf_counter()
    base_seed = int(config.get("seed", 0))
    n_trials = int(config.get("n_trials", 250))
    start_mode = config.get("start_mode", "random_ball")
    ball = config.get("ball", [0.2, 3.0])
    inst = dict(config["instance"])
    methods = config["methods"]
    zero_tol = float(config.get("zero_tol", 1e-6))
    solver_cfg = _solver_config(config)
    ascents = []

    if start_mode == "random_ball":
        spec = InstanceSpec(**{**inst, "seed": derive_seed(base_seed, 0)})
        problem, x0_true, _ = gen_instance(spec)
        truth_norm = float(np.linalg.norm(x0_true))

        def start_for(ti):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=base_seed, spawn_key=(1, ti))
            )
            u = rng.standard_normal(problem.n)
            u /= np.linalg.norm(u)
            return rng.uniform(ball[0] * truth_norm, ball[1] * truth_norm) * u

        instances = [(problem, x0_true, start_for(ti)) for ti in range(n_trials)]
    elif start_mode == "pseudoinverse":
        instances = []
        for ti in range(n_trials):
            spec = InstanceSpec(**{**inst, "seed": derive_seed(base_seed, ti)})
            problem, x0_true, _ = gen_instance(spec)
            start = np.linalg.lstsq(problem.A, problem.b, rcond=None)[0]
            instances.append((problem, x0_true, start))
    else:
        raise ValueError(f"unknown start_mode {start_mode!r}")

    # per-instance baseline parameters (composite score, as in the tables)
    param_cache = {}
    for mdef in methods:
        if mdef["kind"] == "envelope":
            continue
        name = mdef["name"]
        if start_mode == "random_ball":
            problem, x0_true, _ = instances[0]
            lam, _ = _line_search_mean_composite(
                mdef, problem, x0_true, [s for _, _, s in instances], solver_cfg, zero_tol
            )
            param_cache[name] = {0: lam}
        else:
            param_cache[name] = {}
            for ti, (problem, x0_true, start) in enumerate(instances):
                lam, _ = line_search_parameter(
                    mdef,
                    problem,
                    x0_true,
                    mdef["grid"],
                    score="composite",
                    start=start,
                    config=solver_cfg,
                    zero_tol=zero_tol,
                )
                param_cache[name][ti] = lam

    def run_trial(ti):
        problem, x0_true, start = instances[ti]
        out = {}
        for mdef in methods:
            name = mdef["name"]
            if mdef["kind"] == "envelope":
                reg = make_method(mdef, problem.n)
                param = float(mdef.get("mu", 0.0))
            else:
                param = param_cache[name][0 if start_mode == "random_ball" else ti]
                reg = make_method(mdef, problem.n, param=param)
            tick = time.perf_counter()
            res = fbs_solve(problem, reg, solver_cfg, x0=start)
            ascents.append(_max_ascent(res))
            out[name] = TrialRecord(
                instance_id=f"sparsity-{start_mode}-{ti}",
                method=name,
                param=param,
                rel_err=relative_error(res.x, x0_true),
                support_diff=metric_support_diff(res.x, x0_true, zero_tol),
                iterations=res.iterations,
                wall_time=time.perf_counter() - tick,
            )
        return out

    results = _map_ordered(run_trial, list(range(n_trials)))

    rows = []
    for mdef in methods:
        name = mdef["name"]
        errs = [results[ti][name].rel_err for ti in range(n_trials)]
        sms = [results[ti][name].support_diff for ti in range(n_trials)]
        params = [results[ti][name].param for ti in range(n_trials)]
        rows.append(
            {
                "level": float(inst.get("noise_level", 0.0)),
                "method": name,
                "param": float(np.mean(params)),
                "rel_err_mean": float(np.mean(errs)),
                "rel_err_std": _std(errs),
                "sm_mean": float(np.mean(sms)),
                "sm_std": _std(sms),
                "trials": n_trials,
            }
        )

    fieldnames = [
        "level",
        "method",
        "param",
        "rel_err_mean",
        "rel_err_std",
        "sm_mean",
        "sm_std",
        "trials",
    ]
    extra = {"max_trace_ascent": max(ascents, default=0.0), "elapsed_s": time.perf_counter() - t0}
    if "out" in config:
        write_rows_csv(config["out"], fieldnames, rows)
        _write_metadata(config["out"], config, extra)
    return rows, extra


def _line_search_mean_composite(mdef, problem, x0_true, starts, solver_cfg, zero_tol):
    """Grid value minimizing the mean composite score across all starts."""
    best_lam, best = None, math.inf
    for lam in sorted(float(v) for v in mdef["grid"]):
        reg = make_method(mdef, problem.n, param=lam)
        scores = []
        for start in starts:
            res = fbs_solve(problem, reg, solver_cfg, x0=start)
            scores.append(composite_score(res.x, x0_true, zero_tol))
        mean = float(np.mean(scores))
        if mean < best:
            best_lam, best = lam, mean
    return best_lam, best


def _dense_kernel_points(problem, x_ls, n_points, mag_floor, seed, attempts=1000):
    """Least-squares points shifted by dense kernel vectors above the floor."""
    A = problem.A
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(s > s[0] * 1e-12))
    basis = vt[rank:]  # kernel basis, rows orthonormal
    if basis.shape[0] < n_points:
        raise KernelConstructionFailedError(
            f"kernel dimension {basis.shape[0]} below requested {n_points} points"
        )
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(97,)))
    points = []
    coefs = []
    for j in range(n_points):
        for attempt in range(attempts):
            c = rng.standard_normal(basis.shape[0])
            v = c @ basis
            if np.min(np.abs(v)) <= 1e-12:
                continue
            t = float(np.max((1.05 * mag_floor + np.abs(x_ls)) / np.abs(v)))
            p = x_ls + t * v
            if np.min(np.abs(p)) > mag_floor:
                points.append(p)
                coefs.append(t * c)
                break
        else:
            raise KernelConstructionFailedError(
                f"no valid scaling for kernel point {j} after {attempts} attempts"
            )
    if np.linalg.matrix_rank(np.array(coefs)) < n_points:
        raise KernelConstructionFailedError("kernel points are not linearly independent")
    return points


def experiment_local_minima(config: dict):
    """Count dense least-squares points that behave as local minima.

    A point counts as detected for a method when the solver started there
    moves less than ``move_tol`` and no probe (coordinate steps of size
    ``probe_eps`` in both directions plus seeded random directions) strictly
    improves the objective.
    """
    t0 = time.perf_counter()
    base_seed = int(config.get("seed", 0))
    n_points = int(config.get("n_points", 100))
    move_tol = float(config.get("move_tol", 1e-6))
    probe_eps = float(config.get("probe_eps", 1e-3))
    n_random_probes = int(config.get("n_random_probes", 20))
    mag_floor = float(config.get("mag_floor", MAG_FLOOR))
    inst = dict(config["instance"])
    methods = config["methods"]
    solver_cfg = _solver_config(config, max_iter=int(config.get("solver", {}).get("max_iter", 400)))
    ascents = []

    spec = InstanceSpec(**{**inst, "seed": derive_seed(base_seed, 0)})
    problem, _, _ = gen_instance(spec)
    x_ls = np.linalg.lstsq(problem.A, problem.b, rcond=None)[0]
    points = _dense_kernel_points(problem, x_ls, n_points, mag_floor, base_seed)

    rng = np.random.default_rng(np.random.SeedSequence(entropy=base_seed, spawn_key=(11,)))
    rand_dirs = rng.standard_normal((n_random_probes, problem.n))
    rand_dirs /= np.linalg.norm(rand_dirs, axis=1, keepdims=True)

    def probe_improves(reg, p, obj_p):
        for i in range(problem.n):
            for sgn in (1.0, -1.0):
                q = p.copy()
                q[i] += sgn * probe_eps
                if objective_value(problem, reg, q) < obj_p:
                    return True
        for d in rand_dirs:
            if objective_value(problem, reg, p + probe_eps * d) < obj_p:
                return True
        return False

    def run_method(mdef):
        name = mdef["name"]
        reg = make_method(mdef, problem.n, param=mdef.get("lambda"))
        detected = 0
        for p in points:
            res = fbs_solve(problem, reg, solver_cfg, x0=p)
            ascents.append(_max_ascent(res))
            moved = float(np.linalg.norm(res.x - p))
            if moved >= move_tol:
                continue
            obj_p = objective_value(problem, reg, p)
            if not probe_improves(reg, p, obj_p):
                detected += 1
        return {"method": name, "detected": detected, "trials": n_points}

    rows = _map_ordered(run_method, methods)

    fieldnames = ["method", "detected", "trials"]
    extra = {"max_trace_ascent": max(ascents, default=0.0), "elapsed_s": time.perf_counter() - t0}
    if "out" in config:
        write_rows_csv(config["out"], fieldnames, rows)
        _write_metadata(config["out"], config, extra)
    return rows, extra


def experiment_matrix(config: dict):
    """Low-rank operator recovery and rank-versus-data-fit sweeps.

    For each measurement count and noise level, solves with hard rank caps
    and records the relative recovery error and residual norm per cap.
    """
    t0 = time.perf_counter()
    base_seed = int(config.get("seed", 0))
    rows_dim = int(config.get("rows", 10))
    cols_dim = int(config.get("cols", 10))
    rank = int(config.get("rank", 2))
    p_values = [int(v) for v in config.get("p_values", [80, 120, 160])]
    noise_levels = [float(v) for v in config.get("noise_levels", [0.0, 0.05])]
    kmax_lo, kmax_hi = config.get("kmax_range", [1, 6])
    solver_cfg = _solver_config(config)
    ascents = []

    rows = []
    for pi, p in enumerate(p_values):
        for ni, level in enumerate(noise_levels):
            spec = InstanceSpec(
                kind="matrix_gaussian_op",
                rows=rows_dim,
                cols=cols_dim,
                p=p,
                card_min=rank,
                card_max=rank,
                mag_min=float(config.get("mag_min", MAG_FLOOR)),
                noise_level=level,
                seed=derive_seed(base_seed, pi, ni),
            )
            problem, truth, _ = gen_instance(spec)
            for kmax in range(int(kmax_lo), int(kmax_hi) + 1):
                seq = PenaltySequence.fixed_cardinality(kmax, min(rows_dim, cols_dim))
                res = fbs_solve_matrix(problem, QuadraticEnvelope(seq), solver_cfg)
                ascents.append(_max_ascent(res))
                fit = float(np.linalg.norm(problem.op @ res.x.reshape(-1) - problem.b))
                rows.append(
                    {
                        "p": p,
                        "noise": level,
                        "kmax": kmax,
                        "rel_err": float(
                            np.linalg.norm(res.x - truth) / np.linalg.norm(truth)
                        ),
                        "data_fit": fit,
                    }
                )

    fieldnames = ["p", "noise", "kmax", "rel_err", "data_fit"]
    extra = {"max_trace_ascent": max(ascents, default=0.0), "elapsed_s": time.perf_counter() - t0}
    if "out" in config:
        write_rows_csv(config["out"], fieldnames, rows)
        _write_metadata(config["out"], config, extra)
    return rows, extra


_EXPERIMENTS = {
    "robustness": experiment_robustness,
    "sparsity": experiment_sparsity,
    "localmin": experiment_local_minima,
    "matrix": experiment_matrix,
}


def run_experiment(config: dict):
    """Dispatch on ``config["experiment"]``; returns ``(rows, metadata)``."""
    name = config.get("experiment")
    if name not in _EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}")
    return _EXPERIMENTS[name](config)
