"""Instance diagnostics and optimality certificates.

Covers restricted-isometry constants by enumeration or sampling, mutual
coherence with complex pairing for realified matrices, and structured
certificates for the three stationarity/uniqueness results plus the
hard-cap corollary.  Certificates record every condition with its measured
value and signed slack; strict inequalities fail at zero slack.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError, DeltaOutOfRangeError, NotTightPointError
from .penalty import (
    PenaltySequence,
    QuadraticEnvelope,
    cardinality,
    evaluate_envelope,
    sort_decompose,
)
from .solver import (
    SolverConfig,
    VectorProblem,
    fbs_solve,
    operator_norm,
    stationarity_residual,
)

__all__ = [
    "operator_norm",
    "mutual_coherence",
    "rip_delta_bruteforce",
    "CertCondition",
    "Certificate",
    "check_theorem1",
    "check_theorem2",
    "check_theorem3",
    "check_corollary1",
    "MultistartReport",
    "multistart_uniqueness_probe",
]


# ---------------------------------------------------------------------------
# instance diagnostics
# ---------------------------------------------------------------------------


def mutual_coherence(A, realified: bool = False) -> float:
    """Largest absolute inner product between distinct columns.

    For realified complex matrices (real parts stacked over imaginary
    parts) the complex modulus of the column inner products is used.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] < 2:
        raise ValueError("mutual coherence needs a matrix with at least 2 columns")
    if realified:
        if A.shape[0] % 2 != 0:
            raise ValueError("realified matrices need an even row count")
        m = A.shape[0] // 2
        re, im = A[:m], A[m:]
        gr = re.T @ re + im.T @ im
        gi = re.T @ im - im.T @ re
        gram = np.sqrt(gr**2 + gi**2)
    else:
        gram = np.abs(A.T @ A)
    np.fill_diagonal(gram, 0.0)
    return float(np.max(gram))


def _support_deviation(A, supports) -> float:
    cols = A[:, supports]  # (m, chunk, r)
    gram = np.einsum("mci,mcj->cij", cols, cols)
    eigs = np.linalg.eigvalsh(gram)
    return float(np.max(np.abs(eigs - 1.0)))


def rip_delta_bruteforce(
    A,
    r: int,
    budget: int,
    mode: str = "auto",
    seed: int = 0,
    chunk: int = 4096,
):
    """Restricted isometry constant of order ``r`` over size-``r`` supports.

    Enumerates all supports when their count fits the budget (exact value),
    otherwise evaluates ``budget`` random supports, which lower-bounds the
    constant.  Returns ``(delta, exact)``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    if not 1 <= r <= n:
        raise ValueError(f"r = {r} outside [1, {n}]")
    if mode not in ("auto", "exact", "sample"):
        raise ValueError(f"unknown mode {mode!r}")
    total = math.comb(n, r)
    exact = mode == "exact" or (mode == "auto" and total <= budget)
    if mode == "exact" and total > budget:
        raise BudgetExceededError(
            f"C({n},{r}) = {total} supports exceed budget {budget}"
        )

    delta = 0.0
    if exact:
        combos = itertools.combinations(range(n), r)
        while True:
            block = np.array(list(itertools.islice(combos, chunk)), dtype=int)
            if block.size == 0:
                break
            delta = max(delta, _support_deviation(A, block))
    else:
        rng = np.random.default_rng(seed)
        done = 0
        while done < budget:
            take = min(chunk, budget - done)
            block = np.empty((take, r), dtype=int)
            for i in range(take):
                block[i] = rng.choice(n, size=r, replace=False)
            delta = max(delta, _support_deviation(A, block))
            done += take
    return delta, exact


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CertCondition:
    """One inequality with its measured value and signed slack."""

    name: str
    expression: str
    measured: float
    slack: float
    strict: bool

    @property
    def holds(self) -> bool:
        return self.slack > 0.0 if self.strict else self.slack >= 0.0


@dataclass(frozen=True, eq=False)
class Certificate:
    """Certificate for one result: named conditions, slacks, parameters."""

    theorem: str
    holds: bool
    conditions: tuple
    parameters: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "theorem": self.theorem,
                "holds": self.holds,
                "conditions": [
                    {
                        "name": c.name,
                        "expression": c.expression,
                        "measured": c.measured,
                        "slack": c.slack,
                        "strict": c.strict,
                        "holds": c.holds,
                    }
                    for c in self.conditions
                ],
                "parameters": self.parameters,
            },
            indent=2,
        )

    def table(self) -> str:
        """Fixed-width condition table for terminal output."""
        lines = [f"certificate {self.theorem}   holds: {'yes' if self.holds else 'no'}"]
        lines.append(f"{'condition':<22}{'required':<42}{'measured':>14}{'slack':>14}")
        for c in self.conditions:
            lines.append(
                f"{c.name:<22}{c.expression:<42}{c.measured:>14.6g}{c.slack:>14.6g}"
            )
        if self.parameters:
            pieces = ", ".join(f"{k}={_fmt_param(v)}" for k, v in self.parameters.items())
            lines.append(f"parameters: {pieces}")
        return "\n".join(lines)


def _fmt_param(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _finalize(theorem: str, conditions, parameters) -> Certificate:
    holds = all(c.holds for c in conditions)
    return Certificate(
        theorem=theorem, holds=holds, conditions=tuple(conditions), parameters=parameters
    )


def check_theorem1(o, seq: PenaltySequence, A, b) -> Certificate:
    """Certify that a fixed-cardinality least-squares point is stationary.

    Conditions: the smallest surviving magnitude clears its threshold
    strictly, and the residual norm stays within
    ``min(sqrt(g_{k+1}), o~_k) / ||A||``.  The unit-step stationarity
    residual at ``o`` is reported alongside for cross-validation.
    """
    o = np.asarray(o, dtype=float).reshape(-1)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    k = cardinality(o)
    if k < 1:
        raise ValueError("the point must have cardinality >= 1")
    om = sort_decompose(o).magnitudes
    sq = seq.thresholds()
    ok = float(om[k - 1])
    sep = CertCondition(
        name="magnitude_floor",
        expression=f"o~_{k} > sqrt(g_{k})",
        measured=ok,
        slack=ok - float(sq[k - 1]),
        strict=True,
    )
    norm_a = operator_norm(A)
    eps_norm = float(np.linalg.norm(A @ o - b))
    gk1 = float(sq[k]) if k < seq.n else math.inf
    bound = min(gk1, ok) / norm_a if norm_a > 0 else math.inf
    noise = CertCondition(
        name="noise_bound",
        expression=f"||Ao - b|| <= min(sqrt(g_{k + 1}), o~_{k}) / ||A||",
        measured=eps_norm,
        slack=bound - eps_norm,
        strict=False,
    )
    residual = stationarity_residual(VectorProblem(A=A, b=b), seq, o)
    cert = _finalize(
        "T1",
        [sep, noise],
        {
            "k": k,
            "norm_A": norm_a,
            "eps_norm": eps_norm,
            "stationarity_residual": residual,
        },
    )
    # certified points should be (numerically) stationary
    agrees = (not cert.holds) or residual <= 1e-8
    cert.parameters["cross_agrees"] = bool(agrees)
    return cert


def _interval_exclusion_slack(values, lo, hi):
    """Signed distance of each value to the outside of ``[lo, hi]``."""
    values = np.asarray(values, dtype=float)
    return np.maximum(lo - values, values - hi)


def check_theorem2(
    x,
    seq: PenaltySequence,
    delta_r: float,
    r: int,
    z=None,
    problem: VectorProblem | None = None,
) -> Certificate:
    """Certify separation conditions that isolate a sparse stationary point.

    Requires a tight ``x`` with ``k = card(x)``.  The magnitudes of ``z``
    must avoid the closed interval ``[(1 - d) sqrt(g_k), sqrt(g_k) / (1 - d)]``
    (boundary contact counts as failure) and the first discarded magnitude
    must fall strictly below ``(1 - 2 d)`` times the last kept one.  A
    passing certificate implies every other stationary point has cardinality
    above ``r - k``.
    """
    if not 0.0 <= delta_r < 1.0:
        raise DeltaOutOfRangeError(f"delta_r = {delta_r} outside [0, 1)")
    x = np.asarray(x, dtype=float).reshape(-1)
    if z is None:
        if problem is None:
            raise ValueError("supply either z or the problem to recompute it")
        z = x - problem.A.T @ (problem.A @ x - problem.b)
    z = np.asarray(z, dtype=float).reshape(-1)
    if not evaluate_envelope(seq, x).tight:
        raise NotTightPointError("x has a magnitude strictly inside (0, sqrt(g_i))")
    k = cardinality(x)
    zm = sort_decompose(z).magnitudes
    sqgk = float(seq.thresholds()[k - 1]) if k >= 1 else 0.0
    lo = (1.0 - delta_r) * sqgk
    hi = sqgk / (1.0 - delta_r)
    slacks = _interval_exclusion_slack(zm, lo, hi)
    worst = int(np.argmin(slacks))
    interval = CertCondition(
        name="threshold_gap",
        expression=f"z~_i notin [{lo:.6g}, {hi:.6g}] for all i",
        measured=float(zm[worst]),
        slack=float(slacks[worst]),
        strict=True,
    )
    zk = float(zm[k - 1]) if k >= 1 else math.inf
    zk1 = float(zm[k]) if k < zm.shape[0] else 0.0
    tail_gap = (1.0 - 2.0 * delta_r) * zk - zk1
    tail = CertCondition(
        name="order_gap",
        expression=f"z~_{k + 1} < (1 - 2 delta_r) z~_{k}",
        measured=zk1,
        slack=tail_gap if not math.isinf(zk) else math.inf,
        strict=True,
    )
    return _finalize(
        "T2",
        [interval, tail],
        {"k": k, "r": r, "delta_r": delta_r, "claim_radius": r - k},
    )


def check_theorem3(y, eps, seq: PenaltySequence, delta_k: float, delta_2k: float) -> Certificate:
    """Certify that a noisy instance admits a cardinality-``k`` stationary point.

    ``eps`` may be the noise vector or its norm.  Requires
    ``delta_2k < 1/2``.  The three conditions bound the smallest clean
    magnitude from below and sandwich the thresholds ``sqrt(g_k)`` and
    ``sqrt(g_{k+1})`` relative to the noise.
    """
    if not 0.0 <= delta_2k < 0.5:
        raise DeltaOutOfRangeError(f"delta_2k = {delta_2k} outside [0, 1/2)")
    if not 0.0 <= delta_k < 1.0:
        raise DeltaOutOfRangeError(f"delta_k = {delta_k} outside [0, 1)")
    y = np.asarray(y, dtype=float).reshape(-1)
    eps_norm = float(eps) if np.ndim(eps) == 0 else float(np.linalg.norm(eps))
    k = cardinality(y)
    if k < 1:
        raise ValueError("the clean vector must have cardinality >= 1")
    yk = float(sort_decompose(y).magnitudes[k - 1])
    sq = seq.thresholds()
    root = math.sqrt(1.0 - delta_2k)

    floor = 5.0 * eps_norm / ((1.0 - 2.0 * delta_2k) * root)
    c_floor = CertCondition(
        name="clean_floor",
        expression=f"y~_{k} > 5 ||eps|| / ((1 - 2 d2k) sqrt(1 - d2k))",
        measured=yk,
        slack=yk - floor,
        strict=True,
    )
    upper = (1.0 - delta_k) * (yk - 2.0 * eps_norm / root)
    c_gk = CertCondition(
        name="kept_threshold",
        expression=f"sqrt(g_{k}) < (1 - dk) (y~_{k} - 2 ||eps|| / sqrt(1 - d2k))",
        measured=float(sq[k - 1]),
        slack=upper - float(sq[k - 1]),
        strict=True,
    )
    lower = 3.0 * (1.0 - delta_k) * eps_norm / root
    gk1 = float(sq[k]) if k < seq.n else math.inf
    c_gk1 = CertCondition(
        name="cut_threshold",
        expression=f"sqrt(g_{k + 1}) > 3 (1 - dk) ||eps|| / sqrt(1 - d2k)",
        measured=gk1,
        slack=gk1 - lower,
        strict=True,
    )
    return _finalize(
        "T3",
        [c_floor, c_gk, c_gk1],
        {"k": k, "delta_k": delta_k, "delta_2k": delta_2k, "eps_norm": eps_norm},
    )


def check_corollary1(
    x, seq: PenaltySequence, A, b, delta_r: float
) -> Certificate:
    """Certify unique-local-minimizer conditions under a hard cardinality cap.

    Combines the separation certificate at ``r = 2k`` with ``||A|| < 1`` and
    the requirement that the penalty forbids cardinalities above ``k``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    problem = VectorProblem(A=np.asarray(A, float), b=np.asarray(b, float))
    k = cardinality(x)
    base = check_theorem2(x, seq, delta_r, 2 * k, problem=problem)
    norm_a = operator_norm(problem.A)
    c_norm = CertCondition(
        name="operator_norm",
        expression="||A|| < 1",
        measured=norm_a,
        slack=1.0 - norm_a,
        strict=True,
    )
    kmax = seq.max_cardinality()
    c_cap = CertCondition(
        name="hard_cap",
        expression=f"g_i = inf for i > {k}",
        measured=float(kmax),
        slack=float(k - kmax),
        strict=False,
    )
    params = dict(base.parameters)
    params.update({"norm_A": norm_a, "max_cardinality": kmax})
    return _finalize("C1", list(base.conditions) + [c_norm, c_cap], params)


# ---------------------------------------------------------------------------
# multistart probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MultistartReport:
    """Clusters of converged tight sparse outputs from random starts."""

    n_clusters: int
    clusters: tuple  # (representative, count) pairs
    n_eligible: int
    trials: int
    max_trace_ascent: float = 0.0


def multistart_uniqueness_probe(
    problem: VectorProblem,
    regularizer,
    trials: int,
    card_bound: int,
    seed: int = 0,
    config: SolverConfig | None = None,
    radius: float | None = None,
    cluster_tol: float = 1e-6,
    zero_tol: float = 1e-8,
) -> MultistartReport:
    """Count distinct sparse stationary points reached from random starts.

    ``regularizer`` may be a penalty sequence (envelope regularization, with
    a tightness filter on the outputs) or any regularizer.  Solves from
    ``trials`` starts drawn uniformly from a ball (radius defaults to three
    times the least-squares norm plus one), keeps converged outputs with
    cardinality at most ``card_bound`` and clusters them at ``cluster_tol``
    in Euclidean distance.
    """
    config = config or SolverConfig(max_iter=5000, record_trace=False)
    seq = None
    if isinstance(regularizer, PenaltySequence):
        seq = regularizer
        reg = QuadraticEnvelope(seq)
    else:
        reg = regularizer
        if isinstance(reg, QuadraticEnvelope):
            seq = reg.seq
    n = problem.n
    if radius is None:
        ls = np.linalg.lstsq(problem.A, problem.b, rcond=None)[0]
        radius = 3.0 * (float(np.linalg.norm(ls)) + 1.0)

    solutions = []
    ascent = 0.0
    for t in range(trials):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=int(seed), spawn_key=(t,))
        )
        direction = rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        x0 = rng.uniform(0.0, radius) * direction
        res = fbs_solve(problem, reg, config, x0=x0)
        if res.objective_trace is not None and len(res.objective_trace) > 1:
            ascent = max(ascent, float(np.max(np.diff(res.objective_trace))))
        if not res.converged:
            continue
        if seq is not None and not evaluate_envelope(seq, res.x).tight:
            continue
        if cardinality(res.x, zero_tol) > card_bound:
            continue
        solutions.append(res.x)

    reps: list[np.ndarray] = []
    counts: list[int] = []
    for x in solutions:
        for i, rep in enumerate(reps):
            if np.linalg.norm(x - rep) <= cluster_tol:
                counts[i] += 1
                break
        else:
            reps.append(x)
            counts.append(1)
    return MultistartReport(
        n_clusters=len(reps),
        clusters=tuple(zip(reps, counts)),
        n_eligible=len(solutions),
        trials=trials,
        max_trace_ascent=ascent,
    )
