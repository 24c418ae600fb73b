"""Non-separable cardinality penalties built from quadratic envelopes.

The central object is a non-decreasing sequence ``g_1 <= ... <= g_n`` of
per-cardinality costs (entries may be ``+inf``).  With
``G(k) = g_1 + ... + g_k`` the induced regularizer is the convex envelope of

    G(card(x)) + ||x||^2

minus ``||x||^2``.  It depends on ``x`` only through the sorted magnitudes
``x~`` and equals the exact maximum of

    2 <x~, z~> - sum_i max(z~_i^2 - g_i, 0) - ||x~||^2

over non-increasing nonnegative ``z~``.  Each slot objective is concave and
piecewise quadratic with one breakpoint at ``sqrt(g_i)``, so the monotone
maximization is solved exactly by pooling adjacent violators and maximizing
the pooled piecewise-quadratic blocks segment by segment.

The same engine evaluates the weighted proximal map through its concave
dual, which certifies optimality by a primal-dual gap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .base import Regularizer
from .errors import (
    FiniteAfterInfiniteError,
    GapNotClosedError,
    NegativeEntryError,
    NonMonotoneError,
    NotTightPointError,
    UnboundedPenaltyError,
)

__all__ = [
    "PenaltySequence",
    "SignedSortDecomposition",
    "EnvelopeEvaluation",
    "ProxResult",
    "ConditionSlack",
    "SubgradientReport",
    "QuadraticEnvelope",
    "sort_decompose",
    "cardinality",
    "conjugate_value",
    "evaluate_envelope",
    "prox_unit",
    "prox_general",
    "subgradient_contains",
    "ZERO_TOL",
    "TIGHT_MARGIN",
]

#: magnitudes at or below this count as zero
ZERO_TOL = 1e-12
#: a magnitude is strictly inside (0, sqrt(g_i)) only beyond these margins
TIGHT_MARGIN = 1e-12


# ---------------------------------------------------------------------------
# penalty sequence
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PenaltySequence:
    """Non-decreasing per-cardinality costs ``g_1 <= ... <= g_n``.

    ``g_0 = 0`` is implicit.  Entries may be ``+inf``; once an entry is
    infinite all later entries must be infinite as well.  Instances are
    immutable; :meth:`validate` checks the invariants of values that arrived
    from outside.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1).copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    # -- constructors --------------------------------------------------------

    @classmethod
    def constant(cls, mu: float, n: int) -> "PenaltySequence":
        """All entries equal to ``mu``; penalizes cardinality linearly."""
        return cls(np.full(n, float(mu)))

    @classmethod
    def capped(cls, mu: float, kmax: int, n: int) -> "PenaltySequence":
        """``mu`` for the first ``kmax`` entries, ``+inf`` beyond (hard cap)."""
        vals = np.full(n, math.inf)
        vals[: min(kmax, n)] = float(mu)
        return cls(vals)

    @classmethod
    def fixed_cardinality(cls, kmax: int, n: int) -> "PenaltySequence":
        """Zero cost up to ``kmax`` nonzeros, ``+inf`` beyond."""
        vals = np.full(n, math.inf)
        vals[: min(kmax, n)] = 0.0
        return cls(vals)

    # -- basic queries --------------------------------------------------------

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def validate(self) -> None:
        """Raise unless the sequence invariants hold."""
        v = self.values
        if np.any(np.isnan(v)):
            raise NegativeEntryError("penalty entries must be real numbers")
        if v.size and v[0] < 0:
            raise NegativeEntryError(f"g_1 = {v[0]} is negative")
        for i in range(v.size - 1):
            if np.isinf(v[i]) and np.isfinite(v[i + 1]):
                raise FiniteAfterInfiniteError(
                    f"finite g_{i + 2} = {v[i + 1]} follows infinite g_{i + 1}"
                )
            if np.isfinite(v[i]) and v[i + 1] < v[i]:
                raise NonMonotoneError(f"g_{i + 2} = {v[i + 1]} < g_{i + 1} = {v[i]}")

    def cumulative(self, k: int) -> float:
        """``G(k)``, the cost of cardinality ``k`` (``G(0) = 0``)."""
        if not 0 <= k <= self.n:
            raise IndexError(f"k = {k} outside [0, {self.n}]")
        return float(np.sum(self.values[:k])) if k else 0.0

    def max_cardinality(self) -> int:
        """Largest ``k`` with ``g_k`` finite (0 if ``g_1`` is infinite)."""
        return int(np.sum(np.isfinite(self.values)))

    def thresholds(self) -> np.ndarray:
        """Per-slot thresholds ``sqrt(g_i)``."""
        return np.sqrt(self.values)

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> str:
        """JSON array of numbers where the string ``"inf"`` encodes ``+inf``."""
        items = ["inf" if math.isinf(v) else v for v in self.values.tolist()]
        return json.dumps(items)

    @classmethod
    def from_json(cls, text: str) -> "PenaltySequence":
        items = json.loads(text)
        vals = [math.inf if v == "inf" else float(v) for v in items]
        seq = cls(np.array(vals))
        seq.validate()
        return seq

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"PenaltySequence({self.values.tolist()})"


def penalty_from_spec(spec: str, n: int) -> PenaltySequence:
    """Parse an inline penalty spec for dimension ``n``.

    Accepted forms: ``const:MU``, ``capped:MU:KMAX``, ``fixedcard:KMAX`` and
    ``@file.json`` (a JSON array whose length must equal ``n``).
    """
    if spec.startswith("@"):
        from pathlib import Path

        seq = PenaltySequence.from_json(Path(spec[1:]).read_text())
        if seq.n != n:
            raise ValueError(f"penalty file has length {seq.n}, expected {n}")
        return seq
    parts = spec.split(":")
    try:
        if parts[0] == "const" and len(parts) == 2:
            return PenaltySequence.constant(float(parts[1]), n)
        if parts[0] == "capped" and len(parts) == 3:
            return PenaltySequence.capped(float(parts[1]), int(parts[2]), n)
        if parts[0] == "fixedcard" and len(parts) == 2:
            return PenaltySequence.fixed_cardinality(int(parts[1]), n)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"malformed penalty spec {spec!r}: {exc}") from exc
    raise ValueError(
        f"unrecognized penalty spec {spec!r}; use const:MU, capped:MU:KMAX, "
        "fixedcard:KMAX or @file.json"
    )


# ---------------------------------------------------------------------------
# signed sort decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SignedSortDecomposition:
    """Factorization ``x = D_s pi x~`` into signs, ordering and magnitudes.

    ``permutation[j]`` is the original index occupying sorted slot ``j``;
    magnitude ties go to the smaller original index and the sign of a zero
    entry is recorded as ``+1``.
    """

    signs: np.ndarray
    permutation: np.ndarray
    magnitudes: np.ndarray

    def reconstruct(self, magnitudes: np.ndarray | None = None) -> np.ndarray:
        """Map (possibly new) sorted magnitudes back to the original frame."""
        mags = self.magnitudes if magnitudes is None else np.asarray(magnitudes, float)
        out = np.empty_like(mags)
        out[self.permutation] = mags
        return out * self.signs


def sort_decompose(x) -> SignedSortDecomposition:
    """Split ``x`` into signs, a sorting permutation and sorted magnitudes."""
    x = np.asarray(x, dtype=float).reshape(-1)
    signs = np.where(x < 0, -1.0, 1.0)
    mags = np.abs(x)
    order = np.argsort(-mags, kind="stable")
    return SignedSortDecomposition(signs=signs, permutation=order, magnitudes=mags[order])


def cardinality(x, tol: float = ZERO_TOL) -> int:
    """Number of entries with magnitude above ``tol``."""
    return int(np.sum(np.abs(np.asarray(x, dtype=float)) > tol))


# ---------------------------------------------------------------------------
# conjugate
# ---------------------------------------------------------------------------


def conjugate_value(seq: PenaltySequence, y) -> float:
    """Conjugate value ``sum_i max(y~_i^2 / 4 - g_i, 0)``.

    Slots with infinite ``g_i`` contribute nothing.
    """
    ymag = sort_decompose(y).magnitudes
    _check_length(seq, ymag)
    finite = np.isfinite(seq.values)
    terms = 0.25 * ymag[finite] ** 2 - seq.values[finite]
    return float(np.sum(np.maximum(terms, 0.0)))


def _check_length(seq: PenaltySequence, vec: np.ndarray) -> None:
    if vec.shape[0] != seq.n:
        raise ValueError(f"vector length {vec.shape[0]} != sequence length {seq.n}")


# ---------------------------------------------------------------------------
# monotone maximization engine
# ---------------------------------------------------------------------------
#
# Maximize sum_i c_i(t_i) over t_1 >= t_2 >= ... >= t_n >= 0 where
#
#     c_i(t) = la_i t^2 + lb_i t              t <= bp_i,
#     c_i(t) = (la_i - 1) t^2 + lb_i t + g_i  t >= bp_i,
#
# each concave (la_i <= 0).  Constant terms never move maximizers and are
# dropped.  A vectorized per-slot pass covers the common case where the
# slot maximizers are already non-increasing; otherwise adjacent violating
# blocks are pooled, and a pooled block maximizer is found by scanning its
# quadratic segments (vertices and breakpoints) left to right.


def _slot_argmax(la, lb, bp):
    """Smallest unconstrained maximizer per slot; ``inf`` marks unbounded."""
    left_vertex = np.full_like(lb, np.inf)
    np.divide(lb, -2.0 * la, out=left_vertex, where=la < 0)
    right_vertex = lb / (2.0 * (1.0 - la))
    t = np.where(left_vertex < bp, left_vertex, np.maximum(bp, right_vertex))
    return np.where(lb <= 0, 0.0, t)


def _block_argmax(A, B, bps):
    """Smallest maximizer of a pooled block; returns ``(t, unbounded)``."""
    lo = 0.0
    k = 0
    nbp = len(bps)
    while True:
        if B + 2.0 * A * lo <= 0.0:
            return lo, False
        hi = bps[k] if k < nbp else math.inf
        if A < 0.0:
            tv = -B / (2.0 * A)
            if tv <= hi:
                return tv, False
        elif hi == math.inf:
            # zero curvature and positive slope on the last segment
            return math.inf, True
        lo = hi
        A -= 1.0
        k += 1


def _pav_monotone_argmax(la, lb, bp):
    """Exact maximizer over non-increasing nonnegative vectors.

    Raises :class:`UnboundedPenaltyError` when the pooled leading block has
    positive slope and no breakpoint, in which case the supremum is ``+inf``.
    """
    n = la.shape[0]
    fast = _slot_argmax(la, lb, bp)
    if np.all(np.isfinite(fast)) and np.all(fast[1:] <= fast[:-1]):
        return fast

    # stack of blocks [size, A, B, bps, t]; bps sorted ascending
    blocks: list[list] = []
    for i in range(n):
        size = 1
        A = float(la[i])
        B = float(lb[i])
        bps = [] if math.isinf(bp[i]) else [float(bp[i])]
        t, unbounded = _block_argmax(A, B, bps)
        while blocks and t > blocks[-1][4]:
            psize, pA, pB, pbps, _ = blocks.pop()
            size += psize
            A += pA
            B += pB
            bps = sorted(pbps + bps)
            t, unbounded = _block_argmax(A, B, bps)
        if unbounded:
            raise UnboundedPenaltyError(
                "value is +inf: leading pooled block has positive slope and no threshold"
            )
        blocks.append([size, A, B, bps, t])

    out = np.empty(n)
    pos = 0
    for size, _, _, _, t in blocks:
        out[pos : pos + size] = t
        pos += size
    return out


def _envelope_slots(seq: PenaltySequence, xmag: np.ndarray):
    g = seq.values
    la = np.where(g <= 0, -1.0, 0.0)
    lb = 2.0 * xmag
    bp = np.where(g <= 0, np.inf, seq.thresholds())
    return la, lb, bp


def _envelope_objective(seq: PenaltySequence, xmag, zmag) -> float:
    # per-slot 2 x z - max(z^2 - g, 0) - x^2 rewritten without cancellation:
    # g - (z - x)^2 where the threshold is active, x (2 z - x) where not
    g = seq.values
    active = zmag * zmag > g
    keep = g - (zmag - xmag) ** 2
    slack = xmag * (2.0 * zmag - xmag)
    return float(np.sum(np.where(active, keep, slack)))


def _is_tight(xmag: np.ndarray, seq: PenaltySequence) -> bool:
    sq = seq.thresholds()
    inside = (xmag > ZERO_TOL) & (xmag < sq - TIGHT_MARGIN)
    return not bool(np.any(inside))


# ---------------------------------------------------------------------------
# envelope evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnvelopeEvaluation:
    """Exact envelope value together with one maximizing ``z~``.

    ``tight`` is true when no sorted magnitude lies strictly inside
    ``(0, sqrt(g_i))``, in which case the value equals ``G(card(x))``.
    """

    value: float
    maximizer: np.ndarray
    tight: bool


def evaluate_envelope(seq: PenaltySequence, x) -> EnvelopeEvaluation:
    """Evaluate the envelope regularizer at ``x``.

    Raises :class:`UnboundedPenaltyError` when the value is ``+inf``, which
    happens exactly when ``g_1`` is infinite and ``x`` is nonzero.
    """
    dec = sort_decompose(x)
    xmag = dec.magnitudes
    _check_length(seq, xmag)
    la, lb, bp = _envelope_slots(seq, xmag)
    zmax = _pav_monotone_argmax(la, lb, bp)
    value = _envelope_objective(seq, xmag, zmax)
    return EnvelopeEvaluation(value=value, maximizer=zmax, tight=_is_tight(xmag, seq))


# ---------------------------------------------------------------------------
# proximal maps
# ---------------------------------------------------------------------------


def prox_unit(seq: PenaltySequence, z) -> np.ndarray:
    """Global minimizer of ``R(x) + ||x - z||^2`` at unit quadratic weight.

    In the sorted frame of ``z`` the minimum over supports of size ``k``
    costs ``G(k)`` plus the energy of the discarded tail, so the best ``k``
    keeps the ``k`` largest magnitudes unchanged and zeroes the rest.  Ties
    in ``k`` resolve toward smaller cardinality.
    """
    dec = sort_decompose(z)
    zm = dec.magnitudes
    _check_length(seq, zm)
    cum = np.concatenate(([0.0], np.cumsum(seq.values)))
    tail = np.concatenate((np.cumsum((zm**2)[::-1])[::-1], [0.0]))
    kstar = int(np.argmin(cum + tail))
    xm = zm.copy()
    xm[kstar:] = 0.0
    return dec.reconstruct(xm)


@dataclass(frozen=True, eq=False)
class ProxResult:
    """Weighted prox output with its certified duality gap."""

    x: np.ndarray
    gap: float
    primal: float
    dual: float


def _dual_value(seq: PenaltySequence, zm, v, rho: float) -> float:
    a = rho - 1.0
    psi = rho * zm**2 - (v - rho * zm) ** 2 / a
    pen = np.maximum(v**2 - seq.values, 0.0)
    return float(np.sum(psi) - np.sum(pen))


def prox_general(seq: PenaltySequence, z, rho: float, tol: float = 1e-9) -> ProxResult:
    """Minimize ``R(x) + rho ||x - z||^2`` for ``rho > 1`` with a gap certificate.

    The concave dual maximizes, over non-increasing ``v`` in the sorted frame
    of ``z``, the sum of ``-max(v_i^2 - g_i, 0)`` and the partial minimization
    ``psi_i(v) = rho z~_i^2 - (v - rho z~_i)^2 / (rho - 1)`` whose minimizing
    primal slot is ``t_i = (rho z~_i - v_i) / (rho - 1)``.  The recovered
    primal must itself be non-increasing; if it is not, or the duality gap
    exceeds ``tol``, :class:`GapNotClosedError` carries the best iterate.
    """
    if not rho > 1.0:
        raise ValueError(f"rho = {rho} must exceed 1")
    dec = sort_decompose(z)
    zm = dec.magnitudes
    _check_length(seq, zm)
    n = zm.shape[0]
    a = rho - 1.0
    g = seq.values

    la = np.where(g <= 0, -1.0 / a - 1.0, -1.0 / a)
    lb = 2.0 * rho * zm / a
    bp = np.where(g <= 0, np.inf, seq.thresholds())
    v = _pav_monotone_argmax(la, lb, bp)

    t = np.maximum((rho * zm - v) / a, 0.0)
    scale = max(1.0, float(zm[0]) if n else 1.0)
    violation = float(np.max(t[1:] - t[:-1], initial=0.0))
    t = np.minimum.accumulate(t)
    dual = _dual_value(seq, zm, v, rho)
    env = _pav_monotone_argmax(*_envelope_slots(seq, t))
    primal = _envelope_objective(seq, t, env) + rho * float(np.sum((t - zm) ** 2))
    gap = primal - dual
    x = dec.reconstruct(t)
    if violation > 1e-10 * scale:
        raise GapNotClosedError(
            f"recovered primal violates sorting by {violation:.3e}", x=x, gap=gap
        )
    # certification cannot resolve below the round-off floor of the values
    # entering the gap, which grows with the quadratic scale of the input
    floor = 1e-13 * max(1.0, abs(primal), abs(dual), rho * float(zm @ zm))
    if gap > max(tol, floor):
        raise GapNotClosedError(f"duality gap {gap:.3e} exceeds tol {tol:.3e}", x=x, gap=gap)
    return ProxResult(x=x, gap=gap, primal=primal, dual=dual)


# ---------------------------------------------------------------------------
# subgradient structure at tight points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionSlack:
    """One checked condition with its measured value and signed slack."""

    name: str
    measured: float
    bound: float
    slack: float


@dataclass(frozen=True, eq=False)
class SubgradientReport:
    contains: bool
    conditions: tuple


def subgradient_contains(seq: PenaltySequence, x, w, tol: float = 1e-9) -> SubgradientReport:
    """Check whether ``w`` lies in the envelope subdifferential at tight ``x``.

    At a tight point with ``k = card(x)`` the subdifferential consists of
    ``2 z`` where, in the frame of ``x``, the leading ``k`` slots of ``z``
    equal the magnitudes of ``x`` and the tail magnitudes stay within
    ``[0, min(x~_k, sqrt(g_{k+1}))]``.  Sign and ordering freedom on the tail
    (where ``x`` vanishes) makes the tail test a per-entry box constraint.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    _check_length(seq, x)
    if w.shape[0] != x.shape[0]:
        raise ValueError("w and x must have the same length")
    dec = sort_decompose(x)
    xm = dec.magnitudes
    if not _is_tight(xm, seq):
        raise NotTightPointError("x has a magnitude strictly inside (0, sqrt(g_i))")
    k = cardinality(xm)
    half = 0.5 * w
    support = np.abs(x) > ZERO_TOL

    supp_dev = float(np.max(np.abs(half[support] - x[support]), initial=0.0))
    if k == 0:
        bound = float(seq.thresholds()[0]) if seq.n else math.inf
    elif k >= seq.n:
        bound = math.inf
    else:
        bound = float(min(xm[k - 1], seq.thresholds()[k]))
    tail_max = float(np.max(np.abs(half[~support]), initial=0.0))

    conditions = (
        ConditionSlack("support_match", supp_dev, tol, tol - supp_dev),
        ConditionSlack("tail_box", tail_max, bound, bound + tol - tail_max),
    )
    contains = all(c.slack >= 0.0 for c in conditions)
    return SubgradientReport(contains=contains, conditions=conditions)


# ---------------------------------------------------------------------------
# regularizer facade
# ---------------------------------------------------------------------------


class QuadraticEnvelope(Regularizer):
    """Envelope regularizer over a penalty sequence.

    ``prox`` dispatches on the quadratic weight: exact truncation at
    ``rho = 1`` and the gap-certified dual route for ``rho > 1``.  Weights
    below 1 are rejected (the subproblem is no longer convex in the lifted
    formulation this implementation relies on).
    """

    def __init__(self, seq: PenaltySequence):
        if not isinstance(seq, PenaltySequence):
            seq = PenaltySequence(np.asarray(seq, dtype=float))
        seq.validate()
        self.seq = seq

    def value(self, x) -> float:
        return evaluate_envelope(self.seq, x).value

    def prox(self, z, rho: float = 1.0, tol: float = 1e-9) -> np.ndarray:
        if abs(rho - 1.0) <= 1e-12:
            return prox_unit(self.seq, z)
        if rho < 1.0:
            raise ValueError(f"envelope prox needs quadratic weight >= 1, got {rho}")
        return prox_general(self.seq, z, rho, tol).x

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"QuadraticEnvelope({self.seq!r})"
