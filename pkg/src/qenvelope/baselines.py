"""Separable comparison penalties: L1, SCAD and Lp with p in (0, 1).

Each penalty exposes ``value`` and an exact weighted prox minimizing
``value(x) + rho * ||x - z||^2`` elementwise.  The weight ``rho`` folds into
an effective threshold per family: soft-thresholding at ``lam / (2 rho)``
for L1, per-branch quadratic minimization for SCAD, and the root of
``x + c x^(p-1) = |z|`` with ``c = lam p / (2 rho)`` for Lp.  Grid-search
tests are the source of truth for these reductions.
"""

from __future__ import annotations

import json

import numpy as np

from .base import Regularizer

__all__ = [
    "L1Penalty",
    "ScadPenalty",
    "LpPenalty",
    "baseline_from_json",
    "make_baseline",
]


class L1Penalty(Regularizer):
    """Weighted absolute-value penalty ``lam * ||x||_1``."""

    family = "l1"

    def __init__(self, lam: float):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        self.lam = float(lam)

    def value(self, x) -> float:
        return self.lam * float(np.sum(np.abs(x)))

    def prox(self, z, rho: float = 1.0, tol: float = 1e-9) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        thresh = self.lam / (2.0 * rho)
        return np.sign(z) * np.maximum(np.abs(z) - thresh, 0.0)

    def to_json(self) -> str:
        return json.dumps({"family": "l1", "lambda": self.lam})


class ScadPenalty(Regularizer):
    """Smoothly clipped absolute deviation with knee ``a > 2``.

    Linear up to ``lam``, quadratically clipped up to ``a * lam``, constant
    beyond, so large entries are left unshrunk by the prox.
    """

    family = "scad"

    def __init__(self, lam: float, a: float = 3.7):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        if a <= 2:
            raise ValueError("a must exceed 2")
        self.lam = float(lam)
        self.a = float(a)

    def value(self, x) -> float:
        t = np.abs(np.asarray(x, dtype=float))
        lam, a = self.lam, self.a
        mid = (2.0 * a * lam * t - t**2 - lam**2) / (2.0 * (a - 1.0))
        flat = 0.5 * (a + 1.0) * lam**2
        per = np.where(t <= lam, lam * t, np.where(t <= a * lam, mid, flat))
        return float(np.sum(per))

    def prox(self, z, rho: float = 1.0, tol: float = 1e-9) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        lam, a = self.lam, self.a
        zm = np.abs(z)
        if lam == 0.0:
            return z.copy()

        # exact per-branch minimization of p(x) + rho (x - |z|)^2 over x >= 0;
        # each branch is quadratic on its interval, so the global minimum is
        # one of three clamped vertices
        def branch_value(x):
            mid = (2.0 * a * lam * x - x**2 - lam**2) / (2.0 * (a - 1.0))
            flat = 0.5 * (a + 1.0) * lam**2
            pen = np.where(x <= lam, lam * x, np.where(x <= a * lam, mid, flat))
            return pen + rho * (x - zm) ** 2

        c1 = np.clip(zm - lam / (2.0 * rho), 0.0, lam)
        qa = rho - 1.0 / (2.0 * (a - 1.0))
        if qa > 0:
            vertex = (2.0 * rho * zm - a * lam / (a - 1.0)) / (2.0 * qa)
            c2 = np.clip(vertex, lam, a * lam)
        else:
            # concave middle branch: minimum at an interval endpoint
            lo = np.full_like(zm, lam)
            hi = np.full_like(zm, a * lam)
            c2 = np.where(branch_value(lo) <= branch_value(hi), lo, hi)
        c3 = np.maximum(zm, a * lam)

        cands = np.stack([c1, c2, c3])
        vals = np.stack([branch_value(c) for c in cands])
        best = cands[np.argmin(vals, axis=0), np.arange(zm.shape[0])]
        return np.sign(z) * best

    def to_json(self) -> str:
        return json.dumps({"family": "scad", "lambda": self.lam, "a": self.a})


class LpPenalty(Regularizer):
    """Power penalty ``lam * sum |x_i|^p`` with ``0 < p < 1``.

    The prox solves the scalar stationarity equation
    ``x + c x^(p-1) = |z|`` (``c = lam p / (2 rho)``) for its larger root by
    a vectorized Newton iteration on the convex residual, then compares the
    root against zero; ties at the jump threshold resolve to zero.
    """

    family = "lp"

    def __init__(self, lam: float, p: float):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        if not 0.0 < p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        self.lam = float(lam)
        self.p = float(p)

    def value(self, x) -> float:
        return self.lam * float(np.sum(np.abs(x) ** self.p))

    def prox(self, z, rho: float = 1.0, tol: float = 1e-9) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.lam == 0.0:
            return z.copy()
        p = self.p
        c = self.lam * p / (2.0 * rho)
        zm = np.abs(z)

        # h(x) = x + c x^(p-1) - |z| is convex on x > 0 with minimum at x_c;
        # no root beyond x_c means the origin wins outright
        xc = (c * (1.0 - p)) ** (1.0 / (2.0 - p))
        hc = xc + c * xc ** (p - 1.0) - zm
        candidate = hc < 0.0

        # Newton from max(|z|, 2 x_c) starts right of the larger root, where
        # h is increasing, and descends monotonically onto it
        x = np.maximum(zm, 2.0 * xc)
        for _ in range(80):
            grad = np.maximum(1.0 + c * (p - 1.0) * x ** (p - 2.0), 1e-300)
            x_new = x - (x + c * x ** (p - 1.0) - zm) / grad
            x_new = np.maximum(x_new, xc * (1.0 + 1e-12))
            if np.all(np.abs(x_new - x) <= 1e-15 * np.maximum(1.0, x)):
                x = x_new
                break
            x = x_new

        keep_val = self.lam * x**p + rho * (x - zm) ** 2
        zero_val = rho * zm**2
        best = np.where(candidate & (keep_val < zero_val), x, 0.0)
        return np.sign(z) * best

    def to_json(self) -> str:
        return json.dumps({"family": "lp", "lambda": self.lam, "p": self.p})


def make_baseline(family: str, lam: float, a: float = 3.7, p: float | None = None) -> Regularizer:
    """Construct a baseline penalty from a family name.

    Recognized families: ``l1``, ``scad``, ``lp_half``, ``lp_two_thirds``
    and ``lp`` (requires ``p``).
    """
    family = family.lower()
    if family in ("l1", "lasso"):
        return L1Penalty(lam)
    if family == "scad":
        return ScadPenalty(lam, a)
    if family == "lp_half":
        return LpPenalty(lam, 0.5)
    if family == "lp_two_thirds":
        return LpPenalty(lam, 2.0 / 3.0)
    if family == "lp":
        if p is None:
            raise ValueError("family 'lp' requires p")
        return LpPenalty(lam, p)
    raise ValueError(f"unknown baseline family {family!r}")


def baseline_from_json(text: str) -> Regularizer:
    """Parse ``{"family": ..., "lambda": ..., ...}`` into a penalty."""
    obj = json.loads(text)
    return make_baseline(
        obj["family"], obj["lambda"], a=obj.get("a", 3.7), p=obj.get("p")
    )
