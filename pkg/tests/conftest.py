"""Shared oracles and helpers.

The oracles here deliberately avoid the code paths they check: envelope
values come from a dynamic program over a monotone grid, prox values from
exhaustive support enumeration or golden-section search.
"""

import math

import numpy as np
import pytest


def monotone_grid_max(g, x, grid):
    """Maximize sum_i c_i(z_i) over non-increasing z confined to a grid.

    Dynamic program over slots with suffix maxima; exact on the grid.
    Returns (value, chosen z values).
    """
    g = np.asarray(g, dtype=float)
    mags = np.sort(np.abs(np.asarray(x, dtype=float)))[::-1]
    c = 2.0 * mags[:, None] * grid[None, :] - np.maximum(
        grid[None, :] ** 2 - g[:, None], 0.0
    )
    n = mags.shape[0]
    suffix_arg = np.zeros((n, grid.shape[0]), dtype=int)
    v = c[0]
    for i in range(1, n):
        # M[j] = max_{j' >= j} v[j'], tracked with its argmax
        arg = np.zeros(grid.shape[0], dtype=int)
        m = np.empty_like(v)
        m[-1] = v[-1]
        arg[-1] = grid.shape[0] - 1
        for j in range(grid.shape[0] - 2, -1, -1):
            if v[j] >= m[j + 1]:
                m[j] = v[j]
                arg[j] = j
            else:
                m[j] = m[j + 1]
                arg[j] = arg[j + 1]
        suffix_arg[i] = arg
        v = c[i] + m
    j_last = int(np.argmax(v))
    # backtrack the chosen grid indices
    idx = [j_last]
    for i in range(n - 1, 0, -1):
        idx.append(int(suffix_arg[i][idx[-1]]))
    idx = idx[::-1]
    z = grid[np.array(idx)]
    value = float(np.max(v)) - float(mags @ mags)
    return value, z


def envelope_grid_oracle(g, x, n_grid=400, refine=True):
    """Grid maximization of the envelope objective, optionally refined.

    Slot maxima can sit exactly on the kinks at ``sqrt(g_i)``, where the
    objective has order-one slope, so the refinement stage adds the finite
    thresholds and the magnitudes to the grid; all remaining maxima are
    smooth and the grid error is quadratic in the spacing.
    """
    g = np.asarray(g, dtype=float)
    mags = np.abs(np.asarray(x, dtype=float))
    finite = g[np.isfinite(g)]
    hi = float(np.max(mags, initial=0.0)) * max(len(mags), 1)
    if finite.size:
        hi = max(hi, float(np.sqrt(np.max(finite))))
    hi += 1.0
    grid = np.linspace(0.0, hi, n_grid)
    value, z = monotone_grid_max(g, x, grid)
    if not refine:
        return value
    h = 2.0 * (grid[1] - grid[0])
    pieces = [np.linspace(max(zi - h, 0.0), zi + h, 240) for zi in z]
    anchors = np.concatenate([z, np.sqrt(finite), mags, [0.0]])
    local = np.unique(np.concatenate(pieces + [anchors]))
    refined, _ = monotone_grid_max(g, x, local)
    return max(value, refined)


def prox_support_enum(g, z):
    """Exhaustive minimum of G(|S|) + discarded energy over all supports."""
    g = np.asarray(g, dtype=float)
    z = np.asarray(z, dtype=float)
    n = z.shape[0]
    cum = np.concatenate(([0.0], np.cumsum(g)))
    zz = z**2
    total = float(np.sum(zz))
    masks = (np.arange(1 << n)[:, None] >> np.arange(n)) & 1
    k = masks.sum(axis=1)
    kept = masks @ zz
    costs = cum[k] + (total - kept)
    return float(np.min(costs))


def golden_section_min(f, lo, hi, iters=200):
    """Golden-section minimizer for a unimodal scalar function."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def random_penalty_values(rng, n, p_inf_tail=0.5, scale=4.0, p_zero_head=0.0, p_ties=0.0):
    """Random valid non-decreasing penalty entries.

    Optionally with an infinite tail (hard cap), an exact-zero head (fixed
    cardinality region) and repeated values (tie-heavy sequences).
    """
    vals = np.sort(rng.uniform(0.0, scale, size=n))
    if rng.uniform() < p_ties and n > 1:
        # repeat a random value over a random stretch
        i = int(rng.integers(0, n - 1))
        j = int(rng.integers(i + 1, n + 1))
        vals[i:j] = vals[i]
    if rng.uniform() < p_zero_head:
        head = int(rng.integers(1, n + 1))
        vals[:head] = 0.0
    if rng.uniform() < p_inf_tail:
        cut = int(rng.integers(1, n + 1))
        vals[cut:] = np.inf
    return vals


def hadamard20() -> np.ndarray:
    """Order-20 Hadamard matrix from the quadratic character mod 19."""
    q = 19
    residues = {(i * i) % q for i in range(1, q)}

    def chi(a):
        a %= q
        return 0.0 if a == 0 else (1.0 if a in residues else -1.0)

    jac = np.array([[chi(i - j) for j in range(q)] for i in range(q)])
    skew = np.zeros((q + 1, q + 1))
    skew[0, 1:] = 1.0
    skew[1:, 0] = -1.0
    skew[1:, 1:] = jac
    had = skew + np.eye(q + 1)
    assert np.allclose(had @ had.T, (q + 1) * np.eye(q + 1))
    return had


def low_rip_frame_20x40() -> np.ndarray:
    """Identity next to a scaled Hadamard: unit columns, delta_4 = 2/sqrt(20)."""
    return np.hstack([np.eye(20), hadamard20() / math.sqrt(20.0)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
