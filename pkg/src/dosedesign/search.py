"""Scalar maximisation on an interval, derivative-free."""

from __future__ import annotations

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, lo: float, hi: float, xtol: float, max_iter: int = 200):
    """Golden-section maximisation of f on [lo, hi].

    Returns (x, f(x), iterations) with the interval narrowed below xtol.
    The usual unimodality caveat applies; callers bracket the maximum first.
    """
    if hi < lo:
        lo, hi = hi, lo
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    steps = 0
    for steps in range(1, max_iter + 1):
        if b - a <= xtol:
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
    if f1 < f2:
        return x2, f2, steps
    return x1, f1, steps


def refined_argmax(f, grid, values, xtol: float, top: int = 3):
    """Maximum of f over [grid[0], grid[-1]] via grid values plus refinement.

    `values` are f evaluated on `grid`.  The best `top` local grid maxima
    (endpoints included) are each refined by golden-section search in their
    bracketing cells.  Returns (x, f(x), total golden iterations).
    """
    n = len(grid)
    peaks = [
        i
        for i in range(n)
        if (i == 0 or values[i] >= values[i - 1])
        and (i == n - 1 or values[i] >= values[i + 1])
    ]
    peaks.sort(key=lambda i: -values[i])
    best_x, best_v = grid[int(peaks[0])], values[int(peaks[0])]
    iters = 0
    for i in peaks[:top]:
        lo = grid[i - 1] if i > 0 else grid[0]
        hi = grid[i + 1] if i < n - 1 else grid[n - 1]
        x, v, k = golden_max(f, float(lo), float(hi), xtol)
        iters += k
        if v > best_v:
            best_x, best_v = x, v
    return float(best_x), float(best_v), iters
