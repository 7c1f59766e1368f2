"""Dense-grid bracketing followed by golden-section refinement.

The objectives handled here (sup over s of tilted exponents, envelopes of
convex cumulants) can be flat, kinked or infinite at the ends, so the grid
does the global work and golden section only polishes inside one bracket.
"""
import math

import numpy as np

import settings

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, a, b, tol=settings.GOLDEN_TOL, max_iter=settings.GOLDEN_MAX_ITER):
    """Maximise a unimodal f on [a, b]. Returns (x, f(x))."""
    if b < a:
        a, b = b, a
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc = f(c)
    fd = f(d)
    for _ in range(max_iter):
        width = b - a
        if width <= 1e-15 * max(1.0, abs(a) + abs(b)):
            break
        if abs(fc - fd) < tol and width < 1e-9:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    if fc >= fd:
        return c, fc
    return d, fd


def first_argmax(values):
    """Index of the first maximal entry (ties resolved towards the start of the grid)."""
    values = np.asarray(values, dtype=float)
    return int(np.argmax(values))


def maximize_on_grid(f_vec, f_scalar, grid):
    """Grid search with golden refinement in the bracket around the best grid point.

    Returns (x, value, grid_index). The refined point replaces the grid
    point only when it is strictly better, which keeps exact ties (flat
    objectives) at the grid point nearest the start.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(f_vec(grid), dtype=float)
    i = first_argmax(values)
    best_x = float(grid[i])
    best_v = float(values[i])
    if not np.isfinite(best_v) or len(grid) < 3:
        return best_x, best_v, i
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, len(grid) - 1)])
    x, v = golden_max(f_scalar, lo, hi)
    if v > best_v + settings.GOLDEN_TOL:
        return float(x), float(v), i
    return best_x, best_v, i


def compact_grid(points=settings.S_GRID_POINTS, include_end=False):
    """Grid on t in [0, 1) (or [0, 1] with include_end) for the map s = t / (t - 1)."""
    t = np.linspace(0.0, 1.0, points)
    return t if include_end else t[:-1]


def t_to_s(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(t < 1.0, t / (t - 1.0), -np.inf)
