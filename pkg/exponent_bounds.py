"""Single-pair error exponents and their simplex oracles.

chernoff, hoeffding and han_kobayashi evaluate the sup-over-s expressions on
dense grids with golden refinement; hoeffding_oracle and hk_oracle minimise
the min-over-Q expressions directly on a simplex lattice and share no code
with the tilt searches.
"""
from dataclasses import dataclass
import logging

import numpy as np
from scipy.optimize import brentq
from scipy.special import rel_entr

import settings
from divergence_core import (
    PairQuery,
    cumulant_arrays,
    llr_stats,
    relative_entropy,
    safe_log,
    tilted_weights,
)
from errors import DomainError, OracleScaleError
from optimize1d import compact_grid, maximize_on_grid, t_to_s
from type_classes import iter_compositions

logger = logging.getLogger(__name__)

INTERIOR = "interior"
BOUNDARY_S0 = "boundary_s0"
BOUNDARY_S1 = "boundary_s1"
BEYOND_R0 = "beyond_r0"
REGIMES = (INTERIOR, BOUNDARY_S0, BOUNDARY_S1, BEYOND_R0)


@dataclass(frozen=True)
class BoundResult:
    value: float
    argmax_s: float
    regime: str

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"Unknown regime {self.regime!r}")

    def to_json(self):
        return {"value": self.value, "argmax_s": self.argmax_s, "regime": self.regime}


class _PairLogs:
    """Log-probabilities of a pair in a shared outcome order."""

    def __init__(self, p, pbar):
        query = PairQuery(p, pbar)
        self.p = query.p
        self.pbar = query.pbar
        self.lp = safe_log(query.p.probs)
        self.lq = safe_log(query.pbar.probs)
        self.has_common = bool(np.any((query.p.probs > 0) & (query.pbar.probs > 0)))

    def phi(self, s, common_only=False):
        return cumulant_arrays(self.lp, self.lq, s, common_only=common_only)


def _check_rate(r):
    r = float(r)
    if not np.isfinite(r) and r != np.inf:
        raise DomainError(f"Rate must be a number, got {r!r}")
    if r < 0:
        raise DomainError(f"Rate must be nonnegative, got {r!r}")
    return r


def _unit_regime(s, s_max=1.0):
    if s == 0.0:
        return BOUNDARY_S0
    if s >= s_max:
        return BOUNDARY_S1
    return INTERIOR


def chernoff(p, pbar):
    """-min over s in [0, 1] of phi(s), using the continuous extension at the ends."""
    logs = _PairLogs(p, pbar)
    if not logs.has_common:
        return BoundResult(np.inf, 0.5, INTERIOR)
    grid = np.linspace(0.0, 1.0, settings.S_GRID_POINTS)
    s, neg_phi, _ = maximize_on_grid(
        lambda s: -logs.phi(s, common_only=True),
        lambda s: -float(logs.phi(s, common_only=True)),
        grid,
    )
    value = max(neg_phi, 0.0) + 0.0
    return BoundResult(value, s, _unit_regime(s))


def hoeffding(r, p, pbar):
    """B_e(r) = sup over s in [0, 1) of (-s r - phi(s)) / (1 - s)."""
    r = _check_rate(r)
    logs = _PairLogs(p, pbar)
    stein = relative_entropy(logs.p, logs.pbar)
    if r >= stein:
        return BoundResult(0.0, 0.0, BOUNDARY_S0)
    if r == 0.0:
        return BoundResult(relative_entropy(logs.pbar, logs.p), 1.0, BOUNDARY_S1)
    if not logs.has_common:
        return BoundResult(np.inf, 0.0, BOUNDARY_S0)

    # s -> 1: numerator tends to -r - phi_common(1)
    end_numerator = -r - float(logs.phi(1.0, common_only=True))
    if end_numerator > 0:
        logger.debug("Hoeffding(%g) infinite: mass of Pbar outside supp P exceeds the rate", r)
        return BoundResult(np.inf, 1.0, BOUNDARY_S1)

    def objective(s):
        s = np.asarray(s, dtype=float)
        return (-s * r - logs.phi(s, common_only=True)) / (1.0 - s)

    s_max = 1.0 - settings.S_ENDPOINT_GAP
    grid = np.linspace(0.0, s_max, settings.S_GRID_POINTS)
    s, value, _ = maximize_on_grid(objective, lambda s: float(objective(s)), grid)
    return BoundResult(max(value, 0.0) + 0.0, s, _unit_regime(s, s_max))


def hk_limit_search(r, phi_of_s, slope):
    """sup over s <= 0 of (-s r - phi(s)) / (1 - s) on the compact t-grid.

    phi_of_s maps an array of s <= 0 to phi values. The s -> -inf limit
    r + slope is compared against the grid maximum.
    """
    def objective(t):
        t = np.asarray(t, dtype=float)
        s = t_to_s(t)
        with np.errstate(invalid="ignore"):
            return (1.0 - t) * (-s * r - phi_of_s(s))

    t, value, _ = maximize_on_grid(objective, lambda t: float(objective(t)), compact_grid())
    limit = r + slope
    if limit > value + settings.GOLDEN_TOL:
        return limit, -np.inf, True
    return value, float(t_to_s(t)), False


def han_kobayashi(r, p, pbar):
    """B_e*(r) = sup over s <= 0 of (-s r - phi(s)) / (1 - s); equals r + R beyond r0."""
    r = float(r)
    logs = _PairLogs(p, pbar)
    stein = relative_entropy(logs.p, logs.pbar)
    if not r > stein:
        return BoundResult(0.0, 0.0, BOUNDARY_S0)
    stats = llr_stats(logs.p, logs.pbar)
    if r > stats.r0:
        return BoundResult(r + stats.slope_R, -np.inf, BEYOND_R0)
    if r == stats.r0:
        # attained only in the s -> -inf limit
        return BoundResult(r + stats.slope_R, -np.inf, INTERIOR)
    value, s, at_limit = hk_limit_search(r, logs.phi, stats.slope_R)
    if at_limit:
        return BoundResult(value, s, INTERIOR)
    return BoundResult(max(value, 0.0) + 0.0, s, BOUNDARY_S0 if s == 0.0 else INTERIOR)


def _oracle_lattice(size):
    if size > settings.ORACLE_MAX_OUTCOMES:
        raise OracleScaleError(
            f"Simplex oracle supports at most {settings.ORACLE_MAX_OUTCOMES} outcomes, got {size}"
        )
    step = settings.ORACLE_STEP_SMALL if size <= 4 else settings.ORACLE_STEP_LARGE
    return int(round(1.0 / step)), step


def _divergences(q, pa, qa):
    """Row-wise D(Q||P) and D(Q||Pbar) for a stack of candidate Q."""
    with np.errstate(divide="ignore", invalid="ignore"):
        d_p = rel_entr(q, pa).sum(axis=-1)
        d_pbar = rel_entr(q, qa).sum(axis=-1)
    return d_p, d_pbar


def _simplex_oracle(score, r, p, pbar):
    """Minimise score(D(Q||P), D(Q||Pbar)) over Q with D(Q||Pbar) <= r.

    Composition grid followed by local lattice refinement. Returns (value, Q).
    """
    query = PairQuery(p, pbar)
    pa, qa = query.p.probs, query.pbar.probs
    size = pa.size
    total, step = _oracle_lattice(size)

    def evaluate(candidates):
        d_p, d_pbar = _divergences(candidates, pa, qa)
        feasible = d_pbar <= r
        with np.errstate(invalid="ignore"):
            values = np.where(feasible, score(d_p, d_pbar), np.inf)
        return values

    seeds = np.stack([pa, qa])
    seed_values = evaluate(seeds)
    best_i = int(np.argmin(seed_values))
    best_value, best_q = float(seed_values[best_i]), seeds[best_i].copy()

    for chunk in iter_compositions(total, size):
        q = chunk / float(total)
        values = evaluate(q)
        i = int(np.argmin(values))
        if values[i] < best_value:
            best_value, best_q = float(values[i]), q[i].copy()
    if size == 1:
        return best_value, best_q

    offsets = np.stack(
        np.meshgrid(*([np.arange(-2, 3)] * (size - 1)), indexing="ij"), axis=-1
    ).reshape(-1, size - 1).astype(float)
    offsets = np.concatenate([offsets, -offsets.sum(axis=1, keepdims=True)], axis=1)
    delta = step
    for _ in range(settings.ORACLE_REFINE_ITER):
        if not np.isfinite(best_value):
            break
        candidates = best_q + delta * offsets
        candidates = candidates[np.all(candidates >= 0.0, axis=1)]
        values = evaluate(candidates)
        i = int(np.argmin(values))
        if values[i] < best_value:
            best_value, best_q = float(values[i]), candidates[i].copy()
        else:
            delta /= 2.0
    return best_value, best_q


def hoeffding_oracle(r, p, pbar, with_argmin=False):
    """min D(Q||P) over Q with D(Q||Pbar) <= r, on the simplex lattice."""
    r = _check_rate(r)
    value, q = _simplex_oracle(lambda d_p, d_pbar: d_p, r, p, pbar)
    value = max(value, 0.0)
    return (value, q) if with_argmin else value


def hk_oracle(r, p, pbar, with_argmin=False):
    """min D(Q||P) + r - D(Q||Pbar) over Q with D(Q||Pbar) <= r, on the simplex lattice."""
    r = _check_rate(r)
    value, q = _simplex_oracle(lambda d_p, d_pbar: d_p + r - d_pbar, r, p, pbar)
    value = max(value, 0.0)
    return (value, q) if with_argmin else value


def hoeffding_tilted_oracle(r, p, pbar):
    """Hoeffding minimisation restricted to the tilted family {P_s : s in [0, 1]}.

    D(P_s||Pbar) decreases and D(P_s||P) increases along the family, so the
    optimum is the smallest feasible s, found by root bracketing.
    """
    r = _check_rate(r)
    query = PairQuery(p, pbar)
    pa, qa = query.p.probs, query.pbar.probs
    stein = relative_entropy(query.p, query.pbar)
    if r >= stein:
        return 0.0
    if r == 0.0:
        return relative_entropy(query.pbar, query.p)

    def member(s):
        if s == 0.0:
            return pa
        weights, _ = tilted_weights(pa, qa, s, common_only=True)
        return weights

    def excess(s):
        return float(np.sum(rel_entr(member(s), qa))) - r

    if excess(1.0) > 0:
        return np.inf
    lo = 0.0
    if not np.isfinite(excess(0.0)):
        lo = settings.S_ENDPOINT_GAP
        if excess(lo) <= 0:
            return float(np.sum(rel_entr(member(lo), pa)))
    s_r = brentq(excess, lo, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(np.sum(rel_entr(member(s_r), pa)))


def chernoff_fixed_point(p, pbar, tol=1e-12, max_iter=200):
    """sup{r : hoeffding(r) >= r}, located by bisection."""
    stein = relative_entropy(p, pbar)
    if stein == 0.0:
        return 0.0

    def above(r):
        return hoeffding(r, p, pbar).value >= r

    lo = 0.0
    hi = stein if np.isfinite(stein) else 1.0
    while not np.isfinite(stein) and above(hi):
        hi *= 2.0
        if hi > 1e6:
            return np.inf
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if above(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def be_bar_curve(p, pbar, r_grid):
    """B_e(r) below the Stein rate and -B_e*(r) above it."""
    r_grid = [float(r) for r in r_grid]
    if any(r < 0 for r in r_grid):
        raise DomainError("Rate grid must be nonnegative")
    if any(b < a for a, b in zip(r_grid, r_grid[1:])):
        raise DomainError("Rate grid must be ascending")
    stein = relative_entropy(p, pbar)
    curve = []
    for r in r_grid:
        if r <= stein:
            curve.append((r, hoeffding(r, p, pbar).value))
        else:
            curve.append((r, -han_kobayashi(r, p, pbar).value))
    return curve
