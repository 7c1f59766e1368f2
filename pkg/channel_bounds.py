"""Channel-level exponents: the cumulant envelope over inputs and the bounds built on it."""
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.special import logsumexp

import settings
from divergence_core import Distribution, cumulant_arrays, llr_stats, relative_entropy, safe_log
from errors import AlphabetMismatchError, DistributionError, DomainError
from exponent_bounds import (
    BEYOND_R0,
    BOUNDARY_S0,
    INTERIOR,
    BoundResult,
    chernoff,
    hk_limit_search,
    hoeffding,
)
from optimize1d import compact_grid, first_argmax, golden_max, t_to_s

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Channel:
    input_labels: tuple
    output_labels: tuple
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        inputs = tuple(self.input_labels)
        outputs = tuple(self.output_labels)
        if rows.ndim != 2 or rows.shape != (len(inputs), len(outputs)):
            raise DistributionError(
                f"Channel matrix has shape {rows.shape}, expected ({len(inputs)}, {len(outputs)})"
            )
        if len(set(inputs)) != len(inputs) or len(set(outputs)) != len(outputs):
            raise DistributionError("Channel labels must be unique")
        for label, row in zip(inputs, rows):
            if not np.all(np.isfinite(row)) or np.any(row < 0):
                raise DistributionError(f"Row {label!r} has invalid entries {row.tolist()}")
            if abs(row.sum() - 1.0) > settings.PROB_TOL:
                raise DistributionError(f"Row {label!r} sums to {row.sum()!r}, expected 1")
        rows.setflags(write=False)
        object.__setattr__(self, "input_labels", inputs)
        object.__setattr__(self, "output_labels", outputs)
        object.__setattr__(self, "rows", rows)

    def row(self, index):
        return Distribution(self.output_labels, self.rows[index])


@dataclass(frozen=True)
class ChannelPair:
    w: Channel
    wbar: Channel

    def __post_init__(self):
        if self.w.input_labels != self.wbar.input_labels:
            raise AlphabetMismatchError(
                f"Input labels {list(self.w.input_labels)} and {list(self.wbar.input_labels)} differ"
            )
        if self.w.output_labels != self.wbar.output_labels:
            raise AlphabetMismatchError(
                f"Output labels {list(self.w.output_labels)} and {list(self.wbar.output_labels)} differ"
            )

    @classmethod
    def from_rows(cls, w_rows, wbar_rows, input_labels=None, output_labels=None):
        w_rows = np.asarray(w_rows, dtype=float)
        if input_labels is None:
            input_labels = tuple(range(w_rows.shape[0]))
        if output_labels is None:
            output_labels = tuple(range(w_rows.shape[1]))
        return cls(
            Channel(input_labels, output_labels, w_rows),
            Channel(input_labels, output_labels, wbar_rows),
        )

    @classmethod
    def from_pair(cls, p, pbar, input_label=0):
        """One-input channel pair carrying the distributions p and pbar."""
        pbar = pbar.reordered(p.labels)
        return cls.from_rows([p.probs], [pbar.probs], (input_label,), p.labels)

    @property
    def input_labels(self):
        return self.w.input_labels

    @property
    def output_labels(self):
        return self.w.output_labels

    @property
    def num_inputs(self):
        return len(self.w.input_labels)

    @property
    def num_outputs(self):
        return len(self.w.output_labels)

    @property
    def log_w(self):
        return safe_log(self.w.rows)

    @property
    def log_wbar(self):
        return safe_log(self.wbar.rows)

    def row_pair(self, index):
        return self.w.row(index), self.wbar.row(index)

    def subset(self, indices):
        indices = list(indices)
        labels = tuple(self.input_labels[i] for i in indices)
        return ChannelPair.from_rows(
            self.w.rows[indices], self.wbar.rows[indices], labels, self.output_labels
        )

    def to_json(self):
        return {
            "input_labels": list(self.input_labels),
            "output_labels": list(self.output_labels),
            "W": self.w.rows.tolist(),
            "Wbar": self.wbar.rows.tolist(),
        }

    @classmethod
    def from_json(cls, payload):
        try:
            return cls.from_rows(
                payload["W"],
                payload["Wbar"],
                payload.get("input_labels"),
                payload.get("output_labels"),
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise DistributionError(f"Malformed channel pair: {exc}") from exc


@dataclass(frozen=True)
class TwoPointInput:
    x_plus: object
    x_minus: object
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError(f"Mixing weight must lie in [0, 1], got {self.lam!r}")

    def to_json(self):
        return {"x_plus": self.x_plus, "x_minus": self.x_minus, "lambda": self.lam}


@dataclass(frozen=True)
class RegularityReport:
    sup_phi_second: float
    window: tuple
    stein_slope_gap: float
    epsilon: float
    regular: bool
    non_regular_inputs: tuple = ()

    def to_json(self):
        return {
            "sup_phi_second": self.sup_phi_second,
            "window": list(self.window),
            "stein_slope_gap": self.stein_slope_gap,
            "epsilon": self.epsilon,
            "regular": self.regular,
            "non_regular_inputs": list(self.non_regular_inputs),
        }


def phi_rows(pair, s):
    """phi(s|W_x||Wbar_x) for every input; shape s.shape + (num_inputs,)."""
    s = np.asarray(s, dtype=float)
    return cumulant_arrays(pair.log_w, pair.log_wbar, s[..., None])


def channel_phi(s, pair):
    """Envelope max over x of phi(s|W_x||Wbar_x) and the first attaining input."""
    values = phi_rows(pair, float(s))
    i = first_argmax(values)
    return float(values[i]), pair.input_labels[i]


def envelope(pair, s):
    return np.max(phi_rows(pair, s), axis=-1)


def mixture_phi(s, pair, input_dist):
    """log sum_x P(x) Phi(s|W_x||Wbar_x) for an input distribution P."""
    input_dist = input_dist.reordered(pair.input_labels)
    rows = phi_rows(pair, s)
    weights = input_dist.probs
    used = weights > 0
    with np.errstate(divide="ignore"):
        terms = np.where(used, np.log(np.where(used, weights, 1.0)) + np.where(used, rows, 0.0), -np.inf)
    return logsumexp(terms, axis=-1)


def _per_row(pair, func):
    return settings.parallel_map(lambda i: func(*pair.row_pair(i)), range(pair.num_inputs))


def _best(values, pair):
    i = first_argmax(values)
    return float(values[i]), pair.input_labels[i]


def stein_channel(pair):
    """sup_x D(W_x||Wbar_x) with the attaining input."""
    return _best(_per_row(pair, relative_entropy), pair)


def chernoff_channel(pair):
    return _best([b.value for b in _per_row(pair, chernoff)], pair)


def hoeffding_channel(r, pair):
    return _best([b.value for b in _per_row(pair, lambda p, q: hoeffding(r, p, q))], pair)


def _row_limits(pair):
    """(slope_R, r0, log mass of the argmin set) per input."""
    limits = []
    for i in range(pair.num_inputs):
        p, pbar = pair.row_pair(i)
        stats = llr_stats(p, pbar)
        mass = float(np.sum(p.probs[stats.p_minus_infinity.probs > 0]))
        limits.append((stats.slope_R, stats.r0, float(np.log(mass))))
    return limits


def envelope_slope(pair):
    """R_env = lim phi_env(s)/s as s -> -inf, the smallest row slope."""
    return min(slope for slope, _, _ in _row_limits(pair))


def channel_r0(pair):
    """r0 of the row dominating the envelope as s -> -inf.

    That row has the smallest slope; among equal slopes the larger argmin-set
    mass wins, then the smaller input index.
    """
    limits = _row_limits(pair)
    order = sorted(range(len(limits)), key=lambda i: (limits[i][0], -limits[i][2], i))
    return limits[order[0]][1]


def hk_channel(r, pair):
    """sup over s <= 0 of (-s r - phi_env(s)) / (1 - s)."""
    r = float(r)
    stein, _ = stein_channel(pair)
    if not r > stein:
        return BoundResult(0.0, 0.0, BOUNDARY_S0)
    slope = envelope_slope(pair)
    r0 = channel_r0(pair)
    if r > r0:
        return BoundResult(r + slope, -np.inf, BEYOND_R0)
    if r == r0:
        return BoundResult(r + slope, -np.inf, INTERIOR)
    value, s, at_limit = hk_limit_search(r, lambda s: envelope(pair, s), slope)
    if at_limit:
        return BoundResult(value, s, INTERIOR)
    logger.debug("hk_channel(%g) = %.12g at s = %.6g", r, value, s)
    return BoundResult(max(value, 0.0) + 0.0, s, BOUNDARY_S0 if s == 0.0 else INTERIOR)


def _pair_candidates(pair):
    if pair.num_inputs <= settings.PAIR_SEARCH_MAX_INPUTS:
        return list(range(pair.num_inputs))
    s = t_to_s(np.linspace(0.0, 1.0, settings.PAIR_SEARCH_MAX_INPUTS, endpoint=False))
    attaining = np.argmax(phi_rows(pair, s), axis=-1)
    candidates = sorted(set(int(i) for i in attaining))
    logger.info("Restricting pair search to %d envelope-attaining inputs", len(candidates))
    return candidates


class _MixtureObjective:
    """Inner sup over s <= 0 for mixtures of two rows, on the compact t-grid."""

    def __init__(self, r, pair, i, j, extra_s):
        self.r = r
        self.t = compact_grid()
        self.s = t_to_s(self.t)
        self.extra_s = np.asarray([v for v in extra_s if np.isfinite(v) and v <= 0], dtype=float)
        self.pair = pair
        self.i, self.j = i, j
        rows = phi_rows(pair, self.s)
        self.phi_i, self.phi_j = rows[:, i], rows[:, j]
        extra = phi_rows(pair, self.extra_s)
        self.extra_i, self.extra_j = extra[:, i], extra[:, j]
        limits = _row_limits(pair)
        self.slope_i, self.slope_j = limits[i][0], limits[j][0]

    @staticmethod
    def _mix(lam, phi_i, phi_j):
        lam = np.asarray(lam, dtype=float)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(lam > 0, np.log(lam) + phi_i, -np.inf)
            b = np.where(lam < 1, np.log1p(-lam) + phi_j, -np.inf)
        return np.logaddexp(a, b)

    def _limit(self, lam):
        lam = np.asarray(lam, dtype=float)
        slope = np.where(lam >= 1, self.slope_i, np.where(lam <= 0, self.slope_j, min(self.slope_i, self.slope_j)))
        return self.r + slope

    def coarse(self, lams):
        """Grid value of the inner sup for an array of mixing weights."""
        mixed = self._mix(lams, self.phi_i, self.phi_j)
        with np.errstate(invalid="ignore"):
            values = (1.0 - self.t) * (-self.s * self.r - mixed)
        best = np.max(values, axis=-1)
        if self.extra_s.size:
            mixed = self._mix(lams, self.extra_i, self.extra_j)
            extra = (-self.extra_s * self.r - mixed) / (1.0 - self.extra_s)
            best = np.maximum(best, np.max(extra, axis=-1))
        return np.maximum(best, self._limit(lams))

    def refined(self, lam):
        """Inner sup at one mixing weight with golden refinement in t."""
        lam = float(lam)
        mixed = self._mix(lam, self.phi_i, self.phi_j)
        with np.errstate(invalid="ignore"):
            values = (1.0 - self.t) * (-self.s * self.r - mixed)
        k = first_argmax(values)
        best = float(values[k])

        def at(t):
            s = float(t_to_s(t))
            row = phi_rows(self.pair, s)
            mix = float(np.squeeze(self._mix(lam, row[self.i], row[self.j])))
            return (1.0 - t) * (-s * self.r - mix)

        if np.isfinite(best):
            lo = float(self.t[max(k - 1, 0)])
            hi = float(self.t[min(k + 1, self.t.size - 1)])
            _, v = golden_max(at, lo, hi)
            best = max(best, v)
        return float(max(best, float(self.coarse(np.array([lam]))[0])))


def hk_best_pair(r, pair):
    """Best two-point input distribution for the channel Han-Kobayashi bound.

    Returns (TwoPointInput, value) with value the sup over s <= 0 of the
    mixture objective, minimised over input pairs and mixing weights.
    """
    r = float(r)
    target = hk_channel(r, pair)
    candidates = _pair_candidates(pair)
    if len(candidates) == 1:
        pairs = [(candidates[0], candidates[0])]
    else:
        pairs = [(a, b) for k, a in enumerate(candidates) for b in candidates[k + 1:]]
    lam_grid = np.linspace(0.0, 1.0, int(round(1.0 / settings.LAMBDA_STEP)) + 1)
    extra_s = [target.argmax_s]

    def search(ij):
        i, j = ij
        objective = _MixtureObjective(r, pair, i, j, extra_s)
        if i == j:
            return objective.refined(1.0), 1.0
        coarse = objective.coarse(lam_grid)
        k = int(np.argmin(coarse))
        lam, value = float(lam_grid[k]), objective.refined(lam_grid[k])
        lo = float(lam_grid[max(k - 1, 0)])
        hi = float(lam_grid[min(k + 1, lam_grid.size - 1)])
        x, neg = golden_max(lambda v: -objective.refined(v), lo, hi, tol=1e-10)
        if -neg < value - settings.GOLDEN_TOL:
            lam, value = float(x), -neg
        return value, lam

    results = settings.parallel_map(search, pairs)
    best = min(range(len(pairs)), key=lambda k: (results[k][0], k))
    value, lam = results[best]
    i, j = pairs[best]
    labels = pair.input_labels
    if i == j or lam >= 1.0:
        mixture = TwoPointInput(labels[i], labels[i], 1.0)
    elif lam <= 0.0:
        mixture = TwoPointInput(labels[j], labels[j], 1.0)
    else:
        mixture = TwoPointInput(labels[i], labels[j], lam)
    logger.info("hk_best_pair(%g): %s value %.12g (envelope %.12g)", r, mixture, value, target.value)
    return mixture, max(value, 0.0) + 0.0


def regularity_check(pair, epsilon):
    """Sufficient condition for the Stein slope limit on the window [-epsilon, 0]."""
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    w, wbar = pair.w.rows, pair.wbar.rows
    non_regular = [
        pair.input_labels[i] for i in range(pair.num_inputs) if np.any((w[i] > 0) & (wbar[i] == 0))
    ]
    window = (-epsilon, 0.0)
    if non_regular:
        logger.warning("Rows %s have infinite phi for s < 0", non_regular)
        return RegularityReport(np.inf, window, np.inf, epsilon, False, tuple(non_regular))

    s = np.linspace(-epsilon, 0.0, settings.REGULARITY_GRID)
    lw, lq = pair.log_w, pair.log_wbar
    with np.errstate(invalid="ignore"):
        terms = np.where(w > 0, (1.0 - s[:, None, None]) * lw + s[:, None, None] * lq, -np.inf)
    weights = np.exp(terms - logsumexp(terms, axis=-1, keepdims=True))
    llr = np.where(w > 0, lq - np.where(w > 0, lw, 0.0), 0.0)
    mean = np.sum(weights * llr, axis=-1, keepdims=True)
    second = np.sum(weights * (llr - mean) ** 2, axis=-1)
    sup_second = float(max(np.max(second), 0.0))

    stein, _ = stein_channel(pair)
    env_value, _ = channel_phi(-epsilon, pair)
    gap = abs(env_value / epsilon - stein)
    regular = bool(gap <= sup_second * epsilon / 2.0 + 1e-9)
    return RegularityReport(sup_second, window, float(gap), epsilon, regular)


def sec4_example(a=100.0, b=1.5, p=0.0001, q=0.65):
    """Two binary channels whose envelope switches rows inside (-1, 0).

    Row 0 is (a p, 1 - a p) against (p, 1 - p); row 1 is (b q, 1 - b q)
    against (q, 1 - q).
    """
    a, b, p, q = float(a), float(b), float(p), float(q)
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise DomainError(f"p and q must lie in (0, 1), got p={p}, q={q}")
    if a < 1.0 or b < 1.0:
        raise DomainError(f"a and b must be at least 1, got a={a}, b={b}")
    if a * p > 1.0 or b * q > 1.0:
        raise DomainError(f"Need a*p <= 1 and b*q <= 1, got {a * p}, {b * q}")
    w = [[a * p, 1.0 - a * p], [b * q, 1.0 - b * q]]
    wbar = [[p, 1.0 - p], [q, 1.0 - q]]
    return ChannelPair.from_rows(w, wbar)
