"""Adaptive discrimination strategies over n channel uses.

Histories are stored level by level as flat arrays. A history of k
(input, output) steps is the integer h = h_prev * |X||Y| + x * |Y| + y, so
the children of h at the next level are the contiguous block
h * |X||Y| ... h * |X||Y| + |X||Y| - 1. Policies and tests are dense tables
over these indices; everything is exact up to the enumeration cap. Past the
cap only Monte Carlo runs, with the policy and test given as callbacks on
label histories.
"""
from dataclasses import dataclass, field
from itertools import product
import logging
import math

import numpy as np
from scipy.special import logsumexp, xlogy

import settings
from channel_bounds import channel_phi, stein_channel
from divergence_core import binary_entropy, cumulant_arrays, safe_log
from errors import DistributionError, DomainError, EnumerationScaleError
from type_classes import count_compositions, iter_compositions, log_multinomial

logger = logging.getLogger(__name__)

Z_95 = 1.959963984540054


def _check_horizon(n):
    n = int(n)
    if n < 1:
        raise DomainError(f"Horizon must be positive, got {n}")
    return n


def within_scale(n, pair):
    """True when all (|X||Y|)^n transcripts fit under the enumeration cap."""
    return (pair.num_inputs * pair.num_outputs) ** int(n) <= settings.ENUMERATION_CAP


def _check_scale(n, pair):
    n = _check_horizon(n)
    branching = pair.num_inputs * pair.num_outputs
    if not within_scale(n, pair):
        raise EnumerationScaleError(
            f"(|X||Y|)^n = {branching}^{n} exceeds the enumeration cap {settings.ENUMERATION_CAP}"
        )
    return n


def _check_prior(prior):
    prior = float(prior)
    if not 0.0 < prior < 1.0:
        raise DomainError(f"Prior must lie in (0, 1), got {prior!r}")
    return prior


def decode_history(index, length, input_labels, output_labels):
    """Tuple of (input, output) labels for a flat history index."""
    num_x, num_y = len(input_labels), len(output_labels)
    steps = []
    for _ in range(length):
        index, xy = divmod(index, num_x * num_y)
        x, y = divmod(xy, num_y)
        steps.append((input_labels[x], output_labels[y]))
    return tuple(reversed(steps))


def encode_history(history, input_labels, output_labels):
    x_index = {label: i for i, label in enumerate(input_labels)}
    y_index = {label: i for i, label in enumerate(output_labels)}
    branching = len(input_labels) * len(output_labels)
    index = 0
    for x, y in history:
        try:
            index = index * branching + x_index[x] * len(output_labels) + y_index[y]
        except KeyError as exc:
            raise DistributionError(f"Unknown label {exc} in history {history}") from exc
    return index


@dataclass(frozen=True)
class Policy:
    """Input distribution for step k+1 given each history of length k."""

    levels: tuple = field(repr=False)
    input_labels: tuple
    output_labels: tuple

    def __post_init__(self):
        num_x, num_y = len(self.input_labels), len(self.output_labels)
        levels = []
        for k, table in enumerate(self.levels):
            table = np.array(table, dtype=float)
            expected = ((num_x * num_y) ** k, num_x)
            if table.shape != expected:
                raise DistributionError(f"Policy level {k} has shape {table.shape}, expected {expected}")
            if np.any(table < 0) or np.any(np.abs(table.sum(axis=1) - 1.0) > settings.PROB_TOL):
                raise DistributionError(f"Policy level {k} holds an invalid input distribution")
            table.setflags(write=False)
            levels.append(table)
        if not levels:
            raise DistributionError("Policy needs at least one step")
        object.__setattr__(self, "levels", tuple(levels))
        object.__setattr__(self, "input_labels", tuple(self.input_labels))
        object.__setattr__(self, "output_labels", tuple(self.output_labels))

    @property
    def n(self):
        return len(self.levels)

    @classmethod
    def from_callback(cls, decide, n, pair):
        """Tabulate decide(history) -> {input label: probability} or an input label."""
        n = _check_scale(n, pair)
        x_index = {label: i for i, label in enumerate(pair.input_labels)}
        levels = []
        for k in range(n):
            size = (pair.num_inputs * pair.num_outputs) ** k
            table = np.zeros((size, pair.num_inputs))
            for h in range(size):
                choice = decide(decode_history(h, k, pair.input_labels, pair.output_labels))
                try:
                    if isinstance(choice, dict):
                        for label, prob in choice.items():
                            table[h, x_index[label]] = prob
                    else:
                        table[h, x_index[choice]] = 1.0
                except KeyError as exc:
                    raise DistributionError(f"Policy chose unknown input {exc}") from exc
            levels.append(table)
        return cls(tuple(levels), pair.input_labels, pair.output_labels)

    def input_distribution(self, history):
        index = encode_history(history, self.input_labels, self.output_labels)
        return dict(zip(self.input_labels, self.levels[len(history)][index].tolist()))

    def is_deterministic(self):
        return all(np.all((table == 0.0) | (table == 1.0)) for table in self.levels)


@dataclass(frozen=True)
class TestFunction:
    """Probability of accepting Wbar for every full transcript."""

    __test__ = False

    accept_prob: np.ndarray = field(repr=False)
    n: int

    def __post_init__(self):
        table = np.array(self.accept_prob, dtype=float).reshape(-1)
        if np.any(table < 0) or np.any(table > 1) or not np.all(np.isfinite(table)):
            raise DistributionError("Test values must lie in [0, 1]")
        table.setflags(write=False)
        object.__setattr__(self, "accept_prob", table)
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def constant(cls, value, n, pair):
        n = _check_scale(n, pair)
        return cls(np.full((pair.num_inputs * pair.num_outputs) ** n, float(value)), n)

    @classmethod
    def from_callback(cls, accept, n, pair):
        n = _check_scale(n, pair)
        size = (pair.num_inputs * pair.num_outputs) ** n
        values = [
            float(accept(decode_history(h, n, pair.input_labels, pair.output_labels)))
            for h in range(size)
        ]
        return cls(np.array(values), n)


@dataclass(frozen=True)
class ErrorPair:
    alpha: float
    beta: float
    n: int

    def to_json(self):
        return {"alpha": self.alpha, "beta": self.beta, "n": self.n}


@dataclass(frozen=True)
class TranscriptNode:
    history: tuple
    weight_w: float
    weight_wbar: float


def _check_policy(policy, n, pair):
    if policy.n != n:
        raise DomainError(f"Policy horizon {policy.n} does not match n={n}")
    if policy.input_labels != pair.input_labels or policy.output_labels != pair.output_labels:
        raise DomainError("Policy alphabet does not match the channel pair")


def _check_test(test, n, pair):
    size = (pair.num_inputs * pair.num_outputs) ** n
    if test.accept_prob.size != size:
        raise DomainError(f"Test has {test.accept_prob.size} entries, expected {size}")


def _path_weights(policy, pair):
    """Per level, the history probabilities under W and under Wbar."""
    w = pair.w.rows
    wbar = pair.wbar.rows
    levels = [(np.ones(1), np.ones(1))]
    for table in policy.levels:
        ww, wwbar = levels[-1]
        ww = (ww[:, None, None] * table[:, :, None] * w[None, :, :]).reshape(-1)
        wwbar = (wwbar[:, None, None] * table[:, :, None] * wbar[None, :, :]).reshape(-1)
        levels.append((ww, wwbar))
    return levels


def _channel_weights(n, rows):
    """Product of channel probabilities along every history, per level."""
    flat = rows.reshape(-1)
    levels = [np.ones(1)]
    for _ in range(n):
        levels.append((levels[-1][:, None] * flat[None, :]).reshape(-1))
    return levels


def transcript_tree(policy, n, pair):
    """All histories with their probabilities under both channels, level by level."""
    n = _check_scale(n, pair)
    _check_policy(policy, n, pair)
    tree = []
    for k, (ww, wwbar) in enumerate(_path_weights(policy, pair)):
        tree.append([
            TranscriptNode(
                decode_history(h, k, pair.input_labels, pair.output_labels),
                float(ww[h]),
                float(wwbar[h]),
            )
            for h in range(ww.size)
        ])
    return tree


def exact_errors(policy, test, n, pair):
    """Exact type I and type II errors by full transcript enumeration."""
    n = _check_scale(n, pair)
    _check_policy(policy, n, pair)
    _check_test(test, n, pair)
    ww, wwbar = _path_weights(policy, pair)[-1]
    f = test.accept_prob
    alpha = float(np.dot(ww, f))
    beta = float(np.dot(wwbar, 1.0 - f))
    return ErrorPair(min(max(alpha, 0.0), 1.0), min(max(beta, 0.0), 1.0), n)


def bayes_test(pair, prior, n):
    """Accept Wbar exactly where prior * W-weight < (1 - prior) * Wbar-weight."""
    prior = _check_prior(prior)
    n = _check_scale(n, pair)
    cw = _channel_weights(n, pair.w.rows)[-1]
    cwbar = _channel_weights(n, pair.wbar.rows)[-1]
    return TestFunction((prior * cw < (1.0 - prior) * cwbar).astype(float), n)


def bayes_decision(pair, prior):
    """Bayes test as a callback on transcripts, for horizons past the enumeration cap."""
    prior = _check_prior(prior)
    log_w, log_wbar = safe_log(pair.w.rows), safe_log(pair.wbar.rows)
    x_index = {label: i for i, label in enumerate(pair.input_labels)}
    y_index = {label: j for j, label in enumerate(pair.output_labels)}
    log_prior, log_rest = math.log(prior), math.log1p(-prior)

    def accept(history):
        i = [x_index[x] for x, _ in history]
        j = [y_index[y] for _, y in history]
        weight_w = log_prior + float(np.sum(log_w[i, j]))
        weight_wbar = log_rest + float(np.sum(log_wbar[i, j]))
        return 1.0 if weight_w < weight_wbar else 0.0

    return accept


def optimal_adaptive_bayes(n, pair, prior=0.5):
    """Minimum of prior * alpha + (1 - prior) * beta over adaptive policies and tests.

    Backward induction on the transcript tree: leaves take the smaller of the
    two weighted channel probabilities, inner nodes the best input's sum over
    outputs. Returns (value, deterministic policy).
    """
    prior = _check_prior(prior)
    n = _check_scale(n, pair)
    num_x, num_y = pair.num_inputs, pair.num_outputs
    cw = _channel_weights(n, pair.w.rows)[-1]
    cwbar = _channel_weights(n, pair.wbar.rows)[-1]
    value = np.minimum(prior * cw, (1.0 - prior) * cwbar)
    choices = [None] * n
    for k in range(n - 1, -1, -1):
        per_input = value.reshape(-1, num_x, num_y).sum(axis=2)
        choices[k] = np.argmin(per_input, axis=1)
        value = per_input[np.arange(per_input.shape[0]), choices[k]]
    levels = []
    for choice in choices:
        table = np.zeros((choice.size, num_x))
        table[np.arange(choice.size), choice] = 1.0
        levels.append(table)
    logger.debug("Adaptive Bayes error at n=%d: %.12g", n, value[0])
    return float(value[0]), Policy(tuple(levels), pair.input_labels, pair.output_labels)


def fixed_input_policy(x, n, pair):
    """Deterministic non-adaptive policy that always uses input x."""
    n = _check_scale(n, pair)
    i = pair.input_labels.index(x)
    branching = pair.num_inputs * pair.num_outputs
    levels = []
    for k in range(n):
        table = np.zeros((branching ** k, pair.num_inputs))
        table[:, i] = 1.0
        levels.append(table)
    return Policy(tuple(levels), pair.input_labels, pair.output_labels)


def fixed_input_decision(x, pair):
    """Callback form of fixed_input_policy; valid for any horizon."""
    if x not in pair.input_labels:
        raise DomainError(f"Unknown input {x!r}")
    return lambda history: x


def all_deterministic_policies(n, pair):
    """Every deterministic adaptive policy of horizon n, in lexicographic order."""
    n = _check_scale(n, pair)
    branching = pair.num_inputs * pair.num_outputs
    sizes = [branching ** k for k in range(n)]
    total = pair.num_inputs ** sum(sizes)
    if total > settings.ENUMERATION_CAP:
        raise EnumerationScaleError(f"{total} deterministic policies exceed the enumeration cap")
    per_level = [list(product(range(pair.num_inputs), repeat=size)) for size in sizes]
    for combo in product(*per_level):
        levels = []
        for choice in combo:
            table = np.zeros((len(choice), pair.num_inputs))
            table[np.arange(len(choice)), list(choice)] = 1.0
            levels.append(table)
        yield Policy(tuple(levels), pair.input_labels, pair.output_labels)


def _type_classes(n, x, pair):
    """Log multinomials and log class probabilities under both rows for input x."""
    parts = pair.num_outputs
    count = count_compositions(n, parts)
    if count > settings.ENUMERATION_CAP:
        raise EnumerationScaleError(f"{count} type classes exceed the enumeration cap")
    i = pair.input_labels.index(x)
    counts = np.concatenate(list(iter_compositions(n, parts)), axis=0)
    log_mult = log_multinomial(counts)
    log_w = xlogy(counts, pair.w.rows[i]).sum(axis=1)
    log_wbar = xlogy(counts, pair.wbar.rows[i]).sum(axis=1)
    return log_mult, log_w, log_wbar


def optimal_fixed_input_bayes(n, x, pair, prior=0.5):
    """Exact Bayes error when input x is used n times, summed over output types."""
    prior = _check_prior(prior)
    n = _check_horizon(n)
    log_mult, log_w, log_wbar = _type_classes(n, x, pair)
    terms = log_mult + np.minimum(np.log(prior) + log_w, np.log1p(-prior) + log_wbar)
    with np.errstate(divide="ignore"):
        return float(np.exp(logsumexp(terms)))


def neyman_pearson_exact(n, x, pair, epsilon):
    """Optimal randomized type II error at type I level epsilon for input x repeated n times."""
    epsilon = float(epsilon)
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must lie in [0, 1], got {epsilon!r}")
    n = _check_horizon(n)
    log_mult, log_w, log_wbar = _type_classes(n, x, pair)
    keep = np.isfinite(log_wbar)
    log_mult, log_w, log_wbar = log_mult[keep], log_w[keep], log_wbar[keep]
    mass_w = np.exp(log_mult + log_w)
    mass_wbar = np.exp(log_mult + log_wbar)

    # classes impossible under W are rejected at no cost
    free = ~np.isfinite(log_w)
    idx = np.flatnonzero(~free)
    if idx.size == 0:
        return 0.0
    llr = log_wbar[idx] - log_w[idx]
    order = idx[np.argsort(-llr, kind="stable")]
    sorted_llr = log_wbar[order] - log_w[order]
    breaks = np.flatnonzero(np.abs(np.diff(sorted_llr)) > 1e-12 * np.maximum(1.0, np.abs(sorted_llr[1:])))
    starts = np.concatenate([[0], breaks + 1])
    group_mass = np.add.reduceat(mass_w[order], starts)
    cumulative = np.cumsum(group_mass)

    reject = np.zeros(order.size)
    full = np.flatnonzero(cumulative <= epsilon * (1.0 + 1e-12))
    last_full = full[-1] if full.size else -1
    group_of = np.repeat(np.arange(starts.size), np.diff(np.concatenate([starts, [order.size]])))
    reject[group_of <= last_full] = 1.0
    boundary = last_full + 1
    if boundary < starts.size:
        used = cumulative[last_full] if last_full >= 0 else 0.0
        gamma = max(epsilon - used, 0.0) / group_mass[boundary]
        reject[group_of == boundary] = min(gamma, 1.0)
    beta = math.fsum(mass_wbar[order] * (1.0 - reject))
    return float(min(max(beta, 0.0), 1.0))


def _chunk_stream(seed, chunk, hypothesis):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chunk, hypothesis])))


def _simulate_chunk(policy, test, pair, hypothesis, seed, chunk, size):
    """Sum and sum of squares of the error indicator for one chunk of trials."""
    rng = _chunk_stream(seed, chunk, hypothesis)
    rows = pair.w.rows if hypothesis == 0 else pair.wbar.rows
    cdf_rows = np.cumsum(rows, axis=1)
    num_y = pair.num_outputs
    branching = pair.num_inputs * num_y
    history = np.zeros(size, dtype=np.int64)
    for table in policy.levels:
        cdf_x = np.cumsum(table[history], axis=1)
        x = np.minimum((cdf_x < rng.random(size)[:, None]).sum(axis=1), pair.num_inputs - 1)
        y = np.minimum((cdf_rows[x] < rng.random(size)[:, None]).sum(axis=1), num_y - 1)
        history = history * branching + x * num_y + y
    f = test.accept_prob[history]
    err = f if hypothesis == 0 else 1.0 - f
    return float(np.sum(err)), float(np.sum(err * err))


def _draw_input(choice, x_index, u):
    if not isinstance(choice, dict):
        if choice not in x_index:
            raise DistributionError(f"Policy chose unknown input {choice!r}")
        return x_index[choice]
    probs = np.zeros(len(x_index))
    for label, prob in choice.items():
        if label not in x_index:
            raise DistributionError(f"Policy chose unknown input {label!r}")
        probs[x_index[label]] = float(prob)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > settings.PROB_TOL:
        raise DistributionError(f"Policy returned an invalid input distribution {choice!r}")
    return min(int((np.cumsum(probs) < u).sum()), len(x_index) - 1)


def _simulate_chunk_lazy(decide, accept, n, pair, hypothesis, seed, chunk, size):
    """Chunk of trials driven by callbacks; row t of the uniform block is trial t's stream."""
    rng = _chunk_stream(seed, chunk, hypothesis)
    uniforms = rng.random((size, n, 2))
    rows = pair.w.rows if hypothesis == 0 else pair.wbar.rows
    cdf_rows = np.cumsum(rows, axis=1)
    x_index = {label: i for i, label in enumerate(pair.input_labels)}
    num_y = pair.num_outputs
    errs = []
    for u in uniforms:
        history = ()
        for k in range(n):
            i = _draw_input(decide(history), x_index, u[k, 0])
            j = min(int((cdf_rows[i] < u[k, 1]).sum()), num_y - 1)
            history += ((pair.input_labels[i], pair.output_labels[j]),)
        f = float(accept(history))
        if not 0.0 <= f <= 1.0:
            raise DistributionError(f"Test returned {f!r} outside [0, 1]")
        errs.append(f if hypothesis == 0 else 1.0 - f)
    return math.fsum(errs), math.fsum(e * e for e in errs)


def _as_decide(policy, n, pair):
    if isinstance(policy, Policy):
        _check_policy(policy, n, pair)
        return policy.input_distribution
    if not callable(policy):
        raise DomainError(f"Policy must be a Policy table or a callable, got {type(policy).__name__}")
    return policy


def _as_accept(test, n, pair):
    if isinstance(test, TestFunction):
        _check_test(test, n, pair)
        return lambda history: test.accept_prob[encode_history(history, pair.input_labels, pair.output_labels)]
    if not callable(test):
        raise DomainError(f"Test must be a TestFunction table or a callable, got {type(test).__name__}")
    return test


def monte_carlo_errors(policy, test, n, pair, trials, seed):
    """Estimated (alpha, beta) with 95% normal-approximation half-widths.

    policy is a Policy table or a callback history -> input label or
    {input label: probability}; test is a TestFunction table or a callback
    transcript -> probability of accepting Wbar. Callbacks must be pure
    functions of the history; they work past the enumeration cap. Trials run
    in chunks; chunk c under hypothesis h draws from a Philox stream keyed by
    (seed, c, h) and chunk sums are reduced in chunk order.
    """
    trials = int(trials)
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if isinstance(policy, Policy) and isinstance(test, TestFunction):
        n = _check_scale(n, pair)
        _check_policy(policy, n, pair)
        _check_test(test, n, pair)

        def run(job):
            return _simulate_chunk(policy, test, pair, job[0], seed, job[1], job[2])
    else:
        n = _check_horizon(n)
        decide = _as_decide(policy, n, pair)
        accept = _as_accept(test, n, pair)

        def run(job):
            return _simulate_chunk_lazy(decide, accept, n, pair, job[0], seed, job[1], job[2])

    chunks = [
        (hypothesis, c, min(settings.MC_CHUNK, trials - c * settings.MC_CHUNK))
        for hypothesis in (0, 1)
        for c in range(-(-trials // settings.MC_CHUNK))
    ]
    sums = settings.parallel_map(run, chunks)
    estimates = []
    half_widths = []
    for hypothesis in (0, 1):
        parts = [s for job, s in zip(chunks, sums) if job[0] == hypothesis]
        total = math.fsum(p[0] for p in parts)
        total_sq = math.fsum(p[1] for p in parts)
        mean = total / trials
        if trials > 1:
            var = max(total_sq - trials * mean * mean, 0.0) / (trials - 1)
        else:
            var = 0.0
        estimates.append(mean)
        half_widths.append(Z_95 * math.sqrt(var / trials))
    logger.info("Monte Carlo n=%d trials=%d seed=%d: alpha=%.6g beta=%.6g", n, trials, seed, *estimates)
    return ErrorPair(estimates[0], estimates[1], n), tuple(half_widths)


def converse_check(policy, test, n, pair, s):
    """Check (1-s) log E_W(1-f) <= -s log E_Wbar(1-f) + n phi_env(s) for s <= 0.

    Returns (holds, slack) with slack = right side minus left side.
    """
    s = float(s)
    if s > 0:
        raise DomainError(f"s must be nonpositive, got {s}")
    errors = exact_errors(policy, test, n, pair)
    keep_w = 1.0 - errors.alpha
    keep_wbar = errors.beta
    env, _ = channel_phi(s, pair)
    if keep_w <= 0.0 or not np.isfinite(env):
        return True, np.inf
    lhs = (1.0 - s) * math.log(keep_w)
    if s == 0.0:
        rhs = 0.0
    elif keep_wbar <= 0.0:
        return False, -np.inf
    else:
        rhs = -s * math.log(keep_wbar) + n * env
    slack = rhs - lhs
    return slack >= -1e-9, slack


def weak_converse_check(policy, test, n, pair):
    """Check -(1/n) log E_Wbar(1-f) <= (Dbar + h(E_W(1-f))/n) / E_W(1-f)."""
    errors = exact_errors(policy, test, n, pair)
    keep_w = 1.0 - errors.alpha
    keep_wbar = errors.beta
    stein, _ = stein_channel(pair)
    if keep_w <= 0.0 or not np.isfinite(stein):
        return True, np.inf
    rhs = (stein + binary_entropy(keep_w) / n) / keep_w
    if keep_wbar <= 0.0:
        return False, -np.inf
    lhs = -math.log(keep_wbar) / n
    slack = rhs - lhs
    return slack >= -1e-9, slack


def chain_rule_check(policy, n, pair, s):
    """(phi(s|Q_W||Q_Wbar), n * phi_env(s)) for the transcript distributions of a policy."""
    n = _check_scale(n, pair)
    _check_policy(policy, n, pair)
    ww, wwbar = _path_weights(policy, pair)[-1]
    lhs = float(cumulant_arrays(safe_log(ww), safe_log(wwbar), float(s)))
    env, _ = channel_phi(s, pair)
    return lhs, n * env
