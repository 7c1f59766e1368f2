"""Primitives for pairs of finite distributions.

Relative entropy, the cumulant phi(s|P||Pbar) = log sum p^(1-s) pbar^s, its
derivatives, the exponentially tilted family P_s and the likelihood-ratio
support statistics. Everything is computed in the log domain with log 0
carried as -inf; +inf is a regular return value.

Conventions: 0 log 0 = 0 and 0^0 = 1 inside Phi, so phi(0) = phi(1) = 0 for
every valid pair. `phi_common` restricts the sum to the common support and is
the continuous extension used by the searches on [0, 1].
"""
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.special import entr, logsumexp, rel_entr

import settings
from errors import (
    AlphabetMismatchError,
    DistributionError,
    TiltUndefinedError,
    UndefinedDerivativeError,
)

logger = logging.getLogger(__name__)

LLR_TIE_TOL = 1e-12


def safe_log(x):
    """Elementwise natural log with exact -inf for zero entries."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(x)


@dataclass(frozen=True)
class Distribution:
    labels: tuple
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float).reshape(-1)
        labels = tuple(self.labels)
        if len(labels) != probs.size:
            raise DistributionError(f"{len(labels)} labels for {probs.size} probabilities")
        if len(set(labels)) != len(labels):
            raise DistributionError(f"Duplicate outcome labels in {list(labels)}")
        if probs.size == 0:
            raise DistributionError("Empty distribution")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise DistributionError(f"Probabilities must be finite and nonnegative, got {probs.tolist()}")
        total = probs.sum()
        if abs(total - 1.0) > settings.PROB_TOL:
            raise DistributionError(f"Probabilities sum to {total!r}, expected 1")
        probs.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def of(cls, probs, labels=None, renormalize=False):
        probs = np.asarray(probs, dtype=float).reshape(-1)
        if labels is None:
            labels = tuple(range(probs.size))
        if renormalize:
            total = probs.sum()
            if not np.isfinite(total) or total <= 0:
                raise DistributionError(f"Cannot renormalise a vector with total {total!r}")
            if abs(total - 1.0) > settings.PROB_TOL:
                logger.warning("Renormalising probabilities that summed to %.15g", total)
            probs = probs / total
        return cls(tuple(labels), probs)

    @property
    def size(self):
        return self.probs.size

    @property
    def log_probs(self):
        return safe_log(self.probs)

    def support(self):
        return self.probs > 0

    def reordered(self, labels):
        """Same distribution with outcomes listed in the order of `labels`."""
        labels = tuple(labels)
        if labels == self.labels:
            return self
        if set(labels) != set(self.labels) or len(labels) != len(self.labels):
            raise AlphabetMismatchError(f"Outcome labels {list(self.labels)} do not match {list(labels)}")
        index = {label: i for i, label in enumerate(self.labels)}
        return Distribution(labels, self.probs[[index[label] for label in labels]])

    def to_json(self):
        return {"labels": list(self.labels), "probs": [float(v) for v in self.probs]}

    @classmethod
    def from_json(cls, payload, renormalize=False):
        try:
            return cls.of(payload["probs"], payload.get("labels"), renormalize=renormalize)
        except (KeyError, TypeError) as exc:
            raise DistributionError(f"Malformed distribution object: {exc}") from exc


@dataclass(frozen=True)
class PairQuery:
    p: Distribution
    pbar: Distribution
    s: float = 0.0

    def __post_init__(self):
        if set(self.p.labels) != set(self.pbar.labels) or self.p.size != self.pbar.size:
            raise AlphabetMismatchError(
                f"Outcome labels {list(self.p.labels)} and {list(self.pbar.labels)} differ"
            )
        object.__setattr__(self, "pbar", self.pbar.reordered(self.p.labels))
        object.__setattr__(self, "s", float(self.s))


@dataclass(frozen=True)
class LlrStats:
    slope_R: float
    r0: float
    p_minus_infinity: Distribution


def aligned(p, pbar):
    """Probability arrays of the pair in a common outcome order."""
    query = PairQuery(p, pbar)
    return query.p.probs, query.pbar.probs


def log_terms(lp, lq, s, common_only=False):
    """log of p^(1-s) q^s per outcome, broadcasting s over leading axes.

    lp, lq: arrays (..., k) of log-probabilities; s: scalar or array whose
    shape broadcasts against lp[..., 0].
    """
    lp = np.asarray(lp, dtype=float)
    lq = np.asarray(lq, dtype=float)
    s_ = np.asarray(s, dtype=float)[..., None]
    in_p = np.isfinite(lp)
    in_q = np.isfinite(lq)
    both = in_p & in_q
    lp0 = np.where(in_p, lp, 0.0)
    lq0 = np.where(in_q, lq, 0.0)
    out = np.where(both, (1.0 - s_) * lp0 + s_ * lq0, -np.inf)
    if common_only:
        return out
    only_p = in_p & ~in_q
    only_q = in_q & ~in_p
    from_p = np.where(s_ < 0, np.inf, np.where(s_ == 0, lp0, -np.inf))
    from_q = np.where(s_ > 1, np.inf, np.where(s_ == 1, lq0, -np.inf))
    out = np.where(only_p, from_p, out)
    out = np.where(only_q, from_q, out)
    return out


def cumulant_arrays(lp, lq, s, common_only=False):
    terms = log_terms(lp, lq, s, common_only=common_only)
    with np.errstate(divide="ignore", invalid="ignore"):
        return logsumexp(terms, axis=-1)


def cumulant_curve(p, pbar, s, common_only=False):
    """phi (or phi_common) of a pair evaluated on an array of s values."""
    pa, qa = aligned(p, pbar)
    return cumulant_arrays(safe_log(pa), safe_log(qa), s, common_only=common_only)


def relative_entropy(p, pbar):
    """D(P||Pbar) in nats; +inf when P puts mass where Pbar does not."""
    pa, qa = aligned(p, pbar)
    return float(np.sum(rel_entr(pa, qa)))


def phi(q):
    """phi(s|P||Pbar); +inf where the defining sum diverges."""
    pa, qa = q.p.probs, q.pbar.probs
    return float(cumulant_arrays(safe_log(pa), safe_log(qa), q.s))


def phi_common(q):
    """Cumulant restricted to the common support; equals phi on (0, 1)."""
    pa, qa = q.p.probs, q.pbar.probs
    return float(cumulant_arrays(safe_log(pa), safe_log(qa), q.s, common_only=True))


def tilted_weights(pa, qa, s, common_only=False):
    terms = log_terms(safe_log(pa), safe_log(qa), s, common_only=common_only)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_phi = logsumexp(terms)
    if not np.isfinite(log_phi):
        return None, float(log_phi)
    weights = np.exp(terms - log_phi)
    return weights / weights.sum(), float(log_phi)


def tilted(q):
    """The tilted distribution P_s = p^(1-s) pbar^s / Phi(s)."""
    if q.s == 0.0:
        return q.p
    if q.s == 1.0:
        return q.pbar
    weights, log_phi = tilted_weights(q.p.probs, q.pbar.probs, q.s)
    if weights is None:
        raise TiltUndefinedError(f"Tilt undefined at s={q.s}: phi = {log_phi}")
    return Distribution(q.p.labels, weights)


def phi_derivatives(q, common_only=False):
    """(phi'(s), phi''(s)) as the mean and variance of log(pbar/p) under P_s."""
    weights, log_phi = tilted_weights(q.p.probs, q.pbar.probs, q.s, common_only=common_only)
    if weights is None:
        raise UndefinedDerivativeError(f"phi is not finite at s={q.s} (phi = {log_phi})")
    mask = weights > 0
    llr = safe_log(q.pbar.probs[mask]) - safe_log(q.p.probs[mask])
    if not np.all(np.isfinite(llr)):
        raise UndefinedDerivativeError(
            f"Log-likelihood ratio is infinite on the support of P_s at s={q.s}"
        )
    w = weights[mask]
    first = float(np.dot(w, llr))
    second = float(np.dot(w, (llr - first) ** 2))
    return first, max(second, 0.0)


def llr_stats(p, pbar):
    """slope_R = lim phi(s)/s as s -> -inf, the limiting tilt P_-inf and r0 = D(P_-inf||Pbar)."""
    query = PairQuery(p, pbar)
    pa, qa = query.p.probs, query.pbar.probs
    support = pa > 0
    llr = np.full(pa.shape, np.inf)
    llr[support] = safe_log(qa[support]) - safe_log(pa[support])
    slope = float(np.min(llr))
    if np.isfinite(slope):
        ties = support & (llr <= slope + LLR_TIE_TOL)
    else:
        ties = support & np.isneginf(llr)
    weights = np.where(ties, pa, 0.0)
    p_minus_inf = Distribution(query.p.labels, weights / weights.sum())
    r0 = relative_entropy(p_minus_inf, query.pbar)
    return LlrStats(slope_R=slope, r0=r0, p_minus_infinity=p_minus_inf)


def total_variation(p, pbar):
    pa, qa = aligned(p, pbar)
    return float(0.5 * np.abs(pa - qa).sum())


def binary_entropy(x):
    """h(x) = -x log x - (1-x) log(1-x) in nats."""
    x = float(x)
    return float(entr(x) + entr(1.0 - x))
