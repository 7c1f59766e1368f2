"""Enumeration of integer compositions (type classes) in vectorised chunks.

Used both for the simplex grids of the oracles (compositions / total) and for
the exact type-class sums over n i.i.d. outputs.
"""
import numpy as np
from scipy.special import comb, gammaln


def count_compositions(total, parts):
    """Number of nonnegative integer vectors of length `parts` summing to `total`."""
    return int(comb(total + parts - 1, parts - 1, exact=True))


def _last_three(m):
    a, b = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
    keep = a + b <= m
    a = a[keep]
    b = b[keep]
    return np.stack([a, b, m - a - b], axis=1)


def _prefixes(total, length):
    if length == 0:
        yield ()
        return
    for head in range(total + 1):
        for tail in _prefixes(total - head, length - 1):
            yield (head,) + tail


def iter_compositions(total, parts):
    """Yield int64 arrays of shape (m, parts); together they list every composition once.

    Rows come out in lexicographic order, so downstream reductions that respect
    chunk order are deterministic.
    """
    if parts < 1:
        raise ValueError(f"parts must be >= 1, got {parts}")
    if parts == 1:
        yield np.array([[total]], dtype=np.int64)
        return
    if parts == 2:
        a = np.arange(total + 1, dtype=np.int64)
        yield np.stack([a, total - a], axis=1)
        return
    for prefix in _prefixes(total, parts - 3):
        rest = total - sum(prefix)
        tail = _last_three(rest).astype(np.int64)
        if prefix:
            head = np.broadcast_to(np.array(prefix, dtype=np.int64), (tail.shape[0], len(prefix)))
            yield np.concatenate([head, tail], axis=1)
        else:
            yield tail


def log_multinomial(counts):
    """log of n! / prod(k_i!) for each row of `counts`."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=-1)
    return gammaln(n + 1.0) - gammaln(counts + 1.0).sum(axis=-1)
