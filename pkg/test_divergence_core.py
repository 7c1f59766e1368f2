"""
Tests for distribution pairs: relative entropy, the cumulant phi, tilting and
the likelihood-ratio statistics.
"""
import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from divergence_core import (
    Distribution,
    PairQuery,
    binary_entropy,
    cumulant_curve,
    llr_stats,
    phi,
    phi_common,
    phi_derivatives,
    relative_entropy,
    tilted,
    total_variation,
)
from errors import AlphabetMismatchError, DistributionError, TiltUndefinedError, UndefinedDerivativeError


def _pair(p, pbar, s=0.0):
    return PairQuery(Distribution.of(p), Distribution.of(pbar), s)


def test_distribution_rejects_bad_vectors():
    with pytest.raises(DistributionError):
        Distribution.of([0.5, 0.6])
    with pytest.raises(DistributionError):
        Distribution.of([1.2, -0.2])
    with pytest.raises(DistributionError):
        Distribution.of([0.5, 0.5], labels=["a", "a"])
    with pytest.raises(DistributionError):
        Distribution.of([])


def test_renormalise_on_request_logs_warning(caplog):
    with caplog.at_level(logging.WARNING):
        d = Distribution.of([1.0, 3.0], renormalize=True)
    assert_allclose(d.probs, [0.25, 0.75])
    assert "Renormalising" in caplog.text


def test_pair_query_aligns_labels():
    p = Distribution.of([0.2, 0.8], labels=["a", "b"])
    pbar = Distribution.of([0.6, 0.4], labels=["b", "a"])
    q = PairQuery(p, pbar)
    assert q.pbar.labels == ("a", "b")
    assert_allclose(q.pbar.probs, [0.4, 0.6])
    with pytest.raises(AlphabetMismatchError):
        PairQuery(p, Distribution.of([0.5, 0.5], labels=["a", "c"]))


def test_relative_entropy_values():
    p = Distribution.of([0.5, 0.5])
    pbar = Distribution.of([0.2, 0.8])
    expected = 0.5 * np.log(0.5 / 0.2) + 0.5 * np.log(0.5 / 0.8)
    assert relative_entropy(p, pbar) == pytest.approx(expected, abs=1e-15)
    assert relative_entropy(p, p) == 0.0
    assert relative_entropy(p, Distribution.of([1.0, 0.0])) == np.inf
    assert relative_entropy(Distribution.of([1.0, 0.0]), p) == pytest.approx(np.log(2.0))


@pytest.mark.parametrize("p, pbar", [
    ([0.5, 0.5, 0.0], [0.0, 0.3, 0.7]),
    ([0.2, 0.8], [0.6, 0.4]),
    ([1.0, 0.0], [0.0, 1.0]),
])
def test_phi_vanishes_at_zero_and_one(p, pbar):
    assert phi(_pair(p, pbar, 0.0)) == pytest.approx(0.0, abs=1e-15)
    assert phi(_pair(p, pbar, 1.0)) == pytest.approx(0.0, abs=1e-15)


def test_phi_infinite_outside_unit_interval_when_supports_differ():
    q = ([0.5, 0.5, 0.0], [0.0, 0.3, 0.7])
    assert phi(_pair(*q, -0.5)) == np.inf
    assert phi(_pair(*q, 1.5)) == np.inf
    assert np.isfinite(phi(_pair(*q, 0.5)))


def test_phi_common_matches_phi_inside_and_gives_one_sided_limits():
    p, pbar = [0.5, 0.5, 0.0], [0.0, 0.3, 0.7]
    for s in (0.1, 0.5, 0.9):
        assert phi_common(_pair(p, pbar, s)) == pytest.approx(phi(_pair(p, pbar, s)), abs=1e-14)
    assert phi_common(_pair(p, pbar, 0.0)) == pytest.approx(np.log(0.5))
    assert phi_common(_pair(p, pbar, 1.0)) == pytest.approx(np.log(0.3))


def test_phi_is_convex(random_pair):
    p, pbar = random_pair(4)
    s = np.linspace(-3.0, 4.0, 141)
    values = cumulant_curve(p, pbar, s)
    assert np.all(np.diff(values, 2) >= -1e-12)


def test_derivatives_at_endpoints_are_divergences(random_pair):
    p, pbar = random_pair(3)
    d0, _ = phi_derivatives(PairQuery(p, pbar, 0.0))
    d1, _ = phi_derivatives(PairQuery(p, pbar, 1.0))
    assert d0 == pytest.approx(-relative_entropy(p, pbar), abs=1e-12)
    assert d1 == pytest.approx(relative_entropy(pbar, p), abs=1e-12)


def test_derivatives_match_finite_differences(random_pair):
    p, pbar = random_pair(3)
    s, h = -0.7, 1e-4
    first, second = phi_derivatives(PairQuery(p, pbar, s))
    f = [phi(PairQuery(p, pbar, s + k * h)) for k in (-1, 0, 1)]
    assert first == pytest.approx((f[2] - f[0]) / (2 * h), rel=1e-6)
    assert second == pytest.approx((f[2] - 2 * f[1] + f[0]) / h ** 2, rel=1e-4)


def test_derivatives_undefined_where_phi_diverges():
    with pytest.raises(UndefinedDerivativeError):
        phi_derivatives(_pair([0.5, 0.5], [1.0, 0.0], -0.5))


def test_tilted_endpoints_and_normalisation(random_pair):
    p, pbar = random_pair(4)
    assert tilted(PairQuery(p, pbar, 0.0)) is p
    assert tilted(PairQuery(p, pbar, 1.0)).probs.tolist() == pbar.probs.tolist()
    mid = tilted(PairQuery(p, pbar, 0.3))
    assert mid.probs.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("s", [-0.6, 0.4, 1.5])
def test_tilted_divergences_from_phi(random_pair, s):
    p, pbar = random_pair(4)
    p_s = tilted(PairQuery(p, pbar, s))
    value = phi(PairQuery(p, pbar, s))
    d0, _ = phi_derivatives(PairQuery(p, pbar, 0.0))
    ds, _ = phi_derivatives(PairQuery(p, pbar, s))
    assert relative_entropy(p, p_s) == pytest.approx(value - s * d0, abs=1e-10)
    assert relative_entropy(p_s, p) == pytest.approx(s * ds - value, abs=1e-10)


def test_tilt_undefined_raises():
    with pytest.raises(TiltUndefinedError):
        tilted(_pair([0.5, 0.5], [1.0, 0.0], -1.0))


def test_llr_stats():
    p = Distribution.of([0.5, 0.5])
    pbar = Distribution.of([0.2, 0.8])
    stats = llr_stats(p, pbar)
    assert stats.slope_R == pytest.approx(np.log(0.4))
    assert_allclose(stats.p_minus_infinity.probs, [1.0, 0.0])
    assert stats.r0 == pytest.approx(-np.log(0.2))


def test_llr_stats_ties_share_the_limit():
    p = Distribution.of([0.25, 0.25, 0.5])
    pbar = Distribution.of([0.125, 0.125, 0.75])
    stats = llr_stats(p, pbar)
    assert_allclose(stats.p_minus_infinity.probs, [0.5, 0.5, 0.0])
    assert stats.r0 == pytest.approx(np.log(4.0))


def test_llr_stats_with_missing_pbar_support():
    stats = llr_stats(Distribution.of([0.5, 0.5]), Distribution.of([1.0, 0.0]))
    assert stats.slope_R == -np.inf
    assert_allclose(stats.p_minus_infinity.probs, [0.0, 1.0])
    assert stats.r0 == np.inf


def test_total_variation_and_binary_entropy():
    assert total_variation(Distribution.of([0.2, 0.8]), Distribution.of([0.6, 0.4])) == pytest.approx(0.4)
    assert binary_entropy(0.5) == pytest.approx(np.log(2.0))
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0


def test_tilted_divergence_to_pbar_from_phi(random_pair):
    p, pbar = random_pair(4)
    for s in np.linspace(-5.0, 1.0, 13):
        p_s = tilted(PairQuery(p, pbar, s))
        first, _ = phi_derivatives(PairQuery(p, pbar, s))
        expected = (s - 1.0) * first - phi(PairQuery(p, pbar, s))
        assert relative_entropy(p_s, pbar) == pytest.approx(expected, abs=1e-10)


def test_tilted_divergence_to_pbar_strictly_decreases(random_pair):
    p, pbar = random_pair(4)
    values = [relative_entropy(tilted(PairQuery(p, pbar, s)), pbar) for s in np.linspace(-5.0, 1.0, 200)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(0.0, abs=1e-12)
