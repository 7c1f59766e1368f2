"""
Tests for the single-pair exponents against closed forms and the simplex oracles.
"""
import numpy as np
import pytest

from divergence_core import Distribution, llr_stats, relative_entropy
from errors import DomainError, OracleScaleError
from exponent_bounds import (
    BEYOND_R0,
    BOUNDARY_S0,
    BOUNDARY_S1,
    INTERIOR,
    be_bar_curve,
    chernoff,
    chernoff_fixed_point,
    han_kobayashi,
    hk_oracle,
    hoeffding,
    hoeffding_oracle,
    hoeffding_tilted_oracle,
)


def _binary(a):
    return Distribution.of([a, 1.0 - a])


def test_chernoff_symmetric_pair_closed_form():
    a = 0.2
    result = chernoff(_binary(a), _binary(1.0 - a))
    assert result.value == pytest.approx(-np.log(2.0 * np.sqrt(a * (1.0 - a))), abs=1e-10)
    assert result.argmax_s == pytest.approx(0.5, abs=1e-6)
    assert result.regime == INTERIOR


def test_chernoff_trivial_and_disjoint_pairs():
    p = Distribution.of([0.3, 0.7])
    assert chernoff(p, p).value == 0.0
    assert chernoff(Distribution.of([1.0, 0.0]), Distribution.of([0.0, 1.0])).value == np.inf


def test_chernoff_uses_continuous_extension_at_the_ends():
    # Pbar has an outcome P never produces, so the min sits at s = 1 with value -log 0.5
    p = Distribution.of([1.0, 0.0])
    pbar = Distribution.of([0.5, 0.5])
    result = chernoff(p, pbar)
    assert result.value == pytest.approx(np.log(2.0), abs=1e-12)
    assert result.regime == BOUNDARY_S1


def test_hoeffding_edges(random_pair):
    p, pbar = random_pair(3)
    stein = relative_entropy(p, pbar)
    assert hoeffding(stein, p, pbar).value == 0.0
    assert hoeffding(2 * stein, p, pbar).regime == BOUNDARY_S0
    assert hoeffding(0.0, p, pbar).value == pytest.approx(relative_entropy(pbar, p))
    with pytest.raises(DomainError):
        hoeffding(-0.1, p, pbar)


def test_hoeffding_nonincreasing(random_pair):
    p, pbar = random_pair(4)
    stein = relative_entropy(p, pbar)
    values = [hoeffding(r, p, pbar).value for r in np.linspace(0.0, stein, 25)]
    assert all(b <= a + 1e-10 for a, b in zip(values, values[1:]))


def test_hoeffding_infinite_when_pbar_escapes_support():
    p = Distribution.of([1.0, 0.0])
    pbar = Distribution.of([0.5, 0.5])
    # -r - phi_common(1) = -0.1 + log 2 > 0
    assert hoeffding(0.1, p, pbar).value == np.inf


def test_han_kobayashi_zero_below_stein(random_pair):
    p, pbar = random_pair(3)
    stein = relative_entropy(p, pbar)
    assert han_kobayashi(0.5 * stein, p, pbar).value == 0.0
    assert han_kobayashi(stein, p, pbar).regime == BOUNDARY_S0


def test_han_kobayashi_beyond_r0_is_linear(random_pair):
    p, pbar = random_pair(3)
    stats = llr_stats(p, pbar)
    for r in (stats.r0 + 0.1, stats.r0 + 2.0):
        result = han_kobayashi(r, p, pbar)
        assert result.regime == BEYOND_R0
        assert result.value == pytest.approx(r + stats.slope_R)


def test_han_kobayashi_nondecreasing_and_continuous_at_r0(random_pair):
    p, pbar = random_pair(3)
    stein = relative_entropy(p, pbar)
    stats = llr_stats(p, pbar)
    grid = np.linspace(stein, stats.r0 + 0.5, 40)
    values = [han_kobayashi(r, p, pbar).value for r in grid]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))
    below = han_kobayashi(stats.r0 - 1e-7, p, pbar).value
    assert below == pytest.approx(stats.r0 + stats.slope_R, abs=1e-5)


@pytest.mark.parametrize("size", [2, 3])
def test_oracles_agree_with_sup_forms(random_pair, size):
    for _ in range(3):
        p, pbar = random_pair(size)
        stein = relative_entropy(p, pbar)
        r0 = llr_stats(p, pbar).r0
        r_low = 0.5 * stein
        r_high = stein + 0.5 * (r0 - stein)
        assert hoeffding_oracle(r_low, p, pbar) == pytest.approx(hoeffding(r_low, p, pbar).value, abs=2e-3)
        assert hk_oracle(r_high, p, pbar) == pytest.approx(han_kobayashi(r_high, p, pbar).value, abs=2e-3)


def test_oracle_returns_feasible_argmin(random_pair):
    p, pbar = random_pair(3)
    r = 0.4 * relative_entropy(p, pbar)
    value, q = hoeffding_oracle(r, p, pbar, with_argmin=True)
    q = Distribution.of(q / q.sum())
    assert relative_entropy(q, pbar) <= r + 1e-9
    assert relative_entropy(q, p) == pytest.approx(value, abs=1e-9)


def test_oracle_refuses_large_alphabets(random_pair):
    p, pbar = random_pair(6)
    with pytest.raises(OracleScaleError):
        hoeffding_oracle(0.01, p, pbar)


def test_tilted_family_attains_hoeffding(random_pair):
    for _ in range(5):
        p, pbar = random_pair(4)
        stein = relative_entropy(p, pbar)
        for frac in (0.1, 0.5, 0.9):
            r = frac * stein
            assert hoeffding_tilted_oracle(r, p, pbar) == pytest.approx(hoeffding(r, p, pbar).value, abs=1e-6)


def test_chernoff_is_hoeffding_fixed_point(random_pair):
    p, pbar = random_pair(3)
    assert chernoff_fixed_point(p, pbar) == pytest.approx(chernoff(p, pbar).value, abs=1e-6)


def test_be_bar_curve_changes_sign_at_stein(random_pair):
    p, pbar = random_pair(3)
    stein = relative_entropy(p, pbar)
    curve = be_bar_curve(p, pbar, [0.0, 0.5 * stein, stein, 1.5 * stein])
    assert curve[0][1] > 0 and curve[1][1] > 0
    assert curve[2][1] == 0.0
    assert curve[3][1] <= 0.0
    with pytest.raises(DomainError):
        be_bar_curve(p, pbar, [0.2, 0.1])


@pytest.mark.slow
def test_oracle_population():
    """100 random pairs with 3 to 5 outcomes against both simplex oracles."""
    rng = np.random.default_rng(7)
    for k in range(100):
        size = 3 + k % 3
        p = Distribution.of(0.01 + (1 - 0.01 * size) * rng.dirichlet(np.ones(size)))
        pbar = Distribution.of(0.01 + (1 - 0.01 * size) * rng.dirichlet(np.ones(size)))
        stein = relative_entropy(p, pbar)
        r0 = llr_stats(p, pbar).r0
        r_low, r_high = 0.5 * stein, stein + 0.5 * (r0 - stein)
        assert hoeffding_oracle(r_low, p, pbar) == pytest.approx(hoeffding(r_low, p, pbar).value, abs=2e-3)
        assert hk_oracle(r_high, p, pbar) == pytest.approx(han_kobayashi(r_high, p, pbar).value, abs=2e-3)
        assert hoeffding_tilted_oracle(r_low, p, pbar) == pytest.approx(hoeffding(r_low, p, pbar).value, abs=1e-6)


def test_chernoff_is_symmetric_in_the_pair(random_pair):
    for size in (2, 3, 5):
        p, pbar = random_pair(size)
        assert chernoff(p, pbar).value == pytest.approx(chernoff(pbar, p).value, abs=1e-11)


def test_han_kobayashi_minus_rate_is_nonincreasing(random_pair):
    p, pbar = random_pair(3)
    stats = llr_stats(p, pbar)
    grid = np.linspace(0.0, stats.r0 + 1.0, 60)
    excess = [han_kobayashi(r, p, pbar).value - r for r in grid]
    assert all(b <= a + 1e-9 for a, b in zip(excess, excess[1:]))
    assert excess[-1] == pytest.approx(stats.slope_R)


def test_hk_oracle_constraint_is_active_only_below_r0(random_pair):
    p, pbar = random_pair(3)
    stein = relative_entropy(p, pbar)
    stats = llr_stats(p, pbar)
    inside = stein + 0.5 * (stats.r0 - stein)
    _, q = hk_oracle(inside, p, pbar, with_argmin=True)
    assert relative_entropy(Distribution.of(q / q.sum()), pbar) == pytest.approx(inside, abs=2e-3)
    beyond = stats.r0 + 0.5
    value, q = hk_oracle(beyond, p, pbar, with_argmin=True)
    assert relative_entropy(Distribution.of(q / q.sum()), pbar) < beyond - 1e-3
    assert value == pytest.approx(beyond + stats.slope_R, abs=2e-3)
