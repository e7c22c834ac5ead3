import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from csinterp.metrics import (EmpiricalDistribution, kl_hist, ks_stat,
                              summary_stats, w2_1d)

finite = st.floats(min_value=-50, max_value=50, allow_nan=False,
                   allow_infinity=False)


def samples(n):
    return arrays(np.float64, n, elements=finite)


def test_empirical_distribution_rejects_empty():
    with pytest.raises(ValueError):
        EmpiricalDistribution(np.array([]))


def test_w2_known_value():
    assert w2_1d([0.0, 1.0], [0.0, 1.0]) == 0.0
    assert w2_1d([0.0, 0.0], [1.0, 1.0]) == pytest.approx(1.0)


def test_w2_size_mismatch():
    with pytest.raises(ValueError):
        w2_1d([0.0, 1.0], [0.0])


@given(samples(20), st.floats(min_value=-10, max_value=10, allow_nan=False))
def test_w2_translation(p, c):
    assert w2_1d(p, p + c) == pytest.approx(abs(c), abs=1e-9)


@given(samples(15), samples(15))
def test_w2_symmetry(p, q):
    assert w2_1d(p, q) == pytest.approx(w2_1d(q, p), abs=1e-12)


@given(samples(12), samples(12), samples(12))
def test_w2_triangle_inequality(p, q, r):
    assert w2_1d(p, r) <= w2_1d(p, q) + w2_1d(q, r) + 1e-9


def test_ks_known_values():
    assert ks_stat([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert ks_stat([0.0, 1.0], [10.0, 11.0]) == 1.0
    # ECDFs differ by 1/2 on [1, 2)
    assert ks_stat([1.0, 3.0], [2.0, 3.0]) == pytest.approx(0.5)


@given(samples(10), samples(17))
def test_ks_bounded(p, q):
    v = ks_stat(p, q)
    assert 0.0 <= v <= 1.0


int_samples = arrays(np.float64, 12,
                     elements=st.integers(-50, 50).map(float))


@given(int_samples, int_samples)
@settings(max_examples=50)
def test_ks_invariant_under_monotone_transform(p, q):
    # a strictly increasing map applied to both samples preserves ranks;
    # integer-valued samples keep the maps injective in float arithmetic
    base = ks_stat(p, q)
    assert ks_stat(np.exp(p / 25), np.exp(q / 25)) == pytest.approx(base,
                                                                    abs=1e-12)
    assert ks_stat(3 * p + 1, 3 * q + 1) == pytest.approx(base, abs=1e-12)


def test_kl_identity_is_zero():
    p = np.linspace(-1, 1, 100)
    assert kl_hist(p, p, bins=10, range=(-1, 1)) == 0.0


@given(samples(30), samples(30))
@settings(max_examples=50)
def test_kl_nonnegative(p, q):
    # smoothing makes both histograms proper distributions, so KL >= 0
    assert kl_hist(p, q, bins=8, range=(-60, 60)) >= -1e-12


def test_kl_clips_out_of_range():
    inside = np.zeros(10)
    outside = np.full(10, 99.0)  # clipped into the top bin
    v = kl_hist(inside, outside, bins=4, range=(-1, 1))
    assert np.isfinite(v) and v > 0


def test_kl_validation():
    with pytest.raises(ValueError):
        kl_hist([0.0], [0.0], bins=1, range=(0, 1))
    with pytest.raises(ValueError):
        kl_hist([0.0], [0.0], bins=4, range=(1, 1))


def test_summary_stats():
    out = summary_stats([1.0, 2.0, 3.0])
    assert out["mean"] == pytest.approx(2.0)
    assert out["variance"] == pytest.approx(1.0)  # unbiased
    assert out["n"] == 3
    assert summary_stats([5.0])["variance"] is None
