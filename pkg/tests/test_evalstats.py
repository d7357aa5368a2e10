import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from gtprep.evalstats import (FLUCTUATION_CRITICAL_VALUES, fluctuation_critical_value,
                              fluctuation_statistic, mse, relative_efficiency, season_of,
                              snr_log_ratio, summarize_report, wilcoxon_signed_rank)

from oracles import mse_loops, signed_rank_p_enumerated


def test_mse_examples():
    assert mse([1, 2, 3], [1, 2, 3]) == 0
    assert mse([0, 0], [1, 3]) == 5
    with pytest.raises(ValueError):
        mse([1, 2], [1])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), st.integers(0, 1000))
def test_mse_matches_loops(a, seed):
    b = np.random.default_rng(seed).normal(size=len(a))
    assert mse(a, b) == pytest.approx(mse_loops(a, b.tolist()), rel=1e-12, abs=1e-12)


@given(st.floats(1e-6, 1e6))
def test_re_of_equal_mse_is_one(m):
    assert relative_efficiency(m, m) == 1.0


def test_re_examples():
    assert relative_efficiency(0.5, 1.0) == 0.5
    with pytest.raises(ValueError):
        relative_efficiency(1.0, 0.0)


def test_wilcoxon_all_negative_51():
    p = wilcoxon_signed_rank(-np.arange(1, 52, dtype=float))
    z = (0 + 0.5 - 51 * 52 / 4) / np.sqrt(51 * 52 * 103 / 24)
    assert p == pytest.approx(stats.norm.cdf(z), rel=1e-9)
    assert p < 1e-9


def test_wilcoxon_antithetic_pairs():
    x = np.random.default_rng(0).uniform(1, 2, 30)
    assert wilcoxon_signed_rank(np.r_[x, -x]) == pytest.approx(0.5, abs=0.05)


def test_wilcoxon_n8_hand_instance():
    d = [-3.1, 0.4, -2.2, -1.7, 0.9, -4.0, -0.3, -2.5]
    assert wilcoxon_signed_rank(d) == signed_rank_p_enumerated(d)
    assert wilcoxon_signed_rank(d) == pytest.approx(10 / 256)


@given(st.lists(st.integers(-6, 6), min_size=5, max_size=12), st.sampled_from(["less", "greater"]))
@settings(max_examples=80, deadline=None)
def test_wilcoxon_exact_matches_enumeration_with_ties(values, alternative):
    d = [v for v in values if v != 0]
    if len(d) < 5:
        return
    assert wilcoxon_signed_rank(d, alternative, "exact") == pytest.approx(
        signed_rank_p_enumerated(d, alternative), abs=1e-12)


@given(st.integers(5, 25), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_wilcoxon_exact_matches_scipy(n, seed):
    d = np.random.default_rng(seed).normal(size=n)
    ref = stats.wilcoxon(d, alternative="less", method="exact").pvalue
    assert wilcoxon_signed_rank(d) == pytest.approx(ref, rel=1e-10)


@given(st.integers(26, 80), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_wilcoxon_approx_matches_scipy(n, seed):
    d = np.round(np.random.default_rng(seed).normal(size=n), 1)
    d = d[d != 0]
    if d.size < 26:
        return
    ref = stats.wilcoxon(d, alternative="less", method="approx", correction=True,
                         zero_method="wilcox").pvalue
    assert wilcoxon_signed_rank(d) == pytest.approx(ref, rel=1e-9)


def test_wilcoxon_two_sided_and_errors():
    d = np.random.default_rng(1).normal(size=15)
    lo, hi = wilcoxon_signed_rank(d, "less"), wilcoxon_signed_rank(d, "greater")
    assert wilcoxon_signed_rank(d, "two-sided") == pytest.approx(min(1, 2 * min(lo, hi)))
    with pytest.raises(ValueError):
        wilcoxon_signed_rank(np.zeros(10))
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([1, -2, 3, 0, 0])


def test_wilcoxon_size_under_symmetric_null():
    rng = np.random.default_rng(2)
    rejections = sum(wilcoxon_signed_rank(rng.standard_t(3, size=51)) < 0.05 for _ in range(10_000))
    assert abs(rejections / 10_000 - 0.05) <= 0.01


def test_snr_identity_is_zero():
    raw = np.random.default_rng(3).uniform(1, 50, size=(5, 2, 40))
    out = snr_log_ratio(raw, raw)
    assert_array_equal(out, 0.0)


def test_snr_degenerate_denoised_is_missing():
    raw = np.random.default_rng(4).uniform(1, 50, size=(4, 1, 20))
    den = np.broadcast_to(raw.mean(axis=0), raw.shape)
    assert np.all(np.isnan(snr_log_ratio(raw, den)))


def test_snr_definition_and_errors():
    raw = np.array([[1.0, 0.0], [2.0, 0.0], [4.0, 0.0]])[:, None, :]
    den = np.array([[2.0, 1.0], [2.5, 2.0], [3.0, 3.0]])[:, None, :]
    out = snr_log_ratio(raw, den)
    expected = np.log((2.5 / 0.5) / ((7 / 3) / np.std([1, 2, 4], ddof=1)))
    assert out[0, 0] == pytest.approx(expected)
    assert np.isnan(out[0, 1])
    with pytest.raises(ValueError):
        snr_log_ratio(raw[:2], den[:2])


def test_fluctuation_equal_losses_zero():
    a = np.random.default_rng(5).uniform(size=60)
    assert_array_equal(fluctuation_statistic(a, a), 0.0)


def test_fluctuation_location_shift():
    a = np.random.default_rng(6).uniform(size=60)
    small = fluctuation_statistic(a + 0.1, a)
    big = fluctuation_statistic(a + 1.0, a)
    assert small.shape == (37,)
    assert np.all(small > 0) and np.all(big > 0)
    noisy = a + 0.1 + 0.05 * np.random.default_rng(7).normal(size=60)
    more = a + 1.0 + 0.05 * np.random.default_rng(7).normal(size=60)
    assert np.all(fluctuation_statistic(more, a) > fluctuation_statistic(noisy, a))


@given(st.floats(-100, 100), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_fluctuation_shift_invariant(c, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(size=40), rng.uniform(size=40)
    assert_allclose(fluctuation_statistic(a + c, b + c), fluctuation_statistic(a, b), atol=1e-8)


def test_fluctuation_hac_matches_loop():
    rng = np.random.default_rng(8)
    a, b = rng.normal(size=30), rng.normal(size=30)
    d = (a - b)[3:27]
    L = 2
    lrv = np.mean(d * d) + sum(2 * (1 - k / (L + 1)) * np.sum(d[k:] * d[:-k]) / 24 for k in (1, 2))
    assert fluctuation_statistic(a, b)[3] == pytest.approx(np.sqrt(24) * d.mean() / np.sqrt(lrv))


def test_fluctuation_null_mostly_inside_band():
    rng = np.random.default_rng(9)
    inside = []
    for _ in range(200):
        path = fluctuation_statistic(rng.exponential(size=100), rng.exponential(size=100))
        inside.append(np.mean(np.abs(path) <= 3))
    assert np.mean(inside) >= 0.95


def test_fluctuation_errors():
    with pytest.raises(ValueError):
        fluctuation_statistic(np.ones(10), np.ones(10), window=24)
    with pytest.raises(ValueError):
        fluctuation_statistic(np.ones(30), np.ones(29))


def test_fluctuation_critical_values():
    assert fluctuation_critical_value(24, 80) == pytest.approx(3.012)
    assert fluctuation_critical_value(20, 80) == pytest.approx((3.179 + 3.012) / 2)
    assert set(FLUCTUATION_CRITICAL_VALUES) == {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}


def test_season_of():
    assert season_of(dt.date(2023, 12, 3)) == "peak"
    assert season_of(dt.date(2023, 1, 29)) == "peak"
    assert season_of(dt.date(2023, 2, 5)) == "off"


def test_summary_shape_and_markers():
    rng = np.random.default_rng(10)
    rows = []
    for i in range(12):
        base = rng.uniform(1, 2)
        for variant, factor in (("none", 1.0), ("raw", 1.2), ("clustering", 0.7)):
            rows.append({"location": f"L{i}", "horizon": 0, "model": "argo", "variant": variant,
                         "mse": base * factor * rng.uniform(0.95, 1.05)})
    out = summarize_report(rows)
    cells = {c["variant"]: c for c in out["cells"]}
    assert set(cells) == {"raw", "clustering"}
    assert cells["clustering"]["markers"] == "*†"
    assert cells["raw"]["markers"] == ""
    assert cells["clustering"]["q1_re"] <= cells["clustering"]["median_re"] <= cells["clustering"]["q3_re"]
    assert cells["clustering"]["n_locations"] == 12
