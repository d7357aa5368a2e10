import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from gtprep.detrend import (ADFDetrender, TrendDecision, adf_test, apply_detrend, classify_trend,
                            critical_value, fit_trend, trend_r2, trend_values)

statsmodels = pytest.importorskip("statsmodels.tsa.stattools")


def ar1(n, phi, rng, sd=1.0):
    e = rng.normal(scale=sd, size=n)
    out = np.empty(n)
    out[0] = e[0]
    for t in range(1, n):
        out[t] = phi * out[t - 1] + e[t]
    return out


@pytest.mark.parametrize("variant,code", [("constant", "c"), ("linear", "ct"), ("quadratic", "ctt")])
@pytest.mark.parametrize("seed", range(4))
def test_matches_statsmodels(variant, code, seed):
    rng = np.random.default_rng(seed)
    y = np.cumsum(rng.normal(size=200)) + 0.3 * np.arange(200)
    ours = adf_test(y, variant)
    ref = statsmodels.adfuller(y, maxlag=14, autolag="AIC", regression=code)
    assert ours.lag_order == ref[2]
    assert ours.t_stat == pytest.approx(ref[0], rel=1e-9)
    assert ours.nobs == ref[3]


@pytest.mark.parametrize("variant,code", [("constant", "c"), ("linear", "ct")])
@pytest.mark.parametrize("nobs", [30, 100, 250, 1000])
def test_mackinnon_values_match_statsmodels(variant, code, nobs):
    from statsmodels.tsa.adfvalues import mackinnoncrit

    assert critical_value(variant, nobs) == pytest.approx(mackinnoncrit(1, code, nobs)[1], abs=1e-10)


@pytest.mark.parametrize("nobs", [100, 250, 500])
def test_quadratic_table_close_to_response_surface(nobs):
    from statsmodels.tsa.adfvalues import mackinnoncrit

    assert critical_value("quadratic", nobs) == pytest.approx(mackinnoncrit(1, "ctt", nobs)[1], abs=0.03)


def test_critical_values_ordered():
    for n in (60, 250):
        assert critical_value("quadratic", n) < critical_value("linear", n) < critical_value("constant", n)
    assert critical_value("constant", 250, 0.01) < critical_value("constant", 250, 0.10)


def test_reject_consistent_with_statistic():
    y = np.random.default_rng(0).normal(size=120)
    res = adf_test(y)
    assert res.reject == (res.t_stat < res.critical_value_5pct)


def test_errors():
    with pytest.raises(ValueError):
        adf_test(np.arange(20.0))
    with pytest.raises(ValueError):
        adf_test(np.ones(50))
    with pytest.raises(ValueError):
        adf_test(np.arange(50.0), "cubic")


def test_size_and_power_monte_carlo():
    rng = np.random.default_rng(1)
    walk = np.mean([adf_test(np.cumsum(rng.normal(size=250))).reject for _ in range(400)])
    noise = np.mean([adf_test(10 + rng.normal(size=300)).reject for _ in range(100)])
    assert 0.02 <= walk <= 0.09
    assert noise >= 0.95


def test_linear_variant_rejects_trend_stationary():
    rng = np.random.default_rng(2)
    hits = [adf_test(0.5 * np.arange(200) + ar1(200, 0.5, rng), "linear").reject for _ in range(50)]
    assert np.mean(hits) >= 0.9


@pytest.mark.parametrize("kind,expected", [("noise", "none"), ("ramp", "linear"),
                                           ("walk", "difference")])
def test_cascade_majorities(kind, expected):
    rng = np.random.default_rng(3)
    t = np.arange(250)
    outcomes = []
    for _ in range(25):
        if kind == "noise":
            y = 5 + rng.normal(size=250)
        elif kind == "ramp":
            y = 0.2 * t + ar1(250, 0.3, rng)
        else:
            y = np.cumsum(rng.normal(size=250))
        outcomes.append(classify_trend(y).action)
    assert outcomes.count(expected) > len(outcomes) / 2


def test_exact_line_removed():
    t = np.arange(60.0)
    y = 3 + 0.7 * t
    dec = TrendDecision("k", "linear", fit_trend(y[:40], 1), 1.0)
    assert_allclose(apply_detrend(y, dec, 40), 0, atol=1e-9)


def test_difference_of_line_is_constant():
    y = 2 + 1.5 * np.arange(30.0)
    out = apply_detrend(y, TrendDecision("k", "difference", None, 0.0), 20)
    assert out.shape == (29,)
    assert_allclose(out, 1.5)


def test_quadratic_removed_and_r2():
    t = np.arange(80.0)
    y = t ** 2
    coefs = fit_trend(y, 2)
    assert trend_r2(y, trend_values(coefs, t)) == pytest.approx(1.0)
    resid = apply_detrend(y, TrendDecision("k", "quadratic", coefs, 1.0), 60)
    assert_allclose(resid, 0, atol=1e-6)


def test_none_is_identity():
    y = np.random.default_rng(4).normal(size=40)
    assert_array_equal(apply_detrend(y, TrendDecision("k", "none", None, 0.0), 30), y)


def test_train_len_minimum():
    with pytest.raises(ValueError):
        apply_detrend(np.arange(20.0), TrendDecision("k", "none", None, 0.0), 5)


def test_trend_r2_examples():
    y = np.random.default_rng(5).normal(size=50)
    assert trend_r2(y, np.full(50, y.mean())) == pytest.approx(0.0)
    assert trend_r2(y, y) == 1.0
    assert trend_r2(y, -10 * y) == 0.0
    with pytest.raises(ValueError):
        trend_r2(np.ones(5), np.ones(5))


@given(st.integers(1, 2), st.integers(0, 10_000), st.integers(0, 500))
@settings(max_examples=50, deadline=None)
def test_residual_orthogonal_to_trend_design(order, seed, t0):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=60) + 0.1 * np.arange(60)
    coefs = fit_trend(y, order, t0)
    action = "linear" if order == 1 else "quadratic"
    resid = apply_detrend(y, TrendDecision("k", action, coefs, 0.0), 60, t0=t0)
    refit = fit_trend(resid, order, t0)
    assert np.all(np.abs(refit[1:]) < 1e-8)


def test_test_rows_use_training_coefficients():
    t = np.arange(100.0)
    y = 1 + 0.5 * t
    y[80:] += 10
    coefs = fit_trend(y[:80], 1)
    out = apply_detrend(y, TrendDecision("k", "linear", coefs, 1.0), 80)
    assert_allclose(out[:80], 0, atol=1e-9)
    assert_allclose(out[80:], 10, atol=1e-9)


def test_differenced_walk_becomes_stationary():
    rng = np.random.default_rng(6)
    hits, total = 0, 0
    for _ in range(40):
        y = np.cumsum(rng.normal(size=250))
        dec = classify_trend(y)
        if dec.action == "difference":
            total += 1
            hits += adf_test(apply_detrend(y, dec)).reject
    assert total > 20
    assert hits / total >= 0.9


def test_synthetic_panel_r2_drop():
    rng = np.random.default_rng(7)
    t = np.arange(300.0)
    before, after = [], []
    for i in range(40):
        trend = (rng.uniform(0.5, 1.5) * t / 300 if i % 2 else rng.uniform(0.5, 1.5) * (t / 300) ** 2)
        y = 10 * trend / trend[:240].std() + 5 * ar1(300, 0.3, rng) / 1.05
        y_train = y[:240]
        dec = classify_trend(y_train)
        if dec.action not in ("linear", "quadratic"):
            continue
        order = 1 if dec.action == "linear" else 2
        before.append(dec.train_r2)
        resid = apply_detrend(y, dec, 240)[:240]
        after.append(trend_r2(resid, trend_values(fit_trend(resid, order), np.arange(240))))
    assert len(before) >= 30
    assert np.mean(before) > 0.7
    assert np.mean(after) < 0.15


def test_detrender_estimator_alignment():
    rng = np.random.default_rng(8)
    idx = pd.date_range("2020-01-05", periods=200, freq="W-SUN")
    data = pd.DataFrame({"walk": np.cumsum(rng.normal(size=200)),
                         "ramp": 0.3 * np.arange(200) + rng.normal(size=200)}, index=idx)
    est = ADFDetrender().fit(data.iloc[:150])
    actions = {d.keyword: d.action for d in est.decisions_}
    assert actions == {"walk": "difference", "ramp": "linear"}
    full = est.transform(data)
    tail = est.transform(data.iloc[100:])
    assert full.index[0] == idx[1]
    assert_allclose(full.loc[tail.index].to_numpy(), tail.to_numpy(), atol=1e-9)
    rows = est.report(data.iloc[:150])
    assert rows[1]["r2_after"] < 0.01
