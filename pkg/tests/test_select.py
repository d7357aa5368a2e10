import itertools

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gtprep.select import CorrelationSelector, prune_collinear, rank_by_target_correlation, write_predictors


def planted(rhos, n=400, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=n)
    cols = {}
    for i, r in enumerate(rhos):
        cols[f"p{i}"] = r * y + np.sqrt(1 - r ** 2) * rng.normal(size=n)
    return pd.DataFrame(cols), y


def test_target_itself_and_negation_rank_first():
    y = np.random.default_rng(1).normal(size=50)
    frame = pd.DataFrame({"noise": np.random.default_rng(2).normal(size=50), "neg": -y, "same": y})
    ranked = rank_by_target_correlation(frame, y, 50)
    assert {ranked[0][0], ranked[1][0]} == {"neg", "same"}
    assert abs(ranked[0][1]) == pytest.approx(1.0)
    assert dict(ranked)["neg"] == pytest.approx(-1.0)


def test_planted_order_recovered():
    rhos = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0]
    frame, y = planted(rhos, n=5000)
    ranked = rank_by_target_correlation(frame.iloc[:, ::-1], y, 5000)
    assert [name for name, _ in ranked] == [f"p{i}" for i in range(10)]


def test_zero_variance_last_and_nan():
    y = np.arange(40.0)
    frame = pd.DataFrame({"flat": np.ones(40), "x": np.sin(y)})
    ranked = rank_by_target_correlation(frame, y, 40)
    assert ranked[-1][0] == "flat" and np.isnan(ranked[-1][1])


def test_training_rows_only():
    y = np.arange(60.0)
    frame = pd.DataFrame({"a": np.r_[y[:40], -y[40:] * 50], "b": np.r_[-y[:40], y[40:]]})
    ranked = rank_by_target_correlation(frame, y, 40)
    assert dict(ranked)["a"] == pytest.approx(1.0)


def test_rank_errors():
    with pytest.raises(ValueError):
        rank_by_target_correlation(pd.DataFrame({"a": np.arange(40.0)}), np.ones(40), 40)
    with pytest.raises(ValueError):
        rank_by_target_correlation(pd.DataFrame({"a": np.arange(20.0)}), np.arange(20.0), 20)


def test_identical_top_predictors():
    frame, y = planted([0.9, 0.5])
    frame["copy"] = frame["p0"]
    ranked = rank_by_target_correlation(frame, y, len(y))
    out = prune_collinear(ranked, frame)
    assert out.keywords.count("p0") + out.keywords.count("copy") == 1
    assert out.dropped_collinear[0][2] == pytest.approx(1.0)


def test_cap_one():
    frame, y = planted([0.3, 0.9, 0.5])
    out = prune_collinear(rank_by_target_correlation(frame, y, len(y)), frame, cap=1)
    assert out.keywords == ["p1"]


def test_block_of_three_leaves_one():
    rng = np.random.default_rng(3)
    y = rng.normal(size=300)
    base = 0.8 * y + 0.6 * rng.normal(size=300)
    frame = pd.DataFrame({f"b{i}": base + 0.08 * rng.normal(size=300) for i in range(3)})
    frame["other"] = 0.3 * y + rng.normal(size=300)
    out = prune_collinear(rank_by_target_correlation(frame, y, 300), frame)
    assert sum(k.startswith("b") for k in out.keywords) == 1
    assert "other" in out.keywords


@pytest.mark.parametrize("bad", [dict(threshold=0.0), dict(threshold=1.0), dict(cap=0)])
def test_prune_errors(bad):
    frame, y = planted([0.5])
    with pytest.raises(ValueError):
        prune_collinear(rank_by_target_correlation(frame, y, len(y)), frame, **bad)


random_panels = st.tuples(st.integers(2, 12), st.integers(0, 10_000))


def _panel(k, seed):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=60)
    latent = rng.normal(size=(3, 60))
    mix = rng.normal(size=(k, 3))
    X = (mix @ latent).T + 0.2 * rng.normal(size=(60, k)) + rng.uniform(-1, 1, k) * y[:, None]
    return pd.DataFrame(X, columns=[f"k{i}" for i in range(k)]), y


@given(random_panels, st.floats(0.3, 0.99))
@settings(max_examples=60, deadline=None)
def test_no_retained_pair_violates_threshold(params, threshold):
    frame, y = _panel(*params)
    out = prune_collinear(rank_by_target_correlation(frame, y, 60), frame, threshold, cap=12)
    C = frame[out.keywords].corr().to_numpy()
    for i, j in itertools.combinations(range(len(out.keywords)), 2):
        assert abs(C[i, j]) <= threshold + 1e-12


@given(random_panels, st.integers(1, 11))
@settings(max_examples=60, deadline=None)
def test_smaller_cap_is_prefix(params, cap):
    frame, y = _panel(*params)
    ranked = rank_by_target_correlation(frame, y, 60)
    small = prune_collinear(ranked, frame, cap=cap).keywords
    large = prune_collinear(ranked, frame, cap=cap + 1).keywords
    assert large[:len(small)] == small


@given(random_panels, st.randoms())
@settings(max_examples=40, deadline=None)
def test_invariant_to_column_order(params, rnd):
    frame, y = _panel(*params)
    cols = list(frame.columns)
    rnd.shuffle(cols)
    a = prune_collinear(rank_by_target_correlation(frame, y, 60), frame).keywords
    b = prune_collinear(rank_by_target_correlation(frame[cols], y, 60), frame[cols]).keywords
    assert a == b


def test_selector_estimator(tmp_path):
    frame, y = planted([0.9, 0.2, 0.6])
    sel = CorrelationSelector(cap=2).fit(frame, y)
    assert list(sel.get_feature_names_out()) == ["p0", "p2"]
    assert list(sel.transform(frame).columns) == ["p0", "p2"]
    write_predictors(sel.predictors_, tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "rank,keyword,target_correlation"
    assert lines[1].startswith("1,p0,")
