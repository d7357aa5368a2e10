import dataclasses
import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from gtprep.ingest import parse_trends_csv, to_trends_csv, zero_fraction
from gtprep.synthgen import (WorldConfig, generate_target, generate_world, load_world_config,
                             regime_shift, sample_download, sample_replicates, sample_series,
                             save_world_config, union_volume)

QUIET = dict(seasonal_amplitude=(0.0, 0.0), spike_rate=0.0, theme_noise=0.0, noise_scale=(0.0, 0.0))


def small(**kw):
    base = dict(n_keywords=6, n_weeks=120, seed=1)
    base.update(kw)
    return WorldConfig(**base)


def test_flat_noiseless_is_constant():
    world = generate_world(small(family_weights={"flat": 1.0}, **QUIET))
    assert np.all(world.K == world.K[:, :1])


def test_linear_increment_average():
    world = generate_world(small(family_weights={"linear": 1.0}, population=10**9, **QUIET))
    for i, comp in enumerate(world.components):
        expected = comp["base_rate"] * 10**9 * comp["slope"] / 120
        assert np.mean(np.diff(world.K[i])) == pytest.approx(expected, rel=1e-3)


def test_same_seed_same_world():
    a, b = generate_world(small()), generate_world(small())
    assert_array_equal(a.K, b.K)
    assert a.components == b.components
    assert not np.array_equal(a.K, generate_world(small(seed=2)).K)


def test_counts_bounded():
    world = generate_world(small(n_keywords=30))
    assert np.all(world.K >= 0) and np.all(world.K <= world.N)


def test_infeasible_config():
    with pytest.raises(ValueError, match="infeasible"):
        generate_world(small(rate_range=(0.5, 0.9), seasonal_amplitude=(1.2, 1.2)))


@pytest.mark.parametrize("field,value", [("n_keywords", 0), ("rate_range", (0.1, 0.01)),
                                         ("theme_ar", 1.0), ("theme_rate_scale", [1.0, -1.0]),
                                         ("start_date", "2020-01-06")])
def test_invalid_config_named(field, value):
    with pytest.raises(ValueError, match=field):
        generate_world(small(**{field: value}))


def test_config_round_trip(tmp_path):
    cfg = small(overlaps={"kw0|kw1": 0.3}, theme_rate_scale=[0.5])
    save_world_config(cfg, tmp_path / "w.json")
    assert load_world_config(tmp_path / "w.json") == cfg


def test_census_download_is_exact():
    cfg = small(population=50_000, sample_size=50_000, privacy_threshold=0.0)
    world = generate_world(cfg)
    panel = sample_download(world, dt.date(2025, 1, 1))
    for i, kw in enumerate(world.keywords):
        exact = 100 * world.K[i] / world.K[i].max()
        clear = np.abs(exact - np.floor(exact) - 0.5) > 1e-6
        assert_array_equal(panel.series(kw)[clear], np.round(exact[clear]))
        assert np.all(np.abs(panel.series(kw) - exact) <= 0.5 + 1e-6)


def test_below_threshold_all_zero():
    world = generate_world(small(rate_range=(1e-7, 2e-7)))
    panel = sample_download(world, dt.date(2025, 1, 1))
    assert np.all(panel.values == 0)


def test_same_day_identical_new_day_differs():
    world = generate_world(small())
    day = dt.date(2025, 3, 1)
    a, b = sample_download(world, day), sample_download(world, day)
    assert_array_equal(a.values, b.values)
    c = sample_download(world, day + dt.timedelta(days=1))
    assert not np.array_equal(a.values, c.values)


def test_replicates_have_consecutive_dates():
    world = generate_world(small())
    reps = sample_replicates(world, 3)
    assert [p.download_date for p in reps] == [world.dates[-1] + dt.timedelta(days=7 + i) for i in range(3)]


def test_every_nonzero_series_peaks_at_100():
    world = generate_world(small(n_keywords=25))
    panel = sample_download(world, dt.date(2025, 1, 1))
    for row in panel.values:
        assert row.max() in (0, 100)


def test_variance_falls_with_volume():
    world = generate_world(small(n_keywords=1, rate_range=(5e-5, 5e-5), **QUIET,
                                 privacy_threshold=0.0, family_weights={"flat": 1.0}))
    big = dataclasses.replace(world, K=world.K * 10)

    def spread(w):
        draws = np.stack([sample_series(w, w.K[0], "kw0", dt.date(2025, 1, 1) + dt.timedelta(days=d))
                          for d in range(100)])
        return draws.var(axis=0).mean()

    assert spread(big) < spread(world)


def test_sample_mean_converges():
    world = generate_world(small(n_keywords=1, privacy_threshold=0.0))
    ref = world.K[0] / world.N
    draws = []
    for d in range(300):
        rng = np.random.default_rng(d)
        draws.append(rng.hypergeometric(world.K[0], world.N - world.K[0], world.sample_size))
    mean = np.mean(draws, axis=0) / world.sample_size
    se = np.sqrt(ref * (1 - ref) / world.sample_size / 300)
    assert np.mean(np.abs(mean - ref) <= 3 * se) > 0.98


@given(st.floats(0, 20), st.floats(0, 20))
@settings(max_examples=25, deadline=None)
def test_zero_fraction_monotone_in_threshold(a, b):
    lo, hi = sorted((a, b))
    world = generate_world(small(rate_range=(2e-5, 1e-4)))
    day = dt.date(2025, 1, 1)
    z_lo = [zero_fraction(s) for s in sample_download(
        dataclasses.replace(world, threshold=np.full(120, lo)), day).values]
    z_hi = [zero_fraction(s) for s in sample_download(
        dataclasses.replace(world, threshold=np.full(120, hi)), day).values]
    assert all(x <= y for x, y in zip(z_lo, z_hi))


def test_union_examples():
    cfg = small(n_keywords=3, n_weeks=5, overlaps={"kw0|kw1": 0.2, "kw0|kw2": 0.2, "kw1|kw2": 0.2})
    world = generate_world(cfg)
    K = world.K
    hand = K[0] + K[1] + K[2] - 0.2 * (np.minimum(K[0], K[1]) + np.minimum(K[0], K[2])
                                       + np.minimum(K[1], K[2]))
    assert_array_equal(union_volume(world, ["kw0", "kw1", "kw2"]), np.round(hand))
    same = generate_world(small(n_keywords=2, default_overlap=1.0))
    twin = dataclasses.replace(same, K=np.stack([same.K[0], same.K[0]]))
    assert_array_equal(union_volume(twin, ["kw0", "kw1"]), same.K[0])


def test_union_negative_rejected():
    world = generate_world(small(n_keywords=4, default_overlap=1.0))
    world = dataclasses.replace(world, K=np.tile(world.K[0], (4, 1)))
    with pytest.raises(ValueError):
        union_volume(world, ["kw0", "kw1", "kw2", "kw3"])


def test_regime_shift_identities():
    world = generate_world(small())
    assert_array_equal(regime_shift(world, world.dates[10], 1.0).threshold, world.threshold)
    late = regime_shift(world, world.dates[-1] + dt.timedelta(weeks=1), 3.0)
    assert_array_equal(late.threshold, world.threshold)
    with pytest.raises(ValueError):
        regime_shift(world, world.dates[0], 0.5)


def test_regime_shift_calibrated_to_forty_percent():
    world = generate_world(WorldConfig(n_keywords=1, n_weeks=400, seed=3, rate_range=(2e-5, 2e-5),
                                       family_weights={"flat": 1.0}, seasonal_amplitude=(1.2, 1.2)))
    shift = world.dates[200]
    day = dt.date(2025, 1, 1)

    def post_zeros(factor):
        w = regime_shift(world, shift, factor)
        return np.sum(sample_download(w, day).values[0, 200:] == 0)

    base = post_zeros(1.0)
    assert base > 10
    lo, hi = 1.0, 4.0
    for _ in range(30):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if post_zeros(mid) < 1.4 * base else (lo, mid)
    assert post_zeros(lo) < 1.4 * base <= post_zeros(hi)
    assert post_zeros(hi) / base == pytest.approx(1.4, abs=0.1)


def test_round_trip_through_ingest():
    world = generate_world(small())
    panel = sample_download(world, dt.date(2025, 1, 1), location="SYN")
    back = parse_trends_csv(to_trends_csv(panel), "SYN")
    assert_array_equal(back.values, panel.values)


def test_target_is_deterministic_and_driven_by_themes():
    world = generate_world(small(n_weeks=300, n_themes=3))
    y = generate_target(world, seed=5, noise=0.0)
    assert_allclose(y, 100 * world.themes.mean(axis=0))
    assert_array_equal(generate_target(world, seed=5), generate_target(world, seed=5))
