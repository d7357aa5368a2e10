import datetime as dt

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from gtprep.ingest import (IngestError, ReplicateStore, SeriesPanel, align_panels,
                           parse_trends_csv, read_panels, to_trends_csv, write_panels,
                           zero_fraction)

SUNDAY = dt.date(2020, 1, 5)


def weeks(n, start=SUNDAY):
    return [start + dt.timedelta(weeks=i) for i in range(n)]


def test_parse_three_rows():
    text = "Category: All categories\n\nWeek,flu: (US)\n2020-01-05,0\n2020-01-12,50\n2020-01-19,100\n"
    panel = parse_trends_csv(text, "US")
    assert panel.keywords == ("flu",)
    assert_array_equal(panel.series("flu"), [0, 50, 100])
    assert panel.dates == tuple(weeks(3))


def test_parse_without_preamble_and_below_one():
    text = "Week,flu: (US),cough: (US)\n2020-01-05,<1,3\n2020-01-12,7,<1\n"
    panel = parse_trends_csv(text, "US")
    assert_array_equal(panel.values, [[0, 7], [3, 0]])


def test_skipped_week_rejected():
    text = "Week,flu: (US)\n2020-01-05,1\n2020-01-19,2\n"
    with pytest.raises(IngestError, match="non-uniform spacing"):
        parse_trends_csv(text, "US")


def test_duplicate_week_rejected():
    text = "Week,flu: (US)\n2020-01-05,1\n2020-01-05,2\n"
    with pytest.raises(IngestError, match="duplicate week row"):
        parse_trends_csv(text, "US")


@pytest.mark.parametrize("cell", ["", "abc"])
def test_bad_cells_rejected(cell):
    with pytest.raises(IngestError):
        parse_trends_csv(f"Week,flu: (US)\n2020-01-05,{cell}\n", "US")


def test_values_out_of_range_rejected():
    with pytest.raises(IngestError):
        SeriesPanel("US", weeks(2), ["a"], np.array([[0, 101]]))


panel_values = st.integers(1, 4).flatmap(
    lambda k: st.integers(1, 12).flatmap(
        lambda n: st.lists(st.integers(0, 100), min_size=k * n, max_size=k * n).map(
            lambda v: np.array(v).reshape(k, n))))


@given(panel_values, st.booleans())
@settings(max_examples=60, deadline=None)
def test_parse_serialize_round_trip(values, preamble):
    k, n = values.shape
    panel = SeriesPanel("US", weeks(n), [f"kw {i}" for i in range(k)], values)
    back = parse_trends_csv(to_trends_csv(panel, "Health" if preamble else None), "US")
    assert back.keywords == panel.keywords
    assert back.dates == panel.dates
    assert_array_equal(back.values, panel.values)


def test_align_identical():
    p = SeriesPanel("US", weeks(5), ["a", "b"], np.arange(10).reshape(2, 5))
    store = align_panels([p, p])
    assert len(store) == 2
    assert_array_equal(store.cube()[0], store.cube()[1])


def test_align_offset_ranges():
    a = SeriesPanel("US", weeks(100), ["a"], np.ones((1, 100), int))
    b = SeriesPanel("US", weeks(100, SUNDAY + dt.timedelta(weeks=4)), ["a"], np.ones((1, 100), int))
    store = align_panels([a, b])
    assert len(store.dates) == 96
    assert store.dates == tuple(sorted(set(a.dates) & set(b.dates)))


def test_align_disjoint_keywords():
    a = SeriesPanel("US", weeks(3), ["a"], np.ones((1, 3), int))
    b = SeriesPanel("US", weeks(3), ["b"], np.ones((1, 3), int))
    with pytest.raises(IngestError):
        align_panels([a, b])


@given(st.integers(0, 20), st.integers(0, 20), st.integers(1, 30), st.integers(1, 30))
@settings(max_examples=40, deadline=None)
def test_align_matches_set_intersection(s1, s2, n1, n2):
    a = SeriesPanel("US", weeks(n1, SUNDAY + dt.timedelta(weeks=s1)), ["a", "b"],
                    np.zeros((2, n1), int), dt.date(2024, 1, 2))
    b = SeriesPanel("US", weeks(n2, SUNDAY + dt.timedelta(weeks=s2)), ["b", "a"],
                    np.zeros((2, n2), int), dt.date(2024, 1, 1))
    common = sorted(set(a.dates) & set(b.dates))
    if not common:
        with pytest.raises(IngestError):
            align_panels([a, b])
        return
    store = align_panels([a, b])
    assert list(store.dates) == common
    assert store.keywords == ("a", "b")
    assert store.panels[0].download_date == dt.date(2024, 1, 1)


def test_replicate_store_requires_shared_layout():
    a = SeriesPanel("US", weeks(3), ["a"], np.ones((1, 3), int))
    b = SeriesPanel("US", weeks(4), ["a"], np.ones((1, 4), int))
    with pytest.raises(IngestError):
        ReplicateStore([a, b])


def test_zero_fraction_examples():
    assert zero_fraction([0, 0, 1, 1]) == 0.5
    assert zero_fraction(np.zeros(7)) == 1.0


@given(st.lists(st.integers(0, 3), min_size=1, max_size=50), st.randoms())
def test_zero_fraction_permutation_invariant(xs, rnd):
    ys = xs[:]
    rnd.shuffle(ys)
    assert zero_fraction(xs) == zero_fraction(ys)


def test_columnar_round_trip(tmp_path):
    p1 = SeriesPanel("US", weeks(4), ["a", "b+c"], np.array([[0, 1, 2, 3], [9, 8, 7, 100]]),
                     dt.date(2024, 5, 1))
    p2 = SeriesPanel("CA", weeks(4), ["a", "b+c"], np.array([[5, 1, 2, 3], [9, 0, 7, 100]]))
    path = tmp_path / "panels.csv"
    write_panels([p1, p2], path)
    back = read_panels(path)
    assert [p.location for p in back] == ["US", "CA"]
    assert back[0].download_date == dt.date(2024, 5, 1)
    assert back[1].download_date is None
    assert_array_equal(back[0].values, p1.values)
    assert_array_equal(back[1].values, p2.values)
    header = path.read_text().splitlines()[0]
    assert header == "date,keyword,value,location,download_date"


def test_frame_view():
    p = SeriesPanel("US", weeks(3), ["a"], np.array([[1, 2, 3]]))
    frame = p.to_frame()
    assert isinstance(frame.index, pd.DatetimeIndex)
    assert list(frame["a"]) == [1.0, 2.0, 3.0]
    assert not p.values.flags.writeable
