"""Google Trends CSV parsing and weekly panel assembly.

A :class:`SeriesPanel` holds one download of one location: a keyword-by-week
matrix of 0-100 volumes. Replicate downloads of the same query set are kept in
a :class:`ReplicateStore`.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

__all__ = [
    "IngestError",
    "SeriesPanel",
    "ReplicateStore",
    "parse_trends_csv",
    "to_trends_csv",
    "align_panels",
    "zero_fraction",
    "write_panels",
    "read_panels",
    "frame_to_long",
    "long_to_frame",
]

_HEADER_RE = re.compile(r"^(?P<term>.*?):\s*\((?P<region>[^()]*)\)\s*$")
_LONG_COLUMNS = ["date", "keyword", "value", "location", "download_date"]


class IngestError(ValueError):
    """Raised for malformed exports and inconsistent panels."""


@dataclass(frozen=True)
class SeriesPanel:
    """Keyword-by-week search volumes for one location and one download.

    ``values`` has shape ``(n_keywords, n_weeks)``.
    """

    location: str
    dates: tuple[dt.date, ...]
    keywords: tuple[str, ...]
    values: np.ndarray
    download_date: dt.date | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "keywords", tuple(self.keywords))
        if values.ndim != 2 or values.shape != (len(self.keywords), len(self.dates)):
            raise IngestError(
                f"values shape {values.shape} does not match "
                f"({len(self.keywords)} keywords, {len(self.dates)} weeks)"
            )
        if len(set(self.keywords)) != len(self.keywords):
            raise IngestError("duplicate keywords in panel")
        _check_weekly(self.dates)
        if values.size and (np.nanmin(values) < 0 or np.nanmax(values) > 100):
            raise IngestError("volumes must lie in [0, 100]")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_weeks(self) -> int:
        return len(self.dates)

    def series(self, keyword: str) -> np.ndarray:
        return self.values[self.keywords.index(keyword)]

    def to_frame(self) -> pd.DataFrame:
        """Weeks-by-keywords frame with a DatetimeIndex."""
        return pd.DataFrame(
            self.values.T.astype(float),
            index=pd.DatetimeIndex(self.dates, name="date"),
            columns=list(self.keywords),
        )

    def select(self, keywords: Iterable[str]) -> "SeriesPanel":
        keywords = list(keywords)
        rows = [self.keywords.index(k) for k in keywords]
        return SeriesPanel(self.location, self.dates, keywords, self.values[rows],
                           self.download_date)

    def slice_dates(self, start: dt.date, stop: dt.date) -> "SeriesPanel":
        """Weeks with ``start <= date <= stop``."""
        keep = [i for i, d in enumerate(self.dates) if start <= d <= stop]
        return SeriesPanel(self.location, [self.dates[i] for i in keep], self.keywords,
                           self.values[:, keep], self.download_date)


@dataclass(frozen=True)
class ReplicateStore:
    """Several downloads sharing keywords and dates."""

    panels: tuple[SeriesPanel, ...]

    def __post_init__(self):
        panels = tuple(self.panels)
        object.__setattr__(self, "panels", panels)
        if not panels:
            raise IngestError("empty replicate store")
        first = panels[0]
        for p in panels[1:]:
            if p.keywords != first.keywords or p.dates != first.dates:
                raise IngestError("replicates must share keywords and dates")

    def __len__(self) -> int:
        return len(self.panels)

    @property
    def keywords(self) -> tuple[str, ...]:
        return self.panels[0].keywords

    @property
    def dates(self) -> tuple[dt.date, ...]:
        return self.panels[0].dates

    def cube(self, keyword: str | None = None) -> np.ndarray:
        """Stacked values, ``(n_replicates, n_keywords, n_weeks)`` or one keyword."""
        if keyword is None:
            return np.stack([p.values for p in self.panels])
        i = self.keywords.index(keyword)
        return np.stack([p.values[i] for p in self.panels])


def _check_weekly(dates: Sequence[dt.date]) -> None:
    for a, b in zip(dates, dates[1:]):
        if b == a:
            raise IngestError(f"duplicate week row {b.isoformat()}")
        if (b - a).days != 7:
            raise IngestError(
                f"non-uniform spacing between {a.isoformat()} and {b.isoformat()}"
            )


def _parse_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise IngestError(f"malformed date {text!r}") from None


def _parse_cell(text: str, week: str, column: str) -> int:
    text = text.strip()
    if text == "<1":
        return 0
    if text == "":
        raise IngestError(f"missing value for {column!r} in week {week}")
    try:
        return int(text)
    except ValueError:
        raise IngestError(f"non-numeric cell {text!r} for {column!r} in week {week}") from None


def parse_trends_csv(raw_text: str, location: str,
                     download_date: dt.date | None = None) -> SeriesPanel:
    """Parse an "interest over time" CSV export.

    Both the ``Category:`` preamble layout and preamble-free files are
    accepted. Sub-threshold ``<1`` cells are stored as 0.

    Parameters
    ----------
    raw_text : str
        File contents.
    location : str
        Region code recorded on the panel.
    download_date : date, optional
        Day the export was retrieved.
    """
    rows = [r for r in csv.reader(io.StringIO(raw_text.lstrip("﻿")))]
    start = None
    for i, row in enumerate(rows):
        if not row or not row[0].strip():
            continue
        first = row[0].strip()
        if first.startswith("Category:"):
            continue
        if first in ("Week", "Semana", "Woche", "Semaine"):
            start = i
            break
        raise IngestError(f"unexpected line before header: {','.join(row)!r}")
    if start is None:
        raise IngestError("no 'Week,<term>: (<region>)' header row found")

    header = rows[start]
    keywords = []
    for col in header[1:]:
        m = _HEADER_RE.match(col.strip())
        keywords.append(m.group("term").strip() if m else col.strip())

    dates, table = [], []
    for row in rows[start + 1:]:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise IngestError(f"row {row[0]!r} has {len(row)} cells, expected {len(header)}")
        dates.append(_parse_date(row[0]))
        table.append([_parse_cell(c, row[0], k) for c, k in zip(row[1:], keywords)])
    if not dates:
        raise IngestError("export contains no weekly rows")
    values = np.asarray(table, dtype=np.int64).T.reshape(len(keywords), len(dates))
    return SeriesPanel(location, dates, keywords, values, download_date)


def to_trends_csv(panel: SeriesPanel, category: str | None = "All categories") -> str:
    """Render a panel in the Trends export layout (inverse of the parser)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if category is not None:
        w.writerow([f"Category: {category}"])
        w.writerow([])
    w.writerow(["Week"] + [f"{k}: ({panel.location})" for k in panel.keywords])
    for j, d in enumerate(panel.dates):
        w.writerow([d.isoformat()] + [str(int(v)) for v in panel.values[:, j]])
    return buf.getvalue()


def align_panels(panels: Sequence[SeriesPanel]) -> ReplicateStore:
    """Restrict replicate downloads to their shared weeks and keywords.

    Keywords are sorted and panels ordered by download date.
    """
    if len(panels) < 2:
        raise IngestError("align_panels needs at least two panels")
    common_dates = set(panels[0].dates)
    common_kw = set(panels[0].keywords)
    for p in panels[1:]:
        common_dates &= set(p.dates)
        common_kw &= set(p.keywords)
    if not common_dates:
        raise IngestError("panels share no weeks")
    if not common_kw:
        raise IngestError("panels share no keywords")
    dates = sorted(common_dates)
    keywords = sorted(common_kw)
    out = []
    for p in panels:
        cols = [p.dates.index(d) for d in dates]
        rows = [p.keywords.index(k) for k in keywords]
        out.append(SeriesPanel(p.location, dates, keywords, p.values[np.ix_(rows, cols)],
                               p.download_date))
    out.sort(key=lambda p: (p.download_date or dt.date.min))
    return ReplicateStore(out)


def zero_fraction(series) -> float:
    """Share of weeks reporting exactly zero."""
    x = np.asarray(series)
    if x.size == 0:
        raise ValueError("zero_fraction of an empty series")
    return float(np.count_nonzero(x == 0)) / x.size


def frame_to_long(frame: pd.DataFrame, location: str,
                  download_date: dt.date | None = None) -> pd.DataFrame:
    """Weeks-by-keywords frame to the columnar ``date,keyword,value,...`` layout."""
    long = frame.rename_axis(index="date", columns="keyword").stack(future_stack=True)
    long = long.rename("value").reset_index()
    long["date"] = pd.to_datetime(long["date"]).dt.strftime("%Y-%m-%d")
    long["location"] = location
    long["download_date"] = download_date.isoformat() if download_date else ""
    return long[_LONG_COLUMNS]


def long_to_frame(long: pd.DataFrame) -> pd.DataFrame:
    frame = long.pivot(index="date", columns="keyword", values="value")
    frame.index = pd.DatetimeIndex(pd.to_datetime(frame.index), name="date")
    frame.columns.name = None
    keywords = list(dict.fromkeys(long["keyword"]))
    return frame[keywords]


def write_panels(panels: Iterable[SeriesPanel], path) -> None:
    """Write panels to one columnar CSV (``date,keyword,value,location,download_date``)."""
    parts = [frame_to_long(p.to_frame().astype(np.int64), p.location, p.download_date)
             for p in panels]
    pd.concat(parts, ignore_index=True).to_csv(path, index=False, lineterminator="\n")


def read_panels(path) -> list[SeriesPanel]:
    """Inverse of :func:`write_panels`; one panel per (location, download_date)."""
    long = pd.read_csv(path, dtype={"keyword": str, "location": str, "download_date": str},
                       keep_default_na=False)
    missing = set(_LONG_COLUMNS) - set(long.columns)
    if missing:
        raise IngestError(f"panel file lacks columns {sorted(missing)}")
    panels = []
    for (loc, dl), grp in long.groupby(["location", "download_date"], sort=False):
        frame = long_to_frame(grp)
        if frame.isna().any().any():
            raise IngestError(f"panel {loc}/{dl or '-'} has missing cells")
        dates = [ts.date() for ts in frame.index]
        values = frame.to_numpy().T
        if np.all(values == np.round(values)):
            values = values.astype(np.int64)
        panels.append(SeriesPanel(str(loc), dates, list(frame.columns), values,
                                  dt.date.fromisoformat(dl) if dl else None))
    return panels
