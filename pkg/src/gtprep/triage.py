"""Near-duplicate removal and zero-fraction triage of keyword panels."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .ingest import SeriesPanel, zero_fraction

__all__ = ["TriagePlan", "as_frame", "dedup", "partition", "triage", "KeywordTriage",
           "write_triage_report"]


@dataclass(frozen=True)
class TriagePlan:
    kept: list[str]
    to_cluster: list[str]
    discarded: list[str]
    dedup_pairs: list[tuple[str, str, float]] = field(default_factory=list)
    zero_fractions: dict[str, float] = field(default_factory=dict)

    def class_of(self, keyword: str) -> str:
        if keyword in self.kept:
            return "kept"
        if keyword in self.to_cluster:
            return "to_cluster"
        return "discarded"


def as_frame(panel) -> pd.DataFrame:
    """Weeks-by-keywords frame from a :class:`SeriesPanel` or a frame."""
    if isinstance(panel, SeriesPanel):
        return panel.to_frame()
    if isinstance(panel, pd.DataFrame):
        return panel.astype(float)
    raise TypeError(f"expected SeriesPanel or DataFrame, got {type(panel).__name__}")


def _train(frame: pd.DataFrame, train_len: int | None) -> pd.DataFrame:
    return frame if train_len is None else frame.iloc[:train_len]


def dedup(panel, threshold: float = 0.99, train_len: int | None = None):
    """Drop one keyword from every pair correlated above ``threshold``.

    Pairs are visited by descending correlation (then alphabetically); when
    both members are still present the alphabetically later one goes.
    Zero-variance series take no part. Correlations use the first
    ``train_len`` weeks.

    Returns
    -------
    (panel, pairs)
        The reduced panel (same type as the input) and the
        ``(kept, dropped, correlation)`` pairs.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    frame = as_frame(panel)
    if frame.shape[1] < 2:
        raise ValueError("dedup needs at least two series")
    train = _train(frame, train_len)
    sd = train.std(ddof=0).to_numpy()
    names = [str(c) for c in frame.columns]
    live = [i for i in range(len(names)) if sd[i] > 0]
    corr = np.corrcoef(train.to_numpy()[:, live].T) if len(live) > 1 else np.ones((1, 1))
    pairs = []
    for a in range(len(live)):
        for b in range(a + 1, len(live)):
            r = corr[a, b]
            if r > threshold:
                i, j = sorted((names[live[a]], names[live[b]]))
                pairs.append((float(r), i, j))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    dropped, out_pairs = set(), []
    for r, i, j in pairs:
        if i in dropped or j in dropped:
            continue
        dropped.add(j)
        out_pairs.append((i, j, r))
    keep = [k for k in names if k not in dropped]
    if isinstance(panel, SeriesPanel):
        return panel.select(keep), out_pairs
    return frame[keep], out_pairs


def partition(panel, low: float = 0.30, high: float = 0.99,
              train_len: int | None = None) -> TriagePlan:
    """Classify keywords by zero fraction: ``< low`` kept, ``> high`` discarded."""
    if not 0 < low < high < 1:
        raise ValueError("need 0 < low < high < 1")
    frame = _train(as_frame(panel), train_len)
    kept, mid, gone, zf = [], [], [], {}
    for name in frame.columns:
        z = zero_fraction(frame[name].to_numpy())
        zf[str(name)] = z
        if z < low:
            kept.append(str(name))
        elif z <= high:
            mid.append(str(name))
        else:
            gone.append(str(name))
    return TriagePlan(kept, mid, gone, [], zf)


def triage(panel, dedup_threshold: float = 0.99, low: float = 0.30, high: float = 0.99,
           train_len: int | None = None) -> TriagePlan:
    """Deduplicate, then partition; dedup-dropped keywords count as discarded."""
    frame = as_frame(panel)
    if frame.shape[1] >= 2:
        reduced, pairs = dedup(frame, dedup_threshold, train_len)
    else:
        reduced, pairs = frame, []
    plan = partition(reduced, low, high, train_len)
    zf = {str(k): zero_fraction(_train(frame, train_len)[k].to_numpy()) for k in frame.columns}
    dropped = [j for _, j, _ in pairs]
    order = {str(k): i for i, k in enumerate(frame.columns)}
    discarded = sorted(plan.discarded + dropped, key=order.__getitem__)
    return TriagePlan(plan.kept, plan.to_cluster, discarded, pairs, zf)


def write_triage_report(plan: TriagePlan, path) -> None:
    """``keyword,zero_fraction,class,dropped_for`` rows."""
    dropped_for = {j: i for i, j, _ in plan.dedup_pairs}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["keyword", "zero_fraction", "class", "dropped_for"])
        for k, z in plan.zero_fractions.items():
            w.writerow([k, f"{z:.6f}", plan.class_of(k), dropped_for.get(k, "")])


class KeywordTriage(BaseEstimator):
    """Estimator wrapper around :func:`triage`.

    ``fit`` takes training weeks; ``transform`` returns the individually kept
    keywords.
    """

    def __init__(self, dedup_threshold=0.99, low=0.30, high=0.99):
        self.dedup_threshold = dedup_threshold
        self.low = low
        self.high = high

    def fit(self, X, y=None):
        frame = as_frame(X)
        self.plan_ = triage(frame, self.dedup_threshold, self.low, self.high)
        self.n_features_in_ = frame.shape[1]
        self.feature_names_in_ = np.asarray([str(c) for c in frame.columns], dtype=object)
        return self

    def transform(self, X):
        check_is_fitted(self, "plan_")
        return as_frame(X)[self.plan_.kept]

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)
