"""Target-correlation filtering of predictors with collinearity pruning."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._base import check_series
from .triage import as_frame

__all__ = ["PredictorSet", "rank_by_target_correlation", "prune_collinear", "CorrelationSelector"]


@dataclass(frozen=True)
class PredictorSet:
    keywords: list[str]
    target_correlations: dict[str, float]
    dropped_collinear: list[tuple[str, str, float]] = field(default_factory=list)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a @ a) * (b @ b))
    return float(a @ b / den) if den > 0 else float("nan")


def rank_by_target_correlation(panel, target, train_len: int) -> list[tuple[str, float]]:
    """Keywords by descending ``|r|`` with the target over the first ``train_len`` weeks.

    Zero-variance series come last with ``r = nan``. Equal ``|r|`` keeps
    column order.
    """
    frame = as_frame(panel)
    target = check_series(target, "target")
    if train_len < 30:
        raise ValueError("train_len must be at least 30")
    if target.size < train_len or frame.shape[0] < train_len:
        raise ValueError("target and panel must cover the training rows")
    t = target[:train_len]
    if np.var(t) == 0:
        raise ValueError("target has zero variance on the training rows")
    rows = []
    for name in frame.columns:
        x = frame[name].to_numpy()[:train_len]
        rows.append((str(name), _pearson(x, t) if np.var(x) > 0 else float("nan")))
    return sorted(rows, key=lambda r: -abs(r[1]) if not np.isnan(r[1]) else np.inf)


def prune_collinear(ranked, panel, threshold: float = 0.95, cap: int = 10,
                    train_len: int | None = None) -> PredictorSet:
    """Walk down the ranking keeping keywords not collinear with those already kept."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    frame = as_frame(panel)
    if train_len is not None:
        frame = frame.iloc[:train_len]
    kept, dropped = [], []
    for name, r in ranked:
        if len(kept) >= cap:
            break
        if np.isnan(r):
            continue
        x = frame[name].to_numpy()
        clash = None
        for k in kept:
            rk = _pearson(x, frame[k].to_numpy())
            if abs(rk) > threshold:
                clash = (name, k, rk)
                break
        if clash:
            dropped.append(clash)
        else:
            kept.append(name)
    return PredictorSet(kept, {n: r for n, r in ranked}, dropped)


class CorrelationSelector(TransformerMixin, BaseEstimator):
    """Keep the ``cap`` most target-correlated, mutually non-collinear series.

    ``fit(X, y)`` must receive training rows only.
    """

    def __init__(self, threshold=0.95, cap=10):
        self.threshold = threshold
        self.cap = cap

    def fit(self, X, y):
        frame = as_frame(X)
        y = check_series(y, "y")
        if y.size != frame.shape[0]:
            raise ValueError("X and y have different numbers of rows")
        ranked = rank_by_target_correlation(frame, y, frame.shape[0])
        self.predictors_ = prune_collinear(ranked, frame, self.threshold, self.cap)
        self.n_features_in_ = frame.shape[1]
        self.feature_names_in_ = np.asarray([str(c) for c in frame.columns], dtype=object)
        return self

    def transform(self, X):
        check_is_fitted(self, "predictors_")
        return as_frame(X)[self.predictors_.keywords]

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "predictors_")
        return np.asarray(self.predictors_.keywords, dtype=object)


def write_predictors(predictors: PredictorSet, path) -> None:
    rows = [{"rank": i + 1, "keyword": k, "target_correlation": predictors.target_correlations[k]}
            for i, k in enumerate(predictors.keywords)]
    pd.DataFrame(rows, columns=["rank", "keyword", "target_correlation"]).to_csv(
        path, index=False, lineterminator="\n")
