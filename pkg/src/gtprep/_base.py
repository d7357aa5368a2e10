"""Input validation shared by the estimators."""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.utils.validation import check_array


def check_series(y, name: str = "y", min_length: int = 1) -> np.ndarray:
    """1-D finite float array of at least ``min_length`` points."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {y.shape}")
    if y.size < min_length:
        raise ValueError(f"{name} needs at least {min_length} observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return y


def split_frame(X, allow_nan: bool = False):
    """Return ``(values, columns, index)`` for a frame or array of shape (weeks, series).

    ``columns``/``index`` are None for plain arrays.
    """
    if isinstance(X, pd.DataFrame):
        values = check_array(X.to_numpy(dtype=float), ensure_all_finite="allow-nan" if allow_nan else True,
                             ensure_min_samples=1)
        return values, [str(c) for c in X.columns], X.index
    values = check_array(X, ensure_all_finite="allow-nan" if allow_nan else True, dtype=float)
    return values, None, None


def rebuild(values: np.ndarray, columns, index):
    if columns is None:
        return values
    return pd.DataFrame(values, index=index, columns=columns)


def check_columns(estimator, columns, n_features: int) -> None:
    """Transform-time column check against what ``fit`` saw."""
    if n_features != estimator.n_features_in_:
        raise ValueError(f"X has {n_features} series, {type(estimator).__name__} "
                         f"was fitted with {estimator.n_features_in_}")
    fitted = getattr(estimator, "feature_names_in_", None)
    if columns is not None and fitted is not None and list(columns) != list(fitted):
        raise ValueError("series names differ from those seen in fit")
