"""Trend classification by an augmented Dickey-Fuller cascade, and its removal.

Each series is tested for stationarity around a constant, then a linear and
finally a quadratic trend. The first rejecting variant fixes the treatment:
nothing, OLS linear detrending, OLS quadratic detrending, or (if all three
fail to reject) first differencing. Trend coefficients come from training
rows only and are then applied to every row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import adf_table
from ._base import check_columns, check_series, rebuild, split_frame

__all__ = [
    "AdfResult",
    "TrendDecision",
    "VARIANTS",
    "critical_value",
    "adf_test",
    "classify_trend",
    "fit_trend",
    "trend_values",
    "apply_detrend",
    "trend_r2",
    "ADFDetrender",
]

VARIANTS = ("constant", "linear", "quadratic")
_ORDER = {"constant": 0, "linear": 1, "quadratic": 2}

# MacKinnon (2010) response surfaces, cv(T) = b0 + b1/T + b2/T^2 + b3/T^3.
_MACKINNON = {
    "constant": {
        0.01: (-3.43035, -6.5393, -16.786, -79.433),
        0.05: (-2.86154, -2.8903, -4.234, -40.040),
        0.10: (-2.56677, -1.5384, -2.809, 0.0),
    },
    "linear": {
        0.01: (-3.95877, -9.0531, -28.428, -134.155),
        0.05: (-3.41049, -4.3904, -9.036, -45.374),
        0.10: (-3.12705, -2.5856, -3.925, -22.380),
    },
}


@dataclass(frozen=True)
class AdfResult:
    variant: str
    gamma_hat: float
    t_stat: float
    critical_value_5pct: float
    reject: bool
    lag_order: int
    nobs: int
    critical_value: float | None = None  # at the requested alpha


@dataclass(frozen=True)
class TrendDecision:
    keyword: str
    action: str  # none | linear | quadratic | difference
    coefficients: tuple[float, ...] | None  # (mu, alpha[, beta]) on global week index
    train_r2: float
    t_stat: float = float("nan")


@lru_cache(maxsize=None)
def _quadratic_table():
    return adf_table.load_table()


def critical_value(variant: str, nobs: int, alpha: float = 0.05) -> float:
    """Left-tail critical value of the Dickey-Fuller t-statistic."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown ADF variant {variant!r}")
    if variant == "quadratic":
        table = _quadratic_table()
        if alpha not in table:
            raise ValueError(f"no quadratic critical value tabulated at alpha={alpha}")
        sizes, values = table[alpha]
        return adf_table.interpolate(sizes, values, nobs)
    try:
        b = _MACKINNON[variant][alpha]
    except KeyError:
        raise ValueError(f"no critical value at alpha={alpha}") from None
    return b[0] + b[1] / nobs + b[2] / nobs ** 2 + b[3] / nobs ** 3


def _design(y: np.ndarray, variant: str, p: int, start: int) -> tuple[np.ndarray, np.ndarray]:
    """Regression of dy_t on deterministic terms, y_{t-1} and p lagged differences.

    Rows are t = start..n-1 with start >= p + 1. The level column is last but
    one deterministic block, i.e. at index ``order + 1``.
    """
    n = y.size
    dy = np.diff(y)  # dy[t-1] = y_t - y_{t-1}
    t = np.arange(start, n)
    tt = t / n
    cols = [np.ones(t.size)]
    if _ORDER[variant] >= 1:
        cols.append(tt)
    if _ORDER[variant] >= 2:
        cols.append(tt ** 2)
    cols.append(y[t - 1])
    for i in range(1, p + 1):
        cols.append(dy[t - 1 - i])
    return np.column_stack(cols), dy[t - 1]


def _ols(X: np.ndarray, z: np.ndarray):
    k = X.shape[1]
    if X.shape[0] <= k:
        raise ValueError("series too short for the chosen lag order")
    beta, _, rank, _ = np.linalg.lstsq(X, z, rcond=None)
    if rank < k:
        raise ValueError("singular ADF design matrix")
    resid = z - X @ beta
    ssr = float(resid @ resid)
    return beta, ssr


def _aic(ssr: float, nobs: int, k: int) -> float:
    llf = -0.5 * nobs * (math.log(2 * math.pi) + math.log(max(ssr, 1e-300) / nobs) + 1)
    return -2 * llf + 2 * k


def adf_test(y, variant: str = "constant", alpha: float = 0.05,
             max_lag: int | None = None) -> AdfResult:
    """Augmented Dickey-Fuller test with AIC lag selection.

    Parameters
    ----------
    y : array-like, length >= 30
    variant : {"constant", "linear", "quadratic"}
        Deterministic terms in the test regression.
    alpha : float
        Level at which ``reject`` is decided (0.01, 0.05 or 0.10).
    max_lag : int, optional
        Upper bound for the lag search; defaults to ``floor(12 (n/100)^(1/4))``.
    """
    y = check_series(y, min_length=30)
    if variant not in VARIANTS:
        raise ValueError(f"unknown ADF variant {variant!r}")
    if np.var(y) == 0:
        raise ValueError("ADF test on a constant series")
    n = y.size
    n_det = _ORDER[variant] + 1
    pmax = int(math.floor(12 * (n / 100) ** 0.25)) if max_lag is None else int(max_lag)
    pmax = max(0, min(pmax, (n - 1) // 2 - n_det - 2))

    best_p, best_aic = 0, math.inf
    for p in range(pmax + 1):
        X, z = _design(y, variant, p, pmax + 1)
        _, ssr = _ols(X, z)
        aic = _aic(ssr, X.shape[0], X.shape[1])
        if aic < best_aic - 1e-12:
            best_p, best_aic = p, aic

    X, z = _design(y, variant, best_p, best_p + 1)
    beta, ssr = _ols(X, z)
    nobs, k = X.shape
    s2 = ssr / (nobs - k)
    j = n_det
    xtx_inv = np.linalg.inv(X.T @ X)
    se = math.sqrt(s2 * xtx_inv[j, j]) if s2 > 0 else 0.0
    gamma = float(beta[j])
    tstat = gamma / se if se > 0 else (-math.inf if gamma < 0 else math.inf)
    cv5 = critical_value(variant, nobs, 0.05)
    cv = critical_value(variant, nobs, alpha)
    return AdfResult(variant, gamma, float(tstat), cv5, bool(tstat < cv), best_p, nobs, cv)


def fit_trend(y, order: int, t0: int = 0) -> tuple[float, ...]:
    """OLS polynomial trend coefficients ``(mu, alpha[, beta])`` on t = t0, t0+1, ..."""
    y = check_series(y)
    t = np.arange(t0, t0 + y.size, dtype=float)
    X = np.vander(t, order + 1, increasing=True)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return tuple(float(b) for b in beta)


def trend_values(coefficients, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return sum(c * t ** i for i, c in enumerate(coefficients))


def trend_r2(y, fitted_trend) -> float:
    """Share of the variance of ``y`` explained by ``fitted_trend``, clamped to [0, 1]."""
    y = check_series(y)
    f = np.asarray(fitted_trend, dtype=float)
    if f.shape != y.shape:
        raise ValueError("y and fitted_trend must have equal lengths")
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0:
        raise ValueError("trend_r2 of a zero-variance series")
    return float(min(1.0, max(0.0, 1.0 - np.sum((y - f) ** 2) / sst)))


def _r2_of_fit(y: np.ndarray, order: int) -> float:
    if np.var(y) == 0:
        return 0.0
    return trend_r2(y, trend_values(fit_trend(y, order), np.arange(y.size)))


def classify_trend(y_train, keyword: str = "", alpha: float = 0.05) -> TrendDecision:
    """Run the constant/linear/quadratic ADF cascade on training rows."""
    y = check_series(y_train, "y_train", min_length=30)
    last = None
    for variant, action in (("constant", "none"), ("linear", "linear"),
                            ("quadratic", "quadratic")):
        last = adf_test(y, variant, alpha)
        if last.reject:
            if action == "none":
                return TrendDecision(keyword, "none", None, _r2_of_fit(y, 1), last.t_stat)
            order = _ORDER[variant]
            coefs = fit_trend(y, order)
            r2 = trend_r2(y, trend_values(coefs, np.arange(y.size)))
            return TrendDecision(keyword, action, coefs, r2, last.t_stat)
    return TrendDecision(keyword, "difference", None, _r2_of_fit(y, 1), last.t_stat)


def apply_detrend(y_full, decision: TrendDecision, train_len: int | None = None,
                  t0: int = 0) -> np.ndarray:
    """Remove the decided trend from every row.

    ``t0`` is the global week index of ``y_full[0]``. Differencing drops the
    first element.
    """
    y = check_series(y_full)
    if train_len is not None and train_len < 10:
        raise ValueError("train_len must be at least 10")
    if decision.action == "none":
        return y.copy()
    if decision.action == "difference":
        return np.diff(y)
    if decision.action not in ("linear", "quadratic") or decision.coefficients is None:
        raise ValueError(f"invalid trend decision {decision.action!r}")
    t = np.arange(t0, t0 + y.size)
    return y - trend_values(decision.coefficients, t)


class ADFDetrender(TransformerMixin, BaseEstimator):
    """Per-series ADF cascade fitted on training rows.

    ``transform`` indexes weeks globally: for DataFrames with a DatetimeIndex
    the week index is counted from the first training date, for arrays the
    first row is week 0. If any series is differenced, the first row of the
    output is dropped for all series so rows stay aligned.

    Parameters
    ----------
    alpha : float, default=0.05
        Significance level of every test in the cascade.
    """

    def __init__(self, alpha=0.05):
        self.alpha = alpha

    def fit(self, X, y=None):
        values, columns, index = split_frame(X)
        names = columns or [str(i) for i in range(values.shape[1])]
        decisions = []
        for j, name in enumerate(names):
            x = values[:, j]
            if np.var(x) == 0:
                decisions.append(TrendDecision(name, "none", None, 0.0))
                continue
            try:
                decisions.append(classify_trend(x, name, self.alpha))
            except ValueError as exc:
                raise ValueError(f"detrend failed for {name!r}: {exc}") from exc
        self.decisions_ = decisions
        self.n_features_in_ = values.shape[1]
        self.origin_ = index[0] if isinstance(index, pd.DatetimeIndex) else None
        if columns is not None:
            self.feature_names_in_ = np.asarray(columns, dtype=object)
        return self

    def _t0(self, index) -> int:
        if self.origin_ is None or not isinstance(index, pd.DatetimeIndex):
            return 0
        days = (index[0] - self.origin_).days
        if days % 7:
            raise ValueError("transform dates are not on the fitted weekly grid")
        return days // 7

    def transform(self, X):
        check_is_fitted(self, "decisions_")
        values, columns, index = split_frame(X)
        check_columns(self, columns, values.shape[1])
        t0 = self._t0(index)
        out = np.empty_like(values)
        for j, dec in enumerate(self.decisions_):
            if dec.action == "difference":
                out[0, j] = np.nan
                out[1:, j] = apply_detrend(values[:, j], dec)
            else:
                out[:, j] = apply_detrend(values[:, j], dec, t0=t0)
        if any(d.action == "difference" for d in self.decisions_):
            out = out[1:]
            index = index[1:] if index is not None else None
        return rebuild(out, columns, index)

    def report(self, X=None) -> list[dict]:
        """Rows for ``trend_report.csv``; R^2 columns need the fitted training frame."""
        check_is_fitted(self, "decisions_")
        rows = []
        values = split_frame(X)[0] if X is not None else None
        for j, d in enumerate(self.decisions_):
            c = d.coefficients or ()
            row = {"keyword": d.keyword, "action": d.action,
                   "mu": c[0] if len(c) > 0 else "", "alpha": c[1] if len(c) > 1 else "",
                   "beta": c[2] if len(c) > 2 else "", "t_stat": d.t_stat,
                   "r2_before": d.train_r2, "r2_after": ""}
            if values is not None and d.action in ("linear", "quadratic"):
                resid = apply_detrend(values[:, j], d)
                row["r2_after"] = _r2_of_fit(resid, len(c) - 1)
            rows.append(row)
        return rows
