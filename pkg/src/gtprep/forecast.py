"""Rolling-origin forecasting with exogenous search predictors.

Timing convention: a forecast issued at week ``t`` sees the target through
``t - 1`` (reporting lags by one week) and exogenous data through ``t``.
Horizon 0 is the nowcast of week ``t``; horizon ``h`` targets ``t + h``.

Every model follows the same call contract::

    model.forecast(y_past, X_past, h) -> float

with ``y_past`` the target history through ``t - 1`` and ``X_past`` the
exogenous rows through ``t`` (one row more than ``y_past``), or None.
"""

from __future__ import annotations

import csv
import logging
import math
import shlex
import subprocess
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from numba import njit
from scipy.signal import lfilter
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._base import check_series

log = logging.getLogger(__name__)

__all__ = [
    "ForecastTask",
    "ForecastTrace",
    "CSSResult",
    "fit_css_arma",
    "fit_arimax",
    "fit_sarimax",
    "fit_argo",
    "lasso_path",
    "ARIMAXForecaster",
    "ArgoForecaster",
    "SubprocessModel",
    "PersistenceModel",
    "run_backtest",
    "build_design",
    "write_trace",
]


# ---------------------------------------------------------------------------
# CSS estimation of regression with ARMA(1,1) errors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CSSResult:
    beta: np.ndarray  # intercept first, then exog coefficients
    phi: float
    theta: float
    ssr: float
    converged: bool
    iterations: int
    u_last: float
    e_last: float


def _css_residuals(w, Z, beta, phi, theta):
    u = w - Z @ beta
    v = u[1:] - phi * u[:-1]
    e = lfilter([1.0], [1.0, theta], v)
    return u, e


def _css_jacobian(w, Z, beta, phi, theta, u, e):
    a = [1.0, theta]
    d_phi = lfilter([1.0], a, -u[:-1])
    e_lag = np.concatenate([[0.0], e[:-1]])
    d_theta = lfilter([1.0], a, -e_lag)
    dz = -(Z[1:] - phi * Z[:-1])
    d_beta = lfilter([1.0], a, dz, axis=0)
    return np.column_stack([d_beta, d_phi, d_theta])


def _hannan_rissanen(u: np.ndarray, bound: float) -> np.ndarray:
    """Starting ARMA(1,1) values from a long autoregression's innovations."""
    n = u.size
    p = min(8, n // 5)
    if p < 1 or n - p < 10 or np.var(u) == 0:
        return np.zeros(2)
    A = np.column_stack([u[p - j - 1:n - j - 1] for j in range(p)])
    a, *_ = np.linalg.lstsq(A, u[p:], rcond=None)
    innov = np.zeros(n)
    innov[p:] = u[p:] - A @ a
    B = np.column_stack([u[p:-1], innov[p:-1]])
    c, *_ = np.linalg.lstsq(B, u[p + 1:], rcond=None)
    return np.clip(c, -bound + 0.05, bound - 0.05)


def _gauss_newton(w, Z, params, max_iter, tol, bound):
    k = Z.shape[1]

    def ssr_of(p):
        u, e = _css_residuals(w, Z, p[:k], p[k], p[k + 1])
        return float(e @ e), u, e

    ssr, u, e = ssr_of(params)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = _css_jacobian(w, Z, params[:k], params[k], params[k + 1], u, e)
        step, *_ = np.linalg.lstsq(J, -e, rcond=None)
        big = np.max(np.abs(step[k:]))
        if big > 0.25:  # keep the ARMA part from jumping onto the cancelling ridge
            step = step * (0.25 / big)
        scale = 1.0
        improved = False
        while scale > 1e-6:
            cand = params + scale * step
            cand[k:] = np.clip(cand[k:], -bound, bound)
            c_ssr, c_u, c_e = ssr_of(cand)
            if c_ssr <= ssr:
                improved = True
                break
            scale /= 2
        if not improved:
            converged = True  # no descent direction left
            break
        change = ssr - c_ssr
        moved = float(np.max(np.abs(cand - params)))
        params, ssr, u, e = cand, c_ssr, c_u, c_e
        if change <= tol * (ssr + 1e-12) or moved < 1e-10:
            converged = True
            break
    return CSSResult(params[:k].copy(), float(params[k]), float(params[k + 1]), ssr,
                     converged, it, float(u[-1]), float(e[-1]) if e.size else 0.0)


def fit_css_arma(w, Z, max_iter: int = 100, tol: float = 1e-10, bound: float = 0.99) -> CSSResult:
    """Conditional-sum-of-squares fit of ``w_t = Z_t b + u_t``, ARMA(1,1) ``u``.

    ``e_0 = 0`` and the first observation conditions the recursion
    ``e_t = u_t - phi u_{t-1} - theta e_{t-1}``. Gauss-Newton with step
    halving runs from OLS for ``b`` with zero ARMA coefficients and again from
    Hannan-Rissanen ARMA values; the lower sum of squares wins. ARMA
    coefficients stay inside ``[-bound, bound]``.
    """
    w = np.asarray(w, dtype=float)
    Z = np.asarray(Z, dtype=float)
    beta, *_ = np.linalg.lstsq(Z, w, rcond=None)
    best = _gauss_newton(w, Z, np.concatenate([beta, [0.0, 0.0]]), max_iter, tol, bound)
    start = _hannan_rissanen(w - Z @ beta, bound)
    if np.any(start != 0):
        alt = _gauss_newton(w, Z, np.concatenate([beta, start]), max_iter, tol, bound)
        if alt.converged and (alt.ssr < best.ssr or not best.converged):
            best = alt
    return best


def _check_inputs(y_past, X_past, min_len: int):
    y = check_series(y_past, "y_past", min_length=min_len)
    if X_past is None:
        return y, None
    X = np.asarray(X_past, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.size + 1:
        raise ValueError("X_past must hold one row more than y_past (the current week)")
    if X.shape[1] == 0:
        return y, None
    if not np.all(np.isfinite(X)):
        raise ValueError("X_past contains NaN or infinite values")
    return y, X


def _fit_differenced(y_past, X_past, h: int, lag: int, window: int,
                     max_iter: int = 100) -> tuple[float, dict]:
    if h < 0:
        raise ValueError("horizon must be >= 0")
    y, X = _check_inputs(y_past, X_past, window)
    yw = y[-window:]
    w = yw[lag:] - yw[:-lag]
    Z = np.ones((w.size, 1))
    if X is not None:
        Xw = X[-(window + 1):]  # window rows aligned with yw, then the current week
        Xd = Xw[lag:-1] - Xw[:-1 - lag]
        Z = np.column_stack([Z, Xd])
    if np.all(w == w[0]) and X is None:
        res = CSSResult(np.array([w[0]]), 0.0, 0.0, 0.0, True, 0, 0.0, 0.0)
    else:
        res = fit_css_arma(w, Z, max_iter=max_iter)
    flags = {"phi": res.phi, "theta": res.theta, "iterations": res.iterations}
    if not res.converged:
        warnings.warn("CSS did not converge; falling back to pure regression", RuntimeWarning)
        beta, *_ = np.linalg.lstsq(Z, w, rcond=None)
        u_last = float(w[-1] - Z[-1] @ beta)
        res = CSSResult(beta, 0.0, 0.0, float("nan"), False, res.iterations, u_last, 0.0)
        flags["fallback"] = True

    # future exog rows: the current week, then held at its value
    hist = list(yw)
    u_prev, e_prev = res.u_last, res.e_last
    x_now = X[-1] if X is not None else None
    for j in range(h + 1):
        u_hat = res.phi * u_prev + (res.theta * e_prev if j == 0 else 0.0)
        z = [1.0]
        if X is not None:
            past = Xw[window + j - lag] if j < lag else x_now
            z.extend(x_now - past)
        w_hat = float(np.dot(res.beta, z)) + u_hat
        hist.append(hist[-lag] + w_hat)
        u_prev, e_prev = u_hat, 0.0
    return float(hist[-1]), flags


def fit_arimax(y_past, X_past=None, h: int = 0, window: int = 104) -> float:
    """ARIMAX(1,1,1): regression with ARMA(1,1) errors on first differences."""
    return _fit_differenced(y_past, X_past, h, 1, window)[0]


def fit_sarimax(y_past, X_past=None, h: int = 0, window: int = 104) -> float:
    """As :func:`fit_arimax` with yearly (lag-52) differencing."""
    if window < 104:
        raise ValueError("seasonal model needs a window of at least 104 weeks")
    return _fit_differenced(y_past, X_past, h, 52, window)[0]


# ---------------------------------------------------------------------------
# Lasso by coordinate descent
# ---------------------------------------------------------------------------

@njit(cache=True)
def _lasso_cd(G, c, alphas, tol, max_iter):
    # G = X'X / m, c = X'y / m; coordinate updates keep q = G b current
    p = c.size
    coefs = np.zeros((alphas.size, p))
    b = np.zeros(p)
    q = np.zeros(p)
    for a in range(alphas.size):
        alpha = alphas[a]
        for _ in range(max_iter):
            max_delta = 0.0
            max_b = 0.0
            for j in range(p):
                gjj = G[j, j]
                if gjj == 0.0:
                    continue
                old = b[j]
                rho = c[j] - q[j] + gjj * old
                if rho > alpha:
                    new = (rho - alpha) / gjj
                elif rho < -alpha:
                    new = (rho + alpha) / gjj
                else:
                    new = 0.0
                if new != old:
                    diff = new - old
                    for i in range(p):
                        q[i] += G[i, j] * diff
                    b[j] = new
                    if abs(diff) > max_delta:
                        max_delta = abs(diff)
                if abs(new) > max_b:
                    max_b = abs(new)
            if max_delta <= tol * max(max_b, 1.0):
                break
        coefs[a] = b
    return coefs


def lasso_path(X, y, alphas, tol: float = 1e-6, max_iter: int = 10_000) -> np.ndarray:
    """Coefficients minimising ``|y - Xb|^2 / (2m) + alpha |b|_1`` along ``alphas``.

    No intercept: centre ``X`` and ``y`` beforehand. Solutions are warm
    started in the given order, so pass ``alphas`` in decreasing order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    m = X.shape[0]
    G = np.ascontiguousarray(X.T @ X / m)
    return _lasso_cd(G, X.T @ y / m, np.ascontiguousarray(alphas, dtype=float), tol, max_iter)


def _argo_rows(y: np.ndarray, X: np.ndarray | None, issue: np.ndarray, n_lags: int) -> np.ndarray:
    lags = np.column_stack([y[issue - k] for k in range(1, n_lags + 1)])
    if X is None:
        return lags
    return np.column_stack([lags, X[issue]])


def fit_argo(y_past, X_past=None, h: int = 0, window: int = 104, n_lags: int = 52,
             n_folds: int = 5, n_alphas: int = 30, alpha: float | None = None,
             alpha_ratio: float = 1e-2, return_model: bool = False):
    """ARGO: lasso regression of ``y_{s+h}`` on 52 target lags and current exog.

    Training rows are the ``window`` most recent targets ``y_{s+h}`` that
    were observed by the issue week. Features are standardised on those rows,
    the intercept is unpenalised, and the penalty minimises the mean squared
    error of ``n_folds`` contiguous validation blocks over ``n_alphas`` values
    from the smallest all-zero penalty down to ``alpha_ratio`` times it,
    unless ``alpha`` is given.
    """
    if h < 0:
        raise ValueError("horizon must be >= 0")
    y, X = _check_inputs(y_past, X_past, n_lags + window + h)
    T = y.size
    issue = np.arange(T - window - h, T - h)
    F = _argo_rows(y, X, issue, n_lags)
    target = y[issue + h]
    if np.all(target == target[0]):
        raise ValueError("degenerate window: constant target")
    mean, sd = F.mean(axis=0), F.std(axis=0)
    sd_safe = np.where(sd > 0, sd, 1.0)
    Fs = np.where(sd > 0, (F - mean) / sd_safe, 0.0)
    y_mean = target.mean()
    yc = target - y_mean
    m = yc.size
    alpha_max = float(np.max(np.abs(Fs.T @ yc)) / m) if Fs.size else 0.0

    path = np.array([max(float(alpha), 0.0)]) if alpha is not None else np.zeros(0)
    if alpha is None and alpha_max > 0:
        alphas = np.geomspace(alpha_max, alpha_max * alpha_ratio, n_alphas)
        cv = np.zeros(alphas.size)
        for fold in np.array_split(np.arange(m), n_folds):
            train = np.setdiff1d(np.arange(m), fold)
            Ft, yt = Fs[train], target[train]
            f_mean, t_mean = Ft.mean(axis=0), yt.mean()
            coefs = lasso_path(Ft - f_mean, yt - t_mean, alphas)
            pred = t_mean + (Fs[fold] - f_mean) @ coefs.T
            cv += np.sum((target[fold][:, None] - pred) ** 2, axis=0)
        # ties go to the heavier penalty; warm start the refit along the path
        path = alphas[:np.flatnonzero(cv <= cv.min() * (1 + 1e-12))[0] + 1]
    chosen = float(path[-1]) if path.size else 0.0
    if path.size and chosen < alpha_max:
        coef = lasso_path(Fs, yc, path)[-1]
    else:
        coef = np.zeros(Fs.shape[1])
    now = _argo_rows(y, X, np.array([T]), n_lags)[0]
    x_now = np.where(sd > 0, (now - mean) / sd_safe, 0.0)
    forecast = float(y_mean + x_now @ coef)
    if return_model:
        return forecast, {"alpha": chosen, "coef": coef / sd_safe, "intercept": y_mean - (mean / sd_safe) @ coef}
    return forecast


# ---------------------------------------------------------------------------
# Estimator-style wrappers and plug-ins
# ---------------------------------------------------------------------------

class _Forecaster(RegressorMixin, BaseEstimator):
    """Shared ``fit(y, X)`` / ``predict(h, X_now)`` plumbing.

    ``fit`` stores the history (target and exog rows aligned with it);
    ``predict`` appends the current exog row and runs the model.
    """

    expanding = False

    def fit(self, y, X=None):
        y = check_series(y, "y")
        if X is not None:
            X = np.asarray(X, dtype=float)
            X = X[:, None] if X.ndim == 1 else X
            if X.shape[0] != y.size:
                raise ValueError("X must have one row per target observation")
        self.y_ = y
        self.X_ = X
        return self

    def predict(self, h: int = 0, X_now=None):
        check_is_fitted(self, "y_")
        X = None
        if self.X_ is not None:
            if X_now is None:
                raise ValueError("model was fitted with exog; X_now is required")
            X = np.vstack([self.X_, np.asarray(X_now, dtype=float).reshape(1, -1)])
        return self.forecast(self.y_, X, h)

    def forecast(self, y_past, X_past, h: int) -> float:
        raise NotImplementedError


class ARIMAXForecaster(_Forecaster):
    """ARIMA(1,1,1) or seasonal-difference variant with regression errors.

    Parameters
    ----------
    seasonal : bool, default=False
        Difference at lag 52 instead of 1.
    window : int, default=104
        Rolling estimation window.
    """

    def __init__(self, seasonal=False, window=104, max_iter=100):
        self.seasonal = seasonal
        self.window = window
        self.max_iter = max_iter

    @property
    def name(self) -> str:
        return "sarimax" if self.seasonal else "arimax"

    @property
    def min_history(self) -> int:
        return self.window

    def forecast(self, y_past, X_past, h: int) -> float:
        if self.seasonal and self.window < 104:
            raise ValueError("seasonal model needs a window of at least 104 weeks")
        value, self.last_info_ = _fit_differenced(y_past, X_past, h, 52 if self.seasonal else 1,
                                                  self.window, self.max_iter)
        return value


class ArgoForecaster(_Forecaster):
    """Lasso autoregression on 52 target lags plus current exogenous values."""

    def __init__(self, window=104, n_lags=52, n_folds=5, n_alphas=30, alpha=None,
                 alpha_ratio=1e-2):
        self.window = window
        self.alpha_ratio = alpha_ratio
        self.n_lags = n_lags
        self.n_folds = n_folds
        self.n_alphas = n_alphas
        self.alpha = alpha

    name = "argo"

    @property
    def min_history(self) -> int:
        return self.window + self.n_lags + 3

    def forecast(self, y_past, X_past, h: int) -> float:
        return fit_argo(y_past, X_past, h, self.window, self.n_lags, self.n_folds,
                        self.n_alphas, self.alpha, self.alpha_ratio)


class PersistenceModel(_Forecaster):
    """Last observed target value, at every horizon."""

    name = "persistence"
    min_history = 1

    def forecast(self, y_past, X_past, h: int) -> float:
        return float(np.asarray(y_past, dtype=float)[-1])


def build_design(y_past, X_past, h: int, target_lags: int, exog_lags: int = 0,
                 columns: Sequence[str] | None = None) -> pd.DataFrame:
    """Design matrix for external models.

    Each row is an issue week ``s``: ``y`` is ``y_{s+h}`` (empty on the final
    forecast row), followed by ``y_lag1..`` and exog columns ``<name>_lag0..``.
    """
    y, X = _check_inputs(y_past, X_past, target_lags + h + 2)
    T = y.size
    start = max(target_lags, exog_lags)
    issue = np.arange(start, T - h)
    cols: dict[str, np.ndarray] = {}
    all_issue = np.concatenate([issue, [T]])
    cols["y"] = np.concatenate([y[issue + h], [np.nan]])
    for k in range(1, target_lags + 1):
        cols[f"y_lag{k}"] = y[all_issue - k]
    if X is not None:
        names = list(columns) if columns is not None else [f"x{j}" for j in range(X.shape[1])]
        for j, name in enumerate(names):
            for k in range(exog_lags + 1):
                cols[f"{name}_lag{k}"] = X[all_issue - k, j]
    return pd.DataFrame(cols)


class SubprocessModel(_Forecaster):
    """External model speaking the design-matrix protocol.

    The command receives the :func:`build_design` CSV on standard input and
    must print one forecast per row with an empty ``y`` (exactly one line).

    Parameters
    ----------
    command : str
        Shell-style command line.
    name : str
        Model id used in traces and reports.
    target_lags, exog_lags : int
        Lags included in the design matrix.
    expanding : bool, default=True
        Pass the whole history instead of a rolling window.
    window : int
        Rolling window length when ``expanding`` is False.
    min_train : int
        Minimum number of training rows before the model is called.
    """

    def __init__(self, command, name="plugin", target_lags=52, exog_lags=0, expanding=True,
                 window=104, min_train=208, timeout=300):
        self.command = command
        self.name = name
        self.target_lags = target_lags
        self.exog_lags = exog_lags
        self.expanding = expanding
        self.window = window
        self.min_train = min_train
        self.timeout = timeout

    @property
    def min_history(self) -> int:
        return self.min_train + max(self.target_lags, self.exog_lags) + 3

    def forecast(self, y_past, X_past, h: int) -> float:
        design = build_design(y_past, X_past, h, self.target_lags, self.exog_lags)
        train = design.iloc[:-1]
        if not self.expanding:
            train = train.iloc[-self.window:]
        if len(train) < min(self.min_train, len(design) - 1):
            raise ValueError("not enough training rows for plug-in")
        payload = pd.concat([train, design.iloc[-1:]]).to_csv(index=False, lineterminator="\n")
        proc = subprocess.run(shlex.split(self.command), input=payload, capture_output=True,
                              text=True, timeout=self.timeout)
        if proc.returncode != 0:
            raise RuntimeError(f"plug-in {self.name!r} exited with {proc.returncode}: "
                               f"{proc.stderr.strip()[:200]}")
        lines = [l for l in proc.stdout.splitlines() if l.strip()]
        if len(lines) != 1:
            raise RuntimeError(f"plug-in {self.name!r} returned {len(lines)} values, expected 1")
        return float(lines[0])


# ---------------------------------------------------------------------------
# Backtest harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ForecastTask:
    location: str
    horizon: int
    model_id: str
    exog_variant: str = "none"
    train_window: int = 104

    def __post_init__(self):
        if self.horizon not in (0, 1, 2, 3):
            raise ValueError("horizon must be 0, 1, 2 or 3")
        if self.train_window < 60:
            raise ValueError("train_window must be at least 60 weeks")


@dataclass
class ForecastTrace:
    location: str
    horizon: int
    model_id: str
    exog_variant: str
    dates: list = field(default_factory=list)  # target weeks
    y_true: list = field(default_factory=list)
    y_hat: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def valid(self) -> tuple[np.ndarray, np.ndarray]:
        yt = np.asarray(self.y_true, dtype=float)
        yh = np.asarray(self.y_hat, dtype=float)
        ok = np.isfinite(yh) & np.isfinite(yt)
        return yt[ok], yh[ok]

    @property
    def n_failed(self) -> int:
        return int(np.sum(~np.isfinite(np.asarray(self.y_hat, dtype=float))))


def _align(target: pd.Series, exog: pd.DataFrame | None):
    if exog is None or exog.shape[1] == 0:
        return target, None
    common = target.index.intersection(exog.index)
    exog = exog.loc[common]
    if exog.isna().any().any():
        first_ok = exog.notna().all(axis=1).to_numpy().argmax()
        exog = exog.iloc[first_ok:]
    return target, exog


def run_backtest(target: pd.Series, exog: pd.DataFrame | None, models: dict,
                 horizons: Sequence[int], test_dates: Sequence, location: str = "",
                 exog_variant: str = "none") -> list[ForecastTrace]:
    """Refit every model for each target week and horizon.

    For target week ``tau`` and horizon ``h`` the issue week is ``tau - h``;
    models see the target strictly before the issue week and exog up to and
    including it. Fit errors are recorded in the trace flags and the week
    is skipped.

    Parameters
    ----------
    target : Series with a weekly DatetimeIndex
    exog : DataFrame or None
        Exogenous predictors on (a subset of) the target's weeks.
    models : dict
        ``model_id -> model`` with a ``forecast(y_past, X_past, h)`` method.
    horizons : sequence of int
    test_dates : sequence of timestamps
        Target weeks to forecast.
    """
    target = target.astype(float)
    target, exog = _align(target, exog)
    tpos = {d: i for i, d in enumerate(target.index)}
    xpos = {d: i for i, d in enumerate(exog.index)} if exog is not None else {}
    yv = target.to_numpy()
    xv = exog.to_numpy(dtype=float) if exog is not None else None
    traces = []
    for model_id, model in models.items():
        cache: dict[tuple[int, int], float] = {}
        for h in horizons:
            trace = ForecastTrace(location, int(h), model_id, exog_variant)
            for tau in pd.DatetimeIndex(test_dates):
                if tau not in tpos:
                    raise ValueError(f"test week {tau.date()} not in target index")
                i_tau = tpos[tau]
                issue = i_tau - h
                flags = ""
                y_hat = float("nan")
                try:
                    if issue < 1:
                        raise ValueError("no target history before the issue week")
                    issue_date = target.index[issue]
                    y_past = yv[:issue]
                    X_past = None
                    if xv is not None:
                        if issue_date not in xpos:
                            raise ValueError(f"no exog row for issue week {issue_date.date()}")
                        ix = xpos[issue_date]
                        n_hist = min(issue, ix)
                        y_past = yv[issue - n_hist:issue]
                        X_past = xv[ix - n_hist:ix + 1]
                    key = (issue, h)
                    if key in cache:
                        y_hat = cache[key]
                    else:
                        with warnings.catch_warnings(record=True) as caught:
                            warnings.simplefilter("always")
                            y_hat = float(model.forecast(y_past, X_past, h))
                        if any("fall" in str(w.message) for w in caught):
                            flags = "fallback"
                        cache[key] = y_hat
                except Exception as exc:  # recorded, run continues
                    flags = f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
                    log.debug("forecast failed at %s h=%s: %s", tau.date(), h, exc)
                trace.dates.append(tau)
                trace.y_true.append(float(yv[i_tau]))
                trace.y_hat.append(y_hat)
                trace.flags.append(flags)
            traces.append(trace)
    return traces


def write_trace(trace: ForecastTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "y_true", "y_hat", "flags"])
        for d, yt, yh, fl in zip(trace.dates, trace.y_true, trace.y_hat, trace.flags):
            w.writerow([pd.Timestamp(d).strftime("%Y-%m-%d"), repr(float(yt)),
                        "" if not math.isfinite(yh) else repr(float(yh)), fl])
