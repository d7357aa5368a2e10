"""Look-ahead-free smoothing-spline denoising.

Splines are fitted on a trailing window of weekly observations (unit-spaced
abscissae). During training, each window predicts the next raw value and the
one-step RMSE picks the smoothing parameter. At transform time the last
fitted value of each window replaces the raw observation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import solveh_banded
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._base import check_columns, check_series, rebuild, split_frame

__all__ = [
    "SplineFit",
    "DenoiseModel",
    "DEFAULT_GRID",
    "fit_smoothing_spline",
    "one_step_predict",
    "spline_objective",
    "grid_search_lambda",
    "denoise_series",
    "gate_noisy",
    "moving_average_series",
    "SplineDenoiser",
    "MovingAverageDenoiser",
]

DEFAULT_GRID = tuple(np.geomspace(0.1, 2.0, 20))


@dataclass(frozen=True)
class SplineFit:
    fitted_values: np.ndarray
    lam: float
    second_derivatives: np.ndarray  # at every knot, zero at both ends


@dataclass(frozen=True)
class DenoiseModel:
    keyword: str
    lambda_star: float
    train_rmse: float
    is_noisy: bool = False


def _banded_system(m: int, lam: float) -> np.ndarray:
    # R + lam * Q'Q in upper banded storage; unit knot spacing
    ab = np.zeros((3, m))
    ab[2, :] = 2.0 / 3.0 + 6.0 * lam
    ab[1, 1:] = 1.0 / 6.0 - 4.0 * lam
    ab[0, 2:] = lam
    return ab


def _qt(y: np.ndarray) -> np.ndarray:
    """Q'y: second differences, applied along the first axis."""
    return y[:-2] - 2.0 * y[1:-1] + y[2:]


def _q(gamma: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n,) + gamma.shape[1:])
    out[:-2] += gamma
    out[1:-1] -= 2.0 * gamma
    out[2:] += gamma
    return out


def _reinsch(y: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    n = y.shape[0]
    gamma = solveh_banded(_banded_system(n - 2, lam), _qt(y), check_finite=False)
    fitted = y - lam * _q(gamma, n)
    m = np.zeros_like(y, dtype=float)
    m[1:-1] = gamma
    return fitted, m


def fit_smoothing_spline(y, lam: float) -> SplineFit:
    """Natural cubic smoothing spline with a knot at every week.

    Minimises ``sum (y_t - f_t)^2 + lam * integral f''(t)^2 dt`` through
    Reinsch's banded formulation ``(R + lam Q'Q) gamma = Q'y``,
    ``f = y - lam Q gamma``.

    Parameters
    ----------
    y : array-like of shape (n,)
        Observations at t = 0, 1, ..., n-1; n >= 4.
    lam : float
        Positive smoothing parameter.
    """
    y = check_series(y, min_length=4)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    fitted, m = _reinsch(y, float(lam))
    return SplineFit(fitted, float(lam), m)


def spline_objective(y, fit: SplineFit) -> float:
    """Penalised objective of a fitted spline, with the exact roughness integral."""
    y = np.asarray(y, dtype=float)
    m = fit.second_derivatives
    # f'' is piecewise linear in the knot values; unit intervals
    rough = np.sum(m[:-1] ** 2 + m[:-1] * m[1:] + m[1:] ** 2) / 3.0
    return float(np.sum((y - fit.fitted_values) ** 2) + fit.lam * rough)


def one_step_predict(fit: SplineFit, steps: int = 1) -> float:
    """Extrapolate past the last knot along the spline's linear tail."""
    f, m = fit.fitted_values, fit.second_derivatives
    slope = f[-1] - f[-2] + m[-2] / 6.0
    return float(f[-1] + steps * slope)


@lru_cache(maxsize=256)
def _window_weights(window: int, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Linear weights giving the last fitted value and the one-step prediction."""
    fitted, m = _reinsch(np.eye(window), lam)
    last = fitted[-1].copy()
    pred = 2.0 * fitted[-1] - fitted[-2] + m[-2] / 6.0
    last.setflags(write=False)
    pred.setflags(write=False)
    return last, pred


def _one_step_rmse(y: np.ndarray, window: int, lam: float) -> float:
    _, pred = _window_weights(window, float(lam))
    preds = sliding_window_view(y[:-1], window) @ pred
    return float(np.sqrt(np.mean((y[window:] - preds) ** 2)))


def grid_search_lambda(y_train, window: int = 20,
                       grid: Sequence[float] = DEFAULT_GRID) -> tuple[float, float]:
    """Pick the smoothing parameter with the lowest rolling one-step RMSE.

    Returns ``(lambda_star, train_rmse)``. Ties go to the smaller lambda.
    """
    y = check_series(y_train, "y_train")
    if window < 4:
        raise ValueError("window must be >= 4")
    if y.size < window + 2:
        raise ValueError(f"training series shorter than window+2 ({window + 2})")
    grid = [float(g) for g in grid]
    if not grid or min(grid) <= 0:
        raise ValueError("grid must hold positive values")
    scores = np.array([_one_step_rmse(y, window, g) for g in grid])
    best = scores.min()
    tied = scores <= best * (1 + 1e-9) + 1e-12
    lam = min(g for g, t in zip(grid, tied) if t)
    return lam, float(scores[grid.index(lam)])


def denoise_series(y, model: DenoiseModel | float, window: int = 20,
                   train_len: int | None = None) -> np.ndarray:
    """Replace each value by the last fitted value of its trailing window.

    The first ``window - 1`` points pass through unchanged. Output at t only
    depends on ``y[:t + 1]``.
    """
    y = check_series(y)
    lam = model.lambda_star if isinstance(model, DenoiseModel) else float(model)
    if window > y.size:
        raise ValueError("window longer than series")
    if train_len is not None and not 0 < train_len < y.size:
        raise ValueError("train_len must be inside the series")
    last, _ = _window_weights(window, lam)
    out = y.copy()
    out[window - 1:] = sliding_window_view(y, window) @ last
    return out


def gate_noisy(models: Sequence[DenoiseModel]) -> list[DenoiseModel]:
    """Flag models whose training RMSE is strictly above the median."""
    if not models:
        raise ValueError("gate_noisy needs at least one model")
    med = float(np.median([m.train_rmse for m in models]))
    return [replace(m, is_noisy=bool(m.train_rmse > med)) for m in models]


def moving_average_series(y, window: int) -> np.ndarray:
    """Trailing moving average; warm-up points pass through."""
    y = check_series(y)
    out = y.copy()
    out[window - 1:] = sliding_window_view(y, window).mean(axis=1)
    return out


class SplineDenoiser(TransformerMixin, BaseEstimator):
    """Per-series smoothing-spline denoiser with median-RMSE gating.

    ``fit`` receives training rows only (weeks x series) and selects one
    smoothing parameter per series; ``transform`` smooths the noisy series
    over whatever rows it is given and leaves the others untouched.

    Parameters
    ----------
    window : int, default=20
        Trailing window length in weeks.
    grid : sequence of float, optional
        Candidate smoothing parameters; 20 log-spaced values over [0.1, 2]
        by default.
    gate : bool, default=True
        Only smooth series above the median training RMSE. When False every
        series is smoothed.
    """

    def __init__(self, window=20, grid=None, gate=True):
        self.window = window
        self.grid = grid
        self.gate = gate

    def fit(self, X, y=None):
        values, columns, _ = split_frame(X)
        grid = DEFAULT_GRID if self.grid is None else self.grid
        names = columns or [str(i) for i in range(values.shape[1])]
        models = []
        for j, name in enumerate(names):
            lam, rmse = grid_search_lambda(values[:, j], self.window, grid)
            models.append(DenoiseModel(name, lam, rmse, True))
        self.models_ = gate_noisy(models) if self.gate else models
        self.n_features_in_ = values.shape[1]
        if columns is not None:
            self.feature_names_in_ = np.asarray(columns, dtype=object)
        return self

    def transform(self, X):
        check_is_fitted(self, "models_")
        values, columns, index = split_frame(X)
        check_columns(self, columns, values.shape[1])
        out = values.copy()
        for j, model in enumerate(self.models_):
            if model.is_noisy:
                out[:, j] = denoise_series(values[:, j], model, self.window)
        return rebuild(out, columns, index)

    def report(self) -> list[dict]:
        check_is_fitted(self, "models_")
        return [{"keyword": m.keyword, "lambda_star": m.lambda_star,
                 "train_rmse": m.train_rmse, "is_noisy": m.is_noisy} for m in self.models_]


class MovingAverageDenoiser(TransformerMixin, BaseEstimator):
    """Trailing moving-average counterpart of :class:`SplineDenoiser`.

    The averaging length is chosen per series from ``lengths`` by the same
    rolling one-step RMSE (the prediction is the trailing mean).
    """

    def __init__(self, lengths=tuple(range(2, 21)), gate=True):
        self.lengths = lengths
        self.gate = gate

    def fit(self, X, y=None):
        values, columns, _ = split_frame(X)
        names = columns or [str(i) for i in range(values.shape[1])]
        models = []
        for j, name in enumerate(names):
            x = values[:, j]
            scores = [np.sqrt(np.mean((x[k:] - sliding_window_view(x[:-1], k).mean(1)) ** 2))
                      for k in self.lengths]
            best = int(np.argmin(scores))
            models.append(DenoiseModel(name, float(self.lengths[best]), float(scores[best]), True))
        self.models_ = gate_noisy(models) if self.gate else models
        self.n_features_in_ = values.shape[1]
        if columns is not None:
            self.feature_names_in_ = np.asarray(columns, dtype=object)
        return self

    def transform(self, X):
        check_is_fitted(self, "models_")
        values, columns, index = split_frame(X)
        check_columns(self, columns, values.shape[1])
        out = values.copy()
        for j, model in enumerate(self.models_):
            if model.is_noisy:
                out[:, j] = moving_average_series(values[:, j], int(model.lambda_star))
        return rebuild(out, columns, index)
