"""Forecast and preprocessing evaluation statistics."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from ._base import check_series
from .ingest import ReplicateStore

__all__ = [
    "mse",
    "relative_efficiency",
    "wilcoxon_signed_rank",
    "snr_log_ratio",
    "fluctuation_statistic",
    "fluctuation_critical_value",
    "FLUCTUATION_CRITICAL_VALUES",
    "season_of",
    "summarize_report",
]

SNR_EPS = 1e-9

# Two-sided 5% critical values of the fluctuation test, indexed by the ratio
# of the rolling window to the evaluation sample. Source: Giacomini, R. and
# Rossi, B. (2010), "Forecast comparisons in unstable environments",
# Journal of Applied Econometrics 25(4), Table 1.
FLUCTUATION_CRITICAL_VALUES = {
    0.1: 3.393, 0.2: 3.179, 0.3: 3.012, 0.4: 2.890, 0.5: 2.779,
    0.6: 2.634, 0.7: 2.560, 0.8: 2.433, 0.9: 2.248,
}


def mse(y_true, y_hat) -> float:
    y_true = check_series(y_true, "y_true")
    y_hat = check_series(y_hat, "y_hat")
    if y_true.shape != y_hat.shape:
        raise ValueError("y_true and y_hat lengths differ")
    return float(np.mean((y_true - y_hat) ** 2))


def relative_efficiency(mse_model: float, mse_baseline: float) -> float:
    """MSE ratio against the no-exogenous baseline; below 1 means the exog helped."""
    if not mse_baseline > 0:
        raise ValueError("baseline MSE must be positive")
    return float(mse_model) / float(mse_baseline)


def _exact_cdf(doubled_ranks: np.ndarray) -> np.ndarray:
    """Null counts of 2*W+ over all sign assignments, by dynamic programming."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(d, alternative: str = "less", method: str = "auto") -> float:
    """P-value of the Wilcoxon signed-rank test on paired differences.

    Zero differences are dropped and tied magnitudes share mid-ranks.

    Parameters
    ----------
    d : array-like
        Paired differences (e.g. model MSE minus baseline MSE).
    alternative : {"less", "greater", "two-sided"}
        ``"less"`` tests for a negative median.
    method : {"auto", "exact", "approx"}
        ``auto`` enumerates the null exactly for n <= 25 and otherwise uses
        the normal approximation with continuity and tie corrections.
    """
    d = np.asarray(d, dtype=float)
    if alternative not in ("less", "greater", "two-sided"):
        raise ValueError(f"unknown alternative {alternative!r}")
    if method not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown method {method!r}")
    d = d[d != 0]
    if d.size == 0:
        raise ValueError("all differences are zero")
    if d.size < 5:
        raise ValueError("signed-rank test needs at least 5 nonzero differences")
    n = d.size
    ranks = rankdata(np.abs(d))
    w = float(ranks[d > 0].sum())
    if method == "exact" or (method == "auto" and n <= 25):
        doubled = np.rint(2 * ranks).astype(int)
        counts = _exact_cdf(doubled)
        total = counts.sum()
        k = int(round(2 * w))
        p_le = counts[: k + 1].sum() / total
        p_ge = counts[k:].sum() / total
    else:
        _, tie_counts = np.unique(ranks, return_counts=True)
        mean = n * (n + 1) / 4
        var = n * (n + 1) * (2 * n + 1) / 24 - np.sum(tie_counts ** 3 - tie_counts) / 48
        sd = math.sqrt(var)
        p_le = float(norm.cdf((w + 0.5 - mean) / sd))
        p_ge = float(norm.sf((w - 0.5 - mean) / sd))
    if alternative == "less":
        return float(p_le)
    if alternative == "greater":
        return float(p_ge)
    return float(min(1.0, 2 * min(p_le, p_ge)))


def _as_cube(store) -> np.ndarray:
    if isinstance(store, ReplicateStore):
        return store.cube().astype(float)
    return np.asarray(store, dtype=float)


def snr_log_ratio(raw_store, denoised_store, eps: float = SNR_EPS) -> np.ndarray:
    """Per-week log ratio of denoised to raw mean/sd across replicate downloads.

    Either store may be a :class:`ReplicateStore` or an array whose first axis
    is the replicate. Weeks with a standard deviation below ``eps`` or a
    non-positive mean on either side are NaN.
    """
    raw = _as_cube(raw_store)
    den = _as_cube(denoised_store)
    if raw.shape != den.shape:
        raise ValueError("stores must share replicates, series and weeks")
    if raw.shape[0] < 3:
        raise ValueError("need at least 3 replicate downloads")
    mu_r, sd_r = raw.mean(axis=0), raw.std(axis=0, ddof=1)
    mu_d, sd_d = den.mean(axis=0), den.std(axis=0, ddof=1)
    ok = (sd_r >= eps) & (sd_d >= eps) & (mu_r > 0) & (mu_d > 0)
    out = np.full(mu_r.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (mu_d / sd_d) / (mu_r / sd_r)
    out[ok] = np.log(ratio[ok])
    return out


def _bartlett_lrv(d: np.ndarray, lags: int) -> float:
    """Long-run variance of ``d`` about zero (the null value), Bartlett weights."""
    m = d.size
    v = float(d @ d) / m
    for k in range(1, lags + 1):
        v += 2 * (1 - k / (lags + 1)) * float(d[k:] @ d[:-k]) / m
    return max(v, 0.0)


def fluctuation_statistic(loss_a, loss_b, window: int = 24) -> np.ndarray:
    """Rolling standardised mean loss differential.

    At every window position the statistic is ``sqrt(m) * mean(d) / s`` where
    ``d = loss_a - loss_b`` over the window and ``s^2`` is a Bartlett-kernel
    long-run variance with truncation ``floor(m^(1/3))``, computed about zero
    so that it stays defined for a constant differential. Position ``i``
    covers ``d[i : i + window]``.
    """
    a = check_series(loss_a, "loss_a")
    b = check_series(loss_b, "loss_b")
    if a.shape != b.shape:
        raise ValueError("loss series lengths differ")
    if window > a.size:
        raise ValueError("window longer than the loss series")
    if window < 2:
        raise ValueError("window must be >= 2")
    d = a - b
    lags = int(math.floor(window ** (1 / 3)))
    path = np.empty(a.size - window + 1)
    for i in range(path.size):
        seg = d[i:i + window]
        lrv = _bartlett_lrv(seg, lags)
        path[i] = 0.0 if lrv == 0 else math.sqrt(window) * seg.mean() / math.sqrt(lrv)
    return path


def fluctuation_critical_value(window: int, n: int,
                               table: dict[float, float] | None = None) -> float:
    """Critical value for window share ``window / n``, linearly interpolated in the table."""
    table = table or FLUCTUATION_CRITICAL_VALUES
    mus = np.array(sorted(table))
    vals = np.array([table[m] for m in mus])
    return float(np.interp(window / n, mus, vals))


def season_of(date) -> str:
    """``peak`` for December-January weeks, ``off`` otherwise."""
    return "peak" if date.month in (12, 1) else "off"


def _quantiles(x: Sequence[float]) -> tuple[float, float, float]:
    q1, med, q3 = np.quantile(np.asarray(x, dtype=float), [0.25, 0.5, 0.75])
    return float(med), float(q1), float(q3)


def summarize_report(rows: Iterable[dict], baseline: str = "none", raw: str = "raw",
                     topics: str = "topics", alpha: float = 0.05) -> dict:
    """Table-shaped summary over locations.

    ``rows`` carry ``location, horizon, model, variant, mse``. For every
    (horizon, model, variant) the RE median and quartiles across locations
    are reported, with markers ``*`` (beats the no-exog baseline), ``†``
    (beats ``raw``) and ``‡`` (beats ``topics``) from one-sided signed-rank
    tests on paired location MSEs at level ``alpha``.
    """
    rows = list(rows)
    cell: dict[tuple, dict[str, float]] = {}
    for r in rows:
        key = (int(r["horizon"]), str(r["model"]), str(r["variant"]))
        cell.setdefault(key, {})[str(r["location"])] = float(r["mse"])

    def test(a: dict, b: dict) -> float | None:
        locs = sorted(set(a) & set(b))
        diffs = [a[l] - b[l] for l in locs]
        try:
            return wilcoxon_signed_rank(diffs, "less")
        except ValueError:
            return None

    out = []
    for (h, model, variant), by_loc in sorted(cell.items()):
        if variant == baseline:
            continue
        base = cell.get((h, model, baseline), {})
        res = [by_loc[l] / base[l] for l in sorted(by_loc) if base.get(l, 0) > 0]
        if not res:
            continue
        med, q1, q3 = _quantiles(res)
        markers, pvals = "", {}
        for mark, ref in (("*", baseline), ("†", raw), ("‡", topics)):
            if ref == variant or (h, model, ref) not in cell:
                continue
            p = test(by_loc, cell[(h, model, ref)])
            pvals[ref] = p
            if p is not None and p < alpha:
                markers += mark
        out.append({"horizon": h, "model": model, "variant": variant, "n_locations": len(res),
                    "median_re": med, "q1_re": q1, "q3_re": q3, "markers": markers,
                    "p_values": pvals})
    return {"alpha": alpha, "baseline": baseline, "cells": out}
