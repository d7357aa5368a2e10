"""Ward clustering of sparse keywords on correlation distance.

Clusters are turned into Boolean ``+`` queries whose combined volume is
denser than any member's.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .ingest import ReplicateStore, SeriesPanel, zero_fraction
from .triage import as_frame

__all__ = [
    "Dendrogram",
    "ClusterPlan",
    "correlation_distance_matrix",
    "ward_cluster",
    "cut_tree",
    "wcss",
    "wcss_curve",
    "elbow_select",
    "default_k_max",
    "cluster_keywords",
    "split_oversized",
    "combine_series",
    "combined_frame",
    "CorrelationWardClusterer",
    "write_clusters",
]

COMBINE_MODES = ("ingested-combined", "simulated-union", "summed")


@dataclass(frozen=True)
class Dendrogram:
    """Agglomeration history.

    ``merges[s] = (a, b, height, size)``; leaves are ids ``0..n-1`` and the
    cluster formed at step ``s`` gets id ``n + s``.
    """

    merges: tuple[tuple[int, int, float, int], ...]
    leaves: tuple[str, ...]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def heights(self) -> np.ndarray:
        return np.array([m[2] for m in self.merges])

    def to_linkage(self) -> np.ndarray:
        """scipy-style linkage matrix."""
        return np.array([[a, b, h, s] for a, b, h, s in self.merges], dtype=float).reshape(-1, 4)


@dataclass(frozen=True)
class ClusterPlan:
    clusters: list[list[str]]
    query_strings: list[str]
    k_selected: int
    wcss_curve: list[float]
    split_rounds: int = 0
    flags: dict = field(default_factory=dict)


def correlation_distance_matrix(panel, train_len: int | None = None) -> pd.DataFrame:
    """``1 - pearson`` between every pair of series, on the first ``train_len`` weeks."""
    frame = as_frame(panel)
    if train_len is not None:
        frame = frame.iloc[:train_len]
    if frame.shape[1] < 2:
        raise ValueError("need at least two series")
    values = frame.to_numpy()
    sd = values.std(axis=0)
    flat = [str(c) for c, s in zip(frame.columns, sd) if s == 0]
    if flat:
        raise ValueError(f"zero-variance series: {flat[0]!r}")
    D = 1.0 - np.corrcoef(values.T)
    D = np.clip((D + D.T) / 2, 0.0, 2.0)
    np.fill_diagonal(D, 0.0)
    return pd.DataFrame(D, index=frame.columns, columns=frame.columns)


def ward_cluster(D, labels: Sequence[str] | None = None) -> Dendrogram:
    """Agglomerative Ward clustering through the Lance-Williams recurrence.

    Distances are treated as Euclidean; the merged-cluster distance is
    ``sqrt(((n_i+n_k) d_ik^2 + (n_j+n_k) d_jk^2 - n_k d_ij^2) / (n_i+n_j+n_k))``.
    Ties go to the smallest (i, j) pair of current slot indices.
    """
    if isinstance(D, pd.DataFrame):
        labels = labels or [str(c) for c in D.columns]
        D = D.to_numpy()
    D = np.array(D, dtype=float)
    n = D.shape[0]
    if D.ndim != 2 or D.shape != (n, n):
        raise ValueError("distance matrix must be square")
    if not np.allclose(D, D.T, rtol=0, atol=1e-12):
        raise ValueError("distance matrix is not symmetric")
    if np.any(D < 0):
        raise ValueError("distance matrix has negative entries")
    labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(n))
    if n == 1:
        return Dendrogram((), labels)

    d2 = D ** 2
    np.fill_diagonal(d2, np.inf)
    size = np.ones(n)
    ids = list(range(n))
    active = np.ones(n, dtype=bool)
    merges = []
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    for step in range(n - 1):
        masked = np.where(upper & active[:, None] & active[None, :], d2, np.inf)
        flat = int(np.argmin(masked))
        i, j = divmod(flat, n)
        dij2 = d2[i, j]
        ni, nj = size[i], size[j]
        others = active.copy()
        others[[i, j]] = False
        nk = size[others]
        new = ((ni + nk) * d2[i, others] + (nj + nk) * d2[j, others] - nk * dij2) / (ni + nj + nk)
        new = np.maximum(new, 0.0)
        d2[i, others] = new
        d2[others, i] = new
        active[j] = False
        d2[j, :] = np.inf
        d2[:, j] = np.inf
        a, b = sorted((ids[i], ids[j]))
        merges.append((a, b, math.sqrt(max(dij2, 0.0)), int(ni + nj)))
        size[i] = ni + nj
        ids[i] = n + step
    heights = [m[2] for m in merges]
    assert all(h2 >= h1 - 1e-9 for h1, h2 in zip(heights, heights[1:])), "Ward heights decreased"
    return Dendrogram(tuple(merges), labels)


def cut_tree(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Labels ``0..k-1`` (numbered by first leaf) after undoing the last ``k-1`` merges."""
    n = dendrogram.n_leaves
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for s, (a, b, _, _) in enumerate(dendrogram.merges[: n - k]):
        parent[find(a)] = n + s
        parent[find(b)] = n + s
    roots, labels = {}, np.empty(n, dtype=int)
    for leaf in range(n):
        labels[leaf] = roots.setdefault(find(leaf), len(roots))
    return labels


def wcss(panel, assignment) -> float:
    """Sum of squared distances of each series to its cluster's mean series."""
    X = as_frame(panel).to_numpy().T if not isinstance(panel, np.ndarray) else np.asarray(panel, float)
    labels = np.asarray(assignment)
    if labels.size == 0:
        raise ValueError("empty cluster assignment")
    if labels.size != X.shape[0]:
        raise ValueError("every series needs a label")
    total = 0.0
    for lab in np.unique(labels):
        members = X[labels == lab]
        total += float(np.sum((members - members.mean(axis=0)) ** 2))
    return total


def wcss_curve(X: np.ndarray, dendrogram: Dendrogram, k_max: int) -> list[float]:
    return [wcss(X, cut_tree(dendrogram, k)) for k in range(1, k_max + 1)]


def elbow_select(curve: Sequence[float]) -> int:
    """Cluster count (1-based) at the largest discrete second difference.

    Only interior points compete; ties go to the smallest k.
    """
    c = np.asarray(curve, dtype=float)
    if c.size < 3:
        raise ValueError("elbow needs at least three WCSS values")
    scale = max(1.0, float(np.abs(c).max()))
    if np.any(np.diff(c) > 1e-9 * scale):
        raise ValueError("WCSS curve must be non-increasing")
    second = c[:-2] - 2 * c[1:-1] + c[2:]
    best = second.max()
    return int(np.flatnonzero(second >= best - 1e-12 * scale)[0]) + 2


def default_k_max(n: int) -> int:
    return min(30, math.ceil(n / 3))


def _cluster_once(frame: pd.DataFrame, k_max: int | None,
                  train_len: int | None) -> tuple[list[list[str]], int, list[float]]:
    names = [str(c) for c in frame.columns]
    if len(names) == 1:
        return [names], 1, [0.0]
    D = correlation_distance_matrix(frame, train_len)
    dendro = ward_cluster(D)
    train = frame if train_len is None else frame.iloc[:train_len]
    X = train.to_numpy().T
    km = min(k_max if k_max is not None else default_k_max(len(names)), len(names))
    curve = wcss_curve(X, dendro, km)
    k = elbow_select(curve) if len(curve) >= 3 else 1
    labels = cut_tree(dendro, k)
    clusters = [[names[i] for i in np.flatnonzero(labels == lab)] for lab in range(k)]
    return clusters, k, curve


def cluster_keywords(panel, k_max: int | None = None, train_len: int | None = None) -> ClusterPlan:
    """Ward clustering with the elbow-selected cluster count.

    ``k_max`` defaults to ``min(30, ceil(n/3))``; with fewer than three
    candidate counts everything forms a single cluster.
    """
    frame = as_frame(panel)
    if frame.shape[1] == 0:
        return ClusterPlan([], [], 0, [])
    clusters, k, curve = _cluster_once(frame, k_max, train_len)
    return ClusterPlan(clusters, ["+".join(c) for c in clusters], k, curve)


def split_oversized(plan: ClusterPlan, panel, dominance: float = 0.40,
                    k_max: int | None = None, train_len: int | None = None) -> ClusterPlan:
    """Re-cluster, once, every cluster holding more than ``dominance`` of all keywords."""
    frame = as_frame(panel)
    total = sum(len(c) for c in plan.clusters)
    if total == 0:
        return plan
    out, changed = [], False
    for c in plan.clusters:
        if len(c) / total > dominance and len(c) > 1:
            sub, k, _ = _cluster_once(frame[c], k_max, train_len)
            changed = changed or k > 1
            out.extend(sub)
        else:
            out.append(c)
    if not changed:
        return plan
    return replace(plan, clusters=out, query_strings=["+".join(c) for c in out],
                   k_selected=len(out), split_rounds=plan.split_rounds + 1)


def combine_series(source, cluster: Sequence[str], mode: str = "summed", world=None,
                   download_date=None) -> np.ndarray:
    """Volume of a cluster under one of three combination modes.

    ``ingested-combined``
        Look up the downloaded ``+``-query column in ``source``.
    ``simulated-union``
        Sample the latent union from ``world`` on ``download_date``
        (per replicate download date when ``source`` is a store).
    ``summed``
        Element-wise sum of the members' 0-100 series.

    A :class:`ReplicateStore` source yields one row per replicate.
    """
    cluster = list(cluster)
    if not cluster:
        raise ValueError("empty cluster")
    if mode not in COMBINE_MODES:
        raise ValueError(f"unknown combine mode {mode!r}")
    if isinstance(source, ReplicateStore):
        return np.stack([combine_series(p, cluster, mode, world, p.download_date)
                         for p in source.panels])
    query = "+".join(cluster)
    if mode == "simulated-union":
        from .synthgen import sample_series, union_volume

        if world is None or download_date is None:
            raise ValueError("simulated-union needs a world and a download date")
        return sample_series(world, union_volume(world, cluster), query, download_date)
    frame = as_frame(source)
    if mode == "summed":
        return frame[cluster].to_numpy().sum(axis=1)
    columns = {str(c) for c in frame.columns}
    for candidate in (query, " + ".join(cluster)):
        if candidate in columns:
            return frame[candidate].to_numpy()
    raise KeyError(f"no combined download on file for {query!r}")


def combined_frame(plan: ClusterPlan, source, mode: str, world=None, download_date=None,
                   sparse_limit: float = 0.30) -> tuple[pd.DataFrame, dict]:
    """One column per cluster query; also returns the combined zero fractions."""
    frame = as_frame(source if not isinstance(source, ReplicateStore) else source.panels[0])
    cols, zf = {}, {}
    for c, q in zip(plan.clusters, plan.query_strings):
        series = combine_series(source, c, mode, world, download_date)
        cols[q] = series
        zf[q] = zero_fraction(series)
    out = pd.DataFrame(cols, index=frame.index).astype(float)
    plan.flags.update({q: "sparse" for q, z in zf.items() if z > sparse_limit})
    return out, zf


def write_clusters(plan: ClusterPlan, clusters_path, queries_path) -> None:
    with open(clusters_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster_id", "keyword"])
        for i, c in enumerate(plan.clusters):
            for k in c:
                w.writerow([i, k])
    with open(queries_path, "w") as fh:
        for q in plan.query_strings:
            fh.write(q + "\n")


class CorrelationWardClusterer(BaseEstimator):
    """Elbow-selected Ward clustering on ``1 - correlation``, with one split round.

    Parameters
    ----------
    k_max : int, optional
        Largest cluster count on the WCSS curve; ``min(30, ceil(n/3))`` when None.
    dominance : float, default=0.40
        Clusters holding more than this share of keywords are split once.
    """

    def __init__(self, k_max=None, dominance=0.40):
        self.k_max = k_max
        self.dominance = dominance

    def fit(self, X, y=None):
        frame = as_frame(X)
        plan = cluster_keywords(frame, self.k_max)
        self.plan_ = split_oversized(plan, frame, self.dominance, self.k_max)
        self.labels_ = np.empty(frame.shape[1], dtype=int)
        pos = {str(c): i for i, c in enumerate(frame.columns)}
        for lab, members in enumerate(self.plan_.clusters):
            for m in members:
                self.labels_[pos[m]] = lab
        self.n_features_in_ = frame.shape[1]
        self.feature_names_in_ = np.asarray(list(pos), dtype=object)
        return self

    def transform(self, X):
        """Summed member volumes per cluster (the non-default comparison mode)."""
        check_is_fitted(self, "plan_")
        frame = as_frame(X)
        return pd.DataFrame({q: frame[c].sum(axis=1) for c, q in
                             zip(self.plan_.clusters, self.plan_.query_strings)}, index=frame.index)
