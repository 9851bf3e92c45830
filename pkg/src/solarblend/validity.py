"""Internal cluster validity indices: connectivity, silhouette width, Dunn.

Connectivity penalizes objects whose nearest neighbors fall outside their
cluster (lower is better). Silhouette averages per-object cohesion vs
separation with cluster-size denominators that include the object itself.
Dunn is the minimum inter-cluster pair distance over the maximum cluster
diameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import Partition


class NbOutOfRange(Exception):
    pass


class SingleCluster(Exception):
    pass


class ZeroDiameter(Exception):
    pass


@dataclass(frozen=True)
class ValidityScores:
    conn: float
    silh: float
    dunn: float


def _neighbor_order(dm: np.ndarray) -> np.ndarray:
    """Row-wise neighbor ranking by distance; ties go to the lower index."""
    n = len(dm)
    order = np.argsort(dm, axis=1, kind="stable")
    # drop self (distance 0 at the front; with duplicates, self may not be
    # first under stable sort, so remove by identity)
    out = np.empty((n, n - 1), dtype=int)
    for i in range(n):
        row = order[i]
        out[i] = row[row != i]
    return out


def connectivity(part: Partition, dm: np.ndarray, n_b: int = 10) -> float:
    n = len(dm)
    if not (1 <= n_b < n):
        raise NbOutOfRange(f"n_b={n_b} outside [1, {n - 1}]")
    nbrs = _neighbor_order(dm)[:, :n_b]
    labels = part.labels
    penalty = (labels[nbrs] != labels[:, None]) / np.arange(1, n_b + 1)[None, :]
    return float(penalty.sum())


def silhouette(part: Partition, dm: np.ndarray) -> float:
    if part.k < 2:
        raise SingleCluster("silhouette needs at least two clusters")
    labels = part.labels
    n = len(dm)
    sizes = np.bincount(labels, minlength=part.k)
    # mean distance from each object to every cluster, denominators = cluster size
    cluster_sum = np.zeros((n, part.k))
    for kk in range(part.k):
        cluster_sum[:, kk] = dm[:, labels == kk].sum(axis=1)
    mean_to = cluster_sum / sizes[None, :]
    d_a = mean_to[np.arange(n), labels]
    other = mean_to.copy()
    other[np.arange(n), labels] = np.inf
    d_b = other.min(axis=1)
    denom = np.maximum(d_a, d_b)
    s = np.where(denom > 0, (d_b - d_a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def dunn(part: Partition, dm: np.ndarray) -> float:
    if part.k < 2:
        raise SingleCluster("dunn needs at least two clusters")
    labels = part.labels
    same = labels[:, None] == labels[None, :]
    off_diag = ~np.eye(len(dm), dtype=bool)
    intra = dm[same & off_diag]
    if intra.size == 0 or intra.max() == 0:
        raise ZeroDiameter("all clusters are singletons or coincident")
    inter = dm[~same]
    return float(inter.min() / intra.max())


def score_partition(part: Partition, dm: np.ndarray, n_b: int = 10) -> ValidityScores:
    return ValidityScores(
        conn=connectivity(part, dm, n_b=n_b),
        silh=silhouette(part, dm),
        dunn=dunn(part, dm),
    )
