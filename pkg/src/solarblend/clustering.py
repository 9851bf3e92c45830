"""Partitional and hierarchical clustering of daily irradiance profiles.

Four algorithms over an (n, d) matrix with plain Euclidean distances:
centroid iteration (k-means), medoid iteration (k-medoids), bottom-up
average-linkage merging, and top-down divisive splitting. All ties are
broken toward the lowest index so results are reproducible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


class KOutOfRange(Exception):
    pass


@dataclass
class Partition:
    k: int
    labels: np.ndarray  # (n,) int cluster index in [0, k)
    method: str
    objective: float | None = None
    centroids: np.ndarray | None = None
    medoids: np.ndarray | None = None  # object indices, k-medoids only
    objective_trace: list[float] | None = None  # per-iteration objective

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


@dataclass
class Dendrogram:
    # AHC: (id_a, id_b, height) per merge, scipy-style ids (originals 0..n-1,
    # merged clusters n, n+1, ...). DHC: (cluster_label, new_label, height)
    # per split, height = mean cross-subcluster distance.
    steps: list[tuple[int, int, float]] = field(default_factory=list)


def pairwise_distances(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    dm = np.sqrt(d2)
    np.fill_diagonal(dm, 0.0)
    return dm


def _check_k(k: int, n: int):
    if not (1 <= k <= n):
        raise KOutOfRange(f"K={k} outside [1, {n}]")


def _farthest_first_indices(X: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Seeded start, then repeatedly take the point farthest from the chosen set."""
    n = len(X)
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    mindist = np.linalg.norm(X - X[chosen[0]], axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(mindist))  # argmax takes the lowest index on ties
        chosen.append(nxt)
        mindist = np.minimum(mindist, np.linalg.norm(X - X[nxt], axis=1))
    return np.array(chosen)


def _eq_objective(X, labels, centers) -> float:
    # Sum over objects of the Euclidean distance to their cluster center.
    return float(np.linalg.norm(X - centers[labels], axis=1).sum())


def kmeans(X, k, seed=0, max_iter=300, tol=1e-6) -> Partition:
    X = np.asarray(X, dtype=float)
    n = len(X)
    _check_k(k, n)
    centroids = X[_farthest_first_indices(X, k, seed)].copy()
    prev_obj = np.inf
    labels = np.zeros(n, dtype=int)
    trace: list[float] = []
    for _ in range(max_iter):
        dist = np.linalg.norm(X[:, None, :] - centroids[None, :, :], axis=2)
        labels = np.argmin(dist, axis=1)
        # Repair empty clusters with the point farthest from its centroid.
        repaired: set[int] = set()
        for kk in range(k):
            if not np.any(labels == kk):
                own = dist[np.arange(n), labels].copy()
                if repaired:
                    own[list(repaired)] = -np.inf
                far = int(np.argmax(own))
                labels[far] = kk
                repaired.add(far)
        obj = _eq_objective(X, labels, centroids)
        trace.append(obj)
        for kk in range(k):
            centroids[kk] = X[labels == kk].mean(axis=0)
        if prev_obj - obj <= tol * max(abs(prev_obj), 1.0):
            break
        prev_obj = obj
    obj = _eq_objective(X, labels, centroids)
    return Partition(k=k, labels=labels, method="kmeans",
                     objective=obj, centroids=centroids,
                     objective_trace=trace)


# Below this many candidate medoid sets the search is exact; above it,
# alternating assignment plus a best-improvement swap phase is used.
EXHAUSTIVE_MEDOID_LIMIT = 5000


def _kmedoids_exhaustive(dm, k) -> Partition:
    n = len(dm)
    best_obj = np.inf
    best_meds = None
    for combo in itertools.combinations(range(n), k):
        meds = np.asarray(combo)
        obj = float(dm[:, meds].min(axis=1).sum())
        if obj < best_obj - 1e-12:
            best_obj = obj
            best_meds = meds
    labels = np.argmin(dm[:, best_meds], axis=1)
    for kk in range(k):
        if not np.any(labels == kk):
            labels[best_meds[kk]] = kk
    obj = float(dm[np.arange(n), best_meds[labels]].sum())
    return Partition(k=k, labels=labels, method="kmedoids",
                     objective=obj, medoids=best_meds)


def kmedoids(X, k, seed=0, max_iter=300) -> Partition:
    X = np.asarray(X, dtype=float)
    n = len(X)
    _check_k(k, n)
    dm = pairwise_distances(X)
    if math.comb(n, k) <= EXHAUSTIVE_MEDOID_LIMIT:
        return _kmedoids_exhaustive(dm, k)
    medoids = _farthest_first_indices(X, k, seed)
    for _ in range(max_iter):
        labels = np.argmin(dm[:, medoids], axis=1)
        for kk in range(k):
            if not np.any(labels == kk):
                far = int(np.argmax(dm[np.arange(n), medoids[labels]]))
                labels[far] = kk
        new_medoids = medoids.copy()
        for kk in range(k):
            members = np.flatnonzero(labels == kk)
            within = dm[np.ix_(members, members)].sum(axis=1)
            new_medoids[kk] = members[int(np.argmin(within))]
        if np.array_equal(new_medoids, medoids):
            break
        medoids = new_medoids
    # PAM-style swap phase: keep applying the best improving
    # (medoid, non-medoid) swap until none improves the objective.
    def _objective(meds):
        return float(dm[:, meds].min(axis=1).sum())

    current = _objective(medoids)
    improved = True
    while improved:
        improved = False
        best = (current, None)
        in_set = set(medoids.tolist())
        for kk in range(k):
            for cand in range(n):
                if cand in in_set:
                    continue
                trial = medoids.copy()
                trial[kk] = cand
                val = _objective(trial)
                if val < best[0] - 1e-12:
                    best = (val, trial)
        if best[1] is not None:
            medoids = best[1]
            current = best[0]
            improved = True
    labels = np.argmin(dm[:, medoids], axis=1)
    for kk in range(k):
        if not np.any(labels == kk):
            labels[medoids[kk]] = kk
    obj = float(dm[np.arange(n), medoids[labels]].sum())
    return Partition(k=k, labels=labels, method="kmedoids",
                     objective=obj, medoids=medoids)


# --- agglomerative (average linkage) ---------------------------------------

def ahc_dendrogram(X) -> Dendrogram:
    """Full bottom-up merge sequence under average linkage."""
    X = np.asarray(X, dtype=float)
    n = len(X)
    link = pairwise_distances(X)
    np.fill_diagonal(link, np.inf)
    sizes = {i: 1 for i in range(n)}
    ids = {i: i for i in range(n)}  # row index -> dendrogram id
    active = list(range(n))
    steps = []
    next_id = n
    for _ in range(n - 1):
        sub = link[np.ix_(active, active)]
        flat = int(np.argmin(sub))
        ai, aj = divmod(flat, len(active))
        if ai > aj:
            ai, aj = aj, ai
        i, j = active[ai], active[aj]
        h = float(link[i, j])
        steps.append((min(ids[i], ids[j]), max(ids[i], ids[j]), h))
        si, sj = sizes[i], sizes[j]
        # Lance-Williams update for average linkage, written into row i.
        for m in active:
            if m in (i, j):
                continue
            link[i, m] = link[m, i] = (si * link[i, m] + sj * link[j, m]) / (si + sj)
        sizes[i] = si + sj
        ids[i] = next_id
        next_id += 1
        active.remove(j)
        link[j, :] = np.inf
        link[:, j] = np.inf
    return Dendrogram(steps=steps)


def ahc_cut(dendro: Dendrogram, n: int, k: int) -> np.ndarray:
    """Labels after applying the first n - k merges."""
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step_i, (a, b, _) in enumerate(dendro.steps[: n - k]):
        new = n + step_i
        parent[find(a)] = new
        parent[find(b)] = new
    roots = {}
    labels = np.empty(n, dtype=int)
    for i in range(n):
        r = find(i)
        if r not in roots:
            roots[r] = len(roots)
        labels[i] = roots[r]
    return labels


def ahc_average(X, k) -> tuple[Partition, Dendrogram]:
    X = np.asarray(X, dtype=float)
    n = len(X)
    _check_k(k, n)
    dendro = ahc_dendrogram(X)
    labels = ahc_cut(dendro, n, k)
    return Partition(k=k, labels=labels, method="ahc"), dendro


# --- divisive --------------------------------------------------------------

EXHAUSTIVE_SPLIT_LIMIT = 15


def _split_objective(dm_sub, mask) -> float:
    """Mean cross-subcluster distance for a boolean split of a cluster."""
    a = np.flatnonzero(mask)
    b = np.flatnonzero(~mask)
    return float(dm_sub[np.ix_(a, b)].mean())


def best_bipartition_exhaustive(dm_sub: np.ndarray) -> np.ndarray:
    """Boolean mask maximizing the mean cross distance over all bipartitions."""
    m = len(dm_sub)
    n_masks = 1 << (m - 1)  # fix member 0 on side A to halve the search
    bits = ((np.arange(n_masks)[:, None] >> np.arange(m - 1)[None, :]) & 1)
    M = np.empty((n_masks, m))
    M[:, 0] = 1.0
    M[:, 1:] = bits
    sizes_a = M.sum(axis=1)
    valid = sizes_a < m
    # cross sum = 1^T D 1 restricted to (A x B) = rowsums(A) - within(A), doubled halves out
    row_tot = dm_sub.sum(axis=1)
    sum_a_rows = M @ row_tot
    within_a = np.einsum("ij,ij->i", M @ dm_sub, M)
    cross = sum_a_rows - within_a  # = sum over a in A, b in B of d(a,b)
    denom = sizes_a * (m - sizes_a)
    with np.errstate(invalid="ignore", divide="ignore"):
        score = np.where(valid, cross / np.where(denom > 0, denom, 1), -np.inf)
    best = int(np.argmax(score))
    return M[best].astype(bool)


def best_bipartition_splinter(dm_sub: np.ndarray) -> np.ndarray:
    """Splinter-growing heuristic plus greedy single-move refinement."""
    m = len(dm_sub)
    mask = np.zeros(m, dtype=bool)
    mask[int(np.argmax(dm_sub.mean(axis=1)))] = True
    improved = True
    while improved:
        improved = False
        cur = _split_objective(dm_sub, mask)
        best_move, best_score = None, cur
        for i in range(m):
            trial = mask.copy()
            trial[i] = ~trial[i]
            if trial.all() or not trial.any():
                continue
            s = _split_objective(dm_sub, trial)
            if s > best_score + 1e-12:
                best_score, best_move = s, i
        if best_move is not None:
            mask[best_move] = ~mask[best_move]
            improved = True
    return mask


def dhc_levels(X, k_max) -> tuple[list[np.ndarray], Dendrogram]:
    """Top-down splits producing label arrays for K = 1 .. k_max.

    The cluster with the largest diameter is split next; each split
    maximizes the mean cross-subcluster distance (exhaustively up to
    ``EXHAUSTIVE_SPLIT_LIMIT`` members, splinter heuristic above).
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    _check_k(k_max, n)
    dm = pairwise_distances(X)
    labels = np.zeros(n, dtype=int)
    levels = [labels.copy()]
    dendro = Dendrogram()
    for new_label in range(1, k_max):
        # pick the splittable cluster with the largest diameter
        diam_best, target = -1.0, -1
        for kk in range(new_label):
            members = np.flatnonzero(labels == kk)
            if len(members) < 2:
                continue
            diam = dm[np.ix_(members, members)].max()
            if diam > diam_best:
                diam_best, target = diam, kk
        if target < 0:
            break
        members = np.flatnonzero(labels == target)
        sub = dm[np.ix_(members, members)]
        if len(members) <= EXHAUSTIVE_SPLIT_LIMIT:
            mask = best_bipartition_exhaustive(sub)
        else:
            mask = best_bipartition_splinter(sub)
        labels[members[mask]] = new_label
        dendro.steps.append((target, new_label, _split_objective(sub, mask)))
        levels.append(labels.copy())
    return levels, dendro


def dhc(X, k) -> tuple[Partition, Dendrogram]:
    levels, dendro = dhc_levels(X, k)
    if len(levels) < k:
        raise KOutOfRange(f"could not reach K={k} clusters")
    labels = levels[k - 1]
    return Partition(k=k, labels=labels, method="dhc"), dendro
