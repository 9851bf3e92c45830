"""Optimal cluster-count selection by cross-validated voting.

Every clustering method is run for K = 2..k_max and scored with the three
validity indices. Per method, the indices then vote in rounds: in round v
each index nominates its current best K, that K receives (k_max - v)
votes, and the nominated entry leaves that index's pool. The K with the
most votes wins; the best method at that K is picked by rank sum over the
indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import clustering, validity
from .clustering import Partition

METHODS = ("kmeans", "kmedoids", "ahc", "dhc")


class KMaxOutOfRange(Exception):
    pass


class IncompleteGrid(Exception):
    pass


@dataclass
class GridCell:
    partition: Partition
    conn: float
    silh: float
    dunn: float


@dataclass
class EvaluationGrid:
    k_max: int
    n_b: int
    cells: dict[tuple[str, int], GridCell] = field(default_factory=dict)

    def cell(self, method: str, k: int) -> GridCell:
        return self.cells[(method, k)]

    def ks(self):
        return range(2, self.k_max + 1)


@dataclass
class ClusteringOutcome:
    k_opt: int
    best_method: str
    best_partition: Partition
    grid: EvaluationGrid
    votes: dict[int, int]


def sweep_grid(X, k_max: int, seed: int = 0, n_b: int = 10) -> EvaluationGrid:
    X = np.asarray(X, dtype=float)
    n = len(X)
    if not (2 <= k_max <= n):
        raise KMaxOutOfRange(f"k_max={k_max} outside [2, {n}]")
    n_b = min(n_b, n - 1)
    dm = clustering.pairwise_distances(X)
    grid = EvaluationGrid(k_max=k_max, n_b=n_b)

    ahc_dendro = clustering.ahc_dendrogram(X)
    dhc_lvls, _ = clustering.dhc_levels(X, k_max)

    for k in grid.ks():
        parts = {
            "kmeans": clustering.kmeans(X, k, seed=seed),
            "kmedoids": clustering.kmedoids(X, k, seed=seed),
            "ahc": Partition(k=k, labels=clustering.ahc_cut(ahc_dendro, n, k),
                             method="ahc"),
            "dhc": Partition(k=k, labels=dhc_lvls[k - 1], method="dhc"),
        }
        for method in METHODS:
            part = parts[method]
            scores = validity.score_partition(part, dm, n_b=n_b)
            grid.cells[(method, k)] = GridCell(
                partition=part, conn=scores.conn, silh=scores.silh,
                dunn=scores.dunn)
    return grid


def vote(grid: EvaluationGrid) -> dict[int, int]:
    ks = list(grid.ks())
    expected = {(m, k) for m in METHODS for k in ks}
    if set(grid.cells) != expected:
        raise IncompleteGrid("grid has missing or extra cells")
    votes = {k: 0 for k in ks}
    for method in METHODS:
        pools = {
            "conn": {k: grid.cell(method, k).conn for k in ks},
            "silh": {k: grid.cell(method, k).silh for k in ks},
            "dunn": {k: grid.cell(method, k).dunn for k in ks},
        }
        for round_v in range(1, grid.k_max):
            weight = grid.k_max - round_v
            for metric, pool in pools.items():
                if not pool:
                    continue
                sign = 1.0 if metric == "conn" else -1.0
                # ties break toward the smaller K (ascending iteration)
                best_k = min(sorted(pool), key=lambda k: (sign * pool[k], k))
                votes[best_k] += weight
                del pool[best_k]
    return votes


def _method_ranks(values: dict[str, float], ascending: bool) -> dict[str, int]:
    ordered = sorted(METHODS, key=lambda m: (values[m] if ascending else -values[m],
                                             METHODS.index(m)))
    return {m: r for r, m in enumerate(ordered)}


def select_best_method(grid: EvaluationGrid, k_opt: int) -> str:
    conn_r = _method_ranks({m: grid.cell(m, k_opt).conn for m in METHODS}, True)
    silh_r = _method_ranks({m: grid.cell(m, k_opt).silh for m in METHODS}, False)
    dunn_r = _method_ranks({m: grid.cell(m, k_opt).dunn for m in METHODS}, False)
    rank_sum = {m: conn_r[m] + silh_r[m] + dunn_r[m] for m in METHODS}
    return min(METHODS, key=lambda m: (rank_sum[m], METHODS.index(m)))


def run_occur(X, k_max: int, seed: int = 0, n_b: int = 10) -> ClusteringOutcome:
    grid = sweep_grid(X, k_max, seed=seed, n_b=n_b)
    votes = vote(grid)
    k_opt = min(sorted(votes), key=lambda k: (-votes[k], k))
    best_method = select_best_method(grid, k_opt)
    return ClusteringOutcome(
        k_opt=k_opt, best_method=best_method,
        best_partition=grid.cell(best_method, k_opt).partition,
        grid=grid, votes=votes)


def outcome_report(outcome: ClusteringOutcome, dates=None) -> dict:
    """JSON-ready summary of a clustering run (the occur-report document)."""
    grid = outcome.grid
    labels = outcome.best_partition.labels.tolist()
    report = {
        "k_opt": outcome.k_opt,
        "best_method": outcome.best_method,
        "votes": {str(k): v for k, v in sorted(outcome.votes.items())},
        "grid": [
            {"method": m, "k": k,
             "conn": grid.cell(m, k).conn,
             "silh": grid.cell(m, k).silh,
             "dunn": grid.cell(m, k).dunn}
            for m in METHODS for k in grid.ks()
        ],
        "labels": labels,
    }
    if dates is not None:
        report["day_labels"] = {str(d): int(l) for d, l in zip(dates, labels)}
    return report
