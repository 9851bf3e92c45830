"""Two-layer blended hour-ahead forecasting with per-cluster models.

Each cluster gets an M3 model: 11 first-layer variants fitted on all of
the cluster's training transitions, and a second-layer blender selected
by 10-fold cross-validation on out-of-fold first-layer predictions.
Hours 8-10 come from dedicated early-morning models fed by the same day's
earlier GHI values; 7am comes from day-ahead persistence of cloudiness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, RegressorMixin

from .data import DAY_HOURS, FEATURE_ORDER, DayProfile
from .evaluation import nmae
from .features import clear_sky_index
from .learners import (BLENDER_CANDIDATES, FIRST_LAYER_CATALOG,
                       fit_base_learner)


class ForecastingError(Exception):
    pass


class TooFewSamples(ForecastingError):
    pass


class DimensionMismatch(ForecastingError):
    pass


class MissingPreviousDay(ForecastingError):
    pass


def _fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.permutation(n) % folds


def _derive_seed(seed: int, salt: int) -> int:
    return (seed * 1000003 + salt) % (2 ** 31 - 1)


class M3Regressor(BaseEstimator, RegressorMixin):
    """First-layer variant ensemble with a CV-selected second-layer blender."""

    def __init__(self, catalog=FIRST_LAYER_CATALOG,
                 blender_candidates=BLENDER_CANDIDATES, folds=10, seed=0,
                 n_jobs=1):
        self.catalog = catalog
        self.blender_candidates = blender_candidates
        self.folds = folds
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        n = len(X)
        if n < self.folds:
            raise TooFewSamples(f"{n} samples < {self.folds} folds")
        self.n_features_in_ = X.shape[1]

        # Final fits and per-fold fits are independent units; they run in a
        # fixed (catalog order, fold order) task list so the merge is
        # deterministic for any worker count.
        fold_of = _fold_assignment(n, self.folds, self.seed)
        tasks = [(i, v, None) for i, v in enumerate(self.catalog)]
        tasks += [(i, v, f) for f in range(self.folds)
                  for i, v in enumerate(self.catalog)]

        def _run(i, v, f):
            train = slice(None) if f is None else fold_of != f
            m = fit_base_learner(v, X[train], y[train],
                                 seed=_derive_seed(self.seed, i))
            if f is None:
                return m
            return m.predict(X[fold_of == f])

        results = Parallel(n_jobs=self.n_jobs)(
            delayed(_run)(i, v, f) for i, v, f in tasks)

        k = len(self.catalog)
        self.models_ = {v.name: results[i]
                        for i, v in enumerate(self.catalog)}
        Z = np.empty((n, k))
        for (i, _, f), out in zip(tasks[k:], results[k:]):
            Z[fold_of == f, i] = out
        self.oof_matrix_ = Z
        basis = float(np.mean(np.abs(y))) or 1.0
        self.first_layer_cv_ = {
            v.name: nmae(y, Z[:, i], basis) for i, v in enumerate(self.catalog)
        }

        # Candidate blenders scored fold-by-fold on the OOF matrix.
        self.cv_table_ = {}
        for j, cand in enumerate(self.blender_candidates):
            scores = []
            for f in range(self.folds):
                test = fold_of == f
                m = fit_base_learner(cand, Z[~test], y[~test],
                                     seed=_derive_seed(self.seed, 100 + j))
                scores.append(nmae(y[test], m.predict(Z[test]), basis))
            self.cv_table_[cand.name] = scores
        means = {name: float(np.mean(s)) for name, s in self.cv_table_.items()}
        self.blender_name_ = min(sorted(means), key=lambda nm: (means[nm], nm))
        cand = next(c for c in self.blender_candidates
                    if c.name == self.blender_name_)
        j = list(self.blender_candidates).index(cand)
        self.blender_ = fit_base_learner(cand, Z, y,
                                         seed=_derive_seed(self.seed, 100 + j))
        return self

    def first_layer_predictions(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return np.column_stack([self.models_[v.name].predict(X)
                                for v in self.catalog])

    def predict(self, X) -> np.ndarray:
        Z = self.first_layer_predictions(X)
        return np.maximum(self.blender_.predict(Z), 0.0)

    def predict_variant(self, X, name: str) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.maximum(self.models_[name].predict(X), 0.0)


def persistence_cloudiness(ghi_t: float, ghi_clr_t: float,
                           ghi_clr_next: float) -> float:
    """Constant-clear-sky-index persistence; CSI falls back to 1 when the
    current clear-sky value is 0."""
    csi = ghi_t / ghi_clr_t if ghi_clr_t > 0 else 1.0
    return csi * ghi_clr_next


def day_feature_row(day: DayProfile, hour: int) -> np.ndarray:
    """The 13-feature vector at one hour, in canonical feature order."""
    rec = day.record_at(hour)
    vals = []
    for feat in FEATURE_ORDER:
        if feat == "csi":
            vals.append(clear_sky_index(rec.ghi, rec.ghi_clr or 0.0))
        else:
            v = getattr(rec, feat)
            vals.append(float(v) if v is not None else 0.0)
    return np.array(vals)


def hourly_transition_set(days: list[DayProfile]):
    """1-hour-ahead training pairs: features at t -> GHI at t+1, t = 7..18."""
    X, y = [], []
    for day in days:
        for hour in DAY_HOURS[:-1]:
            X.append(day_feature_row(day, hour))
            y.append(day.record_at(hour + 1).ghi)
    return np.array(X), np.array(y)


def early_morning_set(days: list[DayProfile], hour: int):
    """Same-day GHI at hours 7..hour-1 -> GHI at ``hour``."""
    X = np.array([[d.record_at(h).ghi for h in range(7, hour)] for d in days])
    y = np.array([d.record_at(hour).ghi for d in days])
    return X, y


EARLY_HOURS = (8, 9, 10)
MIN_CLUSTER_DAYS_FACTOR = 20


@dataclass
class ForecastBundle:
    cluster_models: dict[int, M3Regressor]
    early_morning: dict[int, M3Regressor]
    label_map: dict[int, int]            # original cluster -> model key
    merge_records: list[tuple[int, int]] = field(default_factory=list)
    catalog: tuple = FIRST_LAYER_CATALOG

    @property
    def k(self) -> int:
        return len(self.cluster_models)

    def model_for(self, label: int) -> M3Regressor:
        return self.cluster_models[self.label_map.get(int(label), int(label))]


def _merge_small_clusters(days, labels, min_days):
    """Merge clusters below ``min_days`` into the nearest (mean GHI) cluster."""
    labels = np.asarray(labels).copy()
    merges = []
    while True:
        uniq, counts = np.unique(labels, return_counts=True)
        if len(uniq) <= 1 or counts.min() >= min_days:
            break
        small = uniq[int(np.argmin(counts))]
        centroids = {u: np.mean([days[i].ghi_vector
                                 for i in np.flatnonzero(labels == u)], axis=0)
                     for u in uniq}
        others = [u for u in uniq if u != small]
        target = min(others, key=lambda u: (
            float(np.linalg.norm(centroids[small] - centroids[u])), u))
        labels[labels == small] = target
        merges.append((int(small), int(target)))
    return labels, merges


def train_early_morning(days: list[DayProfile], catalog=FIRST_LAYER_CATALOG,
                        blender_candidates=BLENDER_CANDIDATES, folds: int = 10,
                        seed: int = 0, n_jobs: int = 1) -> dict[int, M3Regressor]:
    """Per-hour models for 8/9/10am fed by the same day's earlier GHI values."""
    early = {}
    for hour in EARLY_HOURS:
        X, y = early_morning_set(days, hour)
        model = M3Regressor(catalog=catalog,
                            blender_candidates=blender_candidates,
                            folds=folds, seed=_derive_seed(seed, 900 + hour),
                            n_jobs=n_jobs)
        model.fit(X, y)
        early[hour] = model
    return early


def train_uc_m3(days: list[DayProfile], labels, catalog=FIRST_LAYER_CATALOG,
                blender_candidates=BLENDER_CANDIDATES, folds: int = 10,
                seed: int = 0, n_jobs: int = 1,
                early_morning: dict[int, M3Regressor] | None = None) -> ForecastBundle:
    """One M3 model per (possibly merged) cluster plus early-morning models.

    Pass all-zero labels for the single-model (all-in-one) variant.
    """
    labels = np.asarray(labels, dtype=int)
    if len(labels) != len(days):
        raise ValueError("labels and days length mismatch")
    min_days = max(folds, MIN_CLUSTER_DAYS_FACTOR)
    merged, merges = _merge_small_clusters(days, labels, min_days)
    label_map = {}
    for orig in np.unique(labels):
        cur = int(orig)
        changed = True
        while changed:
            changed = False
            for src, dst in merges:
                if cur == src:
                    cur = dst
                    changed = True
        label_map[int(orig)] = cur

    cluster_models = {}
    for u in np.unique(merged):
        members = [days[i] for i in np.flatnonzero(merged == u)]
        X, y = hourly_transition_set(members)
        model = M3Regressor(catalog=catalog,
                            blender_candidates=blender_candidates,
                            folds=folds, seed=_derive_seed(seed, int(u)),
                            n_jobs=n_jobs)
        model.fit(X, y)
        cluster_models[int(u)] = model

    early = early_morning if early_morning is not None else train_early_morning(
        days, catalog=catalog, blender_candidates=blender_candidates,
        folds=folds, seed=seed, n_jobs=n_jobs)

    return ForecastBundle(cluster_models=cluster_models, early_morning=early,
                          label_map=label_map, merge_records=merges,
                          catalog=tuple(catalog))


def _clip_forecast(value: float, ghi_clr: float | None) -> float:
    value = max(0.0, float(value))
    if ghi_clr is not None:
        value = min(value, 1.2 * ghi_clr)
    return value


def forecast_day(bundle: ForecastBundle, clf, day: DayProfile,
                 prev_day: DayProfile | None, variant: str | None = None):
    """Forecast all 13 hours of one day; returns (forecasts, recognized label).

    7am uses day-ahead persistence of cloudiness, 8-10am the early-morning
    models, and 11am-7pm the recognized cluster's hour-ahead model rolling
    over measured features. ``variant`` selects a single first-layer model
    instead of the blender (the single-algorithm comparison path).
    """
    if prev_day is None:
        raise MissingPreviousDay(f"no previous day available before {day.date}")
    forecasts = np.zeros(len(DAY_HOURS))

    rec7 = day.record_at(7)
    prev7 = prev_day.record_at(7)
    forecasts[0] = _clip_forecast(
        persistence_cloudiness(prev7.ghi, prev7.ghi_clr or 0.0,
                               rec7.ghi_clr or 0.0),
        rec7.ghi_clr)

    for hour in EARLY_HOURS:
        x = np.array([[day.record_at(h).ghi for h in range(7, hour)]])
        model = bundle.early_morning[hour]
        pred = (model.predict_variant(x, variant) if variant
                else model.predict(x))
        forecasts[hour - 7] = _clip_forecast(pred[0], day.record_at(hour).ghi_clr)

    if clf is not None and bundle.k > 1:
        from .recognition import build_pr_vector
        recognized = int(clf.predict(build_pr_vector(day)[None, :])[0])
    else:
        recognized = int(min(bundle.cluster_models))

    model = bundle.model_for(recognized)
    afternoon = range(11, DAY_HOURS[-1] + 1)
    X = np.array([day_feature_row(day, hour - 1) for hour in afternoon])
    pred = (model.predict_variant(X, variant) if variant
            else model.predict(X))
    for i, hour in enumerate(afternoon):
        forecasts[hour - 7] = _clip_forecast(pred[i], day.record_at(hour).ghi_clr)
    return forecasts, recognized


def persistence_day(day: DayProfile, prev_day: DayProfile | None) -> np.ndarray:
    """Hour-ahead persistence-of-cloudiness forecasts for a day (7am uses
    the day-ahead form)."""
    if prev_day is None:
        raise MissingPreviousDay(f"no previous day available before {day.date}")
    out = np.zeros(len(DAY_HOURS))
    prev7 = prev_day.record_at(7)
    rec7 = day.record_at(7)
    out[0] = _clip_forecast(
        persistence_cloudiness(prev7.ghi, prev7.ghi_clr or 0.0,
                               rec7.ghi_clr or 0.0),
        rec7.ghi_clr)
    for hour in DAY_HOURS[1:]:
        cur = day.record_at(hour - 1)
        nxt = day.record_at(hour)
        out[hour - 7] = _clip_forecast(
            persistence_cloudiness(cur.ghi, cur.ghi_clr or 0.0,
                                   nxt.ghi_clr or 0.0),
            nxt.ghi_clr)
    return out
