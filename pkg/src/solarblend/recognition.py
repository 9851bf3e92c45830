"""Recognize a day's cluster from its first four hours of solar features.

A one-vs-one multiclass SVM trained by sequential pairwise (SMO-style)
optimization on standardized 52-dimensional vectors (13 features x hours
7-10). The default kernel is exp(-||x - x'|| / (2 rho^2)); the classical
squared-norm Gaussian is available via ``kernel_form="squared"``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .data import FEATURE_ORDER, DayProfile
from .features import clear_sky_index

PR_HOURS = (7, 8, 9, 10)
PR_DIM = len(FEATURE_ORDER) * len(PR_HOURS)


class RecognitionError(Exception):
    pass


class MissingHour(RecognitionError):
    pass


class MissingFeature(RecognitionError):
    def __init__(self, feature, hour):
        super().__init__(f"feature {feature!r} missing at hour {hour}")
        self.feature = feature
        self.hour = hour


class SingleClassInput(RecognitionError):
    pass


class NoConvergence(RecognitionError):
    pass


class UntrainedClassifier(RecognitionError):
    pass


class EmptyFitSet(RecognitionError):
    pass


class EmptyConfusion(RecognitionError):
    pass


def build_pr_vector(day: DayProfile) -> np.ndarray:
    """Hour-major feature vector over hours 7-10; CSI is derived on the fly."""
    out = []
    for hour in PR_HOURS:
        rec = day.record_at(hour)
        for feat in FEATURE_ORDER:
            if feat == "csi":
                if rec.ghi_clr is None:
                    raise MissingFeature("ghi_clr", hour)
                out.append(clear_sky_index(rec.ghi, rec.ghi_clr))
            else:
                val = getattr(rec, feat)
                if val is None:
                    raise MissingFeature(feat, hour)
                out.append(float(val))
    return np.array(out)


class Scaler:
    """Per-dimension standardization; constant dimensions keep sigma = 1."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)

    @classmethod
    def fit(cls, X: np.ndarray) -> "Scaler":
        X = np.asarray(X, dtype=float)
        if X.size == 0:
            raise EmptyFitSet("cannot fit a scaler on an empty set")
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std[std == 0] = 1.0
        return cls(mean, std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std


def kernel_matrix(A, B, rho: float, form: str = "paper") -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
          - 2.0 * A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    if form == "paper":
        return np.exp(-np.sqrt(sq) / (2.0 * rho ** 2))
    if form == "squared":
        return np.exp(-sq / (2.0 * rho ** 2))
    raise ValueError(f"unknown kernel form {form!r}")


@dataclass
class BinarySvm:
    support_vectors: np.ndarray  # (m, d)
    dual_coef: np.ndarray        # (m,) alpha_i * y_i
    bias: float
    rho: float
    C: float
    kernel_form: str
    alphas: np.ndarray           # full alphas (training order) for diagnostics
    train_labels: np.ndarray

    def decision(self, X) -> np.ndarray:
        K = kernel_matrix(np.atleast_2d(X), self.support_vectors,
                          self.rho, self.kernel_form)
        return K @ self.dual_coef + self.bias


def train_svm_binary(X, y, C: float, rho: float, tol: float = 1e-3,
                     max_passes: int = 200, seed: int = 0,
                     kernel_form: str = "paper") -> BinarySvm:
    """SMO-style dual optimization of a soft-margin kernel SVM.

    ``y`` must be +/-1. Iterates pairwise alpha updates until a full sweep
    makes no KKT-violating progress.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(y)) < 2:
        raise SingleClassInput("both classes must be present")
    n = len(X)
    K = kernel_matrix(X, X, rho, kernel_form)
    alphas = np.zeros(n)
    b = 0.0
    rng = np.random.default_rng(seed)
    passes = 0
    total_sweeps = 0
    while passes < 3:
        total_sweeps += 1
        if total_sweeps > max_passes:
            raise NoConvergence(f"no convergence after {max_passes} sweeps")
        changed = 0
        f = K @ (alphas * y) + b
        for i in range(n):
            Ei = float(K[i] @ (alphas * y) + b - y[i])
            if not ((y[i] * Ei < -tol and alphas[i] < C)
                    or (y[i] * Ei > tol and alphas[i] > 0)):
                continue
            j = int(rng.integers(n - 1))
            if j >= i:
                j += 1
            Ej = float(K[j] @ (alphas * y) + b - y[j])
            ai_old, aj_old = alphas[i], alphas[j]
            if y[i] != y[j]:
                L = max(0.0, aj_old - ai_old)
                H = min(C, C + aj_old - ai_old)
            else:
                L = max(0.0, ai_old + aj_old - C)
                H = min(C, ai_old + aj_old)
            if H - L < 1e-12:
                continue
            eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
            if eta >= 0:
                continue
            aj = aj_old - y[j] * (Ei - Ej) / eta
            aj = min(H, max(L, aj))
            if abs(aj - aj_old) < 1e-7:
                continue
            ai = ai_old + y[i] * y[j] * (aj_old - aj)
            alphas[i], alphas[j] = ai, aj
            b1 = (b - Ei - y[i] * (ai - ai_old) * K[i, i]
                  - y[j] * (aj - aj_old) * K[i, j])
            b2 = (b - Ej - y[i] * (ai - ai_old) * K[i, j]
                  - y[j] * (aj - aj_old) * K[j, j])
            if 0 < ai < C:
                b = b1
            elif 0 < aj < C:
                b = b2
            else:
                b = 0.5 * (b1 + b2)
            changed += 1
        passes = passes + 1 if changed == 0 else 0
    sv = alphas > 1e-10
    return BinarySvm(
        support_vectors=X[sv], dual_coef=(alphas * y)[sv], bias=float(b),
        rho=rho, C=C, kernel_form=kernel_form, alphas=alphas, train_labels=y)


class SvmPatternClassifier(BaseEstimator, ClassifierMixin):
    """One-vs-one multiclass SVM over standardized pattern vectors."""

    def __init__(self, C=1.0, rho=1.0, kernel_form="paper", tol=1e-3,
                 max_passes=200, seed=0):
        self.C = C
        self.rho = rho
        self.kernel_form = kernel_form
        self.tol = tol
        self.max_passes = max_passes
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise SingleClassInput("need at least two classes")
        self.scaler_ = Scaler.fit(X)
        Xs = self.scaler_.transform(X)
        self.models_ = {}
        for a_i, ca in enumerate(self.classes_):
            for cb in self.classes_[a_i + 1:]:
                mask = (y == ca) | (y == cb)
                yy = np.where(y[mask] == ca, 1.0, -1.0)
                self.models_[(int(ca), int(cb))] = train_svm_binary(
                    Xs[mask], yy, C=self.C, rho=self.rho, tol=self.tol,
                    max_passes=self.max_passes, seed=self.seed,
                    kernel_form=self.kernel_form)
        return self

    def predict(self, X):
        if not hasattr(self, "models_"):
            raise UntrainedClassifier("classifier was never fitted")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Xs = self.scaler_.transform(X)
        tally = np.zeros((len(Xs), len(self.classes_)), dtype=int)
        cls_idx = {int(c): i for i, c in enumerate(self.classes_)}
        for (ca, cb), model in self.models_.items():
            dec = model.decision(Xs)
            tally[dec >= 0, cls_idx[ca]] += 1
            tally[dec < 0, cls_idx[cb]] += 1
        # argmax takes the lowest class index on voting ties
        return self.classes_[np.argmax(tally, axis=1)]


def fit_pr_classifier(X, y, seed: int = 0, kernel_form: str = "paper",
                      folds: int = 5) -> SvmPatternClassifier:
    """Grid-search (C, rho) by stratified CV accuracy, then refit on all data."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    scaler = Scaler.fit(X)
    Xs = scaler.transform(X)
    from .clustering import pairwise_distances
    dm = pairwise_distances(Xs)
    med = float(np.median(dm[np.triu_indices(len(Xs), k=1)]))
    if med <= 0:
        med = 1.0
    cs = (0.1, 1.0, 10.0, 100.0)
    rhos = tuple(f * med for f in (0.5, 1.0, 2.0))
    fold_idx = _stratified_folds(y, folds, seed)
    best = None
    for C in cs:
        for rho in rhos:
            correct = 0
            for f in range(folds):
                test = fold_idx == f
                if len(np.unique(y[~test])) < 2:
                    continue
                clf = SvmPatternClassifier(C=C, rho=rho, seed=seed,
                                           kernel_form=kernel_form)
                clf.fit(X[~test], y[~test])
                correct += int(np.sum(clf.predict(X[test]) == y[test]))
            acc = correct / len(y)
            key = (-acc, C, rho)
            if best is None or key < best[0]:
                best = (key, C, rho)
    _, C, rho = best
    clf = SvmPatternClassifier(C=C, rho=rho, seed=seed, kernel_form=kernel_form)
    clf.fit(X, y)
    return clf


def _stratified_folds(y, folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    fold_idx = np.zeros(len(y), dtype=int)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        fold_idx[idx] = np.arange(len(idx)) % folds
    return fold_idx


def pr_metrics(confusion: np.ndarray):
    """Per-class sensitivity and precision plus overall accuracy.

    Rows of ``confusion`` are recognized classes, columns actual classes.
    Returns fractions in [0, 1].
    """
    cm = np.asarray(confusion, dtype=float)
    if cm.size == 0 or cm.sum() == 0:
        raise EmptyConfusion("confusion matrix is empty")
    if np.any(cm < 0):
        raise ValueError("confusion counts must be non-negative")
    diag = np.diag(cm)
    col = cm.sum(axis=0)
    row = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        stv = np.where(col > 0, diag / col, 0.0)
        pcs = np.where(row > 0, diag / row, 0.0)
    acc = float(diag.sum() / cm.sum())
    return stv, pcs, acc


# --- persistence ------------------------------------------------------------

CLASSIFIER_SCHEMA_VERSION = 1


def classifier_to_dict(clf: SvmPatternClassifier) -> dict:
    return {
        "schema_version": CLASSIFIER_SCHEMA_VERSION,
        "classes": [int(c) for c in clf.classes_],
        "hyperparameters": {"C": clf.C, "rho": clf.rho,
                            "kernel_form": clf.kernel_form,
                            "tol": clf.tol, "seed": clf.seed},
        "scaler": {"mean": clf.scaler_.mean.tolist(),
                   "std": clf.scaler_.std.tolist()},
        "models": [
            {"pair": [ca, cb],
             "support_vectors": m.support_vectors.tolist(),
             "dual_coef": m.dual_coef.tolist(),
             "bias": m.bias, "rho": m.rho, "C": m.C,
             "kernel_form": m.kernel_form}
            for (ca, cb), m in sorted(clf.models_.items())
        ],
    }


def classifier_from_dict(doc: dict) -> SvmPatternClassifier:
    hp = doc["hyperparameters"]
    clf = SvmPatternClassifier(C=hp["C"], rho=hp["rho"],
                               kernel_form=hp["kernel_form"], tol=hp["tol"],
                               seed=hp["seed"])
    clf.classes_ = np.array(doc["classes"])
    clf.scaler_ = Scaler(np.array(doc["scaler"]["mean"]),
                         np.array(doc["scaler"]["std"]))
    clf.models_ = {}
    for m in doc["models"]:
        ca, cb = m["pair"]
        clf.models_[(ca, cb)] = BinarySvm(
            support_vectors=np.array(m["support_vectors"], dtype=float),
            dual_coef=np.array(m["dual_coef"], dtype=float),
            bias=m["bias"], rho=m["rho"], C=m["C"],
            kernel_form=m["kernel_form"],
            alphas=np.array([]), train_labels=np.array([]))
    return clf


def save_classifier(clf: SvmPatternClassifier, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(classifier_to_dict(clf), fh, indent=1)


def load_classifier(path) -> SvmPatternClassifier:
    with open(path, encoding="utf-8") as fh:
        return classifier_from_dict(json.load(fh))
