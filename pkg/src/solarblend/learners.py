"""First-layer learner catalog and second-layer blender candidates.

The catalog spans four families: four single-hidden-layer neural nets
(own implementation, full-batch gradient descent with momentum), three
support vector regressors (linear / RBF / quadratic kernels), three
gradient-boosted tree settings, and one random forest -- 11 variants.
Tree ensembles, SVR, kNN and ridge are backed by scikit-learn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.ensemble import HistGradientBoostingRegressor, RandomForestRegressor
from sklearn.linear_model import Ridge
from sklearn.neighbors import KNeighborsRegressor
from sklearn.svm import SVR, LinearSVR


class LearnerError(Exception):
    pass


class DegenerateInput(LearnerError):
    pass


class NonFiniteFeature(LearnerError):
    pass


@dataclass(frozen=True)
class LearnerVariant:
    name: str
    family: str  # ann | svr | gbm | rf | knn | ridge
    params: dict = field(default_factory=dict)


FIRST_LAYER_CATALOG = (
    LearnerVariant("ann1", "ann", {"hidden": 5, "activation": "tanh"}),
    LearnerVariant("ann2", "ann", {"hidden": 10, "activation": "tanh"}),
    LearnerVariant("ann3", "ann", {"hidden": 20, "activation": "tanh"}),
    LearnerVariant("ann4", "ann", {"hidden": 10, "activation": "logistic"}),
    LearnerVariant("svr1", "svr", {"kernel": "linear"}),
    LearnerVariant("svr2", "svr", {"kernel": "rbf"}),
    LearnerVariant("svr3", "svr", {"kernel": "poly", "degree": 2}),
    LearnerVariant("gbm1", "gbm", {"depth": 1, "shrinkage": 0.1, "rounds": 200}),
    LearnerVariant("gbm2", "gbm", {"depth": 3, "shrinkage": 0.1, "rounds": 200}),
    LearnerVariant("gbm3", "gbm", {"depth": 3, "shrinkage": 0.05, "rounds": 400}),
    LearnerVariant("rf", "rf", {"trees": 100}),
)

BLENDER_CANDIDATES = (
    LearnerVariant("ridge", "ridge", {"alpha": 1.0}),
    LearnerVariant("gbm", "gbm", {"depth": 2, "shrinkage": 0.1, "rounds": 100}),
    LearnerVariant("rf", "rf", {"trees": 100}),
    LearnerVariant("knn", "knn", {"k": 5}),
)


class AnnRegressor:
    """Single-hidden-layer network trained by full-batch momentum descent.

    Operates on standardized inputs/targets supplied by the caller. The
    flat-parameter loss/gradient pair is exposed for finite-difference
    verification.
    """

    def __init__(self, hidden=10, activation="tanh", lr=0.05, momentum=0.9,
                 epochs=500, seed=0, grad_tol=1e-10):
        self.hidden = hidden
        self.activation = activation
        self.lr = lr
        self.momentum = momentum
        self.epochs = epochs
        self.seed = seed
        self.grad_tol = grad_tol

    def _act(self, z):
        if self.activation == "tanh":
            return np.tanh(z)
        return 1.0 / (1.0 + np.exp(-z))

    def _act_deriv(self, a):
        if self.activation == "tanh":
            return 1.0 - a * a
        return a * (1.0 - a)

    def init_params(self, d: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        w1 = rng.normal(0, 1.0 / math.sqrt(max(d, 1)), size=(d, self.hidden))
        b1 = np.zeros(self.hidden)
        w2 = rng.normal(0, 1.0 / math.sqrt(self.hidden), size=self.hidden)
        b2 = 0.0
        return self.pack(w1, b1, w2, b2)

    def pack(self, w1, b1, w2, b2) -> np.ndarray:
        return np.concatenate([w1.ravel(), b1, w2, [b2]])

    def unpack(self, theta: np.ndarray, d: int):
        h = self.hidden
        w1 = theta[: d * h].reshape(d, h)
        b1 = theta[d * h: d * h + h]
        w2 = theta[d * h + h: d * h + 2 * h]
        b2 = theta[-1]
        return w1, b1, w2, b2

    def loss_and_grad(self, theta, X, y):
        """Half mean squared error and its gradient w.r.t. flat parameters."""
        d = X.shape[1]
        w1, b1, w2, b2 = self.unpack(theta, d)
        z1 = X @ w1 + b1
        a1 = self._act(z1)
        pred = a1 @ w2 + b2
        err = pred - y
        n = len(X)
        loss = 0.5 * float(err @ err) / n
        g_pred = err / n
        g_w2 = a1.T @ g_pred
        g_b2 = float(g_pred.sum())
        g_a1 = np.outer(g_pred, w2)
        g_z1 = g_a1 * self._act_deriv(a1)
        g_w1 = X.T @ g_z1
        g_b1 = g_z1.sum(axis=0)
        return loss, self.pack(g_w1, g_b1, g_w2, g_b2)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        theta = self.init_params(X.shape[1])
        velocity = np.zeros_like(theta)
        for _ in range(self.epochs):
            _, grad = self.loss_and_grad(theta, X, y)
            gn = float(np.linalg.norm(grad))
            if gn < self.grad_tol:
                break
            velocity = self.momentum * velocity - self.lr * grad
            theta = theta + velocity
        self.theta_ = theta
        self.d_ = X.shape[1]
        return self

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        w1, b1, w2, b2 = self.unpack(self.theta_, self.d_)
        return self._act(X @ w1 + b1) @ w2 + b2


class FittedLearner:
    """A fitted variant with internal input/target standardization."""

    def __init__(self, variant: LearnerVariant, inner, x_mean, x_std,
                 y_mean, y_std, scale_y: bool):
        self.variant = variant
        self.inner = inner
        self.x_mean = x_mean
        self.x_std = x_std
        self.y_mean = y_mean
        self.y_std = y_std
        self.scale_y = scale_y

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Xs = (X - self.x_mean) / self.x_std
        pred = np.asarray(self.inner.predict(Xs), dtype=float)
        if self.scale_y:
            pred = pred * self.y_std + self.y_mean
        return pred


def _make_inner(variant: LearnerVariant, y_std_scaled: float, seed: int):
    p = variant.params
    if variant.family == "ann":
        return AnnRegressor(hidden=p["hidden"], activation=p["activation"],
                            seed=seed, epochs=p.get("epochs", 500))
    if variant.family == "svr":
        eps = 0.01 * max(y_std_scaled, 1e-12)
        if p["kernel"] == "linear":
            return LinearSVR(C=10.0, epsilon=eps, max_iter=10000,
                             loss="squared_epsilon_insensitive",
                             dual=False, random_state=seed)
        return SVR(kernel=p["kernel"], degree=p.get("degree", 3),
                   C=10.0, epsilon=eps, gamma="scale")
    if variant.family == "gbm":
        return HistGradientBoostingRegressor(
            max_depth=p["depth"], learning_rate=p["shrinkage"],
            max_iter=p["rounds"], random_state=seed, early_stopping=False)
    if variant.family == "rf":
        return RandomForestRegressor(n_estimators=p["trees"],
                                     random_state=seed, n_jobs=1)
    if variant.family == "knn":
        return KNeighborsRegressor(n_neighbors=p.get("k", 5))
    if variant.family == "ridge":
        return Ridge(alpha=p.get("alpha", 1.0))
    raise ValueError(f"unknown learner family {variant.family!r}")


def fit_base_learner(variant: LearnerVariant, X, y, seed: int = 0) -> FittedLearner:
    """Fit one variant; deterministic for a given seed."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) < 5:
        raise DegenerateInput(f"need at least 5 samples, got {len(X)}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteFeature("non-finite value in training data")
    x_mean = X.mean(axis=0)
    x_std = X.std(axis=0)
    x_std[x_std == 0] = 1.0
    # Trees are scale-invariant; everything else trains on z-scored targets.
    scale_y = variant.family not in ("gbm", "rf")
    y_mean = float(y.mean())
    y_std = float(y.std()) or 1.0
    Xs = (X - x_mean) / x_std
    ys = (y - y_mean) / y_std if scale_y else y
    inner = _make_inner(variant, float(np.std(ys)), seed)
    if variant.family == "rf":
        inner.set_params(max_features=max(1, math.ceil(X.shape[1] / 3)))
    if variant.family == "knn":
        inner.set_params(n_neighbors=min(variant.params.get("k", 5), len(Xs)))
    inner.fit(Xs, ys)
    return FittedLearner(variant, inner, x_mean, x_std, y_mean, y_std, scale_y)
