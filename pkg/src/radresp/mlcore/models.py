"""Ridge classifier, CART tree, random forest and logistic gradient-boosted trees."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import _cart

RIDGE, TREE, FOREST, GBT = "ridge", "tree", "forest", "gbt"
MODEL_KINDS = (RIDGE, TREE, FOREST, GBT)


class ModelError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y).astype(np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise ModelError(f"X shape {self.X.shape} does not match {self.y.size} labels")
        if not np.all(np.isfinite(self.X)):
            raise ModelError("X contains NaN or infinite values")
        if np.any((self.y != 0) & (self.y != 1)):
            raise ModelError("labels must be 0/1")
        if not self.names:
            self.names = [f"f{j}" for j in range(self.X.shape[1])]
        elif len(self.names) != self.X.shape[1]:
            raise ModelError("feature names do not match the number of columns")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def class_counts(self):
        return int((self.y == 0).sum()), int((self.y == 1).sum())


class TrainedModel:
    """Fitted classifier; ``score`` is higher for class 1 and ``threshold`` is its decision cut."""

    kind: str = ""
    threshold: float = 0.5

    def score(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return (self.score(X) >= self.threshold).astype(np.int64)


# ---------------------------------------------------------------------- ridge

@dataclass
class RidgeModel(TrainedModel):
    weights: np.ndarray
    intercept: float
    center: np.ndarray
    scale: np.ndarray
    kind: str = RIDGE
    threshold: float = 0.0

    def score(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=float) - self.center) / self.scale
        return Z @ self.weights + self.intercept


def train_ridge(data: Dataset, lam: float = 1.0, standardize: bool = False) -> RidgeModel:
    """L2-penalised least squares on +/-1 targets, intercept unpenalised.

    With ``standardize`` the columns are z-scored with the training
    statistics first (constant columns are left unscaled) and the scaling is
    stored in the model.
    """
    if lam < 0:
        raise ModelError("ridge penalty must be >= 0")
    if data.n < 2:
        raise ModelError("ridge needs at least two samples")
    X = data.X
    d = X.shape[1]
    center = np.zeros(d)
    scale = np.ones(d)
    if standardize:
        center = X.mean(axis=0)
        sd = X.std(axis=0)
        scale = np.where(sd > 0, sd, 1.0)
    Z = (X - center) / scale
    t = 2.0 * data.y - 1.0
    # centering eliminates the unpenalised intercept from the normal equations
    zm = Z.mean(axis=0)
    tm = t.mean()
    Zc = Z - zm
    A = Zc.T @ Zc + lam * np.eye(d)
    try:
        if lam == 0 and np.linalg.matrix_rank(A) < d:
            raise np.linalg.LinAlgError("singular")
        w = np.linalg.solve(A, Zc.T @ (t - tm))
    except np.linalg.LinAlgError as exc:
        raise ModelError("ridge normal equations are singular (collinear features with lambda=0)") from exc
    b = float(tm - zm @ w)
    return RidgeModel(w, b, center, scale)


# ---------------------------------------------------------------------- trees

@dataclass
class TreeModel(TrainedModel):
    feature: np.ndarray
    thresholds: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    kind: str = TREE
    threshold: float = 0.5

    def leaves(self, X) -> np.ndarray:
        return _cart.apply(np.ascontiguousarray(X, dtype=float), self.feature, self.thresholds, self.left, self.right)

    def score(self, X) -> np.ndarray:
        return self.value[self.leaves(X)]

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def depth(self) -> int:
        def _d(k):
            return 0 if self.feature[k] < 0 else 1 + max(_d(self.left[k]), _d(self.right[k]))

        return _d(0)


def _max_nodes(max_depth: int, n_rows: int) -> int:
    by_rows = 2 * n_rows - 1
    if max_depth >= 30:
        return by_rows
    return min(2 ** (max_depth + 1) - 1, by_rows)


def _check_tree_params(max_depth, min_leaf) -> int:
    max_depth = 64 if max_depth is None else int(max_depth)
    if max_depth < 0:
        raise ModelError("max_depth must be >= 0")
    if min_leaf < 1:
        raise ModelError("min_leaf must be >= 1")
    return max_depth


def _grow_one(X, target, max_depth, min_leaf):
    """Deterministic full-feature tree on all rows; returns (tree, leaf_of_row)."""
    max_depth = _check_tree_params(max_depth, min_leaf)
    n, d = X.shape
    keys = np.zeros((1, _max_nodes(max_depth, n), d))
    idx = np.arange(n)[None, :]
    feat, thr, left, right, value, n_nodes, leaf_of_row = _cart.grow_forest(
        X, target, idx, max_depth, int(min_leaf), d, keys
    )
    k = int(n_nodes[0])
    tree = TreeModel(feat[0, :k], thr[0, :k], left[0, :k], right[0, :k], value[0, :k])
    return tree, leaf_of_row[0]


def train_tree(data: Dataset, max_depth: Optional[int] = 5, min_leaf: int = 1) -> TreeModel:
    """CART with the Gini criterion; leaves score the fraction of class-1 samples."""
    if data.n < 2 * min_leaf:
        raise ModelError("need at least 2 * min_leaf samples")
    tree, _ = _grow_one(np.ascontiguousarray(data.X), data.y.astype(float), max_depth, min_leaf)
    return tree


@dataclass
class ForestModel(TrainedModel):
    """Trees stored as stacked (n_trees, max_nodes) node arrays."""

    feature: np.ndarray
    thresholds: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_nodes: np.ndarray
    kind: str = FOREST
    threshold: float = 0.5

    def score(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        return _cart.forest_mean(X, self.feature, self.thresholds, self.left, self.right, self.value)

    @property
    def trees(self) -> List[TreeModel]:
        out = []
        for t, k in enumerate(self.n_nodes):
            out.append(TreeModel(self.feature[t, :k], self.thresholds[t, :k], self.left[t, :k],
                                 self.right[t, :k], self.value[t, :k]))
        return out


def train_forest(
    data: Dataset,
    n_trees: int = 100,
    max_depth: Optional[int] = 5,
    seed: int = 0,
    min_leaf: int = 1,
    max_features: Optional[int] = None,
    bootstrap: bool = True,
) -> ForestModel:
    """Bagged CART trees with ceil(sqrt(d)) candidate features per split.

    All randomness (bootstrap rows, per-node feature draws) is drawn up front
    from one generator seeded with ``seed``, so the result does not depend on
    how tree growing is scheduled.
    """
    if n_trees < 1:
        raise ModelError("n_trees must be >= 1")
    max_depth = _check_tree_params(max_depth, min_leaf)
    X = np.ascontiguousarray(data.X)
    n, d = X.shape
    n_try = int(math.ceil(math.sqrt(d))) if max_features is None else int(max_features)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, (n_trees, n)) if bootstrap else np.tile(np.arange(n), (n_trees, 1))
    cap = _max_nodes(max_depth, n)
    keys = rng.random((n_trees, cap, d)) if n_try < d else np.zeros((n_trees, cap, d))
    feat, thr, left, right, value, n_nodes, _ = _cart.grow_forest(
        X, data.y.astype(float), idx, max_depth, int(min_leaf), n_try, keys
    )
    return ForestModel(feat, thr, left, right, value, n_nodes)


# ------------------------------------------------------------------- boosting

def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class GbtModel(TrainedModel):
    init: float
    learning_rate: float
    trees: List[TreeModel]
    kind: str = GBT
    threshold: float = 0.5

    def margin(self, X, n_rounds: Optional[int] = None) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        out = np.full(X.shape[0], self.init)
        for t in self.trees[:n_rounds]:
            out += self.learning_rate * t.score(X)
        return out

    def score(self, X) -> np.ndarray:
        return _sigmoid(self.margin(X))


def train_gbt(
    data: Dataset,
    n_rounds: int = 100,
    depth: int = 3,
    learning_rate: float = 0.1,
    min_leaf: int = 1,
    l2: float = 1.0,
) -> GbtModel:
    """Stagewise logistic-loss boosting.

    Each round fits a regression tree to the residuals ``y - p`` and sets leaf
    values by a Newton step ``sum(g) / (sum(h) + l2)``.
    """
    if n_rounds < 1:
        raise ModelError("n_rounds must be >= 1")
    if not 0 < learning_rate <= 1:
        raise ModelError("learning_rate must lie in (0, 1]")
    X = np.ascontiguousarray(data.X)
    y = data.y.astype(float)
    prior = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
    init = math.log(prior / (1 - prior))
    margin = np.full(data.n, init)
    trees = []
    for _ in range(n_rounds):
        p = _sigmoid(margin)
        resid = y - p
        hess = p * (1 - p)
        tree, leaf_of_row = _grow_one(X, resid, depth, min_leaf)
        g = np.bincount(leaf_of_row, weights=resid, minlength=tree.n_nodes)
        h = np.bincount(leaf_of_row, weights=hess, minlength=tree.n_nodes)
        tree.value = np.where(tree.feature < 0, g / (h + l2), 0.0)
        trees.append(tree)
        margin += learning_rate * tree.value[leaf_of_row]
    return GbtModel(init, learning_rate, trees)


# -------------------------------------------------------------------- dispatch

DEFAULT_PARAMS = {
    RIDGE: {"lam": 1.0, "standardize": True},
    TREE: {"max_depth": 4, "min_leaf": 2},
    FOREST: {"n_trees": 50, "max_depth": 4, "min_leaf": 1},
    GBT: {"n_rounds": 50, "depth": 2, "learning_rate": 0.1},
}


def fit_model(kind: str, data: Dataset, params: Optional[dict] = None, seed: int = 0) -> TrainedModel:
    if kind not in MODEL_KINDS:
        raise ModelError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    p = dict(DEFAULT_PARAMS[kind])
    p.update(params or {})
    if kind == RIDGE:
        return train_ridge(data, **p)
    if kind == TREE:
        return train_tree(data, **p)
    if kind == FOREST:
        return train_forest(data, seed=seed, **p)
    return train_gbt(data, **p)


def model_kinds(spec: str) -> Sequence[str]:
    return MODEL_KINDS if spec == "all" else (spec,)
