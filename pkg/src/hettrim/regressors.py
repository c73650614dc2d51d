"""Built-in deterministic regression learners.

Two methods are provided out of the box:

``knn``
    k-nearest-neighbour regression: the prediction at a query point is the
    mean of the targets of its ``knn_k`` nearest training points under
    (optionally per-column standardized) Euclidean distance.

``bagged_trees``
    An ensemble of depth-limited regression trees, each fit on a seeded
    bootstrap resample of the training data with per-node feature
    subsampling.  The prediction is the mean of the tree predictions.

Both learners are fully deterministic given (spec, training data): the
bagging randomness is drawn from per-tree counter-based streams derived
from ``spec.seed``, so refits reproduce bit-identical predictions and do
not depend on execution order.

Additional methods can be made available to :func:`fit_regressor` through
:func:`register_regressor`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._streams import NS_TREE, stream


@dataclass(frozen=True)
class RegressorSpec:
    """Configuration of a regression learner.

    Parameters
    ----------
    method : str
        Name of a registered learner, ``"knn"`` or ``"bagged_trees"``.
    knn_k : int
        Number of neighbours averaged by the knn method.
    trees : int
        Ensemble size for bagged trees.
    max_depth : int
        Maximum tree depth (root has depth 0).
    min_leaf : int
        Minimum number of training rows in a leaf.
    mtry : int, optional
        Number of candidate split features drawn (without replacement) at
        each node.  ``None`` defaults to ``max(1, d // 3)`` at fit time.
    standardize : bool
        If true, knn distances are computed on per-column standardized
        covariates (training mean/scale, applied to queries as well).
    seed : int
        Root seed for all randomness of the learner.
    """

    method: str = "knn"
    knn_k: int = 10
    trees: int = 200
    max_depth: int = 8
    min_leaf: int = 5
    mtry: Optional[int] = None
    standardize: bool = False
    seed: int = 0


def _as_matrix(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"covariates must be a 2-d array, got shape {x.shape}")
    return x


class KnnRegressor:
    """Mean of the ``k`` nearest training targets under Euclidean distance."""

    def __init__(self, spec: RegressorSpec, x: np.ndarray, y: np.ndarray):
        x = _as_matrix(x)
        y = np.asarray(y, dtype=np.float64)
        if x.shape[0] == 0:
            raise ValueError("empty training set")
        if y.shape != (x.shape[0],):
            raise ValueError(
                f"targets have shape {y.shape}, expected ({x.shape[0]},)"
            )
        k = int(spec.knn_k)
        if k < 1:
            raise ValueError("knn_k must be a positive integer")
        if k > x.shape[0]:
            raise ValueError(
                f"knn_k={k} exceeds the training-set size {x.shape[0]}"
            )
        self.k = k
        if spec.standardize:
            self._shift = x.mean(axis=0)
            scale = x.std(axis=0)
            self._scale = np.where(scale > 0.0, scale, 1.0)
        else:
            self._shift = np.zeros(x.shape[1])
            self._scale = np.ones(x.shape[1])
        self._x = (x - self._shift) / self._scale
        self._y = y
        self._sqnorm = np.einsum("ij,ij->i", self._x, self._x)

    def predict(self, queries: np.ndarray) -> np.ndarray:
        q = _as_matrix(queries)
        if q.shape[1] != self._x.shape[1]:
            raise ValueError(
                f"queries have {q.shape[1]} columns, training data has "
                f"{self._x.shape[1]}"
            )
        q = (q - self._shift) / self._scale
        if self.k == self._x.shape[0]:
            # every neighbourhood is the whole training set
            return np.full(q.shape[0], self._y.mean())
        d2 = np.einsum("ij,ij->i", q, q)[:, None] + self._sqnorm[None, :]
        d2 -= 2.0 * (q @ self._x.T)
        nearest = np.argpartition(d2, self.k - 1, axis=1)[:, : self.k]
        return self._y[nearest].mean(axis=1)


class _Tree:
    """One depth-limited regression tree, stored as flat node arrays."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, x, y, rng, max_depth, min_leaf, mtry):
        n, d = x.shape
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            return len(feature) - 1

        def build(idx: np.ndarray, depth: int) -> int:
            node = new_node()
            ys = y[idx]
            value[node] = ys.mean()
            if depth >= max_depth or idx.size < 2 * min_leaf:
                return node
            split = _best_split(x, ys, idx, rng, d, mtry, min_leaf)
            if split is None:
                return node
            f, thr = split
            go_left = x[idx, f] <= thr
            feature[node] = f
            threshold[node] = thr
            left[node] = build(idx[go_left], depth + 1)
            right[node] = build(idx[~go_left], depth + 1)
            return node

        build(np.arange(n), 0)
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    def predict(self, q: np.ndarray) -> np.ndarray:
        node = np.zeros(q.shape[0], dtype=np.int64)
        rows = np.arange(q.shape[0])
        while True:
            f = self.feature[node]
            live = f >= 0
            if not live.any():
                return self.value[node]
            goes_left = np.zeros(q.shape[0], dtype=bool)
            goes_left[live] = (
                q[rows[live], f[live]] <= self.threshold[node[live]]
            )
            node = np.where(
                live,
                np.where(goes_left, self.left[node], self.right[node]),
                node,
            )


def _best_split(x, ys, idx, rng, d, mtry, min_leaf):
    """Best (feature, threshold) by within-node SSE reduction, or None."""
    m = idx.size
    feats = rng.permutation(d)[:mtry]
    best_gain = 0.0
    best = None
    base = ys.sum() ** 2 / m
    for f in feats:
        xs = x[idx, f]
        order = np.argsort(xs, kind="stable")
        xf = xs[order]
        cum = np.cumsum(ys[order])
        total = cum[-1]
        # candidate left sizes i, only between distinct column values
        i = np.arange(min_leaf, m - min_leaf + 1)
        if i.size == 0:
            continue
        distinct = xf[i - 1] < xf[i]
        i = i[distinct]
        if i.size == 0:
            continue
        lsum = cum[i - 1]
        gain = lsum**2 / i + (total - lsum) ** 2 / (m - i) - base
        j = int(np.argmax(gain))
        if gain[j] > best_gain:
            best_gain = float(gain[j])
            best = (int(f), float(0.5 * (xf[i[j] - 1] + xf[i[j]])))
    return best


class BaggedTreesRegressor:
    """Average of depth-limited trees fit on seeded bootstrap resamples."""

    def __init__(self, spec: RegressorSpec, x: np.ndarray, y: np.ndarray):
        x = _as_matrix(x)
        y = np.asarray(y, dtype=np.float64)
        n, d = x.shape
        if n == 0:
            raise ValueError("empty training set")
        if y.shape != (n,):
            raise ValueError(f"targets have shape {y.shape}, expected ({n},)")
        if spec.trees < 1:
            raise ValueError("trees must be a positive integer")
        if spec.min_leaf < 1 or spec.max_depth < 0:
            raise ValueError("min_leaf must be >= 1 and max_depth >= 0")
        mtry = spec.mtry if spec.mtry is not None else max(1, d // 3)
        if not 1 <= mtry <= d:
            raise ValueError(f"mtry={mtry} must lie in [1, {d}]")
        self._trees = []
        for t in range(spec.trees):
            rng = stream(spec.seed, NS_TREE, t)
            boot = rng.integers(0, n, size=n)
            self._trees.append(
                _Tree(x[boot], y[boot], rng, spec.max_depth, spec.min_leaf, mtry)
            )
        self._d = d

    def predict(self, queries: np.ndarray) -> np.ndarray:
        q = _as_matrix(queries)
        if q.shape[1] != self._d:
            raise ValueError(
                f"queries have {q.shape[1]} columns, training data has {self._d}"
            )
        out = np.zeros(q.shape[0])
        for tree in self._trees:
            out += tree.predict(q)
        return out / len(self._trees)


_REGISTRY: dict[str, Callable] = {
    "knn": KnnRegressor,
    "bagged_trees": BaggedTreesRegressor,
}


def register_regressor(name: str, factory: Callable) -> None:
    """Register ``factory(spec, x, y) -> fitted regressor`` under ``name``."""
    _REGISTRY[str(name)] = factory


def fit_regressor(spec: RegressorSpec, x: np.ndarray, y: np.ndarray):
    """Fit the learner named by ``spec.method`` and return the fitted object.

    The returned object exposes ``predict(queries) -> (q,) array`` and is
    deterministic given (spec, x, y).
    """
    try:
        factory = _REGISTRY[spec.method]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise ValueError(
            f"unknown regression method '{spec.method}' (registered: {known})"
        ) from None
    return factory(spec, x, y)
