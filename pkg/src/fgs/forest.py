"""Regression random forest with leaf-membership weights.

Split search is delegated to scikit-learn's CART builder; everything the
smoother needs (leaf membership, weights, prediction, serialization) lives in
flat per-tree arrays owned here so that ``predict`` and ``weights`` agree by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from sklearn.tree import DecisionTreeRegressor

from .dataset import Dataset
from .errors import DataError

SIGMA2_FLOOR = 1e-12
DEFAULT_INFLATION = 1.5


@dataclass(frozen=True)
class ForestConfig:
    num_trees: int = 500
    sample_fraction: float = 0.632
    with_replacement: bool = False
    mtry: int | None = None  # None -> max(1, ceil(d / 3))
    min_leaf_size: int = 5
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if not 0 < self.sample_fraction <= 1:
            raise ValueError("sample_fraction must lie in (0, 1]")
        if self.min_leaf_size < 1:
            raise ValueError("min_leaf_size must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")

    def resolved_mtry(self, d: int) -> int:
        m = self.mtry if self.mtry is not None else max(1, math.ceil(d / 3))
        if not 1 <= m <= d:
            raise ValueError(f"mtry={m} outside [1, {d}]")
        return m

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Tree:
    """Array-encoded binary tree. ``feature[k] == -1`` marks a leaf.

    ``rows``/``counts`` are the tree's in-bag training rows with multiplicity
    and ``row_leaf`` is the leaf node each of them falls in.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    rows: np.ndarray
    counts: np.ndarray
    row_leaf: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, X) -> np.ndarray:
        X32 = np.asarray(X, dtype=np.float32)
        node = np.zeros(X32.shape[0], dtype=np.intp)
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                return node
            idx = np.flatnonzero(inner)
            go_left = X32[idx, feat[idx]] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])

    def to_nested(self, k: int = 0) -> dict:
        if self.feature[k] < 0:
            mask = self.row_leaf == k
            out = {"rows": self.rows[mask].tolist()}
            if np.any(self.counts[mask] != 1):
                out["counts"] = self.counts[mask].tolist()
            return out
        return {
            "feature": int(self.feature[k]),
            "threshold": float(self.threshold[k]),
            "left": self.to_nested(int(self.left[k])),
            "right": self.to_nested(int(self.right[k])),
        }

    @classmethod
    def from_nested(cls, doc: dict) -> "Tree":
        feature, threshold, left, right = [], [], [], []
        rows, counts, row_leaf = [], [], []

        def visit(node: dict) -> int:
            k = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            if "rows" in node:
                r = node["rows"]
                rows.extend(r)
                counts.extend(node.get("counts", [1] * len(r)))
                row_leaf.extend([k] * len(r))
            else:
                feature[k] = int(node["feature"])
                threshold[k] = float(node["threshold"])
                left[k] = visit(node["left"])
                right[k] = visit(node["right"])
            return k

        visit(doc)
        order = np.argsort(rows, kind="stable")
        return cls(
            np.array(feature, dtype=np.intp),
            np.array(threshold, dtype=float),
            np.array(left, dtype=np.intp),
            np.array(right, dtype=np.intp),
            np.array(rows, dtype=np.intp)[order],
            np.array(counts, dtype=np.intp)[order],
            np.array(row_leaf, dtype=np.intp)[order],
        )


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    data: Dataset
    config: ForestConfig
    # stacked leaf -> row weight matrix over all trees, built in __post_init__
    _offsets: np.ndarray = field(init=False, repr=False, compare=False)
    _leaf_rows: sparse.csr_matrix = field(init=False, repr=False, compare=False)
    _values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = [t.num_nodes for t in self.trees]
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        total = int(offsets[-1])
        r, c, v = [], [], []
        for off, t in zip(offsets, self.trees):
            mass = np.bincount(t.row_leaf, weights=t.counts, minlength=t.num_nodes)
            r.append(t.row_leaf + off)
            c.append(t.rows)
            v.append(t.counts / mass[t.row_leaf])
        G = sparse.csr_matrix(
            (np.concatenate(v), (np.concatenate(r), np.concatenate(c))), shape=(total, self.data.n)
        )
        object.__setattr__(self, "_offsets", offsets[:-1])
        object.__setattr__(self, "_leaf_rows", G)
        object.__setattr__(self, "_values", G @ self.data.response)

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.data.d:
            raise DataError(f"query dimension {X.shape[-1]} != model dimension {self.data.d}")
        if not np.all(np.isfinite(X)):
            raise DataError("query points must be finite")
        return X

    def apply(self, X) -> np.ndarray:
        """Global leaf index (q x B) of each query point in each tree."""
        X = self._check(X)
        return np.column_stack([t.apply(X) + off for t, off in zip(self.trees, self._offsets)])

    def predict(self, X) -> np.ndarray:
        leaves = self.apply(X)
        return self._values[leaves].mean(axis=1)

    def weights(self, X) -> np.ndarray:
        """Dense (q x n) matrix of forest weights w_i(x) for each query row."""
        leaves = self.apply(X)
        q, B = leaves.shape
        Q = sparse.csr_matrix(
            (np.full(q * B, 1.0 / B), leaves.ravel(), np.arange(0, q * B + 1, B)),
            shape=(q, self._leaf_rows.shape[0]),
        )
        return (Q @ self._leaf_rows).toarray()

    def inbag_mask(self) -> np.ndarray:
        mask = np.zeros((self.data.n, self.num_trees), dtype=bool)
        for b, t in enumerate(self.trees):
            mask[t.rows, b] = True
        return mask

    def oob_predict(self) -> tuple[np.ndarray, np.ndarray]:
        """Out-of-bag predictions on the training rows and the OOB tree counts."""
        leaves = self.apply(self.data.features)
        vals = self._values[leaves]
        oob = ~self.inbag_mask()
        count = oob.sum(axis=1)
        total = np.where(oob, vals, 0.0).sum(axis=1)
        pred = np.divide(total, count, out=np.full(self.data.n, np.nan), where=count > 0)
        return pred, count

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "trees": [t.to_nested() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc: dict, data: Dataset) -> "ForestModel":
        return cls(
            tuple(Tree.from_nested(t) for t in doc["trees"]),
            data,
            ForestConfig(**doc["config"]),
        )


def _fit_tree(X, y, n, config: ForestConfig, mtry: int, b: int) -> Tree:
    # per-tree stream keyed on (seed, tree index): independent of scheduling
    rng = np.random.default_rng([config.seed, b])
    m = max(1, int(round(config.sample_fraction * n)))
    if config.with_replacement:
        counts_all = np.bincount(rng.integers(0, n, m), minlength=n)
        rows = np.flatnonzero(counts_all)
        counts = counts_all[rows]
    else:
        rows = np.sort(rng.choice(n, m, replace=False))
        counts = np.ones(rows.shape[0], dtype=np.intp)
    est = DecisionTreeRegressor(
        max_features=mtry,
        min_samples_leaf=config.min_leaf_size,
        max_depth=config.max_depth,
        random_state=int(rng.integers(2**31 - 1)),
    )
    est.fit(X[rows], y[rows], sample_weight=counts.astype(float) if config.with_replacement else None)
    sk = est.tree_
    leaf = sk.children_left < 0
    tree = Tree(
        np.where(leaf, -1, sk.feature).astype(np.intp),
        np.where(leaf, 0.0, sk.threshold).astype(float),
        sk.children_left.astype(np.intp),
        sk.children_right.astype(np.intp),
        rows.astype(np.intp),
        counts.astype(np.intp),
        np.zeros(rows.shape[0], dtype=np.intp),
    )
    return replace(tree, row_leaf=tree.apply(X[rows]))


def train_forest(data: Dataset, config: ForestConfig = ForestConfig(), n_jobs: int = 1) -> ForestModel:
    if data.n < 2 * config.min_leaf_size:
        raise DataError(f"need at least {2 * config.min_leaf_size} rows, got {data.n}")
    mtry = config.resolved_mtry(data.d)
    X, y = data.features, data.response
    if n_jobs == 1:
        trees = [_fit_tree(X, y, data.n, config, mtry, b) for b in range(config.num_trees)]
    else:
        from joblib import Parallel, delayed

        trees = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_fit_tree)(X, y, data.n, config, mtry, b) for b in range(config.num_trees)
        )
    return ForestModel(tuple(trees), data, config)


def predict_forest(model: ForestModel, x) -> float | np.ndarray:
    """Forest prediction; scalar for one point, vector for a matrix of points."""
    x = np.asarray(x, dtype=float)
    out = model.predict(x)
    return float(out[0]) if x.ndim == 1 else out


def forest_weights(model: ForestModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w = model.weights(x)
    return w[0] if x.ndim == 1 else w


@dataclass(frozen=True)
class VarianceModel:
    """Forest fit to squared residuals; reports ``c^2 * max(raw, floor)``."""

    forest: ForestModel
    c: float = DEFAULT_INFLATION
    floor: float = SIGMA2_FLOOR

    def raw(self, X) -> np.ndarray:
        return self.forest.predict(X)

    def sigma2(self, X) -> np.ndarray:
        return np.maximum(self.raw(X), self.floor) * self.c**2

    def to_dict(self) -> dict:
        return {"c": self.c, "floor": self.floor, "forest": self.forest.to_dict()}

    @classmethod
    def from_dict(cls, doc: dict, data: Dataset) -> "VarianceModel":
        return cls(ForestModel.from_dict(doc["forest"], data), doc["c"], doc["floor"])


def residual_data(model: ForestModel, residuals: str = "oob") -> Dataset:
    """Training rows paired with squared residuals (OOB where available, or in-sample)."""
    insample = model.predict(model.data.features)
    if residuals == "oob":
        oob, count = model.oob_predict()
        fitted = np.where(count > 0, oob, insample)
    elif residuals == "in_sample":
        fitted = insample
    else:
        raise ValueError(f"residuals must be 'oob' or 'in_sample', got {residuals!r}")
    r2 = (model.data.response - fitted) ** 2
    return model.data.with_response(r2)


def train_variance_model(
    model: ForestModel,
    data: Dataset | None = None,
    config: ForestConfig | None = None,
    c: float = DEFAULT_INFLATION,
    floor: float = SIGMA2_FLOOR,
    n_jobs: int = 1,
    residuals: str = "oob",
) -> VarianceModel:
    if data is not None and data is not model.data:
        if data.n != model.data.n or not np.array_equal(data.features, model.data.features):
            raise DataError("variance model must be trained on the forest's own training data")
    if c <= 0:
        raise ValueError("inflation factor c must be positive")
    config = config or model.config
    rforest = train_forest(residual_data(model, residuals), replace(config, seed=config.seed + 1), n_jobs=n_jobs)
    return VarianceModel(rforest, float(c), float(floor))


def predict_sigma2(vm: VarianceModel, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    out = vm.sigma2(x)
    return float(out[0]) if x.ndim == 1 else out
