"""Gini-split decision trees and a bagged random forest.

Determinism contract: training rows are sorted by a content digest before any
seeded draw, each tree consumes its own RNG stream derived from
(seed, tree index), and all tie-breaks are lexicographic. The same data,
config, and seed therefore always give the same model, regardless of row
order or how many trees a later config adds.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._util import canonical_order, derive_seed


def gini_impurity(counts) -> float:
    """Gini impurity 1 - sum((c_i / n)^2) of a class count vector.

    Counts may be fractional (weighted). An all-zero vector has no defined
    impurity and raises.
    """
    c = np.asarray(counts, dtype=np.float64)
    if c.ndim != 1:
        raise ValueError("counts must be one-dimensional")
    if np.any(c < 0):
        raise ValueError("counts must be non-negative")
    total = float(c.sum())
    if total <= 0.0:
        raise ValueError("impurity of an empty count vector is undefined")
    p = c / total
    return float(1.0 - np.dot(p, p))


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 50
    split_criterion: str = "gini"
    max_features: int | str = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.split_criterion != "gini":
            raise ValueError("only the gini split criterion is supported")
        if isinstance(self.max_features, str) and self.max_features != "sqrt":
            raise ValueError("max_features must be an int or 'sqrt'")
        if isinstance(self.max_features, int) and self.max_features < 1:
            raise ValueError("max_features must be positive")

    def resolve_max_features(self, n_features: int) -> int:
        if self.max_features == "sqrt":
            m = int(math.sqrt(n_features))
            return max(1, min(m, n_features))
        return max(1, min(int(self.max_features), n_features))


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "hist")

    def __init__(self, feature=-1, threshold=0.0, left=None, right=None,
                 hist=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.hist = hist

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def to_dict(self):
        if self.is_leaf:
            return {"h": [float(v) for v in self.hist]}
        return {"f": int(self.feature), "t": float(self.threshold),
                "l": self.left.to_dict(), "r": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d):
        if "h" in d:
            return cls(hist=np.array(d["h"], dtype=np.float64))
        return cls(feature=d["f"], threshold=d["t"],
                   left=cls.from_dict(d["l"]), right=cls.from_dict(d["r"]))


def _best_split(X, y, w, rows, n_classes, mtry, rng):
    """Best (feature, threshold) on a fresh random feature subset.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Returns None when no split strictly reduces the total weighted
    child impurity. Ties break on (feature index, threshold), both ascending,
    which the ascending scan order enforces by strict improvement.
    """
    feats = np.sort(rng.choice(X.shape[1], size=mtry, replace=False))
    ww = w[rows]
    yy = y[rows]
    total_w = ww.sum()
    hist = np.bincount(yy, weights=ww, minlength=n_classes)
    parent_metric = total_w - float(np.dot(hist, hist)) / total_w

    best = None  # (metric, feature, threshold)
    for f in feats:
        xs = X[rows, f]
        order = np.argsort(xs, kind="stable")
        xs_s = xs[order]
        boundaries = np.nonzero(xs_s[:-1] < xs_s[1:])[0]
        if boundaries.size == 0:
            continue
        M = np.zeros((rows.size, n_classes))
        M[np.arange(rows.size), yy[order]] = ww[order]
        csum = np.cumsum(M, axis=0)
        wl = np.cumsum(ww[order])
        sl = np.einsum("ij,ij->i", csum, csum)
        right = hist - csum
        sr = np.einsum("ij,ij->i", right, right)
        wl_b = wl[boundaries]
        wr_b = total_w - wl_b
        metric = (wl_b - sl[boundaries] / wl_b) + (wr_b - sr[boundaries] / wr_b)
        k = int(np.argmin(metric))
        m = float(metric[k])
        if best is None or m < best[0]:
            b = boundaries[k]
            thr = 0.5 * (xs_s[b] + xs_s[b + 1])
            best = (m, int(f), float(thr))
    if best is None or best[0] >= parent_metric:
        return None
    return best[1], best[2]


def _fit_tree(X, y, w, n_classes, mtry, rng) -> _Node:
    """Grow one unpruned tree to purity or split exhaustion.

    Nodes are expanded depth-first, left child first, so the RNG stream is a
    pure function of the resulting tree structure.
    """
    root = _Node()
    stack = [(root, np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        hist = np.bincount(y[rows], weights=w[rows], minlength=n_classes)
        if np.count_nonzero(hist) <= 1:
            node.hist = hist
            continue
        split = _best_split(X, y, w, rows, n_classes, mtry, rng)
        if split is None:
            node.hist = hist
            continue
        f, thr = split
        mask = X[rows, f] <= thr
        node.feature = f
        node.threshold = thr
        node.left = _Node()
        node.right = _Node()
        # push right first so the left child is expanded next (LIFO)
        stack.append((node.right, rows[~mask]))
        stack.append((node.left, rows[mask]))
    return root


def _tree_proba(root: _Node, X: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((X.shape[0], n_classes))
    stack = [(root, np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        if node.is_leaf:
            out[rows] = node.hist / node.hist.sum()
            continue
        mask = X[rows, node.feature] <= node.threshold
        stack.append((node.left, rows[mask]))
        stack.append((node.right, rows[~mask]))
    return out


def _fit_one(X, y, w, n_classes, mtry, bootstrap, seed, tree_index) -> _Node:
    rng = np.random.default_rng(derive_seed(seed, tree_index))
    if bootstrap:
        idx = rng.integers(0, X.shape[0], size=X.shape[0])
        Xb, yb, wb = X[idx], y[idx], w[idx]
    else:
        Xb, yb, wb = X, y, w
    return _fit_tree(Xb, yb, wb, n_classes, mtry, rng)


def _fit_chunk_job(args):
    X, y, w, n_classes, mtry, bootstrap, seed, tree_indices = args
    return [_fit_one(X, y, w, n_classes, mtry, bootstrap, seed, t)
            for t in tree_indices]


class RandomForest:
    """Bagged ensemble of gini trees with averaged leaf frequencies."""

    def __init__(self, config: ForestConfig = ForestConfig()):
        self.config = config
        self.classes_: np.ndarray | None = None
        self.trees_: list[_Node] = []
        self._n_features = 0

    def fit(self, X, y, sample_weight=None, n_jobs: int = 1) -> "RandomForest":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("X and y shapes disagree")
        if X.shape[0] == 0:
            raise ValueError("cannot fit on an empty dataset")
        if sample_weight is None:
            w = np.ones(X.shape[0])
        else:
            w = np.asarray(sample_weight, dtype=np.float64)
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("sample weights must be finite and >= 0")
            keep = w > 0
            X, y, w = X[keep], y[keep], w[keep]
            if X.shape[0] == 0:
                raise ValueError("all sample weights are zero")

        self.classes_ = np.unique(y)
        codes = np.searchsorted(self.classes_, y)
        order = canonical_order(X, codes, w)
        Xs, ys, ws = X[order], codes[order], w[order]

        self._n_features = X.shape[1]
        mtry = self.config.resolve_max_features(self._n_features)
        common = (Xs, ys, ws, len(self.classes_), mtry, self.config.bootstrap,
                  self.config.seed)
        if n_jobs > 1 and self.config.n_trees > 1:
            workers = min(n_jobs, self.config.n_trees)
            chunks = [list(range(k, self.config.n_trees, workers))
                      for k in range(workers)]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_fit_chunk_job,
                                      [common + (c,) for c in chunks]))
            trees: list[_Node | None] = [None] * self.config.n_trees
            for chunk, part in zip(chunks, parts):
                for t, tree in zip(chunk, part):
                    trees[t] = tree
            self.trees_ = trees
        else:
            self.trees_ = [_fit_one(*common, t)
                           for t in range(self.config.n_trees)]
        return self

    def predict_proba(self, X) -> np.ndarray:
        if self.classes_ is None:
            raise RuntimeError("forest is not fitted")
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.shape[1] != self._n_features:
            raise ValueError(
                f"expected {self._n_features} features, got {X.shape[1]}")
        acc = np.zeros((X.shape[0], len(self.classes_)))
        for tree in self.trees_:
            acc += _tree_proba(tree, X, len(self.classes_))
        return acc / len(self.trees_)

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        if self.classes_ is None:
            raise RuntimeError("forest is not fitted")
        return {
            "format": "forest-v1",
            "config": {
                "n_trees": self.config.n_trees,
                "split_criterion": self.config.split_criterion,
                "max_features": self.config.max_features,
                "bootstrap": self.config.bootstrap,
                "seed": self.config.seed,
            },
            "n_features": self._n_features,
            "classes": [int(c) for c in self.classes_],
            "trees": [t.to_dict() for t in self.trees_],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        if d.get("format") != "forest-v1":
            raise ValueError(f"unsupported forest format: {d.get('format')!r}")
        cfg = d["config"]
        forest = cls(ForestConfig(
            n_trees=cfg["n_trees"], split_criterion=cfg["split_criterion"],
            max_features=cfg["max_features"], bootstrap=cfg["bootstrap"],
            seed=cfg["seed"]))
        forest.classes_ = np.array(d["classes"], dtype=np.int64)
        forest._n_features = d["n_features"]
        forest.trees_ = [_Node.from_dict(td) for td in d["trees"]]
        return forest

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "RandomForest":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_single_tree(X, y, sample_weight=None, max_features: int | None = None,
                    seed: int = 0, tree_index: int = 0):
    """Fit one unbootstrapped tree the way the forest would.

    Convenience for studying tree behavior in isolation; uses the same RNG
    stream derivation as tree ``tree_index`` of a forest seeded with ``seed``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    w = np.ones(X.shape[0]) if sample_weight is None else np.asarray(
        sample_weight, dtype=np.float64)
    classes = np.unique(y)
    codes = np.searchsorted(classes, y)
    order = canonical_order(X, codes, w)
    rng = np.random.default_rng(derive_seed(seed, tree_index))
    mtry = X.shape[1] if max_features is None else max_features
    root = _fit_tree(X[order], codes[order], w[order], len(classes), mtry, rng)
    return root, classes


def tree_predict_proba(root, classes, X) -> np.ndarray:
    """Leaf class frequencies of a single tree for each row of X."""
    return _tree_proba(root, np.ascontiguousarray(X, dtype=np.float64),
                       len(classes))


def class_weights(y) -> dict[int, float]:
    """Inverse-share class weights: w_k = n_total / (K_present * n_k)."""
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("cannot weight an empty label vector")
    classes, counts = np.unique(y, return_counts=True)
    k = len(classes)
    return {int(c): float(y.size / (k * n)) for c, n in zip(classes, counts)}


def per_sample_weights(y) -> np.ndarray:
    """Expand class weights to one weight per sample."""
    y = np.asarray(y, dtype=np.int64)
    cw = class_weights(y)
    return np.array([cw[int(v)] for v in y])
