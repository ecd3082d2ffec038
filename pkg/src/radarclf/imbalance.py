"""Resampling strategies for class-imbalanced training sets.

Every resampler first sorts its input rows by content digest, so the output
depends only on the data, the method, and the seed, never on row order.
Neighbor searches run on z-scored features (statistics taken from the data
handed in); interpolation happens in the original feature space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._util import canonical_order, row_digests

logger = logging.getLogger(__name__)

RESAMPLE_METHODS = (
    "none", "random_under", "random_over", "custom_under", "tomek",
    "smote", "smote_tomek",
)


@dataclass(frozen=True)
class ResampleSpec:
    method: str = "none"
    k_neighbors: int = 5
    floor_multiple: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.method not in RESAMPLE_METHODS:
            raise ValueError(
                f"unknown resample method {self.method!r}; "
                f"expected one of {RESAMPLE_METHODS}")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be at least 1")
        if self.floor_multiple < 1:
            raise ValueError("floor_multiple must be at least 1")


def resample(X, y, spec: ResampleSpec):
    """Dispatch to the configured resampler; 'none' passes data through."""
    if spec.method == "none":
        return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64)
    if spec.method == "random_under":
        return random_undersample(X, y, seed=spec.seed)
    if spec.method == "random_over":
        return random_oversample(X, y, seed=spec.seed)
    if spec.method == "custom_under":
        return custom_undersample(X, y, floor_multiple=spec.floor_multiple,
                                  seed=spec.seed)
    if spec.method == "tomek":
        return tomek_remove(X, y)
    if spec.method == "smote":
        return smote(X, y, k=spec.k_neighbors, seed=spec.seed)
    return smote_tomek(X, y, k=spec.k_neighbors, seed=spec.seed)


def _canonical(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X and y shapes disagree")
    if X.shape[0] == 0:
        raise ValueError("cannot resample an empty dataset")
    order = canonical_order(X, y)
    return X[order], y[order]


def _zscore(X: np.ndarray) -> np.ndarray:
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0.0, sd, 1.0)  # constant columns contribute 0
    return (X - mu) / sd


def random_undersample(X, y, seed: int = 0):
    """Drop rows at random until every class matches the smallest class."""
    X, y = _canonical(X, y)
    classes, counts = np.unique(y, return_counts=True)
    m = int(counts.min())
    rng = np.random.default_rng(seed)
    keep_parts = []
    for c in classes:
        idx = np.nonzero(y == c)[0]
        if idx.size > m:
            idx = np.sort(rng.choice(idx, size=m, replace=False))
        keep_parts.append(idx)
    keep = np.concatenate(keep_parts)
    return X[keep], y[keep]


def custom_undersample(X, y, floor_multiple: int = 5, seed: int = 0):
    """Cap every class at floor_multiple times the smallest class size.

    Softer than full undersampling: the majority keeps a bounded lead
    instead of being cut all the way down.
    """
    X, y = _canonical(X, y)
    classes, counts = np.unique(y, return_counts=True)
    cap = int(counts.min()) * floor_multiple
    rng = np.random.default_rng(seed)
    keep_parts = []
    for c in classes:
        idx = np.nonzero(y == c)[0]
        if idx.size > cap:
            idx = np.sort(rng.choice(idx, size=cap, replace=False))
        keep_parts.append(idx)
    keep = np.concatenate(keep_parts)
    return X[keep], y[keep]


def random_oversample(X, y, seed: int = 0):
    """Replicate rows at random until every class matches the largest class."""
    X, y = _canonical(X, y)
    classes, counts = np.unique(y, return_counts=True)
    top = int(counts.max())
    rng = np.random.default_rng(seed)
    extra_parts = []
    for c in classes:
        idx = np.nonzero(y == c)[0]
        need = top - idx.size
        if need > 0:
            extra_parts.append(rng.choice(idx, size=need, replace=True))
    if not extra_parts:
        return X, y
    extra = np.concatenate(extra_parts)
    return np.vstack([X, X[extra]]), np.concatenate([y, y[extra]])


def _nearest_neighbor(Z: np.ndarray) -> np.ndarray:
    """Index of each row's exact 1-nearest neighbor (ties: lowest index)."""
    n = Z.shape[0]
    nn = np.zeros(n, dtype=np.int64)
    sq = np.einsum("ij,ij->i", Z, Z)
    block = max(1, int(2e7 // max(n, 1)))
    for s in range(0, n, block):
        e = min(n, s + block)
        d2 = sq[s:e, None] + sq[None, :] - 2.0 * (Z[s:e] @ Z.T)
        d2[np.arange(e - s), np.arange(s, e)] = np.inf
        nn[s:e] = np.argmin(d2, axis=1)
    return nn


def tomek_remove(X, y):
    """Drop the majority member of every cross-class mutual 1-NN pair.

    Links are found once on the input data and removed in a single pass.
    When both classes of a link have equal counts, the row with the
    lexicographically larger content digest goes.
    """
    X, y = _canonical(X, y)
    n = X.shape[0]
    if n < 2:
        return X, y
    nn = _nearest_neighbor(_zscore(X))
    classes, counts = np.unique(y, return_counts=True)
    count_of = dict(zip(classes.tolist(), counts.tolist()))
    digests = row_digests(X, y)
    drop = set()
    for a in range(n):
        b = int(nn[a])
        if b <= a:
            continue
        if int(nn[b]) != a or y[a] == y[b]:
            continue
        ca, cb = count_of[int(y[a])], count_of[int(y[b])]
        if ca > cb:
            drop.add(a)
        elif cb > ca:
            drop.add(b)
        else:
            drop.add(a if digests[a] > digests[b] else b)
    if not drop:
        return X, y
    keep = np.array([i for i in range(n) if i not in drop], dtype=np.int64)
    return X[keep], y[keep]


def smote(X, y, k: int = 5, seed: int = 0):
    """Upsample every minority class to the majority count with synthetic
    points interpolated toward same-class neighbors.

    Each synthetic row is x + u * (x_nn - x) for a uniform u in [0, 1), a
    random base row x, and x_nn one of its k nearest same-class neighbors
    (k clamps to class size minus one). A single-row class cannot be
    interpolated; it falls back to replication and logs a warning.
    """
    X, y = _canonical(X, y)
    classes, counts = np.unique(y, return_counts=True)
    top = int(counts.max())
    rng = np.random.default_rng(seed)
    Z = _zscore(X)
    out_X = [X]
    out_y = [y]
    for c, n_c in zip(classes, counts):
        need = top - int(n_c)
        if need == 0:
            continue
        idx = np.nonzero(y == c)[0]
        Xc = X[idx]
        if n_c == 1:
            logger.warning(
                "smote: class %d has a single sample; replicating instead of "
                "interpolating", int(c))
            out_X.append(np.repeat(Xc, need, axis=0))
            out_y.append(np.full(need, c, dtype=np.int64))
            continue
        k_eff = min(k, int(n_c) - 1)
        Zc = Z[idx]
        d2 = (np.einsum("ij,ij->i", Zc, Zc)[:, None]
              + np.einsum("ij,ij->i", Zc, Zc)[None, :] - 2.0 * (Zc @ Zc.T))
        np.fill_diagonal(d2, np.inf)
        nbrs = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
        base = rng.integers(0, int(n_c), size=need)
        pick = rng.integers(0, k_eff, size=need)
        u = rng.random(need)
        xb = Xc[base]
        xn = Xc[nbrs[base, pick]]
        out_X.append(xb + u[:, None] * (xn - xb))
        out_y.append(np.full(need, c, dtype=np.int64))
    return np.vstack(out_X), np.concatenate(out_y)


def smote_tomek(X, y, k: int = 5, seed: int = 0):
    """SMOTE first, then one Tomek cleaning pass over the combined set."""
    X2, y2 = smote(X, y, k=k, seed=seed)
    return tomek_remove(X2, y2)
