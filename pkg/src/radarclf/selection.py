"""Greedy backward-elimination feature ranking and subset sweeps.

Elimination scores candidates on a single grouped 80/20 split: at each step
every surviving feature is dropped in turn, a classifier is trained without
it, and the drop that leaves the best validation macro-F1 becomes permanent.
The ranking is the removal order reversed, so rank 1 is the last survivor.

The per-step scores are reported parallel to the ranking: scores[j] is the
winning validation score of the step that removed ranking[j]. The rank-1
feature was never removed, so scores[0] repeats the final step's score,
keeping the list the same length as the ranking.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._util import derive_seed
from .evaluation import confusion_matrix, kfold_splits, macro_f1
from .forest import RandomForest

logger = logging.getLogger(__name__)


def grouped_train_test_split(groups, test_fraction: float = 0.2,
                             seed: int = 0,
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Row indices (train, test); whole groups land on one side.

    Groups enter the test side in seeded order until the test row count
    reaches the requested fraction. Both sides always keep at least one
    group.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    groups = np.asarray(groups)
    uniq = np.unique(groups)
    if uniq.size < 2:
        raise ValueError("need at least 2 groups to split")
    rng = np.random.default_rng(derive_seed(seed, "grouped-split"))
    order = rng.permutation(uniq.size)
    target = test_fraction * groups.size
    test_groups = set()
    picked = 0
    for gi in order:
        if picked >= target or len(test_groups) == uniq.size - 1:
            break
        test_groups.add(uniq[gi])
        picked += int(np.sum(groups == uniq[gi]))
    if not test_groups:
        test_groups.add(uniq[order[0]])
    is_test = np.isin(groups, sorted(test_groups))
    return np.flatnonzero(~is_test), np.flatnonzero(is_test)


@dataclass(frozen=True)
class FeatureRanking:
    """Feature names ordered best first, with per-step validation scores."""

    names: tuple[str, ...]
    scores: tuple[float, ...]
    models_trained: int = 0

    def __post_init__(self):
        if len(self.names) != len(self.scores):
            raise ValueError("scores must parallel the ranking")
        if len(set(self.names)) != len(self.names):
            raise ValueError("ranking repeats a feature name")

    def top(self, k: int) -> tuple[str, ...]:
        if not 1 <= k <= len(self.names):
            raise ValueError(f"subset size {k} out of range")
        return self.names[:k]

    def to_dict(self) -> dict:
        return {
            "format": "feature-ranking-v1",
            "names": list(self.names),
            "scores": list(self.scores),
            "models_trained": self.models_trained,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureRanking":
        if d.get("format") != "feature-ranking-v1":
            raise ValueError(f"unsupported ranking format: "
                             f"{d.get('format')!r}")
        return cls(names=tuple(d["names"]), scores=tuple(d["scores"]),
                   models_trained=int(d["models_trained"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "FeatureRanking":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _val_score(make_classifier, model_seed, X_tr, y_tr, X_va, y_va, cols,
               classes, n_jobs) -> float:
    clf = make_classifier(model_seed)
    clf.fit(X_tr[:, cols], y_tr, n_jobs=n_jobs)
    y_hat = clf.predict(X_va[:, cols])
    return macro_f1(confusion_matrix(y_va, y_hat, classes))


def backward_eliminate(X, y, groups, feature_names: Sequence[str],
                       make_classifier: Callable[[int], RandomForest],
                       seed: int = 0, test_fraction: float = 0.2,
                       n_jobs: int = 1) -> FeatureRanking:
    """Full backward elimination over all features.

    Candidates inside one step share a single derived model seed, so they
    differ only by the omitted column. Removal ties go to the higher
    feature index, keeping low-index features slightly sticky.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    names = tuple(feature_names)
    n = len(names)
    if X.shape[1] != n:
        raise ValueError("feature_names length must match X columns")
    if n < 2:
        raise ValueError("need at least 2 features to rank")
    classes = tuple(int(c) for c in np.unique(y))

    tr, va = grouped_train_test_split(groups, test_fraction,
                                      derive_seed(seed, "split"))
    X_tr, y_tr = X[tr], y[tr]
    X_va, y_va = X[va], y[va]

    alive = list(range(n))
    removal_order: list[int] = []
    step_scores: list[float] = []
    models = 0
    step = 0
    while len(alive) > 1:
        model_seed = derive_seed(seed, "step", step)
        best_score = -math.inf
        best_drop = None
        for pos, col in enumerate(alive):
            cols = alive[:pos] + alive[pos + 1:]
            score = _val_score(make_classifier, model_seed, X_tr, y_tr,
                               X_va, y_va, cols, classes, n_jobs)
            models += 1
            if not math.isfinite(score):
                cand = tuple(names[c] for c in cols)
                raise ValueError(
                    f"non-finite validation score for candidate set {cand}")
            # strict > keeps the earliest best; scanning ascending columns
            # means equal scores settle on the last (highest) index
            if score > best_score or (score == best_score
                                      and col > best_drop):
                best_score = score
                best_drop = col
        alive.remove(best_drop)
        removal_order.append(best_drop)
        step_scores.append(best_score)
        logger.debug("step %d: removed %s (val macro-F1 %.4f)",
                     step, names[best_drop], best_score)
        step += 1

    ranked = [alive[0]] + removal_order[::-1]
    scores = [step_scores[-1]] + step_scores[::-1]
    return FeatureRanking(
        names=tuple(names[c] for c in ranked),
        scores=tuple(scores), models_trained=models)


@dataclass(frozen=True)
class SubsetResult:
    """Outcome of a coarse-then-fine sweep over top-k feature subsets."""

    sizes: tuple[int, ...]
    mean_scores: tuple[float, ...]
    best_size: int
    best_score: float
    best_names: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "format": "subset-sweep-v1",
            "sizes": list(self.sizes),
            "mean_scores": list(self.mean_scores),
            "best_size": self.best_size,
            "best_score": self.best_score,
            "best_names": list(self.best_names),
        }


def _cv_score_subset(X, y, groups, cols, make_classifier, n_folds, seed,
                     classes, n_jobs) -> float:
    scores = []
    for f, (tr, te) in enumerate(kfold_splits(groups, n_folds, seed)):
        clf = make_classifier(derive_seed(seed, "sweep-fold", f))
        clf.fit(X[tr][:, cols], y[tr], n_jobs=n_jobs)
        y_hat = clf.predict(X[te][:, cols])
        scores.append(macro_f1(confusion_matrix(y[te], y_hat, classes)))
    return float(np.mean(scores))


def subset_sweep(X, y, groups, ranking: FeatureRanking,
                 feature_names: Sequence[str],
                 make_classifier: Callable[[int], RandomForest],
                 coarse_step: int = 5, fine_step: int = 1,
                 start_size: int = 10, n_folds: int = 10, seed: int = 0,
                 n_jobs: int = 1) -> SubsetResult:
    """Score top-k prefixes of a ranking, coarse grid then a fine window.

    ``feature_names`` names the columns of X. The coarse pass walks
    start_size, start_size + coarse_step, ... and always includes the full
    set. The fine pass re-walks the neighborhood of the coarse winner,
    coarse_step - 1 wide on each side, in fine_step strides. Score ties
    resolve to the smaller subset.
    """
    if coarse_step < 1 or fine_step < 1:
        raise ValueError("steps must be >= 1")
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    names = ranking.names
    n = len(names)
    col_of = {nm: i for i, nm in enumerate(feature_names)}
    if X.shape[1] != len(col_of):
        raise ValueError("feature_names length must match X columns")
    missing = [nm for nm in names if nm not in col_of]
    if missing:
        raise ValueError(f"ranking names absent from the matrix: {missing}")
    classes = tuple(int(c) for c in np.unique(y))
    ranked_cols = tuple(col_of[nm] for nm in names)
    cache: dict[int, float] = {}

    def score_size(k: int) -> float:
        if k not in cache:
            cols = list(ranked_cols[:k])
            cache[k] = _cv_score_subset(X, y, groups, cols, make_classifier,
                                        n_folds, seed, classes, n_jobs)
        return cache[k]

    first = min(start_size, n)
    coarse_sizes = list(range(first, n + 1, coarse_step))
    if coarse_sizes[-1] != n:
        coarse_sizes.append(n)
    for k in coarse_sizes:
        score_size(k)
    best_coarse = min(coarse_sizes,
                      key=lambda k: (-cache[k], k))

    half = coarse_step - 1
    fine_lo = max(1, best_coarse - half)
    fine_hi = min(n, best_coarse + half)
    for k in range(fine_lo, fine_hi + 1, fine_step):
        score_size(k)

    sizes = tuple(sorted(cache))
    best = min(sizes, key=lambda k: (-cache[k], k))
    return SubsetResult(
        sizes=sizes,
        mean_scores=tuple(cache[k] for k in sizes),
        best_size=best, best_score=cache[best],
        best_names=names[:best])
