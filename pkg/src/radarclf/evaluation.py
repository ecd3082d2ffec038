"""Grouped cross-validation, macro-F1 scoring, and report generation.

Folds are built over cluster ids so windows of the same physical track never
straddle train and test. Nested CV selects a (coupling method, resampling)
configuration on inner folds and scores outer test folds once; the binary
model banks are shared by all couplers inside a fold, so the coupler grid
costs no extra training.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._util import derive_seed
from .ensemble import (CouplingMethod, ModelBank, required_families,
                       default_forest_factory, train_model_bank)
from .forest import RandomForest
from .imbalance import ResampleSpec

logger = logging.getLogger(__name__)


# -- scoring -------------------------------------------------------------------

def confusion_matrix(y_true, y_pred, classes: Sequence[int]) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    classes = [int(c) for c in classes]
    pos = {c: i for i, c in enumerate(classes)}
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("label arrays differ in length")
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if int(t) not in pos or int(p) not in pos:
            raise ValueError(f"label outside class list: true={t} pred={p}")
        cm[pos[int(t)], pos[int(p)]] += 1
    return cm


def precision_recall_f1(cm: np.ndarray):
    """Per-class precision, recall, F1 with the 0/0 -> 0 convention."""
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diag(cm)
    col = cm.sum(axis=0)
    row = cm.sum(axis=1)
    precision = np.divide(tp, col, out=np.zeros_like(tp), where=col > 0)
    recall = np.divide(tp, row, out=np.zeros_like(tp), where=row > 0)
    pr = precision + recall
    f1 = np.divide(2.0 * precision * recall, pr,
                   out=np.zeros_like(tp), where=pr > 0)
    return precision, recall, f1


def macro_f1(cm: np.ndarray) -> float:
    """Mean F1 over the classes that actually occur in the truth rows."""
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError("confusion matrix must be square")
    if cm.sum() == 0:
        raise ValueError("empty confusion matrix")
    present = cm.sum(axis=1) > 0
    if not np.all(present):
        logger.debug("macro_f1: %d class(es) absent from truth, excluded",
                     int(np.sum(~present)))
    _, _, f1 = precision_recall_f1(cm)
    return float(np.mean(f1[present]))


def per_class_recall(cm: np.ndarray) -> np.ndarray:
    return precision_recall_f1(cm)[1]


# -- grouped folds ---------------------------------------------------------------

def grouped_kfold(groups, n_folds: int, seed: int = 0) -> np.ndarray:
    """Fold index per row; whole groups assigned, sample counts balanced.

    Groups are placed largest first onto the currently lightest fold, which
    bounds the fold-size spread by the largest group size. The seed only
    permutes the order of equally sized groups.
    """
    groups = np.asarray(groups)
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    uniq, counts = np.unique(groups, return_counts=True)
    if uniq.size < n_folds:
        raise ValueError(
            f"only {uniq.size} groups for {n_folds} folds")
    rng = np.random.default_rng(derive_seed(seed, "grouped-kfold"))
    jitter = rng.permutation(uniq.size)
    order = np.lexsort((jitter, -counts))
    loads = np.zeros(n_folds, dtype=np.int64)
    fold_of_group: dict = {}
    for gi in order:
        f = int(np.argmin(loads))
        fold_of_group[uniq[gi]] = f
        loads[f] += counts[gi]
    return np.array([fold_of_group[g] for g in groups], dtype=np.int64)


def kfold_splits(groups, n_folds: int, seed: int = 0,
                 ) -> list[tuple[np.ndarray, np.ndarray]]:
    """(train_idx, test_idx) pairs for each fold of a grouped k-fold."""
    fold = grouped_kfold(groups, n_folds, seed)
    out = []
    for f in range(n_folds):
        test = np.flatnonzero(fold == f)
        train = np.flatnonzero(fold != f)
        out.append((train, test))
    return out


# -- single-configuration CV -----------------------------------------------------

def case_name(method: CouplingMethod, resample_method: str) -> str:
    return f"{method.value}+{resample_method}"


@dataclass
class EvaluationReport:
    """Cross-validation outcome for one (method, resample) configuration."""

    name: str
    method: str
    resample: str
    classes: tuple[int, ...]
    seed: int
    fold_scores: list[float] = field(default_factory=list)
    fold_confusions: list[np.ndarray] = field(default_factory=list)
    feature_subset: str = "all"

    @property
    def macro_f1_mean(self) -> float:
        return float(np.mean(self.fold_scores))

    @property
    def macro_f1_std(self) -> float:
        return float(np.std(self.fold_scores))

    @property
    def pooled_confusion(self) -> np.ndarray:
        out = np.zeros((len(self.classes), len(self.classes)), dtype=np.int64)
        for cm in self.fold_confusions:
            out += cm
        return out

    def to_dict(self) -> dict:
        pooled = self.pooled_confusion
        precision, recall, f1 = precision_recall_f1(pooled)
        return {
            "config": {
                "name": self.name,
                "method": self.method,
                "resample": self.resample,
                "feature_subset": self.feature_subset,
                "classes": list(self.classes),
                "seed": self.seed,
            },
            "folds": [
                {"fold": i, "macro_f1": s, "confusion": cm.tolist()}
                for i, (s, cm) in enumerate(zip(self.fold_scores,
                                                self.fold_confusions))
            ],
            "summary": {
                "macro_f1_mean": self.macro_f1_mean,
                "macro_f1_std": self.macro_f1_std,
                "pooled_confusion": pooled.tolist(),
                "per_class": {
                    "precision": precision.tolist(),
                    "recall": recall.tolist(),
                    "f1": f1.tolist(),
                },
            },
        }


def _bank_fit_count(bank: ModelBank) -> int:
    return (len(bank.pairwise) + len(bank.ova)
            + (1 if bank.multiclass is not None else 0))


def _train_shared_bank(X, y, classes, methods, resample_method,
                       make_classifier, seed_parts, resample_seed_parts,
                       class_weighting, n_jobs) -> ModelBank:
    """Bank over the classes present in this training fold.

    A fold that lost every row of a rare class trains without that class
    (logged); its validation rows then necessarily score as errors against
    the full class list.
    """
    present = set(np.unique(y).tolist())
    fold_classes = tuple(c for c in classes if c in present)
    if len(fold_classes) < 2:
        raise ValueError("fold training rows contain fewer than 2 classes")
    if len(fold_classes) < len(classes):
        gone = [c for c in classes if c not in present]
        logger.warning("training fold lacks class(es) %s; bank trained "
                       "without them", gone)
    families = sorted(required_families(methods))
    spec = ResampleSpec(method=resample_method,
                        seed=derive_seed(*resample_seed_parts))
    return train_model_bank(
        X, y, fold_classes, make_classifier, resample_spec=spec,
        seed=derive_seed(*seed_parts), class_weighting=class_weighting,
        families=families, n_jobs=n_jobs)


def cross_validate(X, y, groups, classes: Sequence[int],
                   method: CouplingMethod, resample_method: str = "none",
                   n_folds: int = 10, seed: int = 0,
                   make_classifier: Callable[[int], RandomForest] | None = None,
                   class_weighting: bool = False,
                   two_stage_threshold: float | None = None,
                   feature_subset: str = "all",
                   n_jobs: int = 1) -> EvaluationReport:
    """Grouped k-fold CV of one configuration."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    classes = tuple(int(c) for c in classes)
    make = make_classifier or default_forest_factory()
    report_obj = EvaluationReport(
        name=case_name(method, resample_method), method=method.value,
        resample=resample_method, classes=classes, seed=seed,
        feature_subset=feature_subset)
    for f, (tr, te) in enumerate(kfold_splits(groups, n_folds, seed)):
        bank = _train_shared_bank(
            X[tr], y[tr], classes, [method], resample_method, make,
            ("cv", seed, f), ("cv-rs", seed, f), class_weighting, n_jobs)
        y_hat = bank.decide(X[te], method,
                            two_stage_threshold=two_stage_threshold)
        cm = confusion_matrix(y[te], y_hat, classes)
        report_obj.fold_scores.append(macro_f1(cm))
        report_obj.fold_confusions.append(cm)
    return report_obj


# -- nested CV -------------------------------------------------------------------

@dataclass
class NestedCvResult:
    """Per-configuration outer-fold reports plus the inner-selection track."""

    classes: tuple[int, ...]
    seed: int
    case_names: list[str]
    reports: dict[str, EvaluationReport]
    selected_per_fold: list[str]
    selected_scores: list[float]
    inner_mean_scores: list[dict[str, float]]
    fits_per_inner_fold: list[int]
    n_fits_total: int

    @property
    def selected_mean(self) -> float:
        return float(np.mean(self.selected_scores))

    @property
    def selected_std(self) -> float:
        return float(np.std(self.selected_scores))

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "seed": self.seed,
            "configs": {name: r.to_dict() for name, r in
                        sorted(self.reports.items())},
            "selection": {
                "per_outer_fold": self.selected_per_fold,
                "outer_scores": self.selected_scores,
                "macro_f1_mean": self.selected_mean,
                "macro_f1_std": self.selected_std,
                "inner_mean_scores": self.inner_mean_scores,
            },
            "fit_audit": {
                "per_inner_fold": self.fits_per_inner_fold,
                "total": self.n_fits_total,
            },
        }


def nested_cv(X, y, groups, classes: Sequence[int],
              methods: Sequence[CouplingMethod],
              resample_methods: Sequence[str] = ("none",),
              k_outer: int = 10, k_inner: int = 10, seed: int = 0,
              make_classifier: Callable[[int], RandomForest] | None = None,
              class_weighting: bool = False,
              feature_subset: str = "all",
              n_jobs: int = 1) -> NestedCvResult:
    """Nested grouped CV over a (method, resample) grid.

    Every configuration gets scored on every outer test fold (one shared
    bank per resample method per fold), and the inner folds additionally
    pick a winning configuration per outer fold. With a 1x1 grid the inner
    loop is skipped entirely and this is plain k-fold CV.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    classes = tuple(int(c) for c in classes)
    methods = list(methods)
    resample_methods = list(resample_methods)
    make = make_classifier or default_forest_factory()
    cases = [(m, r) for m in methods for r in resample_methods]
    names = [case_name(m, r) for m, r in cases]
    reports = {
        name: EvaluationReport(name=name, method=m.value, resample=r,
                               classes=classes, seed=seed,
                               feature_subset=feature_subset)
        for name, (m, r) in zip(names, cases)}
    trivial_grid = len(cases) == 1

    selected_per_fold: list[str] = []
    selected_scores: list[float] = []
    inner_mean_scores: list[dict[str, float]] = []
    fits_per_inner_fold: list[int] = []
    n_fits = 0

    for o, (tr, te) in enumerate(kfold_splits(groups, k_outer, seed)):
        # inner selection
        if trivial_grid:
            best_name = names[0]
            inner_mean_scores.append({})
        else:
            inner_sums = {name: 0.0 for name in names}
            inner_splits = kfold_splits(groups[tr], k_inner,
                                        derive_seed(seed, "inner", o))
            for i, (itr, ite) in enumerate(inner_splits):
                fold_fits = 0
                rows_tr = tr[itr]
                rows_te = tr[ite]
                for r in resample_methods:
                    bank = _train_shared_bank(
                        X[rows_tr], y[rows_tr], classes, methods, r, make,
                        ("nested", seed, o, i, r),
                        ("nested-rs", seed, o, i, r),
                        class_weighting, n_jobs)
                    fold_fits += _bank_fit_count(bank)
                    for m in methods:
                        y_hat = bank.decide(X[rows_te], m)
                        cm = confusion_matrix(y[rows_te], y_hat, classes)
                        inner_sums[case_name(m, r)] += macro_f1(cm)
                fits_per_inner_fold.append(fold_fits)
                n_fits += fold_fits
            means = {name: s / k_inner for name, s in inner_sums.items()}
            inner_mean_scores.append(means)
            # ties resolve to the earliest case in grid order
            best_name = max(names, key=lambda nm: (means[nm],
                                                   -names.index(nm)))

        # outer scoring, one shared bank per resample method
        for r in resample_methods:
            bank = _train_shared_bank(
                X[tr], y[tr], classes, methods, r, make,
                ("outer", seed, o, r), ("outer-rs", seed, o, r),
                class_weighting, n_jobs)
            n_fits += _bank_fit_count(bank)
            for m in methods:
                y_hat = bank.decide(X[te], m)
                cm = confusion_matrix(y[te], y_hat, classes)
                rep = reports[case_name(m, r)]
                rep.fold_scores.append(macro_f1(cm))
                rep.fold_confusions.append(cm)

        selected_per_fold.append(best_name)
        selected_scores.append(reports[best_name].fold_scores[o])

    return NestedCvResult(
        classes=classes, seed=seed, case_names=names, reports=reports,
        selected_per_fold=selected_per_fold, selected_scores=selected_scores,
        inner_mean_scores=inner_mean_scores,
        fits_per_inner_fold=fits_per_inner_fold, n_fits_total=n_fits)


# -- report rendering --------------------------------------------------------------

def _delta_matrix(cm: np.ndarray, base: np.ndarray) -> np.ndarray:
    return cm.astype(np.int64) - base.astype(np.int64)


def render_report(reports: dict[str, EvaluationReport], baseline: str,
                  class_names: Sequence[str] | None = None,
                  ) -> tuple[str, dict]:
    """Text table plus JSON dict, confusion deltas taken against a baseline."""
    if baseline not in reports:
        raise ValueError(f"unknown baseline configuration: {baseline!r}")
    base_cm = reports[baseline].pooled_confusion
    classes = reports[baseline].classes
    labels = (list(class_names) if class_names is not None
              else [str(c) for c in classes])

    lines = []
    width = max(len(n) for n in reports) + 2
    lines.append(f"{'configuration':<{width}}  macro-F1 (mean +/- std over "
                 f"folds)")
    for name in sorted(reports):
        r = reports[name]
        mark = "  [baseline]" if name == baseline else ""
        lines.append(f"{name:<{width}}  {r.macro_f1_mean:.4f} +/- "
                     f"{r.macro_f1_std:.4f}{mark}")
    lines.append("")

    json_out: dict = {"baseline": baseline, "configs": {}}
    for name in sorted(reports):
        r = reports[name]
        pooled = r.pooled_confusion
        delta = _delta_matrix(pooled, base_cm)
        d = r.to_dict()
        d["confusion_delta_vs_baseline"] = delta.tolist()
        json_out["configs"][name] = d

        corner = "true\\pred"
        lw = max(len(lb) for lb in [*labels, corner])
        cw = max(8, max(len(lb) for lb in labels))
        lines.append(f"== {name} ==")
        header = f"{corner:>{lw}}  " + "  ".join(
            f"{lb:>{cw}}" for lb in labels)
        lines.append(header)
        for i, lb in enumerate(labels):
            row = "  ".join(f"{int(v):>{cw}}" for v in pooled[i])
            lines.append(f"{lb:>{lw}}  {row}")
        if name != baseline:
            lines.append(f"-- delta vs {baseline} --")
            for i, lb in enumerate(labels):
                row = "  ".join(f"{int(v):>+{cw}}" for v in delta[i])
                lines.append(f"{lb:>{lw}}  {row}")
        lines.append("")
    return "\n".join(lines), json_out
