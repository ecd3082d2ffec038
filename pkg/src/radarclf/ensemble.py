"""Binarized training and probability coupling for multiclass decisions.

A sample is scored by a bank of binary classifiers: one-vs-all models give a
membership probability per class, pairwise models give p_ij, the probability
of class i against class j, with p_ji = 1 - p_ij by construction. Coupling
rules turn those tables into one decision:

* ova:   argmax of the one-vs-all vector
* pwc1:  majority voting over thresholded pairwise outputs; vote ties are
         re-scored with pwc2 among the tied classes
* pwc2:  sum of raw pairwise probabilities
* pwc3:  sum of sigmoid-sharpened pairwise probabilities
* pwc4:  like pwc2 below 0.5 but saturating to 1 above
* pwc5:  like pwc2 above 0.5 but clipped to 0 below
* pwc-ova:  pairwise sums where each term is weighted by the two classes'
            one-vs-all probabilities
* pwc-ova2: one-vs-all probability times the plain pairwise sum
* multiclass: a single multiclass forest, kept as the baseline

Argmax ties always resolve to the lowest class index.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from ._util import derive_seed
from .data_model import ClassLabel
from .features import REGISTRY_VERSION
from .forest import ForestConfig, RandomForest, per_sample_weights
from .imbalance import ResampleSpec, resample

logger = logging.getLogger(__name__)


class CouplingMethod(str, Enum):
    MULTICLASS = "multiclass"
    OVA = "ova"
    PWC1 = "pwc1"
    PWC2 = "pwc2"
    PWC3 = "pwc3"
    PWC4 = "pwc4"
    PWC5 = "pwc5"
    PWC_OVA = "pwc-ova"
    PWC_OVA2 = "pwc-ova2"


PWC_VARIANTS = (CouplingMethod.PWC1, CouplingMethod.PWC2, CouplingMethod.PWC3,
                CouplingMethod.PWC4, CouplingMethod.PWC5)

#: Methods that need pairwise models / one-vs-all models.
_NEEDS_PAIRWISE = frozenset(
    (*PWC_VARIANTS, CouplingMethod.PWC_OVA, CouplingMethod.PWC_OVA2))
_NEEDS_OVA = frozenset(
    (CouplingMethod.OVA, CouplingMethod.PWC_OVA, CouplingMethod.PWC_OVA2))


def _step(p):
    """Heaviside step with step(0) = 1."""
    return np.where(np.asarray(p, dtype=np.float64) >= 0.0, 1.0, 0.0)


def delta(p, variant: CouplingMethod):
    """Pairwise probability weighting used inside the pwc scores.

    Accepts scalars or arrays in [0, 1]. pwc1 thresholds at 0.5, pwc2 is the
    identity, pwc3 a sigmoid centered at 0.5 with slope 12, pwc4 saturates
    high confidences to 1, pwc5 zeroes low confidences.
    """
    arr = np.asarray(p, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
        raise ValueError("pairwise probabilities must lie in [0, 1]")
    if variant == CouplingMethod.PWC1:
        out = _step(arr - 0.5)
    elif variant == CouplingMethod.PWC2:
        out = arr.copy()
    elif variant == CouplingMethod.PWC3:
        out = 1.0 / (1.0 + np.exp(-12.0 * (arr - 0.5)))
    elif variant == CouplingMethod.PWC4:
        out = arr * _step(0.5 - arr) + _step(arr - 0.5)
    elif variant == CouplingMethod.PWC5:
        out = arr * _step(arr - 0.5)
    else:
        raise ValueError(f"{variant.value} is not a pwc variant")
    if np.isscalar(p) or getattr(p, "ndim", 1) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ProbabilityTable:
    """Pairwise and one-vs-all outputs for one sample over K classes.

    ``pairwise[i, j]`` is the i-vs-j probability for class i; the lower
    triangle is forced to 1 - upper so the table is always consistent. The
    diagonal is unused and held at 0. ``ova`` may be None when only pairwise
    couplers are in play.
    """

    pairwise: np.ndarray
    ova: np.ndarray | None = None

    def __post_init__(self):
        pw = np.asarray(self.pairwise, dtype=np.float64)
        if pw.ndim != 2 or pw.shape[0] != pw.shape[1] or pw.shape[0] < 2:
            raise ValueError("pairwise must be a square matrix, K >= 2")
        k = pw.shape[0]
        fixed = pw.copy()
        iu = np.triu_indices(k, 1)
        if np.any(fixed[iu] < 0.0) or np.any(fixed[iu] > 1.0):
            raise ValueError("pairwise probabilities must lie in [0, 1]")
        fixed[(iu[1], iu[0])] = 1.0 - fixed[iu]
        np.fill_diagonal(fixed, 0.0)
        object.__setattr__(self, "pairwise", fixed)
        if self.ova is not None:
            ov = np.asarray(self.ova, dtype=np.float64)
            if ov.shape != (k,):
                raise ValueError("ova vector length must match K")
            if np.any(ov < 0.0) or np.any(ov > 1.0):
                raise ValueError("ova probabilities must lie in [0, 1]")
            object.__setattr__(self, "ova", ov)

    @property
    def n_classes(self) -> int:
        return self.pairwise.shape[0]

    @classmethod
    def from_pairs(cls, n_classes: int, pairs: dict[tuple[int, int], float],
                   ova=None) -> "ProbabilityTable":
        pw = np.zeros((n_classes, n_classes))
        seen = set()
        for (i, j), p in pairs.items():
            if not (0 <= i < j < n_classes):
                raise ValueError(f"bad pair ({i}, {j})")
            pw[i, j] = p
            seen.add((i, j))
        expected = {(i, j) for i in range(n_classes)
                    for j in range(i + 1, n_classes)}
        if seen != expected:
            raise ValueError("pairs must cover every unordered class pair")
        return cls(pairwise=pw, ova=None if ova is None else np.asarray(ova))


# -- vectorized coupling cores ------------------------------------------------
# P has shape (n, K, K) with both triangles filled and zero diagonal;
# ova has shape (n, K).

def _pwc_score_array(P: np.ndarray, variant: CouplingMethod) -> np.ndarray:
    D = delta(P, variant)
    idx = np.arange(P.shape[1])
    D[:, idx, idx] = 0.0
    return D.sum(axis=2)

def _pwc1_decide_array(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    votes = _pwc_score_array(P, CouplingMethod.PWC1)
    decisions = np.argmax(votes, axis=1)
    top = votes.max(axis=1, keepdims=True)
    tied = votes == top
    multi = tied.sum(axis=1) > 1
    if np.any(multi):
        fallback = _pwc_score_array(P[multi], CouplingMethod.PWC2)
        fallback[~tied[multi]] = -np.inf
        decisions[multi] = np.argmax(fallback, axis=1)
    return votes, decisions


def coupling_scores(P: np.ndarray, ova: np.ndarray | None,
                    method: CouplingMethod) -> np.ndarray:
    """Per-class coupling scores for a stack of probability tables."""
    if method in _NEEDS_OVA and ova is None:
        raise ValueError(f"{method.value} needs one-vs-all probabilities")
    if method == CouplingMethod.OVA:
        return np.array(ova, dtype=np.float64, copy=True)
    if method in PWC_VARIANTS:
        return _pwc_score_array(P, method)
    if method == CouplingMethod.PWC_OVA:
        q = ova[:, :, None] + ova[:, None, :]
        s = P * q
        idx = np.arange(P.shape[1])
        s[:, idx, idx] = 0.0
        return s.sum(axis=2)
    if method == CouplingMethod.PWC_OVA2:
        idx = np.arange(P.shape[1])
        pc = P.copy()
        pc[:, idx, idx] = 0.0
        return ova * pc.sum(axis=2)
    raise ValueError(f"{method.value} has no table-based score")


def decide_array(P: np.ndarray, ova: np.ndarray | None,
                 method: CouplingMethod) -> np.ndarray:
    """Decisions (class positions 0..K-1) for a stack of tables."""
    if method == CouplingMethod.PWC1:
        return _pwc1_decide_array(P)[1]
    return np.argmax(coupling_scores(P, ova, method), axis=1)


def _stack(table: ProbabilityTable):
    ova = None if table.ova is None else table.ova[None, :]
    return table.pairwise[None, :, :], ova


def couple_pwc(table: ProbabilityTable, variant: CouplingMethod,
               ) -> tuple[np.ndarray, int]:
    """Score every class with the requested pwc variant; ties on the vote
    variant (pwc1) are re-scored with pwc2 among the tied classes only."""
    if variant not in PWC_VARIANTS:
        raise ValueError(f"{variant.value} is not a pwc variant")
    P, _ = _stack(table)
    if variant == CouplingMethod.PWC1:
        votes, decisions = _pwc1_decide_array(P)
        return votes[0], int(decisions[0])
    scores = _pwc_score_array(P, variant)
    return scores[0], int(np.argmax(scores[0]))


def couple_ova(table: ProbabilityTable) -> int:
    """Pick the class with the largest one-vs-all probability."""
    if table.ova is None:
        raise ValueError("table carries no one-vs-all probabilities")
    return int(np.argmax(table.ova))


def couple_pwc_ova(table: ProbabilityTable) -> int:
    """Pairwise sum with each term weighted by the pair's one-vs-all mass."""
    P, ova = _stack(table)
    return int(decide_array(P, ova, CouplingMethod.PWC_OVA)[0])


def couple_pwc_ova2(table: ProbabilityTable) -> int:
    """One-vs-all probability scaled by the plain pairwise sum."""
    P, ova = _stack(table)
    return int(decide_array(P, ova, CouplingMethod.PWC_OVA2)[0])


def two_stage_truck(decision: int, table: ProbabilityTable,
                    threshold: float = 0.75,
                    car: int = int(ClassLabel.CAR),
                    truck: int = int(ClassLabel.TRUCK_BUS)) -> int:
    """Override a car decision with truck_bus when the pairwise truck-vs-car
    probability clears the threshold. Raising the threshold can only turn
    truck outputs back into cars, never the reverse."""
    k = table.n_classes
    if not (0 <= car < k and 0 <= truck < k):
        raise ValueError("table does not cover the car and truck classes")
    if decision == car and table.pairwise[truck, car] > threshold:
        return truck
    return decision


# -- model bank ---------------------------------------------------------------

class MissingClassError(ValueError):
    """A binary subproblem was requested for a class with no rows."""


def default_forest_factory(config: ForestConfig = ForestConfig(),
                           ) -> Callable[[int], RandomForest]:
    """Factory producing identically configured forests that differ by seed."""
    def make(seed: int) -> RandomForest:
        return RandomForest(ForestConfig(
            n_trees=config.n_trees, split_criterion=config.split_criterion,
            max_features=config.max_features, bootstrap=config.bootstrap,
            seed=seed))
    return make


@dataclass
class ModelBank:
    """Trained binary families plus the multiclass baseline.

    ``classes`` fixes the class order of every probability table; pairwise
    keys are positions into that tuple, not raw label codes.
    """

    classes: tuple[int, ...]
    pairwise: dict[tuple[int, int], RandomForest] = field(default_factory=dict)
    ova: dict[int, RandomForest] = field(default_factory=dict)
    multiclass: RandomForest | None = None
    method: CouplingMethod | None = None
    registry_version: str = REGISTRY_VERSION
    feature_names: tuple[str, ...] = ()

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def families_present(self) -> set[str]:
        out = set()
        if self.pairwise:
            out.add("pairwise")
        if self.ova:
            out.add("ova")
        if self.multiclass is not None:
            out.add("multiclass")
        return out

    def predict_tables(self, X) -> tuple[np.ndarray | None, np.ndarray | None]:
        """Stacked pairwise matrices and ova vectors for each row of X."""
        n = np.asarray(X).shape[0]
        k = self.n_classes
        P = None
        if self.pairwise:
            P = np.zeros((n, k, k))
            for (i, j), model in sorted(self.pairwise.items()):
                p = self._binary_proba(model, X)
                P[:, i, j] = p
                P[:, j, i] = 1.0 - p
        V = None
        if self.ova:
            V = np.zeros((n, k))
            for i, model in sorted(self.ova.items()):
                V[:, i] = self._binary_proba(model, X)
        return P, V

    @staticmethod
    def _binary_proba(model: RandomForest, X) -> np.ndarray:
        proba = model.predict_proba(X)
        cols = {int(c): t for t, c in enumerate(model.classes_)}
        if 1 not in cols:  # degenerate one-class model
            return np.zeros(np.asarray(X).shape[0])
        return proba[:, cols[1]]

    def decide(self, X, method: CouplingMethod | None = None,
               two_stage_threshold: float | None = None) -> np.ndarray:
        """Class codes for each row of X under the given coupling method."""
        method = method if method is not None else self.method
        if method is None:
            raise ValueError("no coupling method given or stored")
        P = None
        if method == CouplingMethod.MULTICLASS:
            if self.multiclass is None:
                raise ValueError("bank holds no multiclass model")
            proba = self.multiclass.predict_proba(X)
            # align model classes to bank classes
            pos_scores = np.zeros((proba.shape[0], self.n_classes))
            for t, c in enumerate(self.multiclass.classes_):
                pos_scores[:, self.classes.index(int(c))] = proba[:, t]
            positions = np.argmax(pos_scores, axis=1)
        else:
            if method in _NEEDS_PAIRWISE and not self.pairwise:
                raise ValueError(f"bank holds no pairwise models for "
                                 f"{method.value}")
            if method in _NEEDS_OVA and not self.ova:
                raise ValueError(f"bank holds no one-vs-all models for "
                                 f"{method.value}")
            P, V = self.predict_tables(X)
            positions = decide_array(P, V, method)
        if two_stage_threshold is not None:
            if not self.pairwise:
                raise ValueError("two-stage gate needs pairwise models")
            if P is None:
                P, _ = self.predict_tables(X)
            positions = self._apply_two_stage(positions, P,
                                              two_stage_threshold)
        return np.array([self.classes[p] for p in positions], dtype=np.int64)

    def _apply_two_stage(self, positions: np.ndarray, P: np.ndarray,
                         threshold: float) -> np.ndarray:
        try:
            car = self.classes.index(int(ClassLabel.CAR))
            truck = self.classes.index(int(ClassLabel.TRUCK_BUS))
        except ValueError as exc:
            raise ValueError("two-stage gate needs both the car and "
                             "truck_bus classes") from exc
        out = positions.copy()
        gate = (positions == car) & (P[:, truck, car] > threshold)
        out[gate] = truck
        return out

    def scores(self, X, method: CouplingMethod | None = None) -> np.ndarray:
        """Per-class coupling scores, aligned to ``classes``."""
        method = method if method is not None else self.method
        if method == CouplingMethod.MULTICLASS:
            proba = self.multiclass.predict_proba(X)
            out = np.zeros((proba.shape[0], self.n_classes))
            for t, c in enumerate(self.multiclass.classes_):
                out[:, self.classes.index(int(c))] = proba[:, t]
            return out
        P, V = self.predict_tables(X)
        return coupling_scores(P, V, method)


def required_families(methods: Sequence[CouplingMethod]) -> set[str]:
    fam = set()
    for m in methods:
        if m == CouplingMethod.MULTICLASS:
            fam.add("multiclass")
        if m in _NEEDS_PAIRWISE:
            fam.add("pairwise")
        if m in _NEEDS_OVA:
            fam.add("ova")
    return fam


def train_model_bank(X, y, classes: Sequence[int],
                     make_classifier: Callable[[int], RandomForest],
                     resample_spec: ResampleSpec = ResampleSpec(),
                     seed: int = 0, class_weighting: bool = False,
                     families: Sequence[str] = ("pairwise", "ova",
                                                "multiclass"),
                     feature_names: tuple[str, ...] = (),
                     n_jobs: int = 1) -> ModelBank:
    """Train the requested binary families over a fixed class list.

    Resampling runs independently inside every binary subproblem (and on the
    full set for the multiclass baseline). Every subproblem draws its own
    seeds, so adding a family never disturbs another family's models.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    classes = tuple(int(c) for c in classes)
    present = set(np.unique(y).tolist())
    if len(present) < 2:
        raise ValueError("training needs at least two classes present")
    for c in classes:
        if c not in present:
            name = (ClassLabel(c).to_str()
                    if c in set(int(v) for v in ClassLabel) else str(c))
            raise MissingClassError(
                f"class {name} has no training rows")

    bank = ModelBank(classes=classes, feature_names=tuple(feature_names))
    k = len(classes)

    def fit_binary(rows_mask, positive_mask, stream):
        Xp = X[rows_mask]
        yp = positive_mask[rows_mask].astype(np.int64)
        rs = ResampleSpec(method=resample_spec.method,
                          k_neighbors=resample_spec.k_neighbors,
                          floor_multiple=resample_spec.floor_multiple,
                          seed=derive_seed(resample_spec.seed, *stream))
        Xr, yr = resample(Xp, yp, rs)
        if np.unique(yr).size < 2:
            logger.warning("resampling left one class in subproblem %s; "
                           "training on unresampled rows", stream)
            Xr, yr = Xp, yp
        w = per_sample_weights(yr) if class_weighting else None
        clf = make_classifier(derive_seed(seed, *stream))
        clf.fit(Xr, yr, sample_weight=w, n_jobs=n_jobs)
        return clf

    if "pairwise" in families:
        for a in range(k):
            for b in range(a + 1, k):
                ca, cb = classes[a], classes[b]
                mask = (y == ca) | (y == cb)
                bank.pairwise[(a, b)] = fit_binary(
                    mask, y == ca, ("pair", a, b))
    if "ova" in families:
        for a in range(k):
            ca = classes[a]
            bank.ova[a] = fit_binary(np.ones_like(y, dtype=bool), y == ca,
                                     ("ova", a))
    if "multiclass" in families:
        rs = ResampleSpec(method=resample_spec.method,
                          k_neighbors=resample_spec.k_neighbors,
                          floor_multiple=resample_spec.floor_multiple,
                          seed=derive_seed(resample_spec.seed, "multi"))
        Xr, yr = resample(X, y, rs)
        w = per_sample_weights(yr) if class_weighting else None
        clf = make_classifier(derive_seed(seed, "multi"))
        clf.fit(Xr, yr, sample_weight=w, n_jobs=n_jobs)
        bank.multiclass = clf
    return bank


def train_binarized(X, y, classes: Sequence[int],
                    method: CouplingMethod,
                    make_classifier: Callable[[int], RandomForest],
                    resample_spec: ResampleSpec = ResampleSpec(),
                    seed: int = 0, class_weighting: bool = False,
                    feature_names: tuple[str, ...] = (),
                    n_jobs: int = 1) -> ModelBank:
    """Train exactly the families the chosen coupling method needs."""
    fams = required_families([method])
    bank = train_model_bank(X, y, classes, make_classifier, resample_spec,
                            seed=seed, class_weighting=class_weighting,
                            families=sorted(fams),
                            feature_names=feature_names, n_jobs=n_jobs)
    bank.method = method
    return bank


# -- persistence ---------------------------------------------------------------

def bank_to_dict(bank: ModelBank) -> dict:
    return {
        "format": "model-bank-v1",
        "registry_version": bank.registry_version,
        "classes": list(bank.classes),
        "method": None if bank.method is None else bank.method.value,
        "feature_names": list(bank.feature_names),
        "pairwise": {f"{i}-{j}": m.to_dict()
                     for (i, j), m in sorted(bank.pairwise.items())},
        "ova": {str(i): m.to_dict() for i, m in sorted(bank.ova.items())},
        "multiclass": (None if bank.multiclass is None
                       else bank.multiclass.to_dict()),
    }


def bank_from_dict(d: dict) -> ModelBank:
    if d.get("format") != "model-bank-v1":
        raise ValueError(f"unsupported model format: {d.get('format')!r}")
    bank = ModelBank(
        classes=tuple(d["classes"]),
        registry_version=d["registry_version"],
        feature_names=tuple(d["feature_names"]),
        method=None if d["method"] is None else CouplingMethod(d["method"]),
    )
    for key, md in d["pairwise"].items():
        i, j = key.split("-")
        bank.pairwise[(int(i), int(j))] = RandomForest.from_dict(md)
    for key, md in d["ova"].items():
        bank.ova[int(key)] = RandomForest.from_dict(md)
    if d["multiclass"] is not None:
        bank.multiclass = RandomForest.from_dict(d["multiclass"])
    return bank


def save_bank(bank: ModelBank, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bank_to_dict(bank), fh)


def load_bank(path) -> ModelBank:
    with open(path, "r", encoding="utf-8") as fh:
        return bank_from_dict(json.load(fh))


def dump_tables_jsonl(path, P: np.ndarray, ova: np.ndarray | None,
                      classes: Sequence[int]) -> None:
    """Audit dump: one JSON object per sample with its probability table."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for idx in range(P.shape[0]):
            obj = {
                "classes": [int(c) for c in classes],
                "pairwise": [[float(v) for v in row] for row in P[idx]],
                "ova": (None if ova is None
                        else [float(v) for v in ova[idx]]),
            }
            fh.write(json.dumps(obj) + "\n")
