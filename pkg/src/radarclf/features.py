"""Fixed 50-value feature registry computed per cluster sample.

The registry order is frozen; models and feature files carry the registry
version string and refuse to mix versions. Degenerate statistics follow one
convention everywhere: whenever a denominator is zero (empty spread, zero
variance, zero area) the feature is 0, never NaN or infinity.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .data_model import ClassLabel, ClusterSample, V_STATIONARY_MPS
from ._util import format_float
from . import geometry

REGISTRY_VERSION = "radar-features-v1"

_STATS = ("Max", "Min", "Mean", "Std", "Spread")
_CHANNELS = ("r", "phi", "vrComp", "amp")

BASIC_STAT_NAMES = tuple(f"{ch}{st}" for ch in _CHANNELS for st in _STATS)

COMPENSATED_NAMES = (
    "covEV1", "covEV2", "nTargets", "nTargetsComp", "phiSpreadComp",
    "fracStationary",
)

SHAPE_NAMES = (
    "cohuArea", "cohuPerimeter", "cohuDensity", "circularity",
    "fitCircleRadius", "rehuArea", "rehuPerimeter", "rehuDensity",
    "con95major", "con95minor", "CBOinner", "CBOmiddle", "CBOouter",
    "maxDistDev", "xyLinearity", "compactness",
)

DOPPLER_NAMES = (
    "rVrSpread", "phiVrSpread", "rVrLinearity", "phiVrLinearity",
    "majorVrSpread", "minorVrSpread", "majorVrLinearity", "minorVrLinearity",
)

FEATURE_NAMES: tuple[str, ...] = (
    BASIC_STAT_NAMES + COMPENSATED_NAMES + SHAPE_NAMES + DOPPLER_NAMES
)

N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 50

_NAME_TO_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}


def feature_index(name: str) -> int:
    try:
        return _NAME_TO_INDEX[name]
    except KeyError:
        raise KeyError(f"unknown feature name: {name!r}") from None


def subset_indices(names: Sequence[str]) -> np.ndarray:
    return np.array([feature_index(n) for n in names], dtype=np.int64)


def _std(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation with the zero-variance convention (returns 0)."""
    if a.size < 2:
        return 0.0
    da = a - a.mean()
    db = b - b.mean()
    na = float(np.sqrt(np.sum(da * da)))
    nb = float(np.sqrt(np.sum(db * db)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    r = float(np.dot(da, db)) / (na * nb)
    return float(min(1.0, max(-1.0, r)))


def _channels(sample: ClusterSample):
    r = np.array([t.range_m for t in sample.targets])
    phi = np.array([t.azimuth_rad for t in sample.targets])
    vr = np.array([t.vr_comp_mps for t in sample.targets])
    amp = np.array([t.amplitude_db for t in sample.targets])
    return r, phi, vr, amp


def _xy(sample: ClusterSample) -> np.ndarray:
    return np.array([[t.x_m, t.y_m] for t in sample.targets])


def basic_stats(sample: ClusterSample) -> dict[str, float]:
    """Max, min, mean, standard deviation, and spread of the four measured
    channels: range, azimuth, compensated radial velocity, amplitude."""
    out: dict[str, float] = {}
    for ch, values in zip(_CHANNELS, _channels(sample)):
        out[f"{ch}Max"] = float(values.max())
        out[f"{ch}Min"] = float(values.min())
        out[f"{ch}Mean"] = float(values.mean())
        out[f"{ch}Std"] = _std(values)
        out[f"{ch}Spread"] = float(values.max() - values.min())
    return out


def covariance_features(sample: ClusterSample) -> dict[str, float]:
    """Eigenvalues of the sample position covariance, largest first."""
    evals, _ = geometry.covariance_eigen(_xy(sample))
    return {"covEV1": float(evals[0]), "covEV2": float(evals[1])}


def compensated_features(sample: ClusterSample,
                         v_stationary_mps: float = V_STATIONARY_MPS,
                         ) -> dict[str, float]:
    """Counts and range-compensated variants.

    Target counts and angular spreads shrink with distance for the same
    physical object, so both get a variant multiplied by the mean range.
    fracStationary is the fraction of targets whose compensated radial speed
    falls below the stationarity cut.
    """
    r, phi, vr, _ = _channels(sample)
    n = float(len(r))
    r_mean = float(r.mean())
    phi_spread = float(phi.max() - phi.min())
    frac = float(np.count_nonzero(np.abs(vr) < v_stationary_mps) / n)
    return {
        "nTargets": n,
        "nTargetsComp": n * r_mean,
        "phiSpreadComp": phi_spread * r_mean,
        "fracStationary": frac,
    }


def shape_features(sample: ClusterSample) -> dict[str, float]:
    """Spatial extent descriptors built from the geometry kernels."""
    xy = _xy(sample)
    n = float(xy.shape[0])

    hull = geometry.convex_hull(xy)
    rect = geometry.min_bounding_rect(hull)
    ellipse = geometry.confidence_ellipse_95(xy)
    center = (float(np.median(xy[:, 0])), float(np.median(xy[:, 1])))
    bins = geometry.cbo(xy, center)

    cohu_density = n / hull.area if hull.area > 0.0 else 0.0
    rehu_density = n / rect.area if rect.area > 0.0 else 0.0
    circ = (4.0 * math.pi * hull.area / (hull.perimeter ** 2)
            if hull.perimeter > 0.0 else 0.0)

    centroid = xy.mean(axis=0)
    compactness = float(np.mean(np.hypot(xy[:, 0] - centroid[0],
                                         xy[:, 1] - centroid[1])))

    return {
        "cohuArea": float(hull.area),
        "cohuPerimeter": float(hull.perimeter),
        "cohuDensity": float(cohu_density),
        "circularity": float(circ),
        "fitCircleRadius": geometry.min_enclosing_circle(xy),
        "rehuArea": float(rect.area),
        "rehuPerimeter": float(rect.perimeter),
        "rehuDensity": float(rehu_density),
        "con95major": float(ellipse.major_axis_len),
        "con95minor": float(ellipse.minor_axis_len),
        "CBOinner": float(bins.inner),
        "CBOmiddle": float(bins.middle),
        "CBOouter": float(bins.outer),
        "maxDistDev": geometry.max_dist_line_deviation(xy),
        "xyLinearity": _corr(xy[:, 0], xy[:, 1]),
        "compactness": compactness,
    }


def doppler_profile_features(sample: ClusterSample) -> dict[str, float]:
    """How the radial velocity varies across the cluster's extent.

    Spread ratios divide a positional spread by the velocity spread; the
    linearity values are Pearson correlations between a positional coordinate
    and the velocity. The major/minor variants project positions onto the
    covariance eigenvectors first.
    """
    r, phi, vr, _ = _channels(sample)
    xy = _xy(sample)
    vr_spread = float(vr.max() - vr.min())

    def ratio(spread: float) -> float:
        return spread / vr_spread if vr_spread > 0.0 else 0.0

    _, evecs = geometry.covariance_eigen(xy)
    proj_major = xy @ evecs[:, 0]
    proj_minor = xy @ evecs[:, 1]

    return {
        "rVrSpread": ratio(float(r.max() - r.min())),
        "phiVrSpread": ratio(float(phi.max() - phi.min())),
        "rVrLinearity": _corr(r, vr),
        "phiVrLinearity": _corr(phi, vr),
        "majorVrSpread": ratio(float(proj_major.max() - proj_major.min())),
        "minorVrSpread": ratio(float(proj_minor.max() - proj_minor.min())),
        "majorVrLinearity": _corr(proj_major, vr),
        "minorVrLinearity": _corr(proj_minor, vr),
    }


def extract(sample: ClusterSample,
            v_stationary_mps: float = V_STATIONARY_MPS) -> np.ndarray:
    """Compute the full feature vector in frozen registry order."""
    values: dict[str, float] = {}
    values.update(basic_stats(sample))
    values.update(covariance_features(sample))
    values.update(compensated_features(sample, v_stationary_mps))
    values.update(shape_features(sample))
    values.update(doppler_profile_features(sample))
    vec = np.array([values[name] for name in FEATURE_NAMES], dtype=np.float64)
    if not np.all(np.isfinite(vec)):
        bad = [FEATURE_NAMES[i] for i in np.nonzero(~np.isfinite(vec))[0]]
        raise AssertionError(f"non-finite features: {bad}")
    return vec


def extract_matrix(samples: Sequence[ClusterSample],
                   v_stationary_mps: float = V_STATIONARY_MPS,
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray,
                              np.ndarray]:
    """Feature matrix plus labels, group ids, window starts, and object ids.

    Unlabeled samples get label code -1.
    """
    X = np.zeros((len(samples), N_FEATURES))
    y = np.zeros(len(samples), dtype=np.int64)
    groups = np.zeros(len(samples), dtype=np.int64)
    starts = np.zeros(len(samples))
    object_ids = np.zeros(len(samples), dtype=np.int64)
    for i, s in enumerate(samples):
        X[i] = extract(s, v_stationary_mps)
        y[i] = -1 if s.label is None else int(s.label)
        groups[i] = s.cluster_id
        starts[i] = s.window_start_s
        object_ids[i] = s.object_id
    return X, y, groups, starts, object_ids


# ---------------------------------------------------------------------------
# Feature CSV interchange
# ---------------------------------------------------------------------------

FEATURE_CSV_META = ("cluster_id", "object_id", "window_start", "label")


class RegistryMismatch(ValueError):
    """A feature file or model was produced under a different registry."""


def write_features_csv(path, X, y, groups, window_starts,
                       object_ids=None) -> None:
    """Write the feature table; the registry version rides in a comment."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} feature columns")
    if object_ids is None:
        object_ids = np.full(X.shape[0], -1, dtype=np.int64)
    lines = [f"# registry={REGISTRY_VERSION}",
             ",".join(FEATURE_CSV_META + FEATURE_NAMES)]
    for i in range(X.shape[0]):
        label = "" if y[i] < 0 else ClassLabel(int(y[i])).to_str()
        meta = (str(int(groups[i])), str(int(object_ids[i])),
                format_float(window_starts[i]), label)
        lines.append(",".join(meta + tuple(format_float(v) for v in X[i])))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_features_csv(path):
    """Read a feature table written by :func:`write_features_csv`.

    Returns (X, y, groups, window_starts, object_ids). Raises
    :class:`RegistryMismatch` when the column set or embedded registry
    version does not match this registry.
    """
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        version = "unknown"
        if first.startswith("#"):
            meta = first.lstrip("# ").strip()
            if meta.startswith("registry="):
                version = meta[len("registry="):]
            header = fh.readline().rstrip("\n")
        else:
            header = first
        cols = tuple(header.split(","))
        expected = FEATURE_CSV_META + FEATURE_NAMES
        if cols != expected:
            raise RegistryMismatch(
                f"{path}: feature columns do not match registry "
                f"{REGISTRY_VERSION}")
        if version != REGISTRY_VERSION:
            raise RegistryMismatch(
                f"{path}: registry {version!r}, expected {REGISTRY_VERSION!r}")
        rows = []
        metas = []
        for ln, line in enumerate(fh, start=3):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(cols):
                raise ValueError(f"{path}:{ln}: expected {len(cols)} fields")
            metas.append(parts[:4])
            rows.append([float(v) for v in parts[4:]])
    n = len(rows)
    X = np.array(rows, dtype=np.float64) if n else np.zeros((0, N_FEATURES))
    y = np.full(n, -1, dtype=np.int64)
    groups = np.zeros(n, dtype=np.int64)
    starts = np.zeros(n)
    object_ids = np.zeros(n, dtype=np.int64)
    for i, (cid, oid, ws, label) in enumerate(metas):
        groups[i] = int(cid)
        object_ids[i] = int(oid)
        starts[i] = float(ws)
        if label:
            y[i] = int(ClassLabel.from_any(label))
    return X, y, groups, starts, object_ids
