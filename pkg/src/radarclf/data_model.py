"""Radar record types, coordinate transforms, windowing, and augmentation.

Everything internal is SI: meters, radians, seconds, m/s. Catalogue numbers
quoted in km/h or degrees are converted once, at the configuration boundary,
and never appear in mixed units downstream.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import Iterable, Sequence

import numpy as np

from ._util import format_float

logger = logging.getLogger(__name__)

KMH_TO_MPS = 1.0 / 3.6
DEG_TO_RAD = math.pi / 180.0

#: Tumbling window length for grouping targets into classifiable samples.
WINDOW_LENGTH_S = 0.150

#: Sentinel cluster id for targets not assigned to any cluster.
NO_CLUSTER = -1

#: Default stationarity cut on compensated radial speed (0.43 km/h).
V_STATIONARY_MPS = 0.43 * KMH_TO_MPS


class RejectedDetection(ValueError):
    """A raw detection violated the sensor's operational bounds."""


class ClassLabel(IntEnum):
    """Road-user classes with stable serialization codes."""

    CAR = 0
    PEDESTRIAN = 1
    PEDESTRIAN_GROUP = 2
    BIKE = 3
    TRUCK_BUS = 4
    GARBAGE = 5

    def to_str(self) -> str:
        return self.name.lower()

    @classmethod
    def from_any(cls, value) -> "ClassLabel":
        if isinstance(value, cls):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        s = str(value).strip()
        if s.lstrip("-").isdigit():
            return cls(int(s))
        return cls[s.upper()]


CLASS_NAMES = tuple(c.to_str() for c in ClassLabel)


class AugmentationTag(str, Enum):
    """Provenance of a cluster sample relative to the recorded original."""

    ORIGINAL = "original"
    UNCORRECTED = "uncorrected"
    DROPPED40 = "dropped40"


@dataclass(frozen=True, slots=True)
class SensorSpec:
    """Operational limits and resolution cells of one radar sensor type."""

    carrier_frequency_hz: float = 77e9
    range_min_m: float = 0.25
    range_max_m: float = 100.0
    azimuth_limit_rad: float = 45.0 * DEG_TO_RAD
    vr_min_mps: float = -400.0 * KMH_TO_MPS
    vr_max_mps: float = 200.0 * KMH_TO_MPS
    cycle_time_s: float = 0.060
    range_resolution_m: float = 0.42
    azimuth_resolution_min_rad: float = 3.2 * DEG_TO_RAD
    azimuth_resolution_max_rad: float = 12.3 * DEG_TO_RAD
    vr_resolution_mps: float = 0.43 * KMH_TO_MPS

    def __post_init__(self):
        if not (0.0 <= self.range_min_m < self.range_max_m):
            raise ValueError("range bounds must satisfy 0 <= min < max")
        if not (self.vr_min_mps < self.vr_max_mps):
            raise ValueError("radial velocity bounds must satisfy min < max")
        if self.azimuth_limit_rad <= 0:
            raise ValueError("azimuth limit must be positive")
        for name in ("cycle_time_s", "range_resolution_m", "vr_resolution_mps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, slots=True)
class SensorPose:
    """Mounting pose of a sensor in the vehicle frame."""

    x_m: float = 0.0
    y_m: float = 0.0
    boresight_rad: float = 0.0


IDENTITY_POSE = SensorPose()


@dataclass(frozen=True, slots=True)
class EgoState:
    """Planar rigid-body motion of the ego vehicle plus sensor mount poses."""

    speed_mps: float = 0.0
    yaw_rate_radps: float = 0.0
    sensor_poses: tuple[tuple[int, SensorPose], ...] = ()

    def pose_of(self, sensor_id: int) -> SensorPose:
        for sid, pose in self.sensor_poses:
            if sid == sensor_id:
                return pose
        return IDENTITY_POSE


@dataclass(frozen=True, slots=True)
class RawDetection:
    """One un-transformed radar detection in its sensor's own frame."""

    time_s: float
    sensor_id: int
    range_m: float
    azimuth_rad: float
    vr_mps: float
    amplitude_db: float


_XY_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class Target:
    """One reflection location in the common vehicle frame.

    ``vr_comp_mps`` is the radial velocity after ego-motion compensation;
    before compensation it simply carries the raw measurement.
    """

    time_s: float
    x_m: float
    y_m: float
    range_m: float
    azimuth_rad: float
    vr_comp_mps: float
    amplitude_db: float
    sensor_id: int = 0

    def __post_init__(self):
        if self.range_m < 0:
            raise ValueError("range must be non-negative")
        if not math.isfinite(self.amplitude_db):
            raise ValueError("amplitude must be finite")
        if abs(self.x_m - self.range_m * math.cos(self.azimuth_rad)) > _XY_TOL:
            raise ValueError("x is inconsistent with range and azimuth")
        if abs(self.y_m - self.range_m * math.sin(self.azimuth_rad)) > _XY_TOL:
            raise ValueError("y is inconsistent with range and azimuth")


def target_from_polar(time_s, range_m, azimuth_rad, vr_comp_mps, amplitude_db,
                      sensor_id=0) -> Target:
    """Build a Target from vehicle-frame polar coordinates."""
    return Target(
        time_s=float(time_s),
        x_m=float(range_m) * math.cos(float(azimuth_rad)),
        y_m=float(range_m) * math.sin(float(azimuth_rad)),
        range_m=float(range_m),
        azimuth_rad=float(azimuth_rad),
        vr_comp_mps=float(vr_comp_mps),
        amplitude_db=float(amplitude_db),
        sensor_id=int(sensor_id),
    )


def to_common_frame(raw: RawDetection, pose: SensorPose,
                    spec: SensorSpec | None = None) -> Target:
    """Transform one raw detection into the common vehicle frame.

    Range and azimuth are re-expressed relative to the vehicle origin. The
    radial velocity is carried over unchanged; apply
    :func:`compensate_ego_motion` separately. Detections outside the sensor's
    operational bounds raise :class:`RejectedDetection`.
    """
    spec = spec if spec is not None else SensorSpec()
    if not (spec.range_min_m <= raw.range_m <= spec.range_max_m):
        raise RejectedDetection(
            f"range {raw.range_m:.3f} m outside "
            f"[{spec.range_min_m}, {spec.range_max_m}] m")
    if abs(raw.azimuth_rad) > spec.azimuth_limit_rad:
        raise RejectedDetection(
            f"azimuth {raw.azimuth_rad:.4f} rad outside "
            f"+/-{spec.azimuth_limit_rad:.4f} rad")
    if not (spec.vr_min_mps <= raw.vr_mps <= spec.vr_max_mps):
        raise RejectedDetection(
            f"radial velocity {raw.vr_mps:.3f} m/s outside operational band")
    az_global = pose.boresight_rad + raw.azimuth_rad
    x = pose.x_m + raw.range_m * math.cos(az_global)
    y = pose.y_m + raw.range_m * math.sin(az_global)
    return Target(
        time_s=raw.time_s,
        x_m=x,
        y_m=y,
        range_m=math.hypot(x, y),
        azimuth_rad=math.atan2(y, x),
        vr_comp_mps=raw.vr_mps,
        amplitude_db=raw.amplitude_db,
        sensor_id=raw.sensor_id,
    )


def sensor_velocity(ego: EgoState, pose: SensorPose) -> tuple[float, float]:
    """Velocity of a sensor's origin in the vehicle frame (rigid-body model)."""
    sx = ego.speed_mps - ego.yaw_rate_radps * pose.y_m
    sy = ego.yaw_rate_radps * pose.x_m
    return sx, sy


def compensate_ego_motion(raw_vr_mps: float, target: Target,
                          ego: EgoState) -> float:
    """Remove the ego vehicle's own motion from a raw radial velocity.

    Adds back the projection of the sensor-origin velocity onto the line of
    sight, so a static world point comes out at zero.
    """
    pose = ego.pose_of(target.sensor_id)
    sx, sy = sensor_velocity(ego, pose)
    theta = target.azimuth_rad
    return raw_vr_mps + sx * math.cos(theta) + sy * math.sin(theta)


@dataclass(frozen=True, slots=True)
class ClusterSample:
    """All targets of one cluster inside one tumbling time window."""

    cluster_id: int
    object_id: int
    label: ClassLabel | None
    window_start_s: float
    targets: tuple[Target, ...]
    augmentation_tag: AugmentationTag = AugmentationTag.ORIGINAL

    def __post_init__(self):
        if len(self.targets) < 1:
            raise ValueError("a cluster sample needs at least one target")
        # membership is defined by the grid index floor(t / length), the
        # same expression the windowing uses, so representation noise at
        # window edges cannot split the two apart
        k = round(self.window_start_s / WINDOW_LENGTH_S)
        for t in self.targets:
            if math.floor(t.time_s / WINDOW_LENGTH_S) != k:
                hi = self.window_start_s + WINDOW_LENGTH_S
                raise ValueError(
                    f"target at t={t.time_s} outside window "
                    f"[{self.window_start_s}, {hi})")

    @property
    def n_targets(self) -> int:
        return len(self.targets)


def window_samples(targets: Sequence[Target], cluster_id: int,
                   object_id: int = -1, label: ClassLabel | None = None,
                   tag: AugmentationTag = AugmentationTag.ORIGINAL,
                   ) -> list[ClusterSample]:
    """Partition a time-ordered cluster track into tumbling 150 ms windows.

    Window boundaries live on the fixed grid k * 150 ms, so two tracks
    observed at the same wall-clock times always fall into the same windows.
    Windows that contain no target are omitted; every input target lands in
    exactly one emitted sample.
    """
    if len(targets) == 0:
        return []
    times = [t.time_s for t in targets]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("cluster track must be time-ordered")
    buckets: dict[int, list[Target]] = {}
    for t in targets:
        k = math.floor(t.time_s / WINDOW_LENGTH_S)
        buckets.setdefault(k, []).append(t)
    return [
        ClusterSample(
            cluster_id=cluster_id,
            object_id=object_id,
            label=label,
            window_start_s=k * WINDOW_LENGTH_S,
            targets=tuple(buckets[k]),
            augmentation_tag=tag,
        )
        for k in sorted(buckets)
    ]


def augment_drop(sample: ClusterSample, fraction: float = 0.40,
                 seed: int = 0) -> ClusterSample:
    """Return a copy of the sample with a random 40 percent of targets removed.

    The drop count is rounded half-up. Samples with fewer than two targets
    cannot be thinned; they are returned unchanged (tag untouched), which is
    the skip signal.
    """
    n = sample.n_targets
    if n < 2:
        return sample
    k = math.floor(fraction * n + 0.5)
    if k >= n:
        k = n - 1
    if k <= 0:
        return replace(sample, augmentation_tag=AugmentationTag.DROPPED40)
    rng = np.random.default_rng(seed)
    drop = set(rng.choice(n, size=k, replace=False).tolist())
    kept = tuple(t for i, t in enumerate(sample.targets) if i not in drop)
    return replace(sample, targets=kept,
                   augmentation_tag=AugmentationTag.DROPPED40)


# ---------------------------------------------------------------------------
# Flat CSV interchange for labeled targets
# ---------------------------------------------------------------------------

TARGET_CSV_COLUMNS = (
    "time_s", "sensor_id", "range_m", "azimuth_rad", "vr_mps",
    "amplitude_db", "cluster_id", "object_id", "label",
)


@dataclass(frozen=True, slots=True)
class TargetRecord:
    """One target row plus its cluster/object/label bookkeeping."""

    target: Target
    cluster_id: int = NO_CLUSTER
    object_id: int = -1
    label: ClassLabel | None = None


def write_targets_csv(path, records: Iterable[TargetRecord]) -> None:
    lines = [",".join(TARGET_CSV_COLUMNS)]
    for rec in records:
        t = rec.target
        label = "" if rec.label is None else rec.label.to_str()
        lines.append(",".join((
            format_float(t.time_s),
            str(t.sensor_id),
            format_float(t.range_m),
            format_float(t.azimuth_rad),
            format_float(t.vr_comp_mps),
            format_float(t.amplitude_db),
            str(rec.cluster_id),
            str(rec.object_id),
            label,
        )))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_targets_csv(path) -> list[TargetRecord]:
    """Read the flat target CSV; cluster_id/object_id/label may be absent."""
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline().strip()
        if not header_line:
            raise ValueError(f"{path}: empty target CSV")
        cols = header_line.split(",")
        required = ("time_s", "sensor_id", "range_m", "azimuth_rad",
                    "vr_mps", "amplitude_db")
        missing = [c for c in required if c not in cols]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        idx = {c: i for i, c in enumerate(cols)}
        records = []
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(cols):
                raise ValueError(f"{path}:{ln}: expected {len(cols)} fields")

            def get(name, default=None):
                i = idx.get(name)
                if i is None:
                    return default
                v = parts[i]
                return default if v == "" else v

            target = target_from_polar(
                time_s=float(get("time_s")),
                range_m=float(get("range_m")),
                azimuth_rad=float(get("azimuth_rad")),
                vr_comp_mps=float(get("vr_mps")),
                amplitude_db=float(get("amplitude_db")),
                sensor_id=int(get("sensor_id")),
            )
            raw_label = get("label")
            records.append(TargetRecord(
                target=target,
                cluster_id=int(get("cluster_id", NO_CLUSTER)),
                object_id=int(get("object_id", -1)),
                label=None if raw_label is None else ClassLabel.from_any(raw_label),
            ))
        return records


def samples_from_records(records: Sequence[TargetRecord],
                         tag: AugmentationTag = AugmentationTag.ORIGINAL,
                         ) -> list[ClusterSample]:
    """Group target records by cluster id and window each cluster track.

    Targets with the no-cluster sentinel are skipped. A cluster id is meant
    to carry one consistent label; if reclustering merged objects, the
    majority label wins (ties go to the lower class code).
    """
    by_cluster: dict[int, list[TargetRecord]] = {}
    for rec in records:
        if rec.cluster_id == NO_CLUSTER:
            continue
        by_cluster.setdefault(rec.cluster_id, []).append(rec)
    samples: list[ClusterSample] = []
    for cid in sorted(by_cluster):
        recs = sorted(by_cluster[cid], key=lambda r: r.target.time_s)
        labels = [r.label for r in recs if r.label is not None]
        label: ClassLabel | None = None
        if labels:
            counts = Counter(labels)
            top = max(counts.values())
            label = min(c for c, n in counts.items() if n == top)
            if len(counts) > 1:
                logger.debug("cluster %d carries mixed labels %s; using %s",
                             cid, sorted(counts), label.to_str())
        object_id = recs[0].object_id
        samples.extend(window_samples(
            [r.target for r in recs], cluster_id=cid, object_id=object_id,
            label=label, tag=tag))
    return samples


# ---------------------------------------------------------------------------
# JSON-lines interchange for cluster samples
# ---------------------------------------------------------------------------

def _target_to_json(t: Target) -> str:
    return (
        '{"time_s": %s, "x_m": %s, "y_m": %s, "range_m": %s, '
        '"azimuth_rad": %s, "vr_comp_mps": %s, "amplitude_db": %s, '
        '"sensor_id": %d}'
        % (format_float(t.time_s), format_float(t.x_m), format_float(t.y_m),
           format_float(t.range_m), format_float(t.azimuth_rad),
           format_float(t.vr_comp_mps), format_float(t.amplitude_db),
           t.sensor_id)
    )


def sample_to_json(sample: ClusterSample) -> str:
    label = "null" if sample.label is None else f'"{sample.label.to_str()}"'
    targets = ", ".join(_target_to_json(t) for t in sample.targets)
    return (
        '{"cluster_id": %d, "object_id": %d, "label": %s, '
        '"window_start_s": %s, "augmentation_tag": "%s", "targets": [%s]}'
        % (sample.cluster_id, sample.object_id, label,
           format_float(sample.window_start_s),
           sample.augmentation_tag.value, targets)
    )


def write_samples_jsonl(path, samples: Iterable[ClusterSample]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(sample_to_json(s) + "\n")


def read_samples_jsonl(path) -> list[ClusterSample]:
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            targets = tuple(
                Target(
                    time_s=t["time_s"], x_m=t["x_m"], y_m=t["y_m"],
                    range_m=t["range_m"], azimuth_rad=t["azimuth_rad"],
                    vr_comp_mps=t["vr_comp_mps"],
                    amplitude_db=t["amplitude_db"],
                    sensor_id=t["sensor_id"],
                )
                for t in obj["targets"]
            )
            label = obj["label"]
            samples.append(ClusterSample(
                cluster_id=obj["cluster_id"],
                object_id=obj["object_id"],
                label=None if label is None else ClassLabel.from_any(label),
                window_start_s=obj["window_start_s"],
                targets=targets,
                augmentation_tag=AugmentationTag(obj["augmentation_tag"]),
            ))
    return samples
