"""Seeded synthetic radar scenes with six road-user classes.

Objects follow constant-velocity tracks; every 60 ms cycle a class-specific
number of targets is scattered over the object footprint, given a radial
velocity (projection of the object motion plus a class Doppler spread), an
amplitude draw, angle-dependent azimuth noise, and finally quantization to
the range and Doppler resolution grids. The garbage class emits short-lived,
spatially loose blobs with incoherent Doppler.

All per-class distribution parameters are invented for benchmarking; they
encode only directional facts (vehicles are bigger than pedestrians,
pedestrians and bikes have wider Doppler spreads than rigid car bodies, the
class mix is heavily skewed toward cars and garbage).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._util import derive_seed
from .data_model import (CLASS_NAMES, NO_CLUSTER, ClassLabel, ClusterSample,
                         SensorSpec, TargetRecord, target_from_polar,
                         window_samples)
from .features import FEATURE_NAMES, extract_matrix

RADAR_CYCLE_S = 0.060


@dataclass(frozen=True)
class ClassProfile:
    """Sampling law for one class: how many targets, how spread out, how fast."""

    label: ClassLabel
    targets_per_cycle: float
    length_m: float
    width_m: float
    doppler_spread_mps: float
    amplitude_mean_db: float
    amplitude_std_db: float
    min_duration_s: float
    max_duration_s: float
    min_speed_mps: float
    max_speed_mps: float

    def __post_init__(self):
        if self.targets_per_cycle <= 0:
            raise ValueError("targets_per_cycle must be positive")
        if self.length_m <= 0 or self.width_m <= 0:
            raise ValueError("footprint extents must be positive")
        if self.doppler_spread_mps < 0 or self.amplitude_std_db < 0:
            raise ValueError("spreads must be non-negative")
        if not 0 < self.min_duration_s <= self.max_duration_s:
            raise ValueError("bad duration range")
        if not 0 <= self.min_speed_mps <= self.max_speed_mps:
            raise ValueError("bad speed range")

    @property
    def footprint_diag_m(self) -> float:
        return math.hypot(self.length_m, self.width_m)


DEFAULT_PROFILES: dict[ClassLabel, ClassProfile] = {
    ClassLabel.CAR: ClassProfile(
        ClassLabel.CAR, targets_per_cycle=6.0, length_m=4.5, width_m=1.8,
        doppler_spread_mps=0.15, amplitude_mean_db=18.0, amplitude_std_db=3.0,
        min_duration_s=1.5, max_duration_s=3.0,
        min_speed_mps=5.0, max_speed_mps=15.0),
    ClassLabel.PEDESTRIAN: ClassProfile(
        ClassLabel.PEDESTRIAN, targets_per_cycle=2.0,
        length_m=0.6, width_m=0.6,
        doppler_spread_mps=0.8, amplitude_mean_db=8.0, amplitude_std_db=3.0,
        min_duration_s=1.2, max_duration_s=2.4,
        min_speed_mps=0.5, max_speed_mps=2.0),
    ClassLabel.PEDESTRIAN_GROUP: ClassProfile(
        ClassLabel.PEDESTRIAN_GROUP, targets_per_cycle=8.0,
        length_m=3.0, width_m=2.5,
        doppler_spread_mps=0.9, amplitude_mean_db=9.0, amplitude_std_db=3.0,
        min_duration_s=1.5, max_duration_s=3.0,
        min_speed_mps=0.5, max_speed_mps=2.0),
    ClassLabel.BIKE: ClassProfile(
        ClassLabel.BIKE, targets_per_cycle=2.5, length_m=1.8, width_m=0.6,
        doppler_spread_mps=0.7, amplitude_mean_db=10.0, amplitude_std_db=3.0,
        min_duration_s=1.2, max_duration_s=2.4,
        min_speed_mps=2.0, max_speed_mps=6.0),
    ClassLabel.TRUCK_BUS: ClassProfile(
        ClassLabel.TRUCK_BUS, targets_per_cycle=12.0,
        length_m=10.0, width_m=2.5,
        doppler_spread_mps=0.2, amplitude_mean_db=22.0, amplitude_std_db=4.0,
        min_duration_s=1.5, max_duration_s=3.0,
        min_speed_mps=4.0, max_speed_mps=12.0),
    ClassLabel.GARBAGE: ClassProfile(
        ClassLabel.GARBAGE, targets_per_cycle=3.0, length_m=8.0, width_m=8.0,
        doppler_spread_mps=1.5, amplitude_mean_db=5.0, amplitude_std_db=4.0,
        min_duration_s=0.2, max_duration_s=0.6,
        min_speed_mps=0.0, max_speed_mps=0.5),
}

# object counts skewed like the real-world mix: cars dominate, clutter is
# the runner-up, vulnerable road users are rare
DEFAULT_MIX: dict[str, int] = {
    "car": 45, "garbage": 60, "pedestrian_group": 12, "truck_bus": 8,
    "pedestrian": 8, "bike": 6,
}


@dataclass(frozen=True)
class SceneConfig:
    """How many objects of each class to simulate, and under what sensor."""

    n_objects: Mapping[str, int] = field(
        default_factory=lambda: dict(DEFAULT_MIX))
    duration_s: float = 30.0
    sensor: SensorSpec = field(default_factory=SensorSpec)
    seed: int = 0
    azimuth_noise_scale: float = 1.0
    quantize: bool = True
    min_range_m: float = 12.0
    max_range_m: float = 70.0
    max_azimuth_rad: float = 0.6
    profiles: Mapping[ClassLabel, ClassProfile] = field(
        default_factory=lambda: dict(DEFAULT_PROFILES))

    def __post_init__(self):
        counts = dict(self.n_objects)
        for name, c in counts.items():
            ClassLabel.from_any(name)
            if c < 0:
                raise ValueError(f"negative object count for {name}")
        if sum(counts.values()) < 1:
            raise ValueError("need at least one object")
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        if self.azimuth_noise_scale < 0:
            raise ValueError("azimuth_noise_scale must be non-negative")
        if not (0 < self.min_range_m < self.max_range_m
                <= self.sensor.range_max_m):
            raise ValueError("bad spawn range band")
        if not 0 < self.max_azimuth_rad <= self.sensor.azimuth_limit_rad:
            raise ValueError("bad spawn azimuth band")


def _azimuth_noise_std_rad(az_rad: float, spec: SensorSpec,
                           scale: float) -> float:
    # resolution degrades toward the edge of the field of view; noise std
    # follows the same band at a quarter of the resolution value
    frac = min(1.0, abs(az_rad) / spec.azimuth_limit_rad)
    res_rad = (spec.azimuth_resolution_min_rad
               + (spec.azimuth_resolution_max_rad
                  - spec.azimuth_resolution_min_rad) * frac)
    return res_rad * 0.25 * scale


def _emit_object(object_id: int, profile: ClassProfile, cfg: SceneConfig,
                 ) -> list[TargetRecord]:
    rng = np.random.default_rng(derive_seed(cfg.seed, "obj", object_id))
    spec = cfg.sensor
    dt = spec.cycle_time_s

    duration = min(float(rng.uniform(profile.min_duration_s,
                                     profile.max_duration_s)),
                   cfg.duration_s)
    t0 = float(rng.uniform(0.0, max(cfg.duration_s - duration, 0.0)))
    speed = float(rng.uniform(profile.min_speed_mps, profile.max_speed_mps))
    heading = float(rng.uniform(0.0, 2.0 * math.pi))
    r0 = float(rng.uniform(cfg.min_range_m, cfg.max_range_m))
    az0 = float(rng.uniform(-cfg.max_azimuth_rad, cfg.max_azimuth_rad))
    cx0, cy0 = r0 * math.cos(az0), r0 * math.sin(az0)
    vx, vy = speed * math.cos(heading), speed * math.sin(heading)
    cos_h, sin_h = math.cos(heading), math.sin(heading)

    k_first = math.ceil(t0 / dt - 1e-12)
    k_last = math.floor((t0 + duration) / dt + 1e-12)
    records: list[TargetRecord] = []
    for k in range(k_first, k_last + 1):
        t = k * dt
        cx = cx0 + vx * (t - t0)
        cy = cy0 + vy * (t - t0)
        count = int(rng.poisson(profile.targets_per_cycle))
        for _ in range(count):
            along = float(rng.uniform(-profile.length_m / 2,
                                      profile.length_m / 2))
            across = float(rng.uniform(-profile.width_m / 2,
                                       profile.width_m / 2))
            x = cx + along * cos_h - across * sin_h
            y = cy + along * sin_h + across * cos_h
            r = math.hypot(x, y)
            if r < 1e-6:
                continue
            az = math.atan2(y, x)
            vr = ((x * vx + y * vy) / r
                  + float(rng.normal(0.0, profile.doppler_spread_mps))
                  if profile.doppler_spread_mps > 0
                  else (x * vx + y * vy) / r)
            amp = float(rng.normal(profile.amplitude_mean_db,
                                   profile.amplitude_std_db)
                        if profile.amplitude_std_db > 0
                        else profile.amplitude_mean_db)
            sigma_az = _azimuth_noise_std_rad(az, spec,
                                              cfg.azimuth_noise_scale)
            if sigma_az > 0:
                az += float(rng.normal(0.0, sigma_az))
            if cfg.quantize:
                r = round(r / spec.range_resolution_m) * spec.range_resolution_m
                vr = round(vr / spec.vr_resolution_mps) * spec.vr_resolution_mps
            if not (spec.range_min_m <= r <= spec.range_max_m):
                continue
            if abs(az) > spec.azimuth_limit_rad:
                continue
            if not (spec.vr_min_mps <= vr <= spec.vr_max_mps):
                continue
            target = target_from_polar(
                time_s=t, range_m=r, azimuth_rad=az, vr_comp_mps=vr,
                amplitude_db=amp, sensor_id=0)
            records.append(TargetRecord(
                target=target, cluster_id=NO_CLUSTER, object_id=object_id,
                label=profile.label))
    return records


def generate(cfg: SceneConfig) -> list[TargetRecord]:
    """All targets of a scene, time-ordered, labels per object."""
    records: list[TargetRecord] = []
    object_id = 0
    for name in CLASS_NAMES:  # fixed class order keeps ids stable
        count = int(dict(cfg.n_objects).get(name, 0))
        label = ClassLabel.from_any(name)
        profile = cfg.profiles[label]
        for _ in range(count):
            records.extend(_emit_object(object_id, profile, cfg))
            object_id += 1
    records.sort(key=lambda rec: (rec.target.time_s, rec.object_id))
    return records


def generate_samples(cfg: SceneConfig) -> list[ClusterSample]:
    """Windowed cluster samples using the ground-truth object identity
    as the cluster id (bypasses density clustering)."""
    by_obj: dict[int, list] = {}
    label_of: dict[int, ClassLabel] = {}
    for rec in generate(cfg):
        by_obj.setdefault(rec.object_id, []).append(rec.target)
        label_of[rec.object_id] = rec.label
    samples: list[ClusterSample] = []
    for oid in sorted(by_obj):
        samples.extend(window_samples(
            by_obj[oid], cluster_id=oid, object_id=oid,
            label=label_of[oid]))
    return samples


# -- feature benchmark with a known informative subset ---------------------------

DEFAULT_INFORMATIVE = ("rSpread", "vrCompSpread", "ampMean", "nTargets",
                       "cohuArea")


@dataclass(frozen=True)
class BenchmarkSet:
    """Feature matrix where only a declared subset carries class signal."""

    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray
    feature_names: tuple[str, ...]
    informative_names: tuple[str, ...]

    def declaration(self) -> dict:
        return {
            "format": "feature-benchmark-v1",
            "feature_names": list(self.feature_names),
            "informative_names": list(self.informative_names),
        }


def generate_feature_benchmark(cfg: SceneConfig,
                               informative: Sequence[str] =
                               DEFAULT_INFORMATIVE,
                               n_noise: int = 15) -> BenchmarkSet:
    """Real features for a declared subset, per-column permutations of real
    features for the rest. The permutation destroys the class alignment of
    a noise column without changing its marginal distribution."""
    informative = tuple(informative)
    for nm in informative:
        if nm not in FEATURE_NAMES:
            raise ValueError(f"unknown feature name {nm!r}")
    noise_names = tuple(nm for nm in FEATURE_NAMES
                        if nm not in informative)[:n_noise]
    if len(noise_names) < n_noise:
        raise ValueError("registry too small for requested noise columns")

    samples = generate_samples(cfg)
    X_all, y, groups, _, _ = extract_matrix(samples)
    col_of = {nm: i for i, nm in enumerate(FEATURE_NAMES)}

    keep = sorted(informative + noise_names, key=lambda nm: col_of[nm])
    X = np.empty((X_all.shape[0], len(keep)), dtype=np.float64)
    for j, nm in enumerate(keep):
        col = X_all[:, col_of[nm]].copy()
        if nm in noise_names:
            rng = np.random.default_rng(
                derive_seed(cfg.seed, "permcol", nm))
            col = col[rng.permutation(col.size)]
        X[:, j] = col
    return BenchmarkSet(X=X, y=y, groups=groups,
                        feature_names=tuple(keep),
                        informative_names=informative)
