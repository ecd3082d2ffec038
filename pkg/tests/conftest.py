"""Shared builders and fixtures.

Expensive generator scenes are session-scoped; everything else is built
fresh per test from explicit seeds.
"""

from __future__ import annotations

import numpy as np
import pytest

from radarclf.data_model import (AugmentationTag, ClassLabel, ClusterSample,
                                 target_from_polar)
from radarclf.synthgen import SceneConfig, generate_samples


def polar_target(time_s, range_m, azimuth_rad, vr=0.0, amp=10.0, sensor_id=0):
    return target_from_polar(time_s, range_m, azimuth_rad, vr, amp, sensor_id)


def xy_target(x, y, time_s=0.01, vr=0.0, amp=10.0):
    """Target at Cartesian (x, y); range/azimuth derived."""
    r = float(np.hypot(x, y))
    az = float(np.arctan2(y, x))
    return target_from_polar(time_s, r, az, vr, amp)


def make_sample(xy, vr=None, amp=None, times=None, label=ClassLabel.CAR,
                cluster_id=0, object_id=0):
    """One-window cluster sample from Cartesian coordinates.

    All targets default into the first window [0, 0.15); pass explicit
    times only when they stay inside one window.
    """
    xy = np.asarray(xy, dtype=np.float64)
    n = xy.shape[0]
    vr = np.zeros(n) if vr is None else np.asarray(vr, dtype=np.float64)
    amp = np.full(n, 10.0) if amp is None else np.asarray(amp,
                                                          dtype=np.float64)
    times = np.full(n, 0.01) if times is None else np.asarray(
        times, dtype=np.float64)
    targets = tuple(
        xy_target(xy[i, 0], xy[i, 1], time_s=float(times[i]),
                  vr=float(vr[i]), amp=float(amp[i]))
        for i in range(n))
    k = int(np.floor(times[0] / 0.15))
    return ClusterSample(cluster_id=cluster_id, object_id=object_id,
                         label=label, window_start_s=k * 0.15,
                         targets=targets,
                         augmentation_tag=AugmentationTag.ORIGINAL)


def sample_xy(sample):
    """Cartesian coordinates as stored on the sample's targets."""
    return np.array([[t.x_m, t.y_m] for t in sample.targets])


def random_xy_targets(rng, n, box=20.0, t_span=1.0, vr_span=4.0):
    """Unstructured targets for clustering stress tests."""
    out = []
    for _ in range(n):
        x = rng.uniform(5.0, 5.0 + box)
        y = rng.uniform(-box / 2, box / 2)
        out.append(xy_target(x, y, time_s=float(rng.uniform(0, t_span)),
                             vr=float(rng.uniform(-vr_span, vr_span))))
    return out


SMALL_MIX = {"car": 6, "garbage": 8, "pedestrian_group": 3, "truck_bus": 2,
             "pedestrian": 2, "bike": 2}


@pytest.fixture(scope="session")
def small_scene_samples():
    cfg = SceneConfig(n_objects=SMALL_MIX, duration_s=20.0, seed=11)
    return generate_samples(cfg)


@pytest.fixture(scope="session")
def six_class_matrix():
    """Feature matrix with all six classes, enough rows for CV tests."""
    from radarclf.features import extract_matrix
    cfg = SceneConfig(
        n_objects={"car": 10, "garbage": 10, "pedestrian_group": 8,
                   "truck_bus": 8, "pedestrian": 8, "bike": 8},
        duration_s=30.0, seed=29)
    samples = generate_samples(cfg)
    X, y, groups, starts, object_ids = extract_matrix(samples)
    return X, y, groups
