import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radarclf.data_model import (
    NO_CLUSTER, WINDOW_LENGTH_S, AugmentationTag, ClassLabel, ClusterSample,
    EgoState, RawDetection, RejectedDetection, SensorPose, SensorSpec,
    TargetRecord, augment_drop, compensate_ego_motion, read_samples_jsonl,
    read_targets_csv, samples_from_records, target_from_polar,
    to_common_frame, window_samples, write_samples_jsonl, write_targets_csv,
)

finite_angle = st.floats(min_value=-math.pi, max_value=math.pi)


def raw(r, az, vr=0.0, t=0.0, sid=0, amp=10.0):
    return RawDetection(time_s=t, sensor_id=sid, range_m=r, azimuth_rad=az,
                        vr_mps=vr, amplitude_db=amp)


# -- frame transform -----------------------------------------------------------

def test_identity_pose_keeps_polar_coordinates():
    t = to_common_frame(raw(10.0, 0.0), SensorPose())
    assert (t.x_m, t.y_m) == pytest.approx((10.0, 0.0), abs=1e-12)
    assert t.range_m == pytest.approx(10.0, abs=1e-12)
    assert t.azimuth_rad == pytest.approx(0.0, abs=1e-12)


def test_offset_rotated_sensor_lands_in_vehicle_frame():
    # sensor one meter ahead, looking 90 degrees left; a boresight return at
    # 2 m sits at vehicle coordinates (1, 2)
    pose = SensorPose(x_m=1.0, y_m=0.0, boresight_rad=math.pi / 2)
    t = to_common_frame(raw(2.0, 0.0), pose)
    assert (t.x_m, t.y_m) == pytest.approx((1.0, 2.0), abs=1e-12)


def test_out_of_band_detections_are_rejected():
    with pytest.raises(RejectedDetection):
        to_common_frame(raw(-1.0, 0.0), SensorPose())
    with pytest.raises(RejectedDetection):
        to_common_frame(raw(120.0, 0.0), SensorPose())
    with pytest.raises(RejectedDetection):
        to_common_frame(raw(10.0, math.radians(60.0)), SensorPose())
    with pytest.raises(RejectedDetection):
        to_common_frame(raw(10.0, 0.0, vr=-120.0), SensorPose())


def test_vr_band_is_asymmetric():
    spec = SensorSpec()
    assert to_common_frame(raw(10.0, 0.0, vr=-110.0), SensorPose(),
                           spec).vr_comp_mps == -110.0
    with pytest.raises(RejectedDetection):
        to_common_frame(raw(10.0, 0.0, vr=110.0), SensorPose(), spec)


@given(r=st.floats(min_value=0.25, max_value=100.0), az=finite_angle)
def test_polar_cartesian_round_trip(r, az):
    t = target_from_polar(0.0, r, az, 0.0, 0.0)
    assert math.hypot(t.x_m, t.y_m) == pytest.approx(r, rel=1e-9)
    back = math.atan2(t.y_m, t.x_m)
    assert math.cos(back) == pytest.approx(math.cos(az), abs=1e-9)
    assert math.sin(back) == pytest.approx(math.sin(az), abs=1e-9)


def test_target_rejects_inconsistent_cartesian():
    with pytest.raises(ValueError):
        ClusterSample  # keep import alive for readability
        from radarclf.data_model import Target
        Target(time_s=0.0, x_m=5.0, y_m=5.0, range_m=10.0, azimuth_rad=0.0,
               vr_comp_mps=0.0, amplitude_db=0.0)


# -- ego-motion compensation ------------------------------------------------------

def test_zero_ego_motion_is_identity():
    t = target_from_polar(0.0, 10.0, 0.3, -2.5, 5.0)
    assert compensate_ego_motion(-2.5, t, EgoState()) == -2.5


def test_straight_driving_cancels_head_on_return():
    # driving at 10 m/s toward a static wall dead ahead reads -10 m/s raw
    t = target_from_polar(0.0, 20.0, 0.0, -10.0, 5.0)
    ego = EgoState(speed_mps=10.0)
    assert compensate_ego_motion(-10.0, t, ego) == pytest.approx(0.0,
                                                                 abs=1e-12)


def test_yaw_and_lever_arm_hand_value():
    t = target_from_polar(0.0, 10.0, math.pi / 4, -3.0, 5.0)
    ego = EgoState(speed_mps=5.0, yaw_rate_radps=0.1,
                   sensor_poses=((0, SensorPose(2.0, 1.0, 0.0)),))
    got = compensate_ego_motion(-3.0, t, ego)
    sx = 5.0 - 0.1 * 1.0
    sy = 0.1 * 2.0
    expected = -3.0 + sx * math.cos(t.azimuth_rad) + sy * math.sin(t.azimuth_rad)
    assert got == expected
    assert got == pytest.approx(0.6062445840513926, abs=1e-12)


@given(speed=st.floats(min_value=0.0, max_value=40.0),
       yaw=st.floats(min_value=-1.0, max_value=1.0),
       px=st.floats(min_value=-3.0, max_value=3.0),
       py=st.floats(min_value=-2.0, max_value=2.0),
       az=finite_angle)
def test_static_world_point_compensates_to_zero(speed, yaw, px, py, az):
    # raw Doppler of a static point is minus the sensor velocity projected
    # on the line of sight; compensation must cancel it
    ego = EgoState(speed_mps=speed, yaw_rate_radps=yaw,
                   sensor_poses=((0, SensorPose(px, py, 0.0)),))
    t = target_from_polar(0.0, 30.0, az, 0.0, 5.0)
    sx = speed - yaw * py
    sy = yaw * px
    raw_vr = -(sx * math.cos(az) + sy * math.sin(az))
    assert compensate_ego_motion(raw_vr, t, ego) == pytest.approx(0.0,
                                                                  abs=1e-9)


@given(v1=st.floats(min_value=-50, max_value=50),
       v2=st.floats(min_value=-50, max_value=50),
       az=finite_angle)
def test_compensation_is_a_shift_in_raw_vr(v1, v2, az):
    t = target_from_polar(0.0, 15.0, az, 0.0, 5.0)
    ego = EgoState(speed_mps=7.0, yaw_rate_radps=0.2,
                   sensor_poses=((0, SensorPose(1.5, 0.5, 0.0)),))
    d = compensate_ego_motion(v1, t, ego) - compensate_ego_motion(v2, t, ego)
    assert d == pytest.approx(v1 - v2, abs=1e-9)


# -- windowing -----------------------------------------------------------------

def track(times):
    return [target_from_polar(t, 10.0, 0.0, 1.0, 5.0) for t in times]


def test_half_second_track_fills_three_windows():
    samples = window_samples(track([i * 0.05 for i in range(9)]),
                             cluster_id=4)
    assert [s.window_start_s for s in samples] == [0.0, 0.15, 0.30]
    assert [s.n_targets for s in samples] == [3, 3, 3]
    assert all(s.cluster_id == 4 for s in samples)


def test_single_target_gives_single_window():
    samples = window_samples(track([0.31]), cluster_id=0)
    assert len(samples) == 1
    assert samples[0].window_start_s == pytest.approx(0.30)
    assert samples[0].n_targets == 1


def test_targets_straddling_grid_boundary_split():
    # 0.10 and 0.20 are only 100 ms apart but sit in different grid cells
    samples = window_samples(track([0.10, 0.20]), cluster_id=0)
    assert len(samples) == 2
    assert [s.n_targets for s in samples] == [1, 1]


def test_windowing_requires_time_order():
    with pytest.raises(ValueError):
        window_samples(track([0.2, 0.1]), cluster_id=0)


def test_empty_track_gives_no_windows():
    assert window_samples([], cluster_id=0) == []


@given(st.lists(st.floats(min_value=0.0, max_value=3.0), min_size=1,
                max_size=60))
def test_windowing_partitions_the_track(times):
    targets = track(sorted(times))
    samples = window_samples(targets, cluster_id=1)
    windowed = [t for s in samples for t in s.targets]
    assert sorted(t.time_s for t in windowed) == sorted(t.time_s
                                                        for t in targets)
    for s in samples:
        k = round(s.window_start_s / WINDOW_LENGTH_S)
        for t in s.targets:
            assert math.floor(t.time_s / WINDOW_LENGTH_S) == k


def test_window_membership_survives_cycle_grid_arithmetic():
    # 285 * 0.06 is representationally just below the 17.1 s window edge;
    # grid-index membership must not reject it
    t = 285 * 0.06
    samples = window_samples(track([t]), cluster_id=0)
    assert len(samples) == 1


def test_cluster_sample_rejects_foreign_targets():
    with pytest.raises(ValueError):
        ClusterSample(cluster_id=0, object_id=0, label=None,
                      window_start_s=0.0,
                      targets=tuple(track([0.16])))


def test_cluster_sample_needs_a_target():
    with pytest.raises(ValueError):
        ClusterSample(cluster_id=0, object_id=0, label=None,
                      window_start_s=0.0, targets=())


# -- augmentation ------------------------------------------------------------------

def one_window_sample(n):
    targets = tuple(target_from_polar(0.003 * i, 10.0 + i, 0.0, 1.0, 5.0)
                    for i in range(n))
    return ClusterSample(cluster_id=0, object_id=0, label=ClassLabel.CAR,
                         window_start_s=0.0, targets=targets)


def test_drop_removes_forty_percent_rounded():
    out = augment_drop(one_window_sample(10), seed=1)
    assert out.n_targets == 6
    assert out.augmentation_tag is AugmentationTag.DROPPED40


def test_drop_skips_a_single_target():
    s = one_window_sample(1)
    out = augment_drop(s, seed=1)
    assert out is s
    assert out.augmentation_tag is AugmentationTag.ORIGINAL


def test_drop_is_seed_deterministic():
    s = one_window_sample(5)
    a = augment_drop(s, seed=9)
    b = augment_drop(s, seed=9)
    c = augment_drop(s, seed=10)
    assert a.targets == b.targets
    assert a.n_targets == 3  # round(0.4 * 5) = 2 dropped
    assert c.n_targets == 3


@given(n=st.integers(min_value=2, max_value=40),
       seed=st.integers(min_value=0, max_value=2 ** 16))
def test_drop_keeps_a_subset_in_order(n, seed):
    s = one_window_sample(n)
    out = augment_drop(s, seed=seed)
    kept = set(out.targets)
    assert kept <= set(s.targets)
    times = [t.time_s for t in out.targets]
    assert times == sorted(times)
    assert out.n_targets == n - math.floor(0.4 * n + 0.5)


# -- interchange -------------------------------------------------------------------

def test_target_csv_round_trip(tmp_path):
    path = tmp_path / "targets.csv"
    records = [
        TargetRecord(target=target_from_polar(0.061, 12.345678901234567,
                                              0.25, -3.3, 17.25),
                     cluster_id=2, object_id=5, label=ClassLabel.BIKE),
        TargetRecord(target=target_from_polar(0.121, 50.0, -0.4, 0.0, 3.0)),
    ]
    write_targets_csv(path, records)
    text = path.read_text()
    header = text.splitlines()[0]
    assert header == ("time_s,sensor_id,range_m,azimuth_rad,vr_mps,"
                      "amplitude_db,cluster_id,object_id,label")
    back = read_targets_csv(path)
    assert len(back) == 2
    assert back[0].target == records[0].target
    assert back[0].cluster_id == 2
    assert back[0].object_id == 5
    assert back[0].label is ClassLabel.BIKE
    assert back[1].cluster_id == NO_CLUSTER
    assert back[1].label is None


def test_target_csv_floats_survive_the_text_format(tmp_path):
    path = tmp_path / "t.csv"
    r = 1.0 / 3.0 + 10.0
    write_targets_csv(path, [TargetRecord(
        target=target_from_polar(0.0, r, 0.1, -1.0 / 7.0, 2.0 / 3.0))])
    back = read_targets_csv(path)[0].target
    assert back.range_m == r
    assert back.vr_comp_mps == -1.0 / 7.0


def test_samples_jsonl_round_trip(tmp_path):
    path = tmp_path / "samples.jsonl"
    samples = [one_window_sample(3),
               augment_drop(one_window_sample(8), seed=2)]
    write_samples_jsonl(path, samples)
    back = read_samples_jsonl(path)
    assert back == samples


def test_samples_from_records_groups_and_majority_labels():
    recs = []
    for i, lab in enumerate([ClassLabel.CAR, ClassLabel.CAR,
                             ClassLabel.TRUCK_BUS]):
        recs.append(TargetRecord(
            target=target_from_polar(0.01 * i, 10.0, 0.0, 1.0, 5.0),
            cluster_id=7, object_id=1, label=lab))
    recs.append(TargetRecord(
        target=target_from_polar(0.0, 20.0, 0.0, 1.0, 5.0),
        cluster_id=NO_CLUSTER, object_id=2, label=ClassLabel.BIKE))
    samples = samples_from_records(recs)
    assert len(samples) == 1
    assert samples[0].label is ClassLabel.CAR
    assert samples[0].n_targets == 3


def test_class_labels_parse_from_names_and_codes():
    assert ClassLabel.from_any("truck_bus") is ClassLabel.TRUCK_BUS
    assert ClassLabel.from_any("4") is ClassLabel.TRUCK_BUS
    assert ClassLabel.from_any(np.int64(2)) is ClassLabel.PEDESTRIAN_GROUP
    assert ClassLabel.from_any(ClassLabel.CAR) is ClassLabel.CAR
    with pytest.raises(KeyError):
        ClassLabel.from_any("lorry")
