"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

import hashlib
import time
from pathlib import Path

import numpy as np
import pytest

from lidarsynth.annotator import ExtendedLabel, ObjectLabel
from lidarsynth.cli import main
from lidarsynth.depth import decode_depth_values, encode_depth_values
from lidarsynth.geometry import Camera, box_from_bottom_center
from lidarsynth.kitti_io import (
    calibration_for,
    read_calibration,
    read_extended_labels,
    read_labels,
    read_point_cloud,
    sidecar_path,
    write_calibration,
    write_extended_labels,
    write_labels,
    write_point_cloud,
)
from lidarsynth.pipeline import RunConfig, make_frame, scene_for_frame
from lidarsynth.scanner import (
    LidarConfig,
    PointCloud,
    add_noise,
    build_scan_pattern,
    generate_point_cloud,
    pattern_rays,
)
from lidarsynth.scene import cast_rays, render
from lidarsynth.scenes import make_scene, street_basic_scene
from lidarsynth.stats import bev_heatmap, class_stats, compare_backends

FULL_CAMERA = Camera()  # 1920x1080, 90 degree horizontal FoV


def report(num: int, ok: bool, text: str) -> None:
    print(f"criterion {num:02d} [{'PASS' if ok else 'FAIL'}] {text}")
    assert ok, f"criterion {num}: {text}"


def scan_scene(scene_name: str, camera=FULL_CAMERA, **scene_params):
    scene = make_scene(scene_name, **scene_params)
    buf, seg = render(scene, camera)
    cloud = generate_point_cloud(buf, seg, camera, LidarConfig(noise_sigma=0.0))
    return scene, cloud


def test_criterion_01_scan_pattern():
    t0 = time.perf_counter()
    pattern = build_scan_pattern(LidarConfig())
    elapsed = time.perf_counter() - t0
    beams = len(np.unique(pattern[:, 1]))
    columns = len(np.unique(pattern[:, 0]))
    ok = beams == 64 and columns == 999 and elapsed < 1.0
    report(1, ok, f"scan pattern: {beams} beams x {columns} columns in {elapsed:.3f} s")


def test_criterion_02_codec_round_trip():
    cam = FULL_CAMERA
    rng = np.random.default_rng(0)
    n = 100_000
    us = rng.integers(0, cam.width, n)
    vs = rng.integers(0, cam.height, n)
    ranges = rng.uniform(cam.near, 0.99 * cam.far, n)
    t0 = time.perf_counter()
    encoded = encode_depth_values(ranges, us, vs, cam)
    decoded = decode_depth_values(encoded, us, vs, cam)
    elapsed = time.perf_counter() - t0
    max_err = float(np.abs(decoded - ranges).max())
    ok = max_err < 1e-6 and elapsed < 1.0
    report(2, ok, f"codec round trip: max error {max_err:.2e} m over {n} pairs in {elapsed:.3f} s")


def test_criterion_03_oracle_equivalence():
    details = []
    ok = True
    for name in ("wall", "sphere", "slope"):
        scene = make_scene(name)
        t0 = time.perf_counter()
        buf, seg = render(scene, FULL_CAMERA)
        cloud = generate_point_cloud(buf, seg, FULL_CAMERA, LidarConfig(noise_sigma=0.0))
        elapsed = time.perf_counter() - t0
        xyz = cloud.xyz.astype(float)
        ranges = np.linalg.norm(xyz, axis=1)
        dirs = xyz / ranges[:, None]
        oracle, _ = cast_rays(scene, dirs)
        finite = np.isfinite(oracle)
        rel = np.abs(ranges[finite] - oracle[finite]) / oracle[finite]
        within_1 = float((rel <= 0.01).mean())
        beyond_2 = float((rel > 0.02).mean())
        ok &= within_1 >= 0.99 and beyond_2 <= 0.001 and elapsed < 10.0
        details.append(f"{name}: {within_1:.2%} <=1%, {beyond_2:.3%} >2%, {elapsed:.1f} s")
    report(3, ok, "oracle equivalence: " + "; ".join(details))


def test_criterion_04_gate_property():
    scene = make_scene("two-plane-step", near_z=2.0, ratio=1.2)
    buf, seg = render(scene, FULL_CAMERA)

    def floating(gate_ratio):
        cfg = LidarConfig(noise_sigma=0.0, gate_ratio=gate_ratio)
        cloud = generate_point_cloud(buf, seg, FULL_CAMERA, cfg)
        xyz = cloud.xyz.astype(float)
        ranges = np.linalg.norm(xyz, axis=1)
        dz = xyz[:, 2] / ranges
        return int(((ranges > 2.0 / dz + 1e-3) & (ranges < 2.4 / dz - 1e-3)).sum())

    gated = floating(1.08)
    ungated = floating(10.0)
    ok = gated == 0 and ungated > 0
    report(4, ok, f"gate property: {gated} floating points at ratio 1.08, {ungated} at ratio 10")


def test_criterion_05_noise_statistics():
    rng = np.random.default_rng(1)
    n = 100_000
    dirs = rng.normal(size=(n, 3))
    dirs[:, 2] = np.abs(dirs[:, 2]) + 0.2
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    clean = PointCloud(dirs * rng.uniform(2.0, 100.0, n)[:, None], np.zeros(n))
    noisy = add_noise(clean, 0.006, seed=1)
    delta = noisy.xyz.astype(float) - clean.xyz.astype(float)
    unit = clean.xyz.astype(float)
    unit /= np.linalg.norm(unit, axis=1, keepdims=True)
    signed = np.einsum("ij,ij->i", delta, unit)
    std = float(signed.std())
    tail = float((np.abs(signed) >= 0.02).mean())
    ok = 0.0057 <= std <= 0.0063 and tail <= 0.002
    report(5, ok, f"noise: radial std {std * 1000:.3f} mm, P(>=2cm) {tail:.5f} over {n} points")


def test_criterion_06_raycast_comparison():
    cmp = compare_backends(street_basic_scene(), FULL_CAMERA, LidarConfig(), entity_range_limit=30.0)
    rows = {r.entity_id: r for r in cmp.rows}
    car_35, car_60 = rows[101], rows[102]
    ped_chamfers = [rows[110].chamfer, rows[111].chamfer]
    ok = (
        car_35.raycast_points == 0
        and car_60.raycast_points == 0
        and car_35.depth_points > 20
        and car_60.depth_points > 20
        and all(c is not None and c > 0.02 for c in ped_chamfers)
    )
    report(
        6, ok,
        f"raycast misses far cars: 35 m car {car_35.depth_points}/{car_35.raycast_points} "
        f"(depth/raycast), 60 m car {car_60.depth_points}/{car_60.raycast_points}; "
        f"pedestrian chamfer {min(c for c in ped_chamfers):.3f} m",
    )


def test_criterion_07_pitched_vehicle_boxes():
    scene, cloud = scan_scene("slope", angle_deg=9.0, vehicle_z=12.0)
    car = scene.entities[0]
    pts = cloud.xyz[cloud.entity_ids == car.id].astype(float)
    pitch_frac = float(car.bbox.inflate(0.02).contains(pts).mean())
    yaw_box = box_from_bottom_center(
        car.bbox.bottom_center(), car.bbox.h, car.bbox.w, car.bbox.l, car.bbox.yaw
    ).inflate(0.02)
    yaw_frac = float(yaw_box.contains(pts).mean())
    ok = len(pts) > 0 and pitch_frac >= 0.99 and yaw_frac < 0.95
    report(
        7, ok,
        f"pitched vehicle: {pitch_frac:.2%} of {len(pts)} points in pitch-aware box, "
        f"{yaw_frac:.2%} in yaw-only box",
    )


def test_criterion_08_point_label_consistency():
    config = RunConfig(
        scene="random",
        camera=Camera(width=1280, height=720),
        lidar=LidarConfig(noise_sigma=0.0),
        frames=20,
        seed=2024,
        noise=False,
        write_images=False,
    )
    inside = 0
    total = 0
    mismatches = 0
    for idx in range(config.frames):
        scene = scene_for_frame(config, idx)
        frame, _ = make_frame(config, idx, scene=scene)
        for entity in scene.entities:
            pts = frame.cloud.xyz[frame.cloud.entity_ids == entity.id].astype(float)
            if len(pts):
                inside += int(entity.bbox.inflate(0.02).contains(pts).sum())
                total += len(pts)
        for ext in frame.extended:
            recount = int(np.count_nonzero(frame.seg.values == ext.entity_id))
            if recount != ext.pixel_count:
                mismatches += 1
    frac = inside / total
    ok = frac >= 0.99 and mismatches == 0
    report(
        8, ok,
        f"point/label consistency: {frac:.3%} of {total} entity points in-box, "
        f"{mismatches} pixel-count mismatches over 20 frames",
    )


def test_criterion_09_format_round_trips(tmp_path):
    rng = np.random.default_rng(3)
    ok = True
    notes = []

    cloud = PointCloud(
        rng.uniform(-50, 50, (3, 3)).astype(np.float32), rng.integers(0, 99, 3)
    )
    path = tmp_path / "c.bin"
    write_point_cloud(cloud, path)
    sizes_ok = path.stat().st_size == 48 and sidecar_path(path).stat().st_size == 12
    again = read_point_cloud(path)
    binary_ok = (
        again.xyz.tobytes() == cloud.xyz.tobytes()
        and again.entity_ids.tobytes() == cloud.entity_ids.tobytes()
    )
    ok &= sizes_ok and binary_ok
    notes.append(f"cloud 48+12 bytes={sizes_ok}, lossless={binary_ok}")

    labels = [
        ObjectLabel(
            "Car", 0.25, 1, -1.04, (10.25, 20.5, 100.75, 90.0),
            (1.53, 1.87, 4.42), (2.11, 1.65, 17.24), 0.79,
        )
    ]
    write_labels(labels, tmp_path / "l.txt")
    lb = read_labels(tmp_path / "l.txt")[0]
    label_ok = (
        lb.type == "Car"
        and abs(lb.truncated - 0.25) <= 0.005
        and np.allclose(lb.bbox, labels[0].bbox, atol=0.005)
        and np.allclose(lb.location, labels[0].location, atol=0.005)
        and abs(lb.rotation_y - 0.79) <= 0.005
    )
    ok &= label_ok
    notes.append(f"label 2-decimal={label_ok}")

    ext = [ExtendedLabel(100, 1523, 3.21, "ingot", 0.05, -0.02)]
    write_extended_labels(ext, tmp_path / "e.txt")
    e = read_extended_labels(tmp_path / "e.txt", expected_count=1)[0]
    ext_ok = (
        e.entity_id == 100 and e.pixel_count == 1523 and abs(e.speed - 3.21) <= 0.005
        and e.model_name == "ingot" and abs(e.pitch - 0.05) <= 0.005
    )
    ok &= ext_ok
    notes.append(f"extended={ext_ok}")

    calib = calibration_for(FULL_CAMERA)
    write_calibration(calib, tmp_path / "cal.txt")
    c2 = read_calibration(tmp_path / "cal.txt")
    calib_ok = (
        np.array_equal(c2.p2, calib.p2)
        and np.array_equal(c2.r0_rect, calib.r0_rect)
        and np.array_equal(c2.tr_velo_to_cam, calib.tr_velo_to_cam)
    )
    ok &= calib_ok
    notes.append(f"calibration identical={calib_ok}")

    report(9, ok, "format round trips: " + ", ".join(notes))


def _digest_tree(root: Path) -> dict:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_criterion_10_determinism(tmp_path):
    args = [
        "dataset", "--scene", "random", "--frames", "4", "--seed", "77",
        "--width", "320", "--height", "180",
        "--theta-res", "0.36", "--phi-res", "0.84",
    ]
    for out, workers in (("a", 1), ("b", 1), ("w8", 8)):
        rc = main(args + ["--out", str(tmp_path / out), "--workers", str(workers)])
        assert rc == 0
    d_a = _digest_tree(tmp_path / "a")
    d_b = _digest_tree(tmp_path / "b")
    d_w8 = _digest_tree(tmp_path / "w8")
    ok = d_a == d_b == d_w8 and len(d_a) > 0
    report(
        10, ok,
        f"determinism: {len(d_a)} files byte-identical across reruns and workers 1 vs 8",
    )


def test_criterion_11_stats_correctness(tmp_path):
    (tmp_path / "label_2").mkdir()

    def car(x, z):
        return ObjectLabel("Car", 0.0, 0, 0.0, (0, 0, 10, 10), (1.5, 1.9, 4.4), (x, 1.7, z), 0.0)

    frames = [
        [car(0, 10), car(3, 20), car(-3, 30)],
        [],
        [car(1, 40), car(2, 50)],
        [car(0, 5), car(1, 15), car(2, 25), car(41.0, 35)],  # last one out of BEV extent
    ]
    for i, labels in enumerate(frames):
        write_labels(labels, tmp_path / "label_2" / f"{i:06d}.txt")

    stats = class_stats(tmp_path)
    counts_ok = stats.counts["Car"] == 9
    apicc_ok = stats.apicc["Car"] == pytest.approx(3.0)

    hm = bev_heatmap(tmp_path, "Car", cell_size=0.5)
    in_extent = sum(
        1 for frame in frames for lb in frame
        if -40 <= lb.location[0] <= 40 and 0 <= lb.location[2] <= 100
    )
    mass_ok = hm.mass == in_extent == 8
    ok = counts_ok and apicc_ok and mass_ok
    report(
        11, ok,
        f"stats: Car count {stats.counts['Car']} (want 9), APICC {stats.apicc['Car']:.2f} "
        f"(want 3.00), heatmap mass {hm.mass} (want {in_extent})",
    )
