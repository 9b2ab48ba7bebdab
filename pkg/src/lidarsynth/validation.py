"""Self-checks runnable from the CLI: oracle equivalence, gating, field of
view, noise statistics, and point/label consistency on built-in scenes."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import Camera
from .pipeline import RunConfig, make_frame, scene_for_frame
from .scanner import LidarConfig, PointCloud, add_noise, generate_point_cloud
from .scene import cast_rays, render
from .scenes import make_scene


@dataclass
class CheckResult:
    name: str
    passed: bool | None  # None means skipped
    details: str

    @property
    def status(self) -> str:
        if self.passed is None:
            return "SKIP"
        return "PASS" if self.passed else "FAIL"


def _quiet(config: LidarConfig) -> LidarConfig:
    return replace(config, noise_sigma=0.0)


def scan_with_oracle(scene, camera: Camera, config: LidarConfig):
    """Noise-free scan plus exact per-ray oracle ranges for emitted points."""
    buffer, seg = render(scene, camera)
    cloud = generate_point_cloud(buffer, seg, camera, _quiet(config))
    xyz = cloud.xyz.astype(float)
    ranges = np.linalg.norm(xyz, axis=1)
    dirs = xyz / ranges[:, None]
    oracle, _ = cast_rays(scene, dirs)
    return cloud, ranges, oracle


def check_oracle_equivalence(camera: Camera, config: LidarConfig) -> CheckResult:
    """At least 99% of emitted points within 1% of the exact raycast range,
    and at most 0.1% beyond 2%, on the smooth built-in scenes."""
    worst = []
    for name in ("wall", "sphere", "slope"):
        scene = make_scene(name)
        _, ranges, oracle = scan_with_oracle(scene, camera, config)
        ok = np.isfinite(oracle)
        rel = np.abs(ranges[ok] - oracle[ok]) / oracle[ok]
        frac_1 = float((rel <= 0.01).mean())
        frac_2 = float((rel > 0.02).mean())
        worst.append((name, frac_1, frac_2))
    passed = all(f1 >= 0.99 and f2 <= 0.001 for _, f1, f2 in worst)
    details = "; ".join(f"{n}: {f1:.2%} within 1%, {f2:.3%} beyond 2%" for n, f1, f2 in worst)
    return CheckResult("oracle-equivalence", passed, details)


def gate_violations(camera: Camera, config: LidarConfig, near_z: float = 2.0, ratio: float = 1.2) -> int:
    """Points strictly between the two plane ranges (1 mm margin) on the
    step scene; the gate should leave none."""
    scene = make_scene("two-plane-step", near_z=near_z, ratio=ratio)
    buffer, seg = render(scene, camera)
    cloud = generate_point_cloud(buffer, seg, camera, _quiet(config))
    xyz = cloud.xyz.astype(float)
    ranges = np.linalg.norm(xyz, axis=1)
    dz = xyz[:, 2] / ranges
    r_near = near_z / dz
    r_far = near_z * ratio / dz
    between = (ranges > r_near + 1e-3) & (ranges < r_far - 1e-3)
    return int(between.sum())


def check_gate(camera: Camera, config: LidarConfig) -> CheckResult:
    n = gate_violations(camera, config)
    return CheckResult(
        "gate", n == 0, f"{n} floating points across the step (gate ratio {config.gate_ratio})"
    )


def check_fov(camera: Camera, config: LidarConfig) -> CheckResult:
    """Every emitted point's direction stays inside the scan limits."""
    scene = make_scene("street-basic")
    buffer, seg = render(scene, camera)
    cloud = generate_point_cloud(buffer, seg, camera, config)
    xyz = cloud.xyz.astype(float)
    theta = np.degrees(np.arctan2(xyz[:, 0], xyz[:, 2]))
    phi = np.degrees(np.arcsin(-xyz[:, 1] / np.linalg.norm(xyz, axis=1)))
    tol = 1e-6
    ok = (
        np.all(np.abs(theta) < abs(config.theta_max) + tol)
        and np.all(phi >= config.phi_min - tol)
        and np.all(phi <= config.phi_max + tol)
    )
    details = f"theta in [{theta.min():.2f}, {theta.max():.2f}], phi in [{phi.min():.2f}, {phi.max():.2f}] deg"
    return CheckResult("fov", bool(ok), details)


def noise_displacement_stats(sigma: float, seed: int = 0, n: int = 100_000) -> tuple[float, float]:
    """Empirical signed radial displacement std and the fraction of
    displacements at or beyond 2 cm, for a synthetic cloud of n points."""
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs[:, 2] = np.abs(dirs[:, 2]) + 0.1
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    ranges = rng.uniform(2.0, 100.0, n)
    clean = PointCloud(dirs * ranges[:, None], np.zeros(n))
    noisy = add_noise(clean, sigma, seed)
    delta = noisy.xyz.astype(float) - clean.xyz.astype(float)
    signed = np.einsum("ij,ij->i", delta, dirs)
    return float(signed.std()), float((np.abs(signed) >= 0.02).mean())


def check_noise(config: LidarConfig) -> CheckResult:
    if config.noise_sigma == 0.0:
        return CheckResult("noise-statistics", None, "noise disabled, check skipped")
    std, tail = noise_displacement_stats(config.noise_sigma, seed=config.seed)
    lo, hi = 0.95 * config.noise_sigma, 1.05 * config.noise_sigma
    passed = lo <= std <= hi and tail <= 0.002
    return CheckResult(
        "noise-statistics", passed,
        f"std {std * 1000:.2f} mm (want {lo * 1000:.2f}..{hi * 1000:.2f}), tail>=2cm {tail:.4f}",
    )


def check_point_label_consistency(
    camera: Camera, config: LidarConfig, frames: int = 5, seed: int = 0
) -> CheckResult:
    """Across a seeded random dataset: entity-tagged noise-free points fall
    inside their entity's oriented box (2 cm inflation) at least 99% of the
    time, and every extended pixel count matches a mask recount."""
    run = RunConfig(
        scene="random", camera=camera, lidar=_quiet(config),
        frames=frames, seed=seed, noise=False, write_images=False,
    )
    inside = 0
    total = 0
    count_mismatches = 0
    for idx in range(frames):
        scene = scene_for_frame(run, idx)
        frame, _ = make_frame(run, idx, scene=scene)
        for entity in scene.entities:
            pts = frame.cloud.xyz[frame.cloud.entity_ids == entity.id].astype(float)
            if len(pts) == 0:
                continue
            box = entity.bbox.inflate(0.02)
            inside += int(box.contains(pts).sum())
            total += len(pts)
        recount = {
            e.id: int(np.count_nonzero(frame.seg.values == e.id)) for e in scene.entities
        }
        for ext in frame.extended:
            if recount.get(ext.entity_id, 0) != ext.pixel_count:
                count_mismatches += 1
    frac = inside / total if total else 1.0
    passed = frac >= 0.99 and count_mismatches == 0
    return CheckResult(
        "point-label-consistency", passed,
        f"{frac:.4%} of {total} entity points in-box, {count_mismatches} pixel-count mismatches",
    )


def run_all(
    camera: Camera | None = None,
    config: LidarConfig | None = None,
    frames: int = 5,
    seed: int = 0,
) -> list[CheckResult]:
    camera = camera or Camera()
    config = config or LidarConfig()
    return [
        check_oracle_equivalence(camera, config),
        check_gate(camera, config),
        check_fov(camera, config),
        check_noise(config),
        check_point_label_consistency(camera, config, frames=frames, seed=seed),
    ]
