"""Spinning-LiDAR emulation over a rendered depth buffer.

A scan pattern of (horizontal, vertical) ray angles mimicking a 64-beam
unit is projected into the image; each ray samples the depth buffer with
disparity gating and becomes a 3D point with the entity id of its nearest
pixel. All points are instantaneous (no per-point timestamps) and carry
no reflectance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .depth import DEFAULT_GATE_RATIO, DepthBuffer, SegmentationImage, gated_sample_many
from .geometry import Camera, project_points


@dataclass(frozen=True)
class LidarConfig:
    """Scan pattern and noise parameters; angles in degrees, ranges in metres.

    Defaults mimic a Velodyne HDL-64E over a forward 90 degree field of
    view: 0.09 deg columns, 64 beams between -24.9 and 2 deg, 120 m max
    range, 6 mm Gaussian range noise.
    """

    theta_r: float = 0.09
    phi_r: float = 0.42
    theta_min: float = -45.0
    theta_max: float = 45.0
    phi_min: float = -24.9
    phi_max: float = 2.0
    d_max: float = 120.0
    gate_ratio: float = DEFAULT_GATE_RATIO
    noise_sigma: float = 0.006
    seed: int = 0

    def __post_init__(self):
        if self.theta_r <= 0 or self.phi_r <= 0:
            raise ValueError("angular resolutions must be positive")
        if self.d_max <= 0:
            raise ValueError("maximum range must be positive")
        if self.gate_ratio <= 1.0:
            raise ValueError("gate ratio must exceed 1")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")


@dataclass(frozen=True)
class PointCloud:
    """Points in the sensor frame plus per-point entity ids.

    The id is the entity the point landed on, or the background stencil
    code when it did not hit an annotated object.
    """

    xyz: np.ndarray
    entity_ids: np.ndarray

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float32).reshape(-1, 3)
        ids = np.asarray(self.entity_ids, dtype=np.uint32).reshape(-1)
        if len(xyz) != len(ids):
            raise ValueError("point count and entity id count differ")
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "entity_ids", ids)

    def __len__(self) -> int:
        return len(self.xyz)


def _angle_multiples(res: float, lo: float, hi: float, inclusive: bool) -> np.ndarray:
    """Integer multiples of res inside (lo, hi) or [lo, hi]; exact k*res
    arithmetic avoids accumulation drift over long scans."""
    eps = max(abs(lo), abs(hi), 1.0) * 1e-9
    k_lo = math.floor(lo / res) - 1
    k_hi = math.ceil(hi / res) + 1
    ks = np.arange(k_lo, k_hi + 1)
    vals = ks * res
    if inclusive:
        keep = (vals >= lo - eps) & (vals <= hi + eps)
    else:
        keep = (vals > lo + eps) & (vals < hi - eps)
    return vals[keep]


def build_scan_pattern(config: LidarConfig) -> np.ndarray:
    """Ordered (theta, phi) angles in degrees, shape (N, 2).

    Horizontal angles are the multiples of theta_r strictly inside the
    horizontal limits; vertical angles are the multiples of phi_r inside
    the inclusive vertical limits. Ordering is column-major: all beams of
    the first column, then the next column.
    """
    thetas = _angle_multiples(config.theta_r, config.theta_min, config.theta_max, inclusive=False)
    phis = _angle_multiples(config.phi_r, config.phi_min, config.phi_max, inclusive=True)
    if len(thetas) == 0 or len(phis) == 0:
        raise ValueError("scan pattern is empty for this configuration")
    tt = np.repeat(thetas, len(phis))
    pp = np.tile(phis, len(thetas))
    return np.column_stack([tt, pp])


def pattern_rays(pattern: np.ndarray) -> np.ndarray:
    """Unit ray directions for (theta, phi) pattern angles in degrees."""
    t = np.radians(pattern[:, 0])
    p = np.radians(pattern[:, 1])
    return np.column_stack([np.cos(p) * np.sin(t), -np.sin(p), np.cos(p) * np.cos(t)])


def generate_point_cloud(
    buffer: DepthBuffer,
    seg: SegmentationImage,
    camera: Camera,
    config: LidarConfig,
) -> PointCloud:
    """Run the scan pattern over a rendered frame.

    Rays whose projection falls outside the image are skipped (no depth
    neighbourhood exists for them); samples at or beyond the maximum range
    are dropped. Point order follows pattern order, and the result is
    reproducible from the config alone.
    """
    if buffer.values.shape != seg.values.shape:
        raise ValueError("depth buffer and segmentation image sizes differ")
    if buffer.width != camera.width or buffer.height != camera.height:
        raise ValueError("buffer dimensions do not match the camera")

    pattern = build_scan_pattern(config)
    dirs = pattern_rays(pattern)
    forward = dirs[:, 2] > 0.0
    us = np.full(len(dirs), -1.0)
    vs = np.full(len(dirs), -1.0)
    us[forward], vs[forward] = project_points(dirs[forward], camera)
    in_image = (
        forward
        & (us >= 0.0) & (us <= camera.width - 1)
        & (vs >= 0.0) & (vs <= camera.height - 1)
    )

    ranges, entities = gated_sample_many(
        us[in_image], vs[in_image], buffer, seg, camera, config.gate_ratio
    )
    keep = ranges < config.d_max
    points = dirs[in_image][keep] * ranges[keep, None]
    cloud = PointCloud(points, entities[keep])
    if config.noise_sigma > 0.0:
        cloud = add_noise(cloud, config.noise_sigma, config.seed)
    return cloud


def add_noise(cloud: PointCloud, sigma: float, seed) -> PointCloud:
    """Displace each point along its own ray by an independent Gaussian
    sample. Noise for point i depends only on (seed, i), so the result is
    identical however the cloud was produced."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0.0 or len(cloud) == 0:
        return cloud
    rng = np.random.default_rng(seed)
    disp = rng.normal(0.0, sigma, len(cloud))
    xyz = cloud.xyz.astype(np.float64)
    norms = np.linalg.norm(xyz, axis=1, keepdims=True)
    dirs = xyz / norms
    return PointCloud(xyz + dirs * disp[:, None], cloud.entity_ids)
