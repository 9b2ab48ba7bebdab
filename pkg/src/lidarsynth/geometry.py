"""Camera-frame math: rotations, pinhole projection, oriented boxes.

The sensor frame used throughout the package: x right, y down, z forward
(right handed). Angles are radians unless a name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# A point or direction in the sensor frame, shape (3,), metres.
Vec3 = np.ndarray

# Fractional pixel coordinates (u along width, v along height).
PixelCoord = tuple[float, float]

FORWARD = np.array([0.0, 0.0, 1.0])


def rotation_y(theta: float) -> np.ndarray:
    """Rotation about y (down). Positive angle turns forward toward +x."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_x(phi: float) -> np.ndarray:
    """Rotation about x (right). Positive angle turns forward toward -y (up)."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_z(psi: float) -> np.ndarray:
    """Rotation about z (forward). Positive angle turns +x toward +y."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def make_ray(theta: float, phi: float) -> Vec3:
    """Unit ray at horizontal angle theta and elevation phi (radians)."""
    return rotation_y(theta) @ rotation_x(phi) @ FORWARD


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi]."""
    return math.atan2(math.sin(a), math.cos(a))


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: image size in pixels, vertical FoV in radians,
    near/far clip distances in metres.

    Defaults give a 1920x1080 image with a 90 degree horizontal FoV.
    """

    width: int = 1920
    height: int = 1080
    fov_v: float = 2.0 * math.atan(9.0 / 16.0)
    near: float = 0.15
    far: float = 600.0

    def __post_init__(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ValueError("image must be at least 2x2 pixels")
        if not 0.0 < self.fov_v < math.pi:
            raise ValueError("fov_v must be in (0, pi)")
        if self.near <= 0.0:
            raise ValueError("near clip distance must be positive")
        if self.far <= self.near:
            raise ValueError("far clip must exceed near clip")

    @property
    def aspect(self) -> float:
        return self.width / self.height


def clipping_plane_dims(camera: Camera) -> tuple[float, float]:
    """Metric (width, height) of the near clipping plane."""
    nc_h = 2.0 * camera.near * math.tan(camera.fov_v / 2.0)
    return camera.aspect * nc_h, nc_h


def project(direction: Vec3, camera: Camera) -> PixelCoord:
    """Project a forward direction to fractional pixel coordinates.

    The principal point is the image centre ((W-1)/2, (H-1)/2); the near
    plane edges map to the image edges. Raises ValueError for directions
    with z <= 0.
    """
    x, y, z = float(direction[0]), float(direction[1]), float(direction[2])
    if z <= 0.0:
        raise ValueError("cannot project a direction with z <= 0")
    nc_w, nc_h = clipping_plane_dims(camera)
    u = (camera.width - 1) / 2.0 + (x / z) * camera.near * (camera.width - 1) / nc_w
    v = (camera.height - 1) / 2.0 + (y / z) * camera.near * (camera.height - 1) / nc_h
    return u, v


def project_points(dirs: np.ndarray, camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised projection of (N, 3) directions; caller must ensure z > 0."""
    nc_w, nc_h = clipping_plane_dims(camera)
    z = dirs[:, 2]
    u = (camera.width - 1) / 2.0 + dirs[:, 0] / z * (camera.near * (camera.width - 1) / nc_w)
    v = (camera.height - 1) / 2.0 + dirs[:, 1] / z * (camera.near * (camera.height - 1) / nc_h)
    return u, v


def pixel_directions(us: np.ndarray, vs: np.ndarray, camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Unit ray directions through fractional pixels, plus the metric
    distance from the origin to each pixel's point on the near plane."""
    nc_w, nc_h = clipping_plane_dims(camera)
    x = (2.0 * np.asarray(us, dtype=float) / (camera.width - 1) - 1.0) * (nc_w / 2.0)
    y = (2.0 * np.asarray(vs, dtype=float) / (camera.height - 1) - 1.0) * (nc_h / 2.0)
    z = np.full_like(x, camera.near)
    norm = np.sqrt(x * x + y * y + z * z)
    dirs = np.stack([x / norm, y / norm, z / norm], axis=-1)
    return dirs, norm


def unproject(px: PixelCoord, range_m: float, camera: Camera) -> Vec3:
    """Point at the given ray range along the ray through a pixel."""
    if not range_m > 0.0:
        raise ValueError("range must be positive")
    u, v = px
    if not (math.isfinite(u) and math.isfinite(v)):
        raise ValueError("pixel coordinates must be finite")
    dirs, _ = pixel_directions(np.array([u]), np.array([v]), camera)
    return dirs[0] * range_m


def unproject_points(us: np.ndarray, vs: np.ndarray, ranges: np.ndarray, camera: Camera) -> np.ndarray:
    """Vectorised unproject: (N,) pixels and ranges to (N, 3) points."""
    dirs, _ = pixel_directions(us, vs, camera)
    return dirs * np.asarray(ranges, dtype=float)[:, None]


def near_square(u: float, v: float, width: int, height: int) -> tuple[int, int, int, int]:
    """The 2x2 integer-pixel square around (u, v), as (u_lo, u_hi, v_lo, v_hi).

    When a coordinate is integral the floor/ceil pair degenerates; the
    duplicate is replaced by the in-image neighbour (preferring +1).
    """
    u0, u1 = math.floor(u), math.ceil(u)
    v0, v1 = math.floor(v), math.ceil(v)
    if u1 == u0:
        u1 = u0 + 1 if u0 + 1 <= width - 1 else u0 - 1
    if v1 == v0:
        v1 = v0 + 1 if v0 + 1 <= height - 1 else v0 - 1
    return min(u0, u1), max(u0, u1), min(v0, v1), max(v0, v1)


def get_near(px: PixelCoord, width: int, height: int) -> list[tuple[int, int]]:
    """Four integer pixels around (u, v), sorted by distance to (u, v).

    Ties are broken by smaller v, then smaller u. Raises ValueError for
    pixels outside the image rectangle.
    """
    u, v = px
    if not (0.0 <= u <= width - 1 and 0.0 <= v <= height - 1):
        raise ValueError(f"pixel ({u}, {v}) outside {width}x{height} image")
    u_lo, u_hi, v_lo, v_hi = near_square(u, v, width, height)
    corners = [(u_lo, v_lo), (u_hi, v_lo), (u_lo, v_hi), (u_hi, v_hi)]
    corners.sort(key=lambda c: ((c[0] - u) ** 2 + (c[1] - v) ** 2, c[1], c[0]))
    return corners


@dataclass(frozen=True)
class OrientedBox3D:
    """3D box: centre, dimensions h/w/l (y/z/x extents in the box frame),
    and yaw/pitch/roll applied in that order about the fixed camera axes
    (y, then x, then z)."""

    center: np.ndarray
    h: float
    w: float
    l: float
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not (self.h > 0 and self.w > 0 and self.l > 0):
            raise ValueError("box dimensions must be positive")

    def rotation(self) -> np.ndarray:
        return rotation_z(self.roll) @ rotation_x(self.pitch) @ rotation_y(self.yaw)

    def half_extents(self) -> np.ndarray:
        return np.array([self.l / 2.0, self.h / 2.0, self.w / 2.0])

    def corners(self) -> np.ndarray:
        """The 8 corners, shape (8, 3)."""
        half = self.half_extents()
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=float,
        )
        return self.center + (signs * half) @ self.rotation().T

    def bottom_center(self) -> Vec3:
        """Centre of the bottom face (+y is down in the box frame)."""
        return self.center + self.rotation() @ np.array([0.0, self.h / 2.0, 0.0])

    def inflate(self, margin: float) -> "OrientedBox3D":
        return OrientedBox3D(
            self.center, self.h + 2 * margin, self.w + 2 * margin,
            self.l + 2 * margin, self.yaw, self.pitch, self.roll,
        )

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Boolean containment per point; accepts (3,) or (N, 3)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        local = (pts - self.center) @ self.rotation()
        inside = np.all(np.abs(local) <= self.half_extents() + tol, axis=1)
        return inside if np.asarray(points).ndim > 1 else bool(inside[0])


def box_from_bottom_center(
    location: np.ndarray, h: float, w: float, l: float,
    yaw: float, pitch: float = 0.0, roll: float = 0.0,
) -> OrientedBox3D:
    """Box anchored at the centre of its bottom face (the label convention)."""
    rot = rotation_z(roll) @ rotation_x(pitch) @ rotation_y(yaw)
    center = np.asarray(location, dtype=float) - rot @ np.array([0.0, h / 2.0, 0.0])
    return OrientedBox3D(center, h, w, l, yaw, pitch, roll)


def point_in_oriented_box(p: Vec3, box: OrientedBox3D, tol: float = 1e-9) -> bool:
    """True iff p lies within the box, inclusive with the given tolerance."""
    return box.contains(np.asarray(p, dtype=float), tol=tol)
