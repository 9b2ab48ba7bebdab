"""Nonlinear depth-buffer codec, bilinear interpolation, gated sampling.

Buffer values are dimensionless in [0, 1] and decode to the metric range
along the pixel's own ray (not the planar z depth). Ranges beyond the
representable depth encode as 0, which decodes far past any plausible
scan range and is discarded by the scanner's maximum-range test.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Camera, PixelCoord, clipping_plane_dims, near_square

DEFAULT_GATE_RATIO = 1.08

# Segmentation codes. Background pixels carry a stencil class code from the
# reserved range below; object pixels carry an entity id >= ENTITY_ID_MIN.
STENCIL_SKY = 0
STENCIL_GROUND = 1
STENCIL_BUILDING = 2
STENCIL_STATIC = 3
ENTITY_ID_MIN = 16

_DEPTH_MAGIC = b"LSDEPTH1"
_SEG_MAGIC = b"LSSEGIM1"


class CorruptBufferError(ValueError):
    """A depth value produced a non-positive decode denominator."""


@dataclass(frozen=True)
class DepthBuffer:
    """Row-major per-pixel nonlinear depth values, float32 in [0, 1]."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float32)
        if vals.ndim != 2:
            raise ValueError("depth buffer must be a 2D array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("depth buffer contains non-finite values")
        if vals.min() < 0.0 or vals.max() > 1.0:
            raise ValueError("depth buffer values must lie in [0, 1]")
        object.__setattr__(self, "values", vals)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SegmentationImage:
    """Per-pixel entity ids (>= ENTITY_ID_MIN) or stencil class codes."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values)
        if vals.ndim != 2:
            raise ValueError("segmentation image must be a 2D array")
        object.__setattr__(self, "values", vals.astype(np.uint32))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def near_plane_distance(us, vs, camera: Camera):
    """Distance from the origin to the near-plane point of pixel (u, v).

    Accepts scalars or arrays.
    """
    nc_w, nc_h = clipping_plane_dims(camera)
    nx = np.abs(2.0 * np.asarray(us, dtype=float) / (camera.width - 1) - 1.0) * (nc_w / 2.0)
    ny = np.abs(2.0 * np.asarray(vs, dtype=float) / (camera.height - 1) - 1.0) * (nc_h / 2.0)
    return np.sqrt(nx * nx + ny * ny + camera.near * camera.near)


def decode_depth_values(depth_values, us, vs, camera: Camera):
    """Decode raw buffer values at pixels (us, vs) to metric ray ranges."""
    near_dist = near_plane_distance(us, vs, camera)
    denom = np.asarray(depth_values, dtype=float) + camera.near * near_dist / (2.0 * camera.far)
    if np.any(denom <= 0.0):
        raise CorruptBufferError("depth value yields non-positive decode denominator")
    return near_dist / denom


def encode_depth_values(ranges, us, vs, camera: Camera):
    """Inverse of decode: metric ray ranges to buffer values, clamped at 0."""
    near_dist = near_plane_distance(us, vs, camera)
    raw = near_dist / np.asarray(ranges, dtype=float) - camera.near * near_dist / (2.0 * camera.far)
    return np.maximum(raw, 0.0)


def decode_depth(px: tuple[int, int], buffer: DepthBuffer, camera: Camera) -> float:
    """Metric range along the ray of an integer pixel."""
    u, v = int(px[0]), int(px[1])
    _check_dims(buffer, camera)
    if not (0 <= u < buffer.width and 0 <= v < buffer.height):
        raise ValueError(f"pixel ({u}, {v}) outside buffer")
    return float(decode_depth_values(buffer.values[v, u], u, v, camera))


def encode_depth(range_m: float, px: tuple[float, float], camera: Camera) -> float:
    """Buffer value for a metric ray range at a pixel; requires range >= near."""
    if range_m < camera.near:
        raise ValueError("range closer than the near clip distance")
    return float(encode_depth_values(range_m, px[0], px[1], camera))


def bilinear_interpolate(
    d1: float, d2: float, d3: float, d4: float, frac_u: float, frac_v: float
) -> float:
    """Bilinear blend over the unit square.

    Corners are ordered row-major by their integer coordinates:
    (lo_u, lo_v), (hi_u, lo_v), (lo_u, hi_v), (hi_u, hi_v).
    """
    top = (1.0 - frac_u) * d1 + frac_u * d2
    bot = (1.0 - frac_u) * d3 + frac_u * d4
    return (1.0 - frac_v) * top + frac_v * bot


def gated_sample(
    px: PixelCoord,
    buffer: DepthBuffer,
    seg: SegmentationImage,
    camera: Camera,
    gate_ratio: float = DEFAULT_GATE_RATIO,
) -> tuple[float, int]:
    """Depth at a fractional pixel with disparity gating, plus the entity id.

    Decodes the four surrounding pixels; when their spread is within the
    gate ratio the depths are bilinearly blended, otherwise the nearest
    pixel's depth is returned unchanged (no interpolation across a depth
    discontinuity). The entity id always comes from the nearest pixel.
    """
    u, v = px
    _check_dims(buffer, camera)
    if buffer.values.shape != seg.values.shape:
        raise ValueError("depth buffer and segmentation image sizes differ")
    if not (0.0 <= u <= buffer.width - 1 and 0.0 <= v <= buffer.height - 1):
        raise ValueError(f"pixel ({u}, {v}) outside image")
    u_lo, u_hi, v_lo, v_hi = near_square(u, v, buffer.width, buffer.height)
    corner_u = np.array([u_lo, u_hi, u_lo, u_hi])
    corner_v = np.array([v_lo, v_lo, v_hi, v_hi])
    depths = decode_depth_values(buffer.values[corner_v, corner_u], corner_u, corner_v, camera)

    near_u = u_lo if abs(u - u_lo) <= abs(u_hi - u) else u_hi
    near_v = v_lo if abs(v - v_lo) <= abs(v_hi - v) else v_hi
    entity = int(seg.values[near_v, near_u])

    if depths.max() < gate_ratio * depths.min():
        frac_u = (u - u_lo) / (u_hi - u_lo)
        frac_v = (v - v_lo) / (v_hi - v_lo)
        return float(bilinear_interpolate(*depths, frac_u, frac_v)), entity
    d_near = depths[2 * (near_v == v_hi) + (near_u == u_hi)]
    return float(d_near), entity


def gated_sample_many(
    us: np.ndarray,
    vs: np.ndarray,
    buffer: DepthBuffer,
    seg: SegmentationImage,
    camera: Camera,
    gate_ratio: float = DEFAULT_GATE_RATIO,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised gated sampling; pixels must already lie inside the image."""
    _check_dims(buffer, camera)
    if buffer.values.shape != seg.values.shape:
        raise ValueError("depth buffer and segmentation image sizes differ")
    us = np.asarray(us, dtype=float)
    vs = np.asarray(vs, dtype=float)
    w, h = buffer.width, buffer.height

    u_lo = np.floor(us).astype(np.int64)
    u_hi = np.ceil(us).astype(np.int64)
    deg = u_hi == u_lo
    u_hi = np.where(deg, np.where(u_lo + 1 <= w - 1, u_lo + 1, u_lo - 1), u_hi)
    u_lo, u_hi = np.minimum(u_lo, u_hi), np.maximum(u_lo, u_hi)

    v_lo = np.floor(vs).astype(np.int64)
    v_hi = np.ceil(vs).astype(np.int64)
    deg = v_hi == v_lo
    v_hi = np.where(deg, np.where(v_lo + 1 <= h - 1, v_lo + 1, v_lo - 1), v_hi)
    v_lo, v_hi = np.minimum(v_lo, v_hi), np.maximum(v_lo, v_hi)

    d00 = decode_depth_values(buffer.values[v_lo, u_lo], u_lo, v_lo, camera)
    d10 = decode_depth_values(buffer.values[v_lo, u_hi], u_hi, v_lo, camera)
    d01 = decode_depth_values(buffer.values[v_hi, u_lo], u_lo, v_hi, camera)
    d11 = decode_depth_values(buffer.values[v_hi, u_hi], u_hi, v_hi, camera)
    stack = np.stack([d00, d10, d01, d11])
    d_min = stack.min(axis=0)
    d_max = stack.max(axis=0)

    frac_u = us - u_lo
    frac_v = vs - v_lo
    top = (1.0 - frac_u) * d00 + frac_u * d10
    bot = (1.0 - frac_u) * d01 + frac_u * d11
    blended = (1.0 - frac_v) * top + frac_v * bot

    pick_hi_u = np.abs(us - u_lo) > np.abs(u_hi - us)
    pick_hi_v = np.abs(vs - v_lo) > np.abs(v_hi - vs)
    near_u = np.where(pick_hi_u, u_hi, u_lo)
    near_v = np.where(pick_hi_v, v_hi, v_lo)
    d_near = np.choose(2 * pick_hi_v + pick_hi_u, [d00, d10, d01, d11])

    gate_open = d_max < gate_ratio * d_min
    ranges = np.where(gate_open, blended, d_near)
    entities = seg.values[near_v, near_u]
    return ranges, entities


def _check_dims(buffer: DepthBuffer, camera: Camera) -> None:
    if buffer.width != camera.width or buffer.height != camera.height:
        raise ValueError("depth buffer dimensions do not match the camera")


def write_depth_buffer(buffer: DepthBuffer, path: str | Path) -> None:
    """Binary layout: 8-byte magic, uint32 width, uint32 height, then
    row-major little-endian float32 values."""
    with open(path, "wb") as f:
        f.write(_DEPTH_MAGIC)
        f.write(struct.pack("<II", buffer.width, buffer.height))
        f.write(np.ascontiguousarray(buffer.values, dtype="<f4").tobytes())


def read_depth_buffer(path: str | Path) -> DepthBuffer:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != _DEPTH_MAGIC:
        raise ValueError(f"{path}: not a depth buffer file")
    w, h = struct.unpack("<II", raw[8:16])
    if len(raw) != 16 + 4 * w * h:
        raise ValueError(f"{path}: truncated depth buffer")
    values = np.frombuffer(raw[16:], dtype="<f4").reshape(h, w)
    return DepthBuffer(values.copy())


def write_segmentation(seg: SegmentationImage, path: str | Path) -> None:
    """Same layout as the depth buffer but with little-endian uint32 values."""
    with open(path, "wb") as f:
        f.write(_SEG_MAGIC)
        f.write(struct.pack("<II", seg.width, seg.height))
        f.write(np.ascontiguousarray(seg.values, dtype="<u4").tobytes())


def read_segmentation(path: str | Path) -> SegmentationImage:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != _SEG_MAGIC:
        raise ValueError(f"{path}: not a segmentation file")
    w, h = struct.unpack("<II", raw[8:16])
    if len(raw) != 16 + 4 * w * h:
        raise ValueError(f"{path}: truncated segmentation image")
    values = np.frombuffer(raw[16:], dtype="<u4").reshape(h, w)
    return SegmentationImage(values.copy())
