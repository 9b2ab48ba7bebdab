"""Scene model, perspective depth renderer, and exact raycast oracle.

The renderer casts one ray through every pixel centre against the
entities' detailed geometry and writes an encoded depth buffer plus a
combined segmentation image (entity ids for object pixels, stencil class
codes for background, sky code for misses). The raycaster intersects the
same analytic shapes for arbitrary ray directions and can optionally use
coarse proxy shapes and skip entity hits beyond a range limit, which
reproduces the failure modes of engine-native ray casting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .depth import (
    DepthBuffer,
    ENTITY_ID_MIN,
    STENCIL_BUILDING,
    STENCIL_GROUND,
    STENCIL_SKY,
    STENCIL_STATIC,
    SegmentationImage,
    encode_depth_values,
)
from .geometry import Camera, OrientedBox3D, pixel_directions, rotation_x, rotation_y, rotation_z
from .primitives import Primitive, union_bounds

ENTITY_CLASSES = [
    "Car",
    "Pedestrian",
    "Cyclist",
    "Truck",
    "Person_sitting",
    "Motorbike",
    "Trailer",
    "Bus",
    "Railed",
    "Airplane",
    "Boat",
    "Animal",
]

# Object classes get stencil codes 4..15; 0..3 are background codes.
CLASS_STENCIL = {name: 4 + i for i, name in enumerate(ENTITY_CLASSES)}
STENCIL_NAMES = {
    STENCIL_SKY: "sky",
    STENCIL_GROUND: "ground",
    STENCIL_BUILDING: "building",
    STENCIL_STATIC: "static",
    **{code: name for name, code in CLASS_STENCIL.items()},
}
CLASS_STENCIL_MIN = 4


@dataclass
class Entity:
    """One annotated scene object.

    Geometry lives in the entity's local frame (origin at the ground
    contact point under the object's centre, y down); the pose places it
    in the sensor frame. The enclosing box is derived from the detailed
    geometry when not given explicitly.
    """

    id: int
    class_name: str
    model_name: str
    position: np.ndarray
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    speed: float = 0.0
    geometry: list[Primitive] = field(default_factory=list)
    proxy: list[Primitive] | None = None
    bbox: OrientedBox3D | None = None

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.id < ENTITY_ID_MIN:
            raise ValueError(f"entity ids start at {ENTITY_ID_MIN} (got {self.id})")
        if self.class_name not in CLASS_STENCIL:
            raise ValueError(f"unknown entity class {self.class_name!r}")
        if not self.geometry:
            raise ValueError("entity needs detailed geometry")
        if self.bbox is None:
            lo, hi = union_bounds(self.geometry)
            mid = (lo + hi) / 2.0
            ext = hi - lo
            self.bbox = OrientedBox3D(
                center=self.position + self.rotation() @ mid,
                h=float(ext[1]), w=float(ext[2]), l=float(ext[0]),
                yaw=self.yaw, pitch=self.pitch, roll=self.roll,
            )

    def rotation(self) -> np.ndarray:
        return rotation_z(self.roll) @ rotation_x(self.pitch) @ rotation_y(self.yaw)

    def stencil_code(self) -> int:
        return CLASS_STENCIL[self.class_name]

    def bounding_sphere(self) -> tuple[np.ndarray, float]:
        """Sensor-frame sphere covering detailed and proxy geometry; used
        only to cull rays before exact intersection."""
        prims = list(self.geometry) + list(self.proxy or [])
        lo, hi = union_bounds(prims)
        center = self.position + self.rotation() @ ((lo + hi) / 2.0)
        radius = float(np.linalg.norm(hi - lo)) / 2.0 * 1.001 + 1e-6
        return center, radius

    def intersect(self, dirs: np.ndarray, t_min, use_proxy: bool = False) -> np.ndarray:
        """Nearest hit parameter per ray for rays from the sensor origin."""
        prims = self.proxy if (use_proxy and self.proxy) else self.geometry
        rot = self.rotation()
        local_origin = rot.T @ (-self.position)
        local_dirs = dirs @ rot
        best = np.full(dirs.shape[0], np.inf)
        for prim in prims:
            best = np.minimum(best, prim.intersect(local_origin, local_dirs, t_min))
        return best

    def surface_points(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Sensor-frame points sampled from the detailed surface."""
        per = max(1, n // len(self.geometry))
        pts = np.concatenate([p.sample_surface(rng, per) for p in self.geometry])
        return self.position + pts @ self.rotation().T


@dataclass(frozen=True)
class StaticShape:
    """Background geometry carrying a stencil class code, no entity id."""

    shape: Primitive
    stencil: int = STENCIL_STATIC

    def __post_init__(self):
        if not 0 < self.stencil < CLASS_STENCIL_MIN:
            raise ValueError("static stencil code must be a background code")


@dataclass
class Scene:
    """Entities plus static geometry, expressed in the shared sensor frame
    (the camera and the scanner are co-located at the origin)."""

    name: str = "scene"
    entities: list[Entity] = field(default_factory=list)
    statics: list[StaticShape] = field(default_factory=list)

    def __post_init__(self):
        ids = [e.id for e in self.entities]
        if len(set(ids)) != len(ids):
            raise ValueError("entity ids must be unique within a scene")

    def entity_by_id(self, entity_id: int) -> Entity:
        for e in self.entities:
            if e.id == entity_id:
                return e
        raise KeyError(f"no entity with id {entity_id}")


def cast_rays(
    scene: Scene,
    dirs: np.ndarray,
    *,
    use_proxy: bool = False,
    entity_range_limit: float | None = None,
    t_min=1e-9,
    entities: list[Entity] | None = None,
    include_statics: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest intersection for rays from the origin.

    Returns (ranges, codes): range is inf for a miss; the code is the
    entity id, the static shape's stencil code, or the sky code. Entity
    hits beyond entity_range_limit are skipped entirely (the ray falls
    through to whatever lies behind), mirroring engines whose native ray
    casts stop registering far entities.
    """
    n = dirs.shape[0]
    best_t = np.full(n, np.inf)
    codes = np.full(n, STENCIL_SKY, dtype=np.uint32)
    if include_statics:
        for static in scene.statics:
            t = static.shape.intersect(np.zeros(3), dirs, t_min)
            closer = t < best_t
            best_t = np.where(closer, t, best_t)
            codes = np.where(closer, np.uint32(static.stencil), codes)
    t_min_arr = np.broadcast_to(np.asarray(t_min, dtype=float), (n,))
    for entity in entities if entities is not None else scene.entities:
        # Cull rays that cannot reach the entity's bounding sphere.
        center, radius = entity.bounding_sphere()
        along = dirs @ center
        perp2 = center @ center - along * along
        cand = perp2 <= radius * radius
        if center @ center > radius * radius:
            cand &= along > 0.0
        if not cand.any():
            continue
        idx = np.nonzero(cand)[0]
        t = entity.intersect(dirs[idx], t_min_arr[idx], use_proxy=use_proxy)
        if entity_range_limit is not None:
            t = np.where(t > entity_range_limit, np.inf, t)
        closer = t < best_t[idx]
        best_t[idx] = np.where(closer, t, best_t[idx])
        codes[idx] = np.where(closer, np.uint32(entity.id), codes[idx])
    return best_t, codes


def raycast_exact(
    scene: Scene,
    ray: np.ndarray,
    use_proxy: bool = False,
    entity_range_limit: float | None = None,
) -> tuple[float | None, int | None]:
    """Single-ray analytic intersection.

    Returns (range, entity_id); range is None on a miss and entity_id is
    None for static geometry.
    """
    t, code = cast_rays(
        scene,
        np.asarray(ray, dtype=float).reshape(1, 3),
        use_proxy=use_proxy,
        entity_range_limit=entity_range_limit,
    )
    if not np.isfinite(t[0]):
        return None, None
    c = int(code[0])
    return float(t[0]), c if c >= ENTITY_ID_MIN else None


def camera_ray_grid(camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Unit rays through all pixel centres (row-major) and the metric
    near-plane distance of each pixel."""
    us, vs = np.meshgrid(np.arange(camera.width), np.arange(camera.height))
    return pixel_directions(us.ravel(), vs.ravel(), camera)


def render(scene: Scene, camera: Camera) -> tuple[DepthBuffer, SegmentationImage]:
    """Render the scene to a depth buffer and a segmentation image.

    Hits in front of the near plane are clipped; misses encode as the far
    limit (depth value 0) with the sky code.
    """
    dirs, near_dist = camera_ray_grid(camera)
    dz = dirs[:, 2]
    t_min = camera.near / dz
    ranges, codes = cast_rays(scene, dirs, t_min=t_min)

    us, vs = np.meshgrid(np.arange(camera.width), np.arange(camera.height))
    us, vs = us.ravel(), vs.ravel()
    hit = np.isfinite(ranges)
    depth_vals = np.zeros(len(ranges))
    depth_vals[hit] = encode_depth_values(ranges[hit], us[hit], vs[hit], camera)
    codes = np.where(hit, codes, np.uint32(STENCIL_SKY))

    buf = DepthBuffer(depth_vals.reshape(camera.height, camera.width).astype(np.float32))
    seg = SegmentationImage(codes.reshape(camera.height, camera.width))
    return buf, seg


def render_window(
    scene: Scene,
    camera: Camera,
    window: tuple[int, int, int, int],
    entities: list[Entity] | None = None,
    include_statics: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Cast pixel-centre rays for an inclusive (u0, v0, u1, v1) window.

    Returns (ranges, codes) shaped (rows, cols). Used for cheap per-entity
    solo passes when grading occlusion.
    """
    u0, v0, u1, v1 = window
    u0, v0 = max(0, u0), max(0, v0)
    u1, v1 = min(camera.width - 1, u1), min(camera.height - 1, v1)
    if u1 < u0 or v1 < v0:
        return np.zeros((0, 0)), np.zeros((0, 0), dtype=np.uint32)
    us, vs = np.meshgrid(np.arange(u0, u1 + 1), np.arange(v0, v1 + 1))
    shape = us.shape
    dirs, _ = pixel_directions(us.ravel(), vs.ravel(), camera)
    t_min = camera.near / dirs[:, 2]
    ranges, codes = cast_rays(
        scene, dirs, t_min=t_min, entities=entities, include_statics=include_statics
    )
    return ranges.reshape(shape), codes.reshape(shape)


def stencil_from_instances(seg: SegmentationImage, scene: Scene) -> SegmentationImage:
    """Collapse entity ids to their class stencil codes (the class-wise
    image a graphics pipeline's stencil buffer would provide)."""
    out = seg.values.copy()
    for entity in scene.entities:
        out[seg.values == entity.id] = entity.stencil_code()
    return SegmentationImage(out)


_PALETTE = {
    STENCIL_SKY: (135, 206, 235),
    STENCIL_GROUND: (105, 105, 105),
    STENCIL_BUILDING: (180, 160, 120),
    STENCIL_STATIC: (90, 90, 90),
}
_CLASS_COLORS = {
    "Car": (200, 60, 60),
    "Pedestrian": (60, 160, 60),
    "Cyclist": (230, 180, 40),
    "Truck": (150, 60, 180),
    "Person_sitting": (60, 180, 160),
    "Motorbike": (220, 120, 40),
    "Trailer": (120, 120, 200),
    "Bus": (200, 40, 120),
    "Railed": (100, 100, 40),
    "Airplane": (160, 200, 240),
    "Boat": (40, 120, 200),
    "Animal": (140, 100, 60),
}


def colorize_segmentation(seg: SegmentationImage, scene: Scene) -> np.ndarray:
    """Flat-shaded uint8 RGB image for visualisation only."""
    img = np.zeros((seg.height, seg.width, 3), dtype=np.uint8)
    for code, rgb in _PALETTE.items():
        img[seg.values == code] = rgb
    for code, name in STENCIL_NAMES.items():
        if code >= CLASS_STENCIL_MIN:
            img[seg.values == code] = _CLASS_COLORS[name]
    for i, entity in enumerate(scene.entities):
        base = np.array(_CLASS_COLORS[entity.class_name], dtype=int)
        shade = (base * (0.7 + 0.3 * ((i * 53) % 7) / 6.0)).clip(0, 255).astype(np.uint8)
        img[seg.values == entity.id] = shade
    return img
