"""Per-frame object annotation: two-step instance segmentation, 2D boxes,
truncation, occlusion grading, and the extended label fields.

Instance segmentation follows a two-step recipe: pixels are first
assigned by unprojecting their decoded range into the unique same-class
3D box containing them; pixels landing in zero or several boxes are then
resolved by grouping depth-continuous regions of the same stencil class
and adopting each group's majority assignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .depth import DepthBuffer, SegmentationImage, decode_depth_values
from .geometry import Camera, OrientedBox3D, project_points, unproject_points, wrap_angle
from .scene import CLASS_STENCIL_MIN, Entity, Scene, render_window

DEFAULT_MIN_PIXELS = 50
DEFAULT_DISPARITY_TOL = 0.08
DEFAULT_OCCLUSION_THRESHOLDS = (0.95, 0.5)
STEP1_BOX_MARGIN = 0.001  # metres; absorbs float32 depth-storage rounding

DONTCARE = "DontCare"


@dataclass(frozen=True)
class ObjectLabel:
    """One object in the 15-field per-object annotation layout."""

    type: str
    truncated: float
    occluded: int
    alpha: float
    bbox: tuple[float, float, float, float]  # left, top, right, bottom (pixels)
    dimensions: tuple[float, float, float]  # h, w, l (metres)
    location: tuple[float, float, float]  # bottom-centre, sensor frame
    rotation_y: float


@dataclass(frozen=True)
class ExtendedLabel:
    """Companion fields kept in a separate file, one line per object."""

    entity_id: int
    pixel_count: int
    speed: float
    model_name: str
    pitch: float
    roll: float


@dataclass
class FrameReport:
    """Bookkeeping for one annotated frame."""

    labeled: int = 0
    dontcare: int = 0
    skipped_ids: list[int] = field(default_factory=list)


def segment_instances(
    buffer: DepthBuffer,
    stencil: SegmentationImage,
    entities: list[Entity],
    camera: Camera,
    disparity_tol: float = DEFAULT_DISPARITY_TOL,
    box_margin: float = STEP1_BOX_MARGIN,
) -> SegmentationImage:
    """Entity-id image from a class-wise stencil image plus 3D boxes.

    Background pixels keep their stencil codes; object-class pixels that
    cannot be attributed to any entity also stay as background class
    codes. Deterministic: group majority ties break toward the smaller
    entity id.
    """
    if buffer.values.shape != stencil.values.shape:
        raise ValueError("buffer and stencil sizes differ")
    h, w = stencil.values.shape
    codes = stencil.values
    obj = codes >= CLASS_STENCIL_MIN
    out = codes.copy()
    n_obj = int(obj.sum())
    if n_obj == 0:
        return SegmentationImage(out)

    vs, us = np.nonzero(obj)
    ranges = decode_depth_values(buffer.values[vs, us], us, vs, camera)
    points = unproject_points(us, vs, ranges, camera)
    pixel_class = codes[vs, us]

    # Step 1: unique containing box of the same class.
    hit_count = np.zeros(n_obj, dtype=np.int32)
    hit_id = np.zeros(n_obj, dtype=np.uint32)
    for entity in entities:
        sel = pixel_class == entity.stencil_code()
        if not sel.any():
            continue
        inside = entity.bbox.inflate(box_margin).contains(points[sel])
        idx = np.nonzero(sel)[0][inside]
        hit_count[idx] += 1
        hit_id[idx] = entity.id
    unique_id = np.where(hit_count == 1, hit_id, 0).astype(np.uint32)

    # Step 2: depth-continuous same-class groups vote for the ambiguous.
    ambiguous = hit_count != 1
    if ambiguous.any():
        flat_idx = np.full(h * w, -1, dtype=np.int64)
        flat_idx[vs * w + us] = np.arange(n_obj)
        depth_img = np.zeros((h, w))
        depth_img[vs, us] = ranges

        rows_a, cols_a = [], []
        for dv, du in ((0, 1), (1, 0)):
            a_v, a_u = vs, us
            b_v, b_u = vs + dv, us + du
            ok = (b_v < h) & (b_u < w)
            a_v, a_u, b_v, b_u = a_v[ok], a_u[ok], b_v[ok], b_u[ok]
            ok = (codes[b_v, b_u] >= CLASS_STENCIL_MIN) & (codes[b_v, b_u] == codes[a_v, a_u])
            a_v, a_u, b_v, b_u = a_v[ok], a_u[ok], b_v[ok], b_u[ok]
            da = depth_img[a_v, a_u]
            db = depth_img[b_v, b_u]
            close = np.abs(da - db) < disparity_tol * np.minimum(da, db)
            a_v, a_u, b_v, b_u = a_v[close], a_u[close], b_v[close], b_u[close]
            rows_a.append(flat_idx[a_v * w + a_u])
            cols_a.append(flat_idx[b_v * w + b_u])
        rows = np.concatenate(rows_a)
        cols = np.concatenate(cols_a)
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_obj, n_obj))
        _, comp = connected_components(graph, directed=False)

        voted = unique_id > 0
        majority = np.zeros(comp.max() + 1, dtype=np.uint32)
        if voted.any():
            pair = comp[voted].astype(np.int64) << 32 | unique_id[voted].astype(np.int64)
            uniq, counts = np.unique(pair, return_counts=True)
            u_comp = (uniq >> 32).astype(np.int64)
            u_id = (uniq & 0xFFFFFFFF).astype(np.uint32)
            order = np.lexsort((u_id, -counts, u_comp))
            first = np.unique(u_comp[order], return_index=True)[1]
            majority[u_comp[order][first]] = u_id[order][first]

        resolved = majority[comp]
        assign = np.where(ambiguous & (resolved > 0), resolved, unique_id)
    else:
        assign = unique_id

    keep = assign > 0
    out[vs[keep], us[keep]] = assign[keep]
    return SegmentationImage(out)


def _corner_extent(box: OrientedBox3D, camera: Camera) -> tuple[float, float, float, float]:
    """Unclipped projected extent of the box's in-front corners."""
    corners = box.corners()
    front = corners[:, 2] > 1e-9
    if not front.any():
        raise ValueError("all box corners lie behind the camera")
    us, vs = project_points(corners[front], camera)
    return float(us.min()), float(vs.min()), float(us.max()), float(vs.max())


def project_box_2d(box: OrientedBox3D, camera: Camera) -> tuple[float, float, float, float]:
    """Loose 2D box from the projected 3D corners, clamped to the image.

    Raises ValueError when every corner is behind the camera.
    """
    u0, v0, u1, v1 = _corner_extent(box, camera)
    return (
        max(0.0, min(u0, camera.width - 1.0)),
        max(0.0, min(v0, camera.height - 1.0)),
        max(0.0, min(u1, camera.width - 1.0)),
        max(0.0, min(v1, camera.height - 1.0)),
    )


def tighten_box(
    loose: tuple[float, float, float, float],
    instance: SegmentationImage,
    entity_id: int,
) -> tuple[float, float, float, float]:
    """Exact pixel extents of the entity's instance mask.

    The result is contained in the (clamped) loose box whenever the mask
    comes from geometry inside the 3D box. Raises ValueError for an empty
    mask.
    """
    vs, us = np.nonzero(instance.values == entity_id)
    if len(vs) == 0:
        raise ValueError(f"entity {entity_id} has no mask pixels")
    return float(us.min()), float(vs.min()), float(us.max()), float(vs.max())


def compute_truncation(box: OrientedBox3D, camera: Camera) -> float:
    """Fraction of the loose 2D box area falling outside the image."""
    try:
        u0, v0, u1, v1 = _corner_extent(box, camera)
    except ValueError:
        return 1.0
    full = (u1 - u0) * (v1 - v0)
    if full <= 0.0:
        return 1.0
    cu0, cv0 = max(u0, 0.0), max(v0, 0.0)
    cu1, cv1 = min(u1, camera.width - 1.0), min(v1, camera.height - 1.0)
    clipped = max(0.0, cu1 - cu0) * max(0.0, cv1 - cv0)
    return 1.0 - clipped / full


def compute_occlusion(
    entity_id: int,
    instance: SegmentationImage,
    solo_mask_pixels: int,
    thresholds: tuple[float, float] = DEFAULT_OCCLUSION_THRESHOLDS,
) -> int:
    """Visibility grade 0..3 from visible-to-solo pixel ratio."""
    if solo_mask_pixels <= 0:
        raise ValueError("solo render produced no pixels (object outside frustum)")
    visible = int(np.count_nonzero(instance.values == entity_id))
    ratio = visible / solo_mask_pixels
    if ratio >= thresholds[0]:
        return 0
    if ratio >= thresholds[1]:
        return 1
    if ratio > 0.0:
        return 2
    return 3


def solo_pixel_count(scene: Scene, camera: Camera, entity: Entity) -> int:
    """Pixels the entity would cover rendered alone (statics excluded)."""
    try:
        u0, v0, u1, v1 = _corner_extent(entity.bbox, camera)
    except ValueError:
        return 0
    window = (
        int(math.floor(u0)) - 1,
        int(math.floor(v0)) - 1,
        int(math.ceil(u1)) + 1,
        int(math.ceil(v1)) + 1,
    )
    _, codes = render_window(scene, camera, window, entities=[entity], include_statics=False)
    return int(np.count_nonzero(codes == entity.id))


def make_labels(
    scene: Scene,
    camera: Camera,
    instance: SegmentationImage,
    depth: DepthBuffer,
    min_pixels: int = DEFAULT_MIN_PIXELS,
    occlusion_thresholds: tuple[float, float] = DEFAULT_OCCLUSION_THRESHOLDS,
) -> tuple[list[ObjectLabel], list[ExtendedLabel], FrameReport]:
    """Label every visible entity, ordered by entity id.

    Entities with a mask smaller than min_pixels become DontCare entries
    carrying only the 2D box; entities with no mask pixels are skipped and
    recorded in the report. Extended labels mirror the label ordering one
    to one.
    """
    labels: list[ObjectLabel] = []
    extended: list[ExtendedLabel] = []
    report = FrameReport()
    for entity in sorted(scene.entities, key=lambda e: e.id):
        count = int(np.count_nonzero(instance.values == entity.id))
        if count == 0:
            report.skipped_ids.append(entity.id)
            continue
        ext = ExtendedLabel(
            entity_id=entity.id,
            pixel_count=count,
            speed=entity.speed,
            model_name=entity.model_name,
            pitch=entity.pitch,
            roll=entity.roll,
        )
        tight = tighten_box((0, 0, camera.width - 1, camera.height - 1), instance, entity.id)
        if count < min_pixels:
            labels.append(
                ObjectLabel(DONTCARE, -1.0, -1, -10.0, tight,
                            (-1.0, -1.0, -1.0), (-1000.0, -1000.0, -1000.0), -10.0)
            )
            extended.append(ext)
            report.dontcare += 1
            continue
        box = entity.bbox
        truncation = compute_truncation(box, camera)
        occlusion = compute_occlusion(
            entity.id, instance, solo_pixel_count(scene, camera, entity), occlusion_thresholds
        )
        loc = box.bottom_center()
        rot_y = wrap_angle(entity.yaw)
        alpha = wrap_angle(rot_y - math.atan2(loc[0], loc[2]))
        labels.append(
            ObjectLabel(
                type=entity.class_name,
                truncated=truncation,
                occluded=occlusion,
                alpha=alpha,
                bbox=tight,
                dimensions=(box.h, box.w, box.l),
                location=(float(loc[0]), float(loc[1]), float(loc[2])),
                rotation_y=rot_y,
            )
        )
        extended.append(ext)
        report.labeled += 1
    return labels, extended, report
