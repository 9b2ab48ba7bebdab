"""Dataset statistics and the raycast-vs-depth-buffer comparison harness.

Reports are written as delimited text (CSV) plus rendered matplotlib
figures; the heatmap also keeps its numeric grid.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.spatial import cKDTree

from .depth import ENTITY_ID_MIN
from .geometry import Camera
from .kitti_io import read_labels
from .scanner import LidarConfig, PointCloud, build_scan_pattern, generate_point_cloud, pattern_rays
from .scene import Scene, cast_rays, render

BEV_X_EXTENT = 40.0  # metres left and right
BEV_Z_EXTENT = 100.0  # metres forward
DEFAULT_CELL_SIZE = 0.5
DEFAULT_RANGE_LIMIT = 30.0


@dataclass
class ClassStats:
    """Totals and the mean count over frames containing each class."""

    counts: dict[str, int]
    apicc: dict[str, float]
    frame_count: int
    unreadable: list[str] = field(default_factory=list)


def class_stats(dataset_path: str | Path) -> ClassStats:
    """Exact per-class counts and APICC over all label files."""
    label_dir = Path(dataset_path) / "label_2"
    if not label_dir.is_dir():
        raise FileNotFoundError(f"no label_2 directory under {dataset_path}")
    counts: dict[str, int] = {}
    frames_with: dict[str, int] = {}
    unreadable: list[str] = []
    files = sorted(label_dir.glob("*.txt"))
    for path in files:
        try:
            labels = read_labels(path)
        except ValueError:
            unreadable.append(path.name)
            continue
        per_frame: dict[str, int] = {}
        for lb in labels:
            per_frame[lb.type] = per_frame.get(lb.type, 0) + 1
        for cls, n in per_frame.items():
            counts[cls] = counts.get(cls, 0) + n
            frames_with[cls] = frames_with.get(cls, 0) + 1
    apicc = {cls: counts[cls] / frames_with[cls] for cls in counts if frames_with.get(cls)}
    return ClassStats(
        counts=counts,
        apicc=apicc,
        frame_count=len(files) - len(unreadable),
        unreadable=unreadable,
    )


@dataclass
class BevHeatmap:
    """Top-down occupancy counts of object centres.

    Rows run forward (z) and columns left to right (x); total mass equals
    the number of in-extent object centres.
    """

    grid: np.ndarray
    cell_size: float
    x_extent: float = BEV_X_EXTENT
    z_extent: float = BEV_Z_EXTENT

    @property
    def mass(self) -> int:
        return int(self.grid.sum())


def bev_heatmap(
    dataset_path: str | Path,
    class_name: str,
    cell_size: float = DEFAULT_CELL_SIZE,
) -> BevHeatmap:
    """Bin label locations of one class into the fixed metric extent."""
    label_dir = Path(dataset_path) / "label_2"
    xs: list[float] = []
    zs: list[float] = []
    for path in sorted(label_dir.glob("*.txt")):
        for lb in read_labels(path):
            if lb.type == class_name:
                xs.append(lb.location[0])
                zs.append(lb.location[2])
    n_x = int(round(2 * BEV_X_EXTENT / cell_size))
    n_z = int(round(BEV_Z_EXTENT / cell_size))
    grid, _, _ = np.histogram2d(
        zs, xs, bins=(n_z, n_x), range=((0.0, BEV_Z_EXTENT), (-BEV_X_EXTENT, BEV_X_EXTENT))
    )
    return BevHeatmap(grid=grid, cell_size=cell_size)


def save_heatmap_image(hm: BevHeatmap, path: str | Path, title: str = "") -> None:
    """Grayscale figure; forward is up, left is left."""
    fig, ax = plt.subplots(figsize=(5, 6))
    ax.imshow(
        hm.grid,
        origin="lower",
        cmap="gray",
        extent=(-hm.x_extent, hm.x_extent, 0.0, hm.z_extent),
        aspect="auto",
        interpolation="nearest",
    )
    ax.set_xlabel("x (m)")
    ax.set_ylabel("z (m)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_heatmap_csv(hm: BevHeatmap, path: str | Path) -> None:
    np.savetxt(path, hm.grid, fmt="%d", delimiter=",")


def save_class_stats_csv(stats: ClassStats, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "count", "apicc"])
        for cls in sorted(stats.counts):
            writer.writerow([cls, stats.counts[cls], f"{stats.apicc[cls]:.4f}"])


def chamfer_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric mean nearest-neighbour distance between two point sets."""
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("chamfer distance needs non-empty point sets")
    d_ab = cKDTree(b).query(a)[0]
    d_ba = cKDTree(a).query(b)[0]
    return 0.5 * (float(d_ab.mean()) + float(d_ba.mean()))


@dataclass
class EntityComparison:
    entity_id: int
    class_name: str
    model_name: str
    distance: float
    depth_points: int
    raycast_points: int
    chamfer: float | None


@dataclass
class BackendComparison:
    """Depth-buffer scan versus proxy raycast over the same scan pattern."""

    scene_name: str
    entity_range_limit: float | None
    rows: list[EntityComparison]
    missed_entity_ids: list[int]
    depth_cloud: PointCloud
    raycast_cloud: PointCloud


def compare_backends(
    scene: Scene,
    camera: Camera,
    config: LidarConfig,
    entity_range_limit: float | None = DEFAULT_RANGE_LIMIT,
) -> BackendComparison:
    """Generate both point clouds and report per-entity discrepancies.

    Noise is forced off so the comparison isolates geometry effects. The
    raycast side uses proxy shapes where entities have them and skips
    entity hits beyond the range limit.
    """
    quiet = replace(config, noise_sigma=0.0)
    buffer, seg = render(scene, camera)
    depth_cloud = generate_point_cloud(buffer, seg, camera, quiet)

    dirs = pattern_rays(build_scan_pattern(quiet))
    t, codes = cast_rays(scene, dirs, use_proxy=True, entity_range_limit=entity_range_limit)
    hit = t < quiet.d_max
    raycast_cloud = PointCloud(dirs[hit] * t[hit, None], codes[hit])

    rows: list[EntityComparison] = []
    missed: list[int] = []
    for entity in sorted(scene.entities, key=lambda e: e.id):
        pts_a = depth_cloud.xyz[depth_cloud.entity_ids == entity.id]
        pts_b = raycast_cloud.xyz[raycast_cloud.entity_ids == entity.id]
        chamfer = chamfer_distance(pts_a, pts_b) if len(pts_a) and len(pts_b) else None
        rows.append(
            EntityComparison(
                entity_id=entity.id,
                class_name=entity.class_name,
                model_name=entity.model_name,
                distance=float(np.linalg.norm(entity.position)),
                depth_points=int(len(pts_a)),
                raycast_points=int(len(pts_b)),
                chamfer=chamfer,
            )
        )
        if len(pts_a) > 0 and len(pts_b) == 0:
            missed.append(entity.id)
    return BackendComparison(
        scene_name=scene.name,
        entity_range_limit=entity_range_limit,
        rows=rows,
        missed_entity_ids=missed,
        depth_cloud=depth_cloud,
        raycast_cloud=raycast_cloud,
    )


def comparison_report_dict(cmp: BackendComparison) -> dict:
    return {
        "scene": cmp.scene_name,
        "entity_range_limit": cmp.entity_range_limit,
        "missed_entity_ids": cmp.missed_entity_ids,
        "entities": [
            {
                "entity_id": r.entity_id,
                "class": r.class_name,
                "model": r.model_name,
                "distance_m": round(r.distance, 3),
                "depth_points": r.depth_points,
                "raycast_points": r.raycast_points,
                "chamfer_m": None if r.chamfer is None else round(r.chamfer, 6),
            }
            for r in cmp.rows
        ],
        "total_depth_points": int(len(cmp.depth_cloud)),
        "total_raycast_points": int(len(cmp.raycast_cloud)),
    }


def save_comparison_report(cmp: BackendComparison, path: str | Path) -> None:
    Path(path).write_text(json.dumps(comparison_report_dict(cmp), indent=2, sort_keys=True))


def save_comparison_csv(cmp: BackendComparison, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["entity_id", "class", "model", "distance_m", "depth_points", "raycast_points", "chamfer_m"]
        )
        for r in cmp.rows:
            writer.writerow(
                [
                    r.entity_id,
                    r.class_name,
                    r.model_name,
                    f"{r.distance:.3f}",
                    r.depth_points,
                    r.raycast_points,
                    "" if r.chamfer is None else f"{r.chamfer:.6f}",
                ]
            )


def save_comparison_figure(cmp: BackendComparison, path: str | Path) -> None:
    """Side-by-side bird's eye scatter of the two clouds."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 5), sharex=True, sharey=True)
    for ax, cloud, title in (
        (axes[0], cmp.raycast_cloud, "proxy raycast"),
        (axes[1], cmp.depth_cloud, "depth buffer"),
    ):
        xyz = cloud.xyz
        bg = cloud.entity_ids < ENTITY_ID_MIN
        ax.scatter(xyz[bg, 0], xyz[bg, 2], s=0.5, c="lightgray", linewidths=0)
        ax.scatter(xyz[~bg, 0], xyz[~bg, 2], s=0.8, c="crimson", linewidths=0)
        ax.set_title(title)
        ax.set_xlabel("x (m)")
    axes[0].set_ylabel("z (m)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
