"""Frame serialisation in the KITTI object layout.

Per-frame artifacts share a 6-digit zero-padded index:

    velodyne/XXXXXX.bin   point cloud, 4 little-endian float32 per point
                          (x, y, z, reflectance=0) in the velodyne frame
    velodyne/XXXXXX.eid   sidecar of per-point uint32 entity ids
    label_2/XXXXXX.txt    15-field object labels
    extended/XXXXXX.txt   entity_id pixel_count speed model pitch roll
    calib/XXXXXX.txt      P2, R0_rect, Tr_velo_to_cam
    depth/XXXXXX.bin      depth buffer (see depth module)
    seg/XXXXXX.bin        instance segmentation image
    image_2/XXXXXX.png    optional flat-shaded colour image

The velodyne frame is x forward, y left, z up; with the camera and the
scanner co-located the transform is the pure axis permutation
(x_v, y_v, z_v) = (z_c, -x_c, -y_c) with zero translation.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .annotator import DONTCARE, ExtendedLabel, ObjectLabel
from .depth import (
    DepthBuffer,
    SegmentationImage,
    read_depth_buffer,
    read_segmentation,
    write_depth_buffer,
    write_segmentation,
)
from .geometry import Camera, clipping_plane_dims
from .scanner import PointCloud
from .scene import ENTITY_CLASSES

KNOWN_CLASSES = set(ENTITY_CLASSES) | {DONTCARE}

SUBDIRS = ("velodyne", "label_2", "extended", "calib", "depth", "seg", "image_2")


def camera_to_velodyne(xyz: np.ndarray) -> np.ndarray:
    """(x right, y down, z fwd) to (x fwd, y left, z up)."""
    xyz = np.asarray(xyz).reshape(-1, 3)
    return np.column_stack([xyz[:, 2], -xyz[:, 0], -xyz[:, 1]])


def velodyne_to_camera(xyz: np.ndarray) -> np.ndarray:
    xyz = np.asarray(xyz).reshape(-1, 3)
    return np.column_stack([-xyz[:, 1], -xyz[:, 2], xyz[:, 0]])


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".eid")


def write_point_cloud(cloud: PointCloud, path: str | Path) -> None:
    """Velodyne-frame binary records plus the entity-id sidecar."""
    records = np.zeros((len(cloud), 4), dtype="<f4")
    records[:, :3] = camera_to_velodyne(cloud.xyz).astype("<f4")
    records.tofile(str(path))
    cloud.entity_ids.astype("<u4").tofile(str(sidecar_path(path)))


def read_point_cloud(path: str | Path) -> PointCloud:
    raw = Path(path).read_bytes()
    if len(raw) % 16 != 0:
        raise ValueError(f"{path}: size {len(raw)} is not a multiple of 16 bytes")
    records = np.frombuffer(raw, dtype="<f4").reshape(-1, 4)
    ids = np.frombuffer(sidecar_path(path).read_bytes(), dtype="<u4")
    if len(ids) != len(records):
        raise ValueError(f"{path}: sidecar holds {len(ids)} ids for {len(records)} points")
    return PointCloud(velodyne_to_camera(records[:, :3]), ids.copy())


def _label_line(label: ObjectLabel) -> str:
    b = label.bbox
    d = label.dimensions
    x, y, z = label.location
    return (
        f"{label.type} {label.truncated:.2f} {label.occluded:d} {label.alpha:.2f} "
        f"{b[0]:.2f} {b[1]:.2f} {b[2]:.2f} {b[3]:.2f} "
        f"{d[0]:.2f} {d[1]:.2f} {d[2]:.2f} "
        f"{x:.2f} {y:.2f} {z:.2f} {label.rotation_y:.2f}"
    )


def write_labels(labels: list[ObjectLabel], path: str | Path) -> None:
    Path(path).write_text("".join(_label_line(lb) + "\n" for lb in labels))


def parse_label_line(line: str) -> ObjectLabel:
    parts = line.split()
    if len(parts) != 15:
        raise ValueError(f"label line has {len(parts)} fields, expected 15")
    if parts[0] not in KNOWN_CLASSES:
        raise ValueError(f"unknown class string {parts[0]!r}")
    vals = [float(p) for p in parts[1:]]
    return ObjectLabel(
        type=parts[0],
        truncated=vals[0],
        occluded=int(vals[1]),
        alpha=vals[2],
        bbox=(vals[3], vals[4], vals[5], vals[6]),
        dimensions=(vals[7], vals[8], vals[9]),
        location=(vals[10], vals[11], vals[12]),
        rotation_y=vals[13],
    )


def read_labels(path: str | Path) -> list[ObjectLabel]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    return [parse_label_line(ln) for ln in lines]


def write_extended_labels(ext: list[ExtendedLabel], path: str | Path) -> None:
    out = []
    for e in ext:
        if " " in e.model_name:
            raise ValueError("model names must not contain spaces")
        out.append(
            f"{e.entity_id} {e.pixel_count} {e.speed:.2f} {e.model_name} "
            f"{e.pitch:.2f} {e.roll:.2f}\n"
        )
    Path(path).write_text("".join(out))


def read_extended_labels(path: str | Path, expected_count: int | None = None) -> list[ExtendedLabel]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if expected_count is not None and len(lines) != expected_count:
        raise ValueError(
            f"{path}: {len(lines)} extended labels for {expected_count} labels"
        )
    out = []
    for ln in lines:
        parts = ln.split()
        if len(parts) != 6:
            raise ValueError(f"extended label line has {len(parts)} fields, expected 6")
        out.append(
            ExtendedLabel(
                entity_id=int(parts[0]),
                pixel_count=int(parts[1]),
                speed=float(parts[2]),
                model_name=parts[3],
                pitch=float(parts[4]),
                roll=float(parts[5]),
            )
        )
    return out


@dataclass(frozen=True)
class Calibration:
    """Projection matrix plus the fixed sensor-frame relationship."""

    p2: np.ndarray  # 3x4 pixels
    r0_rect: np.ndarray  # 3x3, identity here
    tr_velo_to_cam: np.ndarray  # 3x4 rigid transform, zero translation

    def project_velodyne(self, xyz: np.ndarray) -> np.ndarray:
        """Velodyne points to pixel coordinates via Tr then P2."""
        xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
        cam = xyz @ self.tr_velo_to_cam[:, :3].T + self.tr_velo_to_cam[:, 3]
        rect = cam @ self.r0_rect.T
        hom = np.column_stack([rect, np.ones(len(rect))]) @ self.p2.T
        return hom[:, :2] / hom[:, 2:3]


def calibration_for(camera: Camera) -> Calibration:
    nc_w, nc_h = clipping_plane_dims(camera)
    fu = camera.near * (camera.width - 1) / nc_w
    fv = camera.near * (camera.height - 1) / nc_h
    p2 = np.array(
        [
            [fu, 0.0, (camera.width - 1) / 2.0, 0.0],
            [0.0, fv, (camera.height - 1) / 2.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
    )
    tr = np.array(
        [
            [0.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, -1.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ]
    )
    return Calibration(p2=p2, r0_rect=np.eye(3), tr_velo_to_cam=tr)


def write_calibration(calib: Calibration | Camera, path: str | Path) -> None:
    if isinstance(calib, Camera):
        calib = calibration_for(calib)
    def fmt(mat: np.ndarray) -> str:
        return " ".join(f"{v:.17g}" for v in np.asarray(mat).ravel())
    Path(path).write_text(
        f"P2: {fmt(calib.p2)}\n"
        f"R0_rect: {fmt(calib.r0_rect)}\n"
        f"Tr_velo_to_cam: {fmt(calib.tr_velo_to_cam)}\n"
    )


def read_calibration(path: str | Path) -> Calibration:
    fields: dict[str, np.ndarray] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, _, rest = line.partition(":")
        fields[key.strip()] = np.array([float(v) for v in rest.split()])
    return Calibration(
        p2=fields["P2"].reshape(3, 4),
        r0_rect=fields["R0_rect"].reshape(3, 3),
        tr_velo_to_cam=fields["Tr_velo_to_cam"].reshape(3, 4),
    )


@dataclass
class Frame:
    """Everything produced for one dataset frame."""

    index: int
    cloud: PointCloud
    labels: list[ObjectLabel]
    extended: list[ExtendedLabel]
    calibration: Calibration
    depth: DepthBuffer
    seg: SegmentationImage
    image: np.ndarray | None = None  # (H, W, 3) uint8


def frame_paths(root: str | Path, index: int) -> dict[str, Path]:
    root = Path(root)
    stem = f"{index:06d}"
    return {
        "velodyne": root / "velodyne" / f"{stem}.bin",
        "label": root / "label_2" / f"{stem}.txt",
        "extended": root / "extended" / f"{stem}.txt",
        "calib": root / "calib" / f"{stem}.txt",
        "depth": root / "depth" / f"{stem}.bin",
        "seg": root / "seg" / f"{stem}.bin",
        "image": root / "image_2" / f"{stem}.png",
    }


def init_dataset_dirs(root: str | Path) -> None:
    for sub in SUBDIRS:
        (Path(root) / sub).mkdir(parents=True, exist_ok=True)


def write_frame(root: str | Path, frame: Frame) -> None:
    """Write all artifacts atomically (temp file, then rename)."""
    paths = frame_paths(root, frame.index)
    for path in paths.values():
        path.parent.mkdir(parents=True, exist_ok=True)

    def atomically(path: Path, writer) -> None:
        tmp = path.with_name(path.name + ".tmp")
        writer(tmp)
        os.replace(tmp, path)

    velo_tmp = paths["velodyne"].with_name(paths["velodyne"].name + ".tmp")
    write_point_cloud(frame.cloud, velo_tmp)
    os.replace(sidecar_path(velo_tmp), sidecar_path(paths["velodyne"]))
    os.replace(velo_tmp, paths["velodyne"])
    atomically(paths["label"], lambda p: write_labels(frame.labels, p))
    atomically(paths["extended"], lambda p: write_extended_labels(frame.extended, p))
    atomically(paths["calib"], lambda p: write_calibration(frame.calibration, p))
    atomically(paths["depth"], lambda p: write_depth_buffer(frame.depth, p))
    atomically(paths["seg"], lambda p: write_segmentation(frame.seg, p))
    if frame.image is not None:
        from PIL import Image

        atomically(paths["image"], lambda p: Image.fromarray(frame.image).save(p, format="PNG"))


def read_frame(root: str | Path, index: int, with_image: bool = False) -> Frame:
    paths = frame_paths(root, index)
    labels = read_labels(paths["label"])
    extended = read_extended_labels(paths["extended"], expected_count=len(labels))
    image = None
    if with_image and paths["image"].exists():
        from PIL import Image

        image = np.asarray(Image.open(paths["image"]).convert("RGB"))
    return Frame(
        index=index,
        cloud=read_point_cloud(paths["velodyne"]),
        labels=labels,
        extended=extended,
        calibration=read_calibration(paths["calib"]),
        depth=read_depth_buffer(paths["depth"]),
        seg=read_segmentation(paths["seg"]),
        image=image,
    )
