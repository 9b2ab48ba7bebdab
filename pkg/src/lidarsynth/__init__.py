"""Synthetic LiDAR point clouds from rendered depth buffers, with
KITTI-format dataset output and an exact ray-casting oracle."""

__version__ = "0.1.0"

from .geometry import Camera, OrientedBox3D, make_ray, project, unproject
from .depth import DepthBuffer, SegmentationImage, decode_depth, encode_depth
from .scanner import LidarConfig, PointCloud, add_noise, build_scan_pattern, generate_point_cloud
from .scene import Entity, Scene, cast_rays, raycast_exact, render
from .scenes import builtin_scenes, load_scene, make_scene, save_scene
from .annotator import ExtendedLabel, ObjectLabel, make_labels, segment_instances
from .kitti_io import Frame, read_frame, write_frame
from .pipeline import RunConfig, generate_dataset

__all__ = [
    "Camera",
    "OrientedBox3D",
    "make_ray",
    "project",
    "unproject",
    "DepthBuffer",
    "SegmentationImage",
    "decode_depth",
    "encode_depth",
    "LidarConfig",
    "PointCloud",
    "add_noise",
    "build_scan_pattern",
    "generate_point_cloud",
    "Entity",
    "Scene",
    "cast_rays",
    "raycast_exact",
    "render",
    "builtin_scenes",
    "load_scene",
    "make_scene",
    "save_scene",
    "ExtendedLabel",
    "ObjectLabel",
    "make_labels",
    "segment_instances",
    "Frame",
    "read_frame",
    "write_frame",
    "RunConfig",
    "generate_dataset",
    "__version__",
]
