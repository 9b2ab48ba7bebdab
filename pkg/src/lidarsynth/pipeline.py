"""Frame pipeline: render, segment, scan, annotate, serialise.

A dataset run is fully determined by its RunConfig (including the seed):
per-frame randomness is derived from the seed and the frame index, so any
worker count and any rerun produce byte-identical output trees.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .annotator import DEFAULT_MIN_PIXELS, make_labels, segment_instances
from .geometry import Camera
from .kitti_io import Frame, calibration_for, init_dataset_dirs, write_frame
from .scanner import LidarConfig, generate_point_cloud
from .scene import Scene, colorize_segmentation, render, stencil_from_instances
from .scenes import load_scene, make_scene


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a dataset run."""

    scene: str = "street-basic"
    scene_file: str | None = None
    scene_params: dict = field(default_factory=dict)
    camera: Camera = field(default_factory=Camera)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    frames: int = 1
    seed: int = 0
    noise: bool = True
    write_images: bool = True
    min_pixels: int = DEFAULT_MIN_PIXELS
    workers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["camera"] = asdict(self.camera)
        d["lidar"] = asdict(self.lidar)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        if "camera" in data:
            data["camera"] = Camera(**data["camera"])
        if "lidar" in data:
            data["lidar"] = LidarConfig(**data["lidar"])
        return cls(**data)


def frame_seed_sequence(seed: int, frame_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(frame_index,))


def scene_for_frame(config: RunConfig, frame_index: int) -> Scene:
    """The scene rendered for one frame; the random scene varies per frame."""
    if config.scene_file:
        return load_scene(config.scene_file)
    if config.scene == "random":
        seq = frame_seed_sequence(config.seed, frame_index).spawn(2)[0]
        return make_scene("random", seed=seq, **config.scene_params)
    return make_scene(config.scene, **config.scene_params)


def make_frame(config: RunConfig, frame_index: int, scene: Scene | None = None) -> tuple[Frame, dict]:
    """Produce all artifacts for one frame plus its report entry."""
    if scene is None:
        scene = scene_for_frame(config, frame_index)
    camera = config.camera

    buffer, exact_seg = render(scene, camera)
    stencil = stencil_from_instances(exact_seg, scene)
    instance = segment_instances(buffer, stencil, scene.entities, camera)

    noise_seq = frame_seed_sequence(config.seed, frame_index).spawn(2)[1]
    sigma = config.lidar.noise_sigma if config.noise else 0.0
    lidar = replace(config.lidar, noise_sigma=sigma, seed=noise_seq)
    cloud = generate_point_cloud(buffer, instance, camera, lidar)

    labels, extended, report = make_labels(
        scene, camera, instance, buffer, min_pixels=config.min_pixels
    )
    image = colorize_segmentation(instance, scene) if config.write_images else None
    frame = Frame(
        index=frame_index,
        cloud=cloud,
        labels=labels,
        extended=extended,
        calibration=calibration_for(camera),
        depth=buffer,
        seg=instance,
        image=image,
    )
    entry = {
        "index": frame_index,
        "points": len(cloud),
        "labeled": report.labeled,
        "dontcare": report.dontcare,
        "skipped_ids": report.skipped_ids,
    }
    return frame, entry


def _worker(args: tuple) -> dict:
    config_dict, out_dir, frame_index = args
    config = RunConfig.from_dict(config_dict)
    frame, entry = make_frame(config, frame_index)
    write_frame(out_dir, frame)
    return entry


def generate_dataset(config: RunConfig, out_dir: str | Path) -> dict:
    """Emit config.frames complete frames plus a manifest; returns the
    manifest."""
    out = Path(out_dir)
    init_dataset_dirs(out)
    tasks = [(config.to_dict(), str(out), i) for i in range(config.frames)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            entries = list(pool.map(_worker, tasks))
    else:
        entries = [_worker(t) for t in tasks]
    entries.sort(key=lambda e: e["index"])
    # The worker count is an execution detail: it must not influence the
    # output tree, so it is not echoed into the manifest.
    config_echo = _jsonable(config.to_dict())
    config_echo.pop("workers", None)
    manifest = {
        "tool": "lidarsynth",
        "version": __version__,
        "config": config_echo,
        "frames": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    return value
