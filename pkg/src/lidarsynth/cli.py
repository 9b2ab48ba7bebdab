"""Command-line interface.

Subcommands:
    dataset   emit N fully annotated frames plus a manifest
    render    render one frame's depth/segmentation/colour buffers
    generate  write a single scanned point cloud (binary + id sidecar)
    validate  run the built-in self checks, exit nonzero on failure
    stats     class counts, APICC, and BEV heatmaps for a dataset
    compare   depth-buffer scan versus proxy raycast on one scene
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .geometry import Camera
from .kitti_io import write_calibration, write_point_cloud
from .depth import write_depth_buffer, write_segmentation
from .pipeline import RunConfig, generate_dataset, scene_for_frame
from .scanner import LidarConfig, generate_point_cloud
from .scene import colorize_segmentation, render
from .scenes import UnknownSceneError, load_scene, make_scene
from .stats import (
    bev_heatmap,
    class_stats,
    compare_backends,
    comparison_report_dict,
    save_class_stats_csv,
    save_comparison_csv,
    save_comparison_figure,
    save_comparison_report,
    save_heatmap_csv,
    save_heatmap_image,
)
from .validation import run_all


def _add_camera_args(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("camera")
    g.add_argument("--width", type=int, default=None, help="image width in pixels")
    g.add_argument("--height", type=int, default=None, help="image height in pixels")
    g.add_argument("--fov-deg", type=float, default=None, help="vertical field of view, degrees")
    g.add_argument("--near", type=float, default=None, help="near clip distance, metres")
    g.add_argument("--far", type=float, default=None, help="far clip distance, metres")


def _add_lidar_args(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("scanner")
    g.add_argument("--theta-res", type=float, default=None, help="horizontal resolution, degrees")
    g.add_argument("--phi-res", type=float, default=None, help="vertical resolution, degrees")
    g.add_argument("--d-max", type=float, default=None, help="maximum range, metres")
    g.add_argument("--gate-ratio", type=float, default=None, help="disparity gate ratio")
    g.add_argument("--noise-sigma", type=float, default=None, help="range noise std, metres")


def _add_scene_args(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("scene")
    g.add_argument("--scene", default=None, help="built-in scene name")
    g.add_argument("--scene-file", default=None, help="JSON scene description file")
    g.add_argument(
        "--scene-param", action="append", default=[], metavar="KEY=VALUE",
        help="override a built-in scene parameter (repeatable)",
    )


def _parse_scene_params(pairs: list[str]) -> dict:
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ValueError(f"--scene-param needs KEY=VALUE, got {pair!r}")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def _camera_from_args(args, base: Camera) -> Camera:
    updates = {}
    if getattr(args, "width", None) is not None:
        updates["width"] = args.width
    if getattr(args, "height", None) is not None:
        updates["height"] = args.height
    if getattr(args, "fov_deg", None) is not None:
        updates["fov_v"] = math.radians(args.fov_deg)
    if getattr(args, "near", None) is not None:
        updates["near"] = args.near
    if getattr(args, "far", None) is not None:
        updates["far"] = args.far
    return replace(base, **updates) if updates else base


def _lidar_from_args(args, base: LidarConfig) -> LidarConfig:
    updates = {}
    if getattr(args, "theta_res", None) is not None:
        updates["theta_r"] = args.theta_res
    if getattr(args, "phi_res", None) is not None:
        updates["phi_r"] = args.phi_res
    if getattr(args, "d_max", None) is not None:
        updates["d_max"] = args.d_max
    if getattr(args, "gate_ratio", None) is not None:
        updates["gate_ratio"] = args.gate_ratio
    if getattr(args, "noise_sigma", None) is not None:
        updates["noise_sigma"] = args.noise_sigma
    return replace(base, **updates) if updates else base


def _run_config_from_args(args) -> RunConfig:
    if getattr(args, "config", None):
        base = RunConfig.from_dict(json.loads(Path(args.config).read_text()))
    else:
        base = RunConfig()
    cfg = replace(
        base,
        camera=_camera_from_args(args, base.camera),
        lidar=_lidar_from_args(args, base.lidar),
    )
    if args.scene is not None:
        cfg = replace(cfg, scene=args.scene)
    if args.scene_file is not None:
        cfg = replace(cfg, scene_file=args.scene_file)
    if args.scene_param:
        cfg = replace(cfg, scene_params=_parse_scene_params(args.scene_param))
    if getattr(args, "frames", None) is not None:
        cfg = replace(cfg, frames=args.frames)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "workers", None) is not None:
        cfg = replace(cfg, workers=args.workers)
    if getattr(args, "no_noise", False):
        cfg = replace(cfg, noise=False)
    if getattr(args, "no_images", False):
        cfg = replace(cfg, write_images=False)
    return cfg


def _scene_for(cfg: RunConfig, frame: int = 0):
    if cfg.scene_file:
        return load_scene(cfg.scene_file)
    if cfg.scene == "random":
        return scene_for_frame(cfg, frame)
    return make_scene(cfg.scene, **cfg.scene_params)


def cmd_dataset(args) -> int:
    cfg = _run_config_from_args(args)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out}: {exc}", file=sys.stderr)
        return 1
    manifest = generate_dataset(cfg, out)
    n_points = sum(f["points"] for f in manifest["frames"])
    print(f"wrote {cfg.frames} frames ({n_points} points) to {out}")
    return 0


def cmd_render(args) -> int:
    cfg = _run_config_from_args(args)
    scene = _scene_for(cfg)
    buffer, seg = render(scene, cfg.camera)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_depth_buffer(buffer, out / "depth.bin")
    write_segmentation(seg, out / "seg.bin")
    write_calibration(cfg.camera, out / "calib.txt")
    from PIL import Image

    Image.fromarray(colorize_segmentation(seg, scene)).save(out / "image.png", format="PNG")
    print(f"rendered {scene.name} ({cfg.camera.width}x{cfg.camera.height}) to {out}")
    return 0


def cmd_generate(args) -> int:
    cfg = _run_config_from_args(args)
    scene = _scene_for(cfg)
    lidar = cfg.lidar if cfg.noise else replace(cfg.lidar, noise_sigma=0.0)
    buffer, seg = render(scene, cfg.camera)
    cloud = generate_point_cloud(buffer, seg, cfg.camera, lidar)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_point_cloud(cloud, out)
    print(f"wrote {len(cloud)} points to {out} (+ .eid sidecar)")
    return 0


def cmd_validate(args) -> int:
    cfg = _run_config_from_args(args)
    results = run_all(cfg.camera, cfg.lidar, frames=cfg.frames, seed=cfg.seed)
    for r in results:
        print(f"[{r.status}] {r.name}: {r.details}")
    if args.report:
        payload = [
            {"name": r.name, "status": r.status, "details": r.details} for r in results
        ]
        Path(args.report).write_text(json.dumps(payload, indent=2))
    failed = [r for r in results if r.passed is False]
    return 1 if failed else 0


def cmd_stats(args) -> int:
    dataset = Path(args.dataset)
    if not dataset.is_dir():
        print(f"error: dataset directory {dataset} does not exist", file=sys.stderr)
        return 1
    stats = class_stats(dataset)
    print(f"frames: {stats.frame_count}")
    if stats.unreadable:
        print(f"unreadable label files skipped: {', '.join(stats.unreadable)}")
    print(f"{'class':<16}{'count':>8}{'apicc':>8}")
    for cls in sorted(stats.counts):
        print(f"{cls:<16}{stats.counts[cls]:>8}{stats.apicc[cls]:>8.2f}")
    out = Path(args.out) if args.out else dataset / "stats"
    out.mkdir(parents=True, exist_ok=True)
    save_class_stats_csv(stats, out / "class_stats.csv")
    if args.heatmap:
        hm = bev_heatmap(dataset, args.heatmap, cell_size=args.cell_size)
        save_heatmap_image(hm, out / f"bev_{args.heatmap}.png", title=args.heatmap)
        save_heatmap_csv(hm, out / f"bev_{args.heatmap}.csv")
        print(f"heatmap mass {hm.mass} (in-extent {args.heatmap} labels)")
    if args.report:
        payload = {
            "frames": stats.frame_count,
            "counts": stats.counts,
            "apicc": stats.apicc,
            "unreadable": stats.unreadable,
        }
        Path(args.report).write_text(json.dumps(payload, indent=2, sort_keys=True))
    print(f"stats written to {out}")
    return 0


def cmd_compare(args) -> int:
    cfg = _run_config_from_args(args)
    scene = _scene_for(cfg)
    limit = None if args.range_limit is not None and args.range_limit <= 0 else args.range_limit
    cmp = compare_backends(scene, cfg.camera, cfg.lidar, entity_range_limit=limit)
    report = comparison_report_dict(cmp)
    print(f"scene {cmp.scene_name}, entity range limit {cmp.entity_range_limit}")
    print(f"{'id':>5} {'class':<14}{'dist':>7} {'depth':>7} {'raycast':>8}  chamfer")
    for row in report["entities"]:
        ch = "n/a" if row["chamfer_m"] is None else f"{row['chamfer_m']:.4f}"
        print(
            f"{row['entity_id']:>5} {row['class']:<14}{row['distance_m']:>7.1f} "
            f"{row['depth_points']:>7} {row['raycast_points']:>8}  {ch}"
        )
    if report["missed_entity_ids"]:
        print(f"entities missed by raycast: {report['missed_entity_ids']}")
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_comparison_csv(cmp, out / "compare.csv")
        save_comparison_figure(cmp, out / "compare_bev.png")
        save_comparison_report(cmp, out / "compare.json")
        print(f"comparison written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lidarsynth",
        description="Synthetic LiDAR point clouds from rendered depth buffers.",
    )
    parser.add_argument("--version", action="version", version=f"lidarsynth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset", help="generate an annotated multi-frame dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--config", default=None, help="JSON run configuration file")
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--no-images", action="store_true")
    _add_scene_args(p)
    _add_camera_args(p)
    _add_lidar_args(p)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("render", help="render one frame's buffers")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    _add_scene_args(p)
    _add_camera_args(p)
    p.set_defaults(func=cmd_render, config=None)

    p = sub.add_parser("generate", help="scan one frame into a point cloud file")
    p.add_argument("--out", required=True, help="output .bin path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-noise", action="store_true")
    _add_scene_args(p)
    _add_camera_args(p)
    _add_lidar_args(p)
    p.set_defaults(func=cmd_generate, config=None)

    p = sub.add_parser("validate", help="run self checks")
    p.add_argument("--frames", type=int, default=5, help="frames for consistency check")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--report", default=None, help="write JSON results here")
    _add_camera_args(p)
    _add_lidar_args(p)
    p.set_defaults(func=cmd_validate, config=None, scene=None, scene_file=None, scene_param=[])

    p = sub.add_parser("stats", help="dataset class statistics and heatmaps")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--heatmap", default=None, metavar="CLASS", help="emit a BEV heatmap")
    p.add_argument("--cell-size", type=float, default=0.5)
    p.add_argument("--out", default=None, help="output directory (default DATASET/stats)")
    p.add_argument("--report", default=None, help="write JSON stats here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("compare", help="depth-buffer scan vs proxy raycast")
    p.add_argument("--range-limit", type=float, default=30.0,
                   help="entity range limit for raycasting (<= 0 disables)")
    p.add_argument("--out", default=None, help="write report files here")
    p.add_argument("--report", default=None, help="write the JSON report here")
    p.add_argument("--seed", type=int, default=None)
    _add_scene_args(p)
    _add_camera_args(p)
    _add_lidar_args(p)
    p.set_defaults(func=cmd_compare, config=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnknownSceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
