"""Built-in test scenes, a seeded random scene generator, and scene files.

Scene files are JSON (schema version 1); angles are stored in degrees and
all lengths in metres. See docs/data_formats.md for the full schema.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .depth import STENCIL_BUILDING, STENCIL_GROUND, STENCIL_STATIC
from .primitives import Box, Capsule, Cylinder, Plane, Primitive, Sphere, TriangleMesh
from .scene import Entity, Scene, StaticShape

SENSOR_HEIGHT = 1.7  # metres above the ground plane


class UnknownSceneError(ValueError):
    """Requested scene name is not in the built-in library."""


def car_geometry(length: float = 4.4, height: float = 1.5, width: float = 1.9) -> list[Primitive]:
    """A single box resting on the local origin (bottom-centre anchor)."""
    return [Box(center=[0.0, -height / 2.0, 0.0], half_extents=[length / 2, height / 2, width / 2])]


def truck_geometry() -> list[Primitive]:
    return car_geometry(length=6.2, height=2.5, width=2.5)


def cyclist_geometry() -> list[Primitive]:
    return car_geometry(length=1.7, height=1.7, width=0.6)


def pedestrian_geometry() -> list[Primitive]:
    """Five-primitive assembly: head, torso, pelvis, and two legs."""
    return [
        Sphere(center=[0.0, -1.69, 0.0], radius=0.11),
        Capsule(p0=[0.0, -1.50, 0.0], p1=[0.0, -1.05, 0.0], radius=0.17),
        Sphere(center=[0.0, -0.95, 0.0], radius=0.15),
        Capsule(p0=[-0.09, -0.82, 0.0], p1=[-0.09, -0.08, 0.0], radius=0.07),
        Capsule(p0=[0.09, -0.82, 0.0], p1=[0.09, -0.08, 0.0], radius=0.07),
    ]


def pedestrian_proxy() -> list[Primitive]:
    """The coarse collision shape: one fat vertical cylinder."""
    return [Cylinder(p0=[0.0, 0.0, 0.0], p1=[0.0, -1.80, 0.0], radius=0.30)]


def ground_plane(height: float = SENSOR_HEIGHT) -> StaticShape:
    return StaticShape(Plane(point=[0.0, height, 0.0], normal=[0.0, -1.0, 0.0]), STENCIL_GROUND)


def wall_scene(distance: float = 20.0) -> Scene:
    """A single full-frustum wall perpendicular to the optical axis."""
    wall = StaticShape(Plane(point=[0.0, 0.0, distance], normal=[0.0, 0.0, -1.0]), STENCIL_BUILDING)
    return Scene(name="wall", statics=[wall])


def sphere_scene(radius: float = 5.0, distance: float = 20.0) -> Scene:
    """A sphere centred on the optical axis against empty sky."""
    ball = StaticShape(Sphere(center=[0.0, 0.0, distance], radius=radius), STENCIL_STATIC)
    return Scene(name="sphere", statics=[ball])


def two_plane_step_scene(near_z: float = 2.0, ratio: float = 1.2) -> Scene:
    """A depth discontinuity: left half at near_z, right half at near_z*ratio.

    The near depths keep sub-pixel ray/pixel mismatch well under a
    millimetre so gate tests can use tight absolute margins.
    """
    far_z = near_z * ratio
    half_w = far_z * 2.0
    half_h = far_z * 1.5
    left = StaticShape(
        Box(center=[-half_w / 2, 0.0, near_z + 0.01], half_extents=[half_w / 2, half_h, 0.01]),
        STENCIL_BUILDING,
    )
    right = StaticShape(
        Box(center=[half_w / 2, 0.0, far_z + 0.01], half_extents=[half_w / 2, half_h, 0.01]),
        STENCIL_BUILDING,
    )
    return Scene(name="two-plane-step", statics=[left, right])


def street_basic_scene() -> Scene:
    """Ground plane, three cars at 10/35/60 m, two pedestrians with
    cylinder proxies. Sight lines to all five objects are unobstructed.

    Placements (x, z) in metres, yaw in radians:
      id 100 Car "hatchback"  (-5.0, 10.0)  yaw  0.30
      id 101 Car "ingot"      ( 0.5, 35.0)  yaw -0.20
      id 102 Car "boxsedan"   ( 7.5, 60.0)  yaw  0.40
      id 110 Pedestrian "walker_a" ( 2.0,  8.0)
      id 111 Pedestrian "walker_b" (-1.5, 15.0)
    """
    g = SENSOR_HEIGHT
    cars = [
        Entity(100, "Car", "hatchback", [-5.0, g, 10.0], yaw=0.30, speed=8.0, geometry=car_geometry()),
        Entity(101, "Car", "ingot", [0.5, g, 35.0], yaw=-0.20, speed=12.5, geometry=car_geometry()),
        Entity(102, "Car", "boxsedan", [7.5, g, 60.0], yaw=0.40, speed=0.0, geometry=car_geometry()),
    ]
    peds = [
        Entity(110, "Pedestrian", "walker_a", [2.0, g, 8.0], yaw=1.2, speed=1.2,
               geometry=pedestrian_geometry(), proxy=pedestrian_proxy()),
        Entity(111, "Pedestrian", "walker_b", [-1.5, g, 15.0], yaw=-2.0, speed=0.8,
               geometry=pedestrian_geometry(), proxy=pedestrian_proxy()),
    ]
    return Scene(name="street-basic", entities=cars + peds, statics=[ground_plane()])


def slope_scene(angle_deg: float = 9.0, vehicle_z: float = 12.0) -> Scene:
    """Ground rising ahead with a vehicle driving straight up the slope.

    The vehicle's bottom face sits flush on the incline, so its pose
    carries a nonzero pitch equal to the slope angle.
    """
    angle = math.radians(angle_deg)
    normal = np.array([0.0, math.cos(angle), math.sin(angle)])
    ground = StaticShape(Plane(point=[0.0, SENSOR_HEIGHT, 0.0], normal=normal), STENCIL_GROUND)
    y_at_vehicle = SENSOR_HEIGHT - vehicle_z * math.tan(angle)
    car = Entity(
        100, "Car", "ingot", [-1.5, y_at_vehicle, vehicle_z],
        yaw=-math.pi / 2.0, pitch=angle, speed=5.0, geometry=car_geometry(),
    )
    return Scene(name="slope", entities=[car], statics=[ground])


_MODEL_NAMES = {
    "Car": ["hatchback", "ingot", "boxsedan", "fastback"],
    "Pedestrian": ["walker_a", "walker_b", "jogger"],
    "Truck": ["boxtruck", "flatbed"],
    "Cyclist": ["roadbike", "bmx"],
}
_CLASS_WEIGHTS = [("Car", 0.45), ("Pedestrian", 0.30), ("Truck", 0.15), ("Cyclist", 0.10)]


def random_scene(
    seed: int | np.random.SeedSequence = 0,
    n_entities: int | None = None,
    z_range: tuple[float, float] = (6.0, 38.0),
    x_range: tuple[float, float] = (-14.0, 14.0),
    min_separation: float = 4.5,
) -> Scene:
    """Seeded random placement of cars, pedestrians, trucks, and cyclists
    on a flat ground plane. Identical seeds give identical scenes."""
    rng = np.random.default_rng(seed)
    if n_entities is None:
        n_entities = int(rng.integers(4, 9))
    names, weights = zip(*_CLASS_WEIGHTS)
    entities: list[Entity] = []
    taken: list[np.ndarray] = []
    attempts = 0
    while len(entities) < n_entities and attempts < 200:
        attempts += 1
        cls = str(rng.choice(names, p=weights))
        x = float(rng.uniform(*x_range))
        z = float(rng.uniform(*z_range))
        pos2 = np.array([x, z])
        if any(np.linalg.norm(pos2 - p) < min_separation for p in taken):
            continue
        yaw = float(rng.uniform(-math.pi, math.pi))
        model = str(rng.choice(_MODEL_NAMES[cls]))
        speed_hi = {"Car": 15.0, "Pedestrian": 2.0, "Truck": 12.0, "Cyclist": 6.0}[cls]
        speed = float(rng.uniform(0.0, speed_hi))
        geometry = {
            "Car": car_geometry,
            "Pedestrian": pedestrian_geometry,
            "Truck": truck_geometry,
            "Cyclist": cyclist_geometry,
        }[cls]()
        proxy = pedestrian_proxy() if cls == "Pedestrian" else None
        entities.append(
            Entity(100 + len(entities), cls, model, [x, SENSOR_HEIGHT, z],
                   yaw=yaw, speed=speed, geometry=geometry, proxy=proxy)
        )
        taken.append(pos2)
    return Scene(name="random", entities=entities, statics=[ground_plane()])


_BUILDERS = {
    "wall": wall_scene,
    "sphere": sphere_scene,
    "two-plane-step": two_plane_step_scene,
    "street-basic": street_basic_scene,
    "slope": slope_scene,
    "random": random_scene,
}


def builtin_scenes() -> dict[str, object]:
    """Name to builder mapping for the built-in scene library."""
    return dict(_BUILDERS)


def make_scene(name: str, **params) -> Scene:
    if name not in _BUILDERS:
        known = ", ".join(sorted(_BUILDERS))
        raise UnknownSceneError(f"unknown scene {name!r} (available: {known})")
    return _BUILDERS[name](**params)


# ---------------------------------------------------------------------------
# Scene file serialisation (JSON, schema version 1)

_STENCIL_BY_NAME = {"ground": STENCIL_GROUND, "building": STENCIL_BUILDING, "static": STENCIL_STATIC}
_STENCIL_TO_NAME = {v: k for k, v in _STENCIL_BY_NAME.items()}


def _prim_to_dict(p: Primitive) -> dict:
    if isinstance(p, Sphere):
        return {"kind": "sphere", "center": list(p.center), "radius": p.radius}
    if isinstance(p, Capsule):
        return {"kind": "capsule", "p0": list(p.p0), "p1": list(p.p1), "radius": p.radius}
    if isinstance(p, Cylinder):
        return {"kind": "cylinder", "p0": list(p.p0), "p1": list(p.p1), "radius": p.radius}
    if isinstance(p, Box):
        return {"kind": "box", "center": list(p.center), "half_extents": list(p.half_extents)}
    if isinstance(p, Plane):
        return {"kind": "plane", "point": list(p.point), "normal": list(p.normal)}
    if isinstance(p, TriangleMesh):
        return {"kind": "mesh", "vertices": p.vertices.tolist(), "faces": p.faces.tolist()}
    raise TypeError(f"cannot serialise primitive {type(p).__name__}")


def _prim_from_dict(d: dict) -> Primitive:
    kind = d.get("kind")
    if kind == "sphere":
        return Sphere(d["center"], d["radius"])
    if kind == "capsule":
        return Capsule(d["p0"], d["p1"], d["radius"])
    if kind == "cylinder":
        return Cylinder(d["p0"], d["p1"], d["radius"])
    if kind == "box":
        return Box(d["center"], d["half_extents"])
    if kind == "plane":
        return Plane(d["point"], d["normal"])
    if kind == "mesh":
        return TriangleMesh(d["vertices"], d["faces"])
    raise ValueError(f"unknown primitive kind {kind!r}")


def scene_to_dict(scene: Scene) -> dict:
    return {
        "version": 1,
        "name": scene.name,
        "statics": [
            {"stencil": _STENCIL_TO_NAME[s.stencil], "shape": _prim_to_dict(s.shape)}
            for s in scene.statics
        ],
        "entities": [
            {
                "id": e.id,
                "class": e.class_name,
                "model": e.model_name,
                "position": list(e.position),
                "yaw_deg": math.degrees(e.yaw),
                "pitch_deg": math.degrees(e.pitch),
                "roll_deg": math.degrees(e.roll),
                "speed": e.speed,
                "geometry": [_prim_to_dict(p) for p in e.geometry],
                "proxy": [_prim_to_dict(p) for p in e.proxy] if e.proxy else None,
            }
            for e in scene.entities
        ],
    }


def scene_from_dict(data: dict) -> Scene:
    version = data.get("version")
    if version != 1:
        raise ValueError(f"unsupported scene schema version {version!r}")
    statics = [
        StaticShape(_prim_from_dict(s["shape"]), _STENCIL_BY_NAME[s["stencil"]])
        for s in data.get("statics", [])
    ]
    entities = [
        Entity(
            id=e["id"],
            class_name=e["class"],
            model_name=e["model"],
            position=e["position"],
            yaw=math.radians(e.get("yaw_deg", 0.0)),
            pitch=math.radians(e.get("pitch_deg", 0.0)),
            roll=math.radians(e.get("roll_deg", 0.0)),
            speed=e.get("speed", 0.0),
            geometry=[_prim_from_dict(p) for p in e["geometry"]],
            proxy=[_prim_from_dict(p) for p in e["proxy"]] if e.get("proxy") else None,
        )
        for e in data.get("entities", [])
    ]
    return Scene(name=data.get("name", "scene"), entities=entities, statics=statics)


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2, sort_keys=True))


def load_scene(path: str | Path) -> Scene:
    return scene_from_dict(json.loads(Path(path).read_text()))
