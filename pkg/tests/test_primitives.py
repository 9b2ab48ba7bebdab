import numpy as np
import pytest
from scipy.spatial import cKDTree

from lidarsynth.primitives import (
    Box,
    Capsule,
    Cylinder,
    Plane,
    Sphere,
    TriangleMesh,
    union_bounds,
)

# Primitives kept small (about 1 m^2 of surface) so 4M samples put a
# sampled point within 1 mm of any true surface point with near certainty.
ORACLE_SAMPLES = 4_000_000
N_RAYS = 250


def _seg_dist(p, a, b):
    ab = b - a
    s = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return np.linalg.norm(p - (a + s * ab))


def _tet_inside(vertices, faces, margin):
    verts = np.asarray(vertices, dtype=float)
    centroid = verts.mean(axis=0)
    planes = []
    for f in faces:
        v0, v1, v2 = verts[f]
        n = np.cross(v1 - v0, v2 - v0)
        n /= np.linalg.norm(n)
        if np.dot(n, centroid - v0) > 0:
            n = -n
        planes.append((v0, n))
    return lambda p: all(np.dot(p - v0, n) < -margin for v0, n in planes)


def _oracle_cases():
    """(primitive, closed-form membership predicate) pairs; the predicates
    are independent of the intersection algebra."""
    mesh_verts = [[-0.3, 0.0, -0.2], [0.3, 0.0, -0.2], [0.0, -0.45, 0.0], [0.0, 0.1, 0.3]]
    mesh_faces = [[0, 1, 2], [0, 1, 3], [1, 2, 3], [0, 2, 3]]
    margin = 1e-6

    def cyl_inside(p, p0, p1, r):
        axis = p1 - p0
        length = np.linalg.norm(axis)
        axis = axis / length
        s = np.dot(p - p0, axis)
        radial = np.linalg.norm(p - p0 - s * axis)
        return margin < s < length - margin and radial < r - margin

    return {
        "sphere": (
            Sphere(center=[0.2, -0.1, 0.3], radius=0.28),
            lambda p: np.linalg.norm(p - [0.2, -0.1, 0.3]) < 0.28 - margin,
        ),
        "cylinder": (
            Cylinder(p0=[0.0, 0.25, 0.0], p1=[0.1, -0.25, 0.1], radius=0.2),
            lambda p: cyl_inside(p, np.array([0.0, 0.25, 0.0]), np.array([0.1, -0.25, 0.1]), 0.2),
        ),
        "capsule": (
            Capsule(p0=[-0.1, 0.2, 0.0], p1=[0.1, -0.2, 0.05], radius=0.18),
            lambda p: _seg_dist(p, np.array([-0.1, 0.2, 0.0]), np.array([0.1, -0.2, 0.05]))
            < 0.18 - margin,
        ),
        "box": (
            Box(center=[0.05, 0.0, -0.1], half_extents=[0.2, 0.15, 0.25]),
            lambda p: bool(
                np.all(np.abs(p - [0.05, 0.0, -0.1]) < np.array([0.2, 0.15, 0.25]) - margin)
            ),
        ),
        "mesh": (
            TriangleMesh(vertices=mesh_verts, faces=mesh_faces),
            _tet_inside(mesh_verts, mesh_faces, margin),
        ),
    }


@pytest.mark.parametrize("name", list(_oracle_cases()))
def test_hits_lie_on_sampled_surface_and_come_first(name):
    """Brute-force sampled-surface oracle: every analytic hit point must
    sit within 1 mm of a densely sampled surface, and no point of the ray
    segment before the hit may be inside the body."""
    prim, inside = _oracle_cases()[name]
    rng = np.random.default_rng(42)
    surface = prim.sample_surface(rng, ORACLE_SAMPLES)
    tree = cKDTree(surface)

    lo, hi = prim.bounds()
    centroid = (lo + hi) / 2.0
    hits = 0
    for _ in range(N_RAYS):
        origin = centroid + _random_unit(rng) * rng.uniform(1.5, 4.0)
        target = centroid + (rng.uniform(lo, hi) - centroid) * 0.5
        d = target - origin
        d /= np.linalg.norm(d)
        t = float(prim.intersect(origin, d.reshape(1, 3))[0])
        if not np.isfinite(t):
            continue
        hits += 1
        hit_point = origin + t * d
        dist_to_surface = tree.query(hit_point)[0]
        assert dist_to_surface < 1e-3, f"{name}: hit {dist_to_surface:.4f} m off surface"

        for frac in np.linspace(0.01, 1.0, 64):
            probe = origin + (t - 1e-4) * frac * d
            assert not inside(probe), f"{name}: ray was inside the body before the hit"
    assert hits > N_RAYS * 0.6


def _random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


class TestClosedFormHits:
    def test_sphere_head_on(self):
        s = Sphere(center=[0.0, 0.0, 10.0], radius=1.0)
        t = s.intersect(np.zeros(3), np.array([[0.0, 0.0, 1.0]]))
        assert t[0] == pytest.approx(9.0, abs=1e-12)

    def test_sphere_miss(self):
        s = Sphere(center=[0.0, 0.0, 10.0], radius=1.0)
        t = s.intersect(np.zeros(3), np.array([[0.0, 1.0, 0.0]]))
        assert np.isinf(t[0])

    def test_sphere_from_inside(self):
        s = Sphere(center=np.zeros(3), radius=2.0)
        t = s.intersect(np.zeros(3), np.array([[0.0, 0.0, 1.0]]))
        assert t[0] == pytest.approx(2.0)

    def test_cylinder_lateral(self):
        c = Cylinder(p0=[0.0, 1.0, 5.0], p1=[0.0, -1.0, 5.0], radius=0.5)
        t = c.intersect(np.zeros(3), np.array([[0.0, 0.0, 1.0]]))
        assert t[0] == pytest.approx(4.5, abs=1e-12)

    def test_cylinder_cap(self):
        # Axis along z: a forward ray hits the near cap plane.
        c = Cylinder(p0=[0.0, 0.0, 5.0], p1=[0.0, 0.0, 7.0], radius=1.0)
        t = c.intersect(np.zeros(3), np.array([[0.0, 0.0, 1.0]]))
        assert t[0] == pytest.approx(5.0, abs=1e-12)

    def test_cylinder_beyond_span_misses(self):
        c = Cylinder(p0=[0.0, 1.0, 5.0], p1=[0.0, 3.0, 5.0], radius=0.5)
        t = c.intersect(np.zeros(3), np.array([[0.0, 0.0, 1.0]]))
        assert np.isinf(t[0])

    def test_capsule_end_sphere(self):
        cap = Capsule(p0=[0.0, 0.0, 5.0], p1=[0.0, -2.0, 5.0], radius=0.3)
        t = cap.intersect(np.zeros(3), np.array([[0.0, 0.0, 1.0]]))
        assert t[0] == pytest.approx(4.7, abs=1e-12)

    def test_capsule_lateral(self):
        cap = Capsule(p0=[0.0, 1.0, 5.0], p1=[0.0, -1.0, 5.0], radius=0.3)
        t = cap.intersect(np.zeros(3), np.array([[0.0, 0.0, 1.0]]))
        assert t[0] == pytest.approx(4.7, abs=1e-12)

    def test_box_entry_face(self):
        b = Box(center=[0.0, 0.0, 10.0], half_extents=[1.0, 1.0, 1.0])
        t = b.intersect(np.zeros(3), np.array([[0.0, 0.0, 1.0]]))
        assert t[0] == pytest.approx(9.0, abs=1e-12)

    def test_box_zero_component_hit_and_miss(self):
        b = Box(center=[0.0, 0.0, 10.0], half_extents=[1.0, 1.0, 1.0])
        dirs = np.array([[0.0, 0.0, 1.0]])
        # Shift the origin outside the x slab: same direction must miss.
        t_hit = b.intersect(np.array([0.5, 0.0, 0.0]), dirs)
        t_miss = b.intersect(np.array([1.5, 0.0, 0.0]), dirs)
        assert np.isfinite(t_hit[0])
        assert np.isinf(t_miss[0])

    def test_plane_hit(self):
        p = Plane(point=[0.0, 0.0, 20.0], normal=[0.0, 0.0, -1.0])
        t = p.intersect(np.zeros(3), np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]))
        assert t[0] == pytest.approx(20.0)
        assert np.isinf(t[1])

    def test_triangle_hit(self):
        m = TriangleMesh(
            vertices=[[-1.0, -1.0, 5.0], [1.0, -1.0, 5.0], [0.0, 1.0, 5.0]],
            faces=[[0, 1, 2]],
        )
        t = m.intersect(np.zeros(3), np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]))
        assert t[0] == pytest.approx(5.0, abs=1e-12)
        assert np.isinf(t[1])

    def test_t_min_skips_near_hits(self):
        s = Sphere(center=[0.0, 0.0, 10.0], radius=1.0)
        t = s.intersect(np.zeros(3), np.array([[0.0, 0.0, 1.0]]), t_min=9.5)
        assert t[0] == pytest.approx(11.0, abs=1e-12)


class TestSamplingAndBounds:
    @pytest.mark.parametrize("name", list(_oracle_cases()))
    def test_samples_inside_bounds(self, name):
        prim = _oracle_cases()[name][0]
        rng = np.random.default_rng(1)
        pts = prim.sample_surface(rng, 5000)
        lo, hi = prim.bounds()
        assert np.all(pts >= lo - 1e-9) and np.all(pts <= hi + 1e-9)

    def test_sphere_samples_on_surface(self):
        s = Sphere(center=[1.0, 2.0, 3.0], radius=0.5)
        pts = s.sample_surface(np.random.default_rng(2), 2000)
        r = np.linalg.norm(pts - s.center, axis=1)
        np.testing.assert_allclose(r, 0.5, atol=1e-12)

    def test_box_samples_on_faces(self):
        b = Box(center=np.zeros(3), half_extents=[0.5, 0.4, 0.3])
        pts = b.sample_surface(np.random.default_rng(3), 2000)
        rel = np.abs(pts) / b.half_extents
        assert np.all(np.isclose(rel.max(axis=1), 1.0, atol=1e-9))

    def test_union_bounds(self):
        lo, hi = union_bounds([
            Sphere(center=[0.0, 0.0, 0.0], radius=1.0),
            Box(center=[5.0, 0.0, 0.0], half_extents=[0.5, 0.5, 0.5]),
        ])
        np.testing.assert_allclose(lo, [-1.0, -1.0, -1.0])
        np.testing.assert_allclose(hi, [5.5, 1.0, 1.0])


def test_pedestrian_assembly_differs_from_cylinder_proxy():
    """A grazing ray passes between the legs of the detailed assembly but
    hits the fat proxy cylinder."""
    from lidarsynth.scenes import pedestrian_geometry, pedestrian_proxy
    from lidarsynth.scene import Entity

    ped = Entity(
        100, "Pedestrian", "walker_a", [0.0, 1.7, 8.0],
        geometry=pedestrian_geometry(), proxy=pedestrian_proxy(),
    )
    # Aim between the legs at knee height: x offset 0 in the local frame.
    target = np.array([0.0, 1.7 - 0.4, 8.0])
    d = target / np.linalg.norm(target)
    t_detailed = ped.intersect(d.reshape(1, 3), 1e-9, use_proxy=False)
    t_proxy = ped.intersect(d.reshape(1, 3), 1e-9, use_proxy=True)
    assert np.isinf(t_detailed[0])
    assert np.isfinite(t_proxy[0])

    # A ray onto a leg hits both, at different ranges.
    target = np.array([0.09, 1.7 - 0.4, 8.0])
    d = target / np.linalg.norm(target)
    t_detailed = ped.intersect(d.reshape(1, 3), 1e-9, use_proxy=False)
    t_proxy = ped.intersect(d.reshape(1, 3), 1e-9, use_proxy=True)
    assert np.isfinite(t_detailed[0]) and np.isfinite(t_proxy[0])
    assert abs(t_detailed[0] - t_proxy[0]) > 0.05
