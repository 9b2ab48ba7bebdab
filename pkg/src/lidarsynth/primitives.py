"""Analytic shapes with vectorised ray intersection and surface sampling.

All intersect() implementations take a common ray origin, an (N, 3) array
of unit directions, and a minimum parameter t_min (scalar or per ray);
they return the smallest valid hit parameter per ray, with inf for a miss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EPS = 1e-12


class Primitive:
    def intersect(self, origin: np.ndarray, dirs: np.ndarray, t_min=1e-9) -> np.ndarray:
        raise NotImplementedError

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned (lo, hi) bounds in the primitive's own frame."""
        raise NotImplementedError

    def sample_surface(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n points drawn uniformly by area from the surface."""
        raise NotImplementedError


def _first_root(t0: np.ndarray, t1: np.ndarray, valid: np.ndarray, t_min) -> np.ndarray:
    """Pick the smaller root above t_min, falling back to the larger one."""
    lo = np.minimum(t0, t1)
    hi = np.maximum(t0, t1)
    t = np.where(lo > t_min, lo, hi)
    return np.where(valid & (t > t_min), t, np.inf)


@dataclass(frozen=True)
class Sphere(Primitive):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    def intersect(self, origin, dirs, t_min=1e-9):
        oc = np.asarray(origin, dtype=float) - self.center
        b = dirs @ oc
        c = oc @ oc - self.radius**2
        disc = b * b - c
        ok = disc >= 0.0
        root = np.sqrt(np.where(ok, disc, 0.0))
        return _first_root(-b - root, -b + root, ok, t_min)

    def bounds(self):
        r = np.full(3, self.radius)
        return self.center - r, self.center + r

    def sample_surface(self, rng, n):
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return self.center + self.radius * d


@dataclass(frozen=True)
class Capsule(Primitive):
    """Segment p0-p1 swept by a sphere of the given radius."""

    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float))
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=float))

    def _axis(self) -> tuple[np.ndarray, float]:
        axis = self.p1 - self.p0
        length = float(np.linalg.norm(axis))
        return (axis / length if length > 0 else np.array([0.0, 1.0, 0.0])), length

    def intersect(self, origin, dirs, t_min=1e-9):
        axis, length = self._axis()
        oc = np.asarray(origin, dtype=float) - self.p0
        d_par = dirs @ axis
        o_par = oc @ axis
        d_perp = dirs - d_par[:, None] * axis
        o_perp = oc - o_par * axis

        a = np.einsum("ij,ij->i", d_perp, d_perp)
        b = d_perp @ o_perp
        c = o_perp @ o_perp - self.radius**2
        disc = b * b - a * c
        ok = (disc >= 0.0) & (a > _EPS)
        root = np.sqrt(np.where(ok, disc, 0.0))
        safe_a = np.where(a > _EPS, a, 1.0)
        t_lat0 = (-b - root) / safe_a
        t_lat1 = (-b + root) / safe_a
        # Keep lateral hits only within the segment's axial span.
        s0 = o_par + t_lat0 * d_par
        s1 = o_par + t_lat1 * d_par
        t_lat0 = np.where(ok & (s0 >= 0.0) & (s0 <= length), t_lat0, np.inf)
        t_lat1 = np.where(ok & (s1 >= 0.0) & (s1 <= length), t_lat1, np.inf)
        t_lat = _first_root(t_lat0, t_lat1, np.isfinite(np.minimum(t_lat0, t_lat1)), t_min)

        t0 = Sphere(self.p0, self.radius).intersect(origin, dirs, t_min)
        t1 = Sphere(self.p1, self.radius).intersect(origin, dirs, t_min)
        return np.minimum(t_lat, np.minimum(t0, t1))

    def bounds(self):
        r = np.full(3, self.radius)
        lo = np.minimum(self.p0, self.p1) - r
        hi = np.maximum(self.p0, self.p1) + r
        return lo, hi

    def sample_surface(self, rng, n):
        axis, length = self._axis()
        side_area = 2.0 * np.pi * self.radius * length
        cap_area = 4.0 * np.pi * self.radius**2
        pick_side = rng.random(n) < side_area / (side_area + cap_area)
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        # Sphere samples attach to the endpoint matching their hemisphere.
        at_p1 = (d @ axis) > 0.0
        base = np.where(at_p1[:, None], self.p1, self.p0)
        cap_pts = base + self.radius * d
        perp = d - (d @ axis)[:, None] * axis
        norm = np.linalg.norm(perp, axis=1, keepdims=True)
        norm[norm < _EPS] = 1.0
        side_pts = self.p0 + rng.random(n)[:, None] * length * axis + self.radius * perp / norm
        return np.where(pick_side[:, None], side_pts, cap_pts)


@dataclass(frozen=True)
class Cylinder(Primitive):
    """Solid capped cylinder with cap centres p0 and p1."""

    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float))
        object.__setattr__(self, "p1", np.asarray(self.p1, dtype=float))

    def _axis(self):
        axis = self.p1 - self.p0
        length = float(np.linalg.norm(axis))
        return axis / length, length

    def intersect(self, origin, dirs, t_min=1e-9):
        axis, length = self._axis()
        oc = np.asarray(origin, dtype=float) - self.p0
        d_par = dirs @ axis
        o_par = oc @ axis
        d_perp = dirs - d_par[:, None] * axis
        o_perp = oc - o_par * axis

        a = np.einsum("ij,ij->i", d_perp, d_perp)
        b = d_perp @ o_perp
        c = o_perp @ o_perp - self.radius**2
        disc = b * b - a * c
        ok = (disc >= 0.0) & (a > _EPS)
        root = np.sqrt(np.where(ok, disc, 0.0))
        safe_a = np.where(a > _EPS, a, 1.0)
        best = np.full(dirs.shape[0], np.inf)
        for sign in (-1.0, 1.0):
            t = (-b + sign * root) / safe_a
            s = o_par + t * d_par
            good = ok & (s >= 0.0) & (s <= length) & (t > t_min)
            best = np.where(good & (t < best), t, best)
        # End caps: disc intersections on the two cap planes.
        for cap_s, _center in ((0.0, self.p0), (length, self.p1)):
            denom = np.where(np.abs(d_par) > _EPS, d_par, 1.0)
            t = (cap_s - o_par) / denom
            radial = o_perp + t[:, None] * d_perp
            good = (
                (np.abs(d_par) > _EPS)
                & (np.einsum("ij,ij->i", radial, radial) <= self.radius**2)
                & (t > t_min)
            )
            best = np.where(good & (t < best), t, best)
        return best

    def bounds(self):
        axis, _ = self._axis()
        pad = self.radius * np.sqrt(np.maximum(1.0 - axis * axis, 0.0))
        lo = np.minimum(self.p0, self.p1) - pad
        hi = np.maximum(self.p0, self.p1) + pad
        return lo, hi

    def sample_surface(self, rng, n):
        axis, length = self._axis()
        side_area = 2.0 * np.pi * self.radius * length
        cap_area = 2.0 * np.pi * self.radius**2
        u = rng.random(n) * (side_area + cap_area)
        ref = np.array([1.0, 0.0, 0.0])
        if abs(axis @ ref) > 0.9:
            ref = np.array([0.0, 1.0, 0.0])
        e1 = np.cross(axis, ref)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(axis, e1)
        ang = rng.random(n) * 2.0 * np.pi
        ring = np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2
        side = self.p0 + rng.random(n)[:, None] * length * axis + self.radius * ring
        r_cap = self.radius * np.sqrt(rng.random(n))
        on_p1 = rng.random(n) < 0.5
        cap_base = np.where(on_p1[:, None], self.p1, self.p0)
        cap = cap_base + r_cap[:, None] * ring
        return np.where((u < side_area)[:, None], side, cap)


@dataclass(frozen=True)
class Box(Primitive):
    """Axis-aligned box (oriented placement comes from the owning entity)."""

    center: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=float))

    def intersect(self, origin, dirs, t_min=1e-9):
        lo = self.center - self.half_extents
        hi = self.center + self.half_extents
        o = np.asarray(origin, dtype=float)
        safe_d = np.where(np.abs(dirs) > _EPS, dirs, 1.0)
        t_lo = (lo - o) / safe_d
        t_hi = (hi - o) / safe_d
        # Zero direction component: unconstrained inside the slab, a
        # guaranteed miss outside it.
        zero = np.abs(dirs) <= _EPS
        inside_slab = (o >= lo) & (o <= hi)
        t_lo = np.where(zero, np.where(inside_slab, -np.inf, np.inf), t_lo)
        t_hi = np.where(zero, np.where(inside_slab, np.inf, np.inf), t_hi)
        t_near = np.minimum(t_lo, t_hi).max(axis=1)
        t_far = np.maximum(t_lo, t_hi).min(axis=1)
        valid = t_near <= t_far
        return _first_root(t_near, t_far, valid, t_min)

    def bounds(self):
        return self.center - self.half_extents, self.center + self.half_extents

    def sample_surface(self, rng, n):
        hx, hy, hz = self.half_extents
        areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy]) * 4.0
        face = rng.choice(6, size=n, p=areas / areas.sum())
        a = rng.uniform(-1.0, 1.0, size=n)
        b = rng.uniform(-1.0, 1.0, size=n)
        pts = np.empty((n, 3))
        axis = face // 2
        sign = np.where(face % 2 == 0, -1.0, 1.0)
        for ax in range(3):
            mask = axis == ax
            others = [i for i in range(3) if i != ax]
            pts[mask, ax] = sign[mask] * self.half_extents[ax]
            pts[mask, others[0]] = a[mask] * self.half_extents[others[0]]
            pts[mask, others[1]] = b[mask] * self.half_extents[others[1]]
        return self.center + pts


@dataclass(frozen=True)
class Plane(Primitive):
    """Infinite two-sided plane; only used for static scene geometry."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        n = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "normal", n / np.linalg.norm(n))

    def intersect(self, origin, dirs, t_min=1e-9):
        denom = dirs @ self.normal
        num = (self.point - np.asarray(origin, dtype=float)) @ self.normal
        safe = np.where(np.abs(denom) > _EPS, denom, 1.0)
        t = num / safe
        return np.where((np.abs(denom) > _EPS) & (t > t_min), t, np.inf)

    def bounds(self):
        raise NotImplementedError("infinite plane has no finite bounds")

    def sample_surface(self, rng, n):
        raise NotImplementedError("infinite plane surface is not sampled")


@dataclass(frozen=True)
class TriangleMesh(Primitive):
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "faces", np.asarray(self.faces, dtype=np.int64))

    def intersect(self, origin, dirs, t_min=1e-9):
        # Moller-Trumbore per face, vectorised over rays.
        o = np.asarray(origin, dtype=float)
        best = np.full(dirs.shape[0], np.inf)
        for f in self.faces:
            v0, v1, v2 = self.vertices[f]
            e1 = v1 - v0
            e2 = v2 - v0
            h = np.cross(dirs, e2)
            a = h @ e1
            ok = np.abs(a) > _EPS
            inv_a = 1.0 / np.where(ok, a, 1.0)
            s = o - v0
            u = (h @ s) * inv_a
            q = np.cross(s, e1)
            v = (dirs @ q) * inv_a
            t = (q @ e2) * inv_a
            hit = ok & (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0) & (t > t_min)
            best = np.where(hit & (t < best), t, best)
        return best

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def sample_surface(self, rng, n):
        v = self.vertices
        tri = v[self.faces]
        areas = 0.5 * np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1
        )
        pick = rng.choice(len(self.faces), size=n, p=areas / areas.sum())
        r1 = np.sqrt(rng.random(n))[:, None]
        r2 = rng.random(n)[:, None]
        a, b, c = tri[pick, 0], tri[pick, 1], tri[pick, 2]
        return (1 - r1) * a + r1 * (1 - r2) * b + r1 * r2 * c


def union_bounds(prims: list[Primitive]) -> tuple[np.ndarray, np.ndarray]:
    """Combined axis-aligned bounds over a non-empty primitive list."""
    los, his = zip(*(p.bounds() for p in prims))
    return np.min(los, axis=0), np.max(his, axis=0)
