"""Planar polygon primitives, domain polygonalization and bounded Voronoi partitions.

Points are plain ``numpy`` arrays of shape ``(2,)``; point sets are ``(k, 2)``
arrays.  A :class:`Polygon` is a tuple of vertex rings evaluated with the
even-odd rule, so convex cells, cells with a hole bitten out and the
multi-arc cells of the circle domain all share one type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import shapely
from shapely.geometry import Polygon as _ShapelyPolygon

from . import _kernels as _k

GEOM_TOL = 1e-9
SEPARATION_MARGIN = 1e-12

DOMAIN_KINDS = ("disk", "annulus", "square", "circle", "polygon")


class GeometryError(ValueError):
    """Invalid geometric input (bad radii, duplicate generators, empty input)."""


def as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError(f"expected an array of planar points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("points must have finite coordinates")
    return pts


def _signed_area(ring: np.ndarray) -> float:
    if len(ring) < 3:
        return 0.0
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _dedupe_ring(ring: np.ndarray, tol: float = GEOM_TOL) -> np.ndarray:
    """Drop consecutive (cyclically) coincident vertices."""
    if len(ring) < 2:
        return ring
    keep = np.linalg.norm(ring - np.roll(ring, 1, axis=0), axis=1) > tol
    if not keep.any():
        return ring[:1]
    return ring[keep]


@dataclass(frozen=True, eq=False)
class Polygon:
    """A planar region bounded by one or more vertex rings.

    The first ring is the outer boundary in counterclockwise order.  Further
    rings are holes (clockwise) or extra components (counterclockwise); point
    membership uses the even-odd rule and the area is the signed sum, which is
    correct for both.  Rings with fewer than three vertices describe pinched
    cells (a point or a segment) and have zero area.
    """

    rings: tuple = ()

    @classmethod
    def from_vertices(cls, vertices) -> "Polygon":
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if len(vertices) == 0:
            return cls(())
        return cls((vertices,))

    @property
    def vertices(self) -> np.ndarray:
        if not self.rings:
            return np.empty((0, 2))
        return np.vstack(self.rings)

    @property
    def is_empty(self) -> bool:
        return not self.rings

    @cached_property
    def hull(self) -> np.ndarray:
        """Convex hull vertices, counterclockwise (cached; polygons are immutable)."""
        if not self.rings:
            return np.empty((0, 2))
        return _hull_array(self.vertices)

    @cached_property
    def separated(self) -> bool:
        """Whether the origin lies outside the convex hull by more than the margin."""
        if not self.rings:
            raise GeometryError("separation test on an empty polygon")
        return float(_k.convex_distance(self.hull, 0.0, 0.0)) > SEPARATION_MARGIN

    @property
    def area(self) -> float:
        return sum(_signed_area(r) for r in self.rings)

    def contains(self, pts, tol: float = GEOM_TOL) -> np.ndarray:
        """Boolean mask of points inside or within ``tol`` of the boundary."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        inside = np.zeros(len(pts), dtype=bool)
        near = np.zeros(len(pts), dtype=bool)
        for ring in self.rings:
            a = ring
            b = np.roll(ring, -1, axis=0)
            for (ax, ay), (bx, by) in zip(a, b):
                # even-odd crossing test
                cond = (ay > pts[:, 1]) != (by > pts[:, 1])
                with np.errstate(divide="ignore", invalid="ignore"):
                    xcross = ax + (pts[:, 1] - ay) * (bx - ax) / (by - ay)
                inside ^= cond & (pts[:, 0] < xcross)
                near |= _segment_distance(pts, np.array([ax, ay]), np.array([bx, by])) <= tol
        return inside | near

    def translated(self, offset) -> "Polygon":
        offset = np.asarray(offset, dtype=float)
        return Polygon(tuple(r + offset for r in self.rings))

    def scaled(self, s: float) -> "Polygon":
        return Polygon(tuple(r * s for r in self.rings))


def _segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip((pts - a) @ d / dd, 0.0, 1.0)
    return np.linalg.norm(pts - (a + t[:, None] * d), axis=1)


@dataclass(frozen=True)
class DomainSpec:
    """Quantizer domain: ``disk(M)``, ``annulus(m, M)``, ``square(M)`` = [-M, M]^2,
    ``circle(M)`` (the sphere of radius ``M`` in the plane, unit by default),
    or an explicit convex ``polygon``.
    """

    kind: str
    M: float = 1.0
    m: float = 0.0
    arc_resolution: int = 64
    vertices: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise GeometryError(f"unknown domain kind {self.kind!r}")
        if self.arc_resolution < 3:
            raise GeometryError("arc_resolution must be at least 3")
        if self.kind == "polygon":
            if self.vertices is None or len(self.vertices) < 3:
                raise GeometryError("polygon domain needs at least three vertices")
            return
        if not self.M > 0:
            raise GeometryError("domain radius M must be positive")
        if self.kind == "annulus" and not (0 < self.m < self.M):
            raise GeometryError("annulus requires 0 < m < M")

    @classmethod
    def disk(cls, M: float = 1.0, arc_resolution: int = 64) -> "DomainSpec":
        return cls("disk", M=M, arc_resolution=arc_resolution)

    @classmethod
    def annulus(cls, m: float, M: float, arc_resolution: int = 64) -> "DomainSpec":
        return cls("annulus", M=M, m=m, arc_resolution=arc_resolution)

    @classmethod
    def square(cls, M: float = 1.0) -> "DomainSpec":
        return cls("square", M=M)

    @classmethod
    def circle(cls, M: float = 1.0, arc_resolution: int = 64) -> "DomainSpec":
        return cls("circle", M=M, arc_resolution=arc_resolution)

    @classmethod
    def polygon(cls, vertices) -> "DomainSpec":
        hull = convex_hull(vertices).vertices
        return cls("polygon", M=float(np.max(np.linalg.norm(hull, axis=1))),
                   vertices=tuple(map(tuple, hull)))

    def scaled(self, s: float) -> "DomainSpec":
        if self.kind == "polygon":
            return DomainSpec.polygon(np.asarray(self.vertices) * s)
        return DomainSpec(self.kind, M=self.M * s, m=self.m * s,
                          arc_resolution=self.arc_resolution)

    def contains(self, pts, rtol: float = 1e-9) -> np.ndarray:
        """Membership in the true (curved) domain, with a relative slack."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        slack = rtol * self.M
        if self.kind == "disk":
            return r <= self.M + slack
        if self.kind == "annulus":
            return (r <= self.M + slack) & (r >= self.m - slack)
        if self.kind == "square":
            return np.max(np.abs(pts), axis=1) <= self.M + slack
        if self.kind == "circle":
            return np.abs(r - self.M) <= slack
        return Polygon.from_vertices(self.vertices).contains(pts, tol=slack)


def regular_polygon(radius: float, n: int, phase: float = 0.0) -> np.ndarray:
    theta = phase + 2.0 * math.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(theta), np.sin(theta)])


def _circumscribed(M: float, n: int) -> np.ndarray:
    # vertices on the bisecting angles so every edge is tangent to the circle
    return regular_polygon(M / math.cos(math.pi / n), n, phase=math.pi / n)


def polygonalize_domain(spec: DomainSpec) -> list:
    """Polygonal over-approximation of a domain.

    Disk and square give one polygon.  The annulus gives ``[outer, hole]``:
    the outer circle is circumscribed and the hole is inscribed, so the
    polygonal region contains the true annulus.  The circle gives one closed
    polyline of ``arc_resolution`` samples on the circle.
    """
    n = spec.arc_resolution
    if spec.kind == "square":
        M = spec.M
        return [Polygon.from_vertices([(-M, -M), (M, -M), (M, M), (-M, M)])]
    if spec.kind == "disk":
        return [Polygon.from_vertices(_circumscribed(spec.M, n))]
    if spec.kind == "annulus":
        return [Polygon.from_vertices(_circumscribed(spec.M, n)),
                Polygon.from_vertices(regular_polygon(spec.m, n))]
    if spec.kind == "circle":
        return [Polygon.from_vertices(regular_polygon(spec.M, n))]
    return [Polygon.from_vertices(np.asarray(spec.vertices, dtype=float))]


def domain_region(spec: DomainSpec) -> Polygon:
    """The polygonalized domain as one region (annulus hole as a clockwise ring)."""
    polys = polygonalize_domain(spec)
    if spec.kind == "annulus":
        return Polygon((polys[0].vertices, polys[1].vertices[::-1]))
    return polys[0]


def clip_halfplane(poly: Polygon, a, b: float, tol: float = 0.0) -> Polygon:
    """Return ``poly`` intersected with ``{x : a.x <= b}`` (Sutherland-Hodgman per ring).

    Vertices violating the constraint by at most ``tol`` are kept.
    """
    a0, a1 = (float(v) for v in np.asarray(a, dtype=float))
    rings = []
    for ring in poly.rings:
        clipped, _ = _k.clip_ring(np.ascontiguousarray(ring, dtype=float), a0, a1, float(b),
                                  float(tol))
        if len(clipped):
            rings.append(clipped)
    return Polygon(tuple(rings))


def convex_hull(points) -> Polygon:
    """Counterclockwise convex hull (monotone chain); collinear input gives a segment."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise GeometryError("convex hull of an empty point set")
    return Polygon.from_vertices(_hull_array(pts))


def _hull_array(pts) -> np.ndarray:
    pts = np.ascontiguousarray(np.asarray(pts, dtype=float).reshape(-1, 2))
    return _k.convex_hull(pts, GEOM_TOL)


def distance_to_hull(point, vertices) -> float:
    """Euclidean distance from ``point`` to the convex hull of ``vertices`` (0 inside)."""
    px, py = (float(v) for v in np.asarray(point, dtype=float))
    return float(_k.convex_distance(_hull_array(vertices), px, py))


def separated_from_origin(poly) -> bool:
    """True iff the origin lies outside the convex hull of the vertices by more than 1e-12."""
    verts = poly.vertices if isinstance(poly, Polygon) else np.asarray(poly, dtype=float)
    if len(verts) == 0:
        raise GeometryError("separation test on an empty polygon")
    return distance_to_hull(np.zeros(2), verts) > SEPARATION_MARGIN


@dataclass(frozen=True, eq=False)
class Partition:
    """Cells of a domain, one per generator index."""

    cells: tuple
    domain: DomainSpec

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    def __getitem__(self, i):
        return self.cells[i]

    @property
    def total_area(self) -> float:
        return sum(c.area for c in self.cells)

    def scaled(self, s: float) -> "Partition":
        return Partition(tuple(c.scaled(s) for c in self.cells), self.domain.scaled(s))


def check_distinct(points, metric: np.ndarray | None = None) -> None:
    pts = points if metric is None else points @ np.atleast_2d(metric).T
    if len(pts) < 2:
        return
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    np.fill_diagonal(dist, np.inf)
    if dist.min() <= GEOM_TOL:
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        raise GeometryError(f"generators {min(i, j)} and {max(i, j)} coincide")


def voronoi_cells(points, spec: DomainSpec, metric=None) -> Partition:
    """Voronoi partition of the polygonalized domain generated by ``points``.

    ``metric`` is an optional matrix ``L``; distances are then ``|L (x - q)|``
    and the cells are slabs/polygons of that seminorm.
    """
    pts = np.ascontiguousarray(as_points(points))
    L = None if metric is None else np.ascontiguousarray(np.atleast_2d(np.asarray(metric, dtype=float)))
    check_distinct(pts, L)
    if spec.kind == "circle":
        return _circle_cells(pts, spec)

    polys = polygonalize_domain(spec)
    outer = np.ascontiguousarray(polys[0].rings[0])
    hole = polys[1] if spec.kind == "annulus" else None
    cells = []
    notched = []
    for i in range(len(pts)):
        if L is None:
            ring = _k.voronoi_ring_euclid(outer, pts, i)
        else:
            ring = _k.voronoi_ring_metric(outer, pts, i, L)
        cell = Polygon.from_vertices(ring) if len(ring) else Polygon(())
        if len(ring):
            # clipped rings stay convex, so the hull is the ring without collinear points
            cell.__dict__["hull"] = _hull_array(ring)
        cells.append(cell)
        if hole is not None and len(ring) and _k.convex_distance(cell.hull, 0.0, 0.0) < spec.m:
            notched.append(i)
    if notched:
        for i, cell in zip(notched, _subtract_many([cells[i] for i in notched], hole)):
            cells[i] = cell
    return Partition(tuple(cells), spec)


def _subtract_many(cells: list, hole: Polygon) -> list:
    """``_subtract`` over many cells; the common single-notch case is done directly."""
    H = np.ascontiguousarray(hole.rings[0])
    out = [None] * len(cells)
    rest = []
    for k, c in enumerate(cells):
        ring = c.rings[0]
        status, res = _k.subtract_convex(ring, H, 1e-12)
        if status == 0:
            out[k] = Polygon((res,))
        elif status == 1:
            out[k] = c
        elif status == 2:
            out[k] = Polygon(())
        elif len(ring) >= 3:
            rest.append(k)
        else:
            out[k] = _subtract(c, hole)
    if rest:
        rings = [cells[k].rings[0] for k in rest]
        idx = np.repeat(np.arange(len(rings)), [len(r) for r in rings])
        geoms = shapely.polygons(shapely.linearrings(np.vstack(rings), indices=idx))
        diffs = shapely.difference(geoms, shapely.polygons(H))
        for k, poly in zip(rest, _from_shapely_many(diffs)):
            out[k] = poly
    return out


def _subtract(cell: Polygon, hole: Polygon) -> Polygon:
    """Cell minus the (convex) hole, flattened back to vertex rings."""
    ring = cell.rings[0]
    if len(ring) < 3:
        keep = ~_strictly_inside(ring, hole.rings[0])
        return Polygon.from_vertices(ring[keep]) if keep.any() else Polygon(())
    diff = _ShapelyPolygon(ring).difference(_ShapelyPolygon(hole.rings[0]))
    return _from_shapely(diff)


def _strictly_inside(pts: np.ndarray, convex_ring: np.ndarray) -> np.ndarray:
    inside = np.ones(len(pts), dtype=bool)
    for a, b in zip(convex_ring, np.roll(convex_ring, -1, axis=0)):
        cross = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        inside &= cross > GEOM_TOL * np.linalg.norm(b - a)
    return inside


def _from_shapely_many(geoms) -> list:
    """Vectorized conversion of shapely (multi)polygons to ``Polygon`` objects."""
    parts, owner = shapely.get_parts(geoms, return_index=True)
    keep = shapely.get_type_id(parts) == 3
    parts, owner = parts[keep], owner[keep]
    areas = shapely.area(parts)
    keep = areas > 0
    parts, owner, areas = parts[keep], owner[keep], areas[keep]
    rings, ring_part = shapely.get_rings(parts, return_index=True)
    coords, ring_of = shapely.get_coordinates(rings, return_index=True)
    bounds = np.searchsorted(ring_of, np.arange(len(rings) + 1))
    first = np.ones(len(rings), dtype=bool)
    first[1:] = ring_part[1:] != ring_part[:-1]
    by_part = [[] for _ in range(len(parts))]
    for r in range(len(rings)):
        ring = coords[bounds[r]:bounds[r + 1] - 1]
        # exteriors counterclockwise, holes clockwise
        if (_signed_area(ring) > 0) != bool(first[r]):
            ring = ring[::-1]
        by_part[ring_part[r]].append(_dedupe_ring(ring, 1e-14))
    out = [[] for _ in range(len(geoms))]
    for k in np.argsort(-areas, kind="stable").tolist():
        out[owner[k]].extend(by_part[k])
    return [Polygon(tuple(r)) for r in out]


def _from_shapely(geom) -> Polygon:
    return _from_shapely_many(np.array([geom], dtype=object))[0]


def intersect(poly: Polygon, other: Polygon) -> Polygon:
    """Intersection of two polygonal regions (used to restrict cells to a region)."""
    if poly.is_empty or other.is_empty:
        return Polygon(())
    return _from_shapely(_to_shapely(poly).intersection(_to_shapely(other)))


def _to_shapely(poly: Polygon):
    outer = [r for r in poly.rings if _signed_area(r) > 0]
    holes = [r for r in poly.rings if _signed_area(r) < 0]
    if len(outer) == 1:
        return _ShapelyPolygon(outer[0], holes)
    geom = shapely.union_all([_ShapelyPolygon(r) for r in outer])
    for h in holes:
        geom = geom.difference(_ShapelyPolygon(h))
    return geom


def circle_breakpoints(points: np.ndarray, radius: float, active_only: bool = False) -> np.ndarray:
    """Angles where the circle meets the bisector of some pair of generators.

    With ``active_only`` only the crossings that are real cell boundaries (the
    pair is nearest there) are returned.
    """
    pts = as_points(points)
    n = len(pts)
    if n < 2:
        return np.empty(0)
    i, j = np.triu_indices(n, 1)
    a = pts[j] - pts[i]
    b = 0.5 * (np.sum(pts[j] ** 2, axis=1) - np.sum(pts[i] ** 2, axis=1))
    na = np.hypot(a[:, 0], a[:, 1])
    ok = na > 0.0
    c = np.zeros_like(na)
    c[ok] = b[ok] / (na[ok] * radius)
    ok &= np.abs(c) <= 1.0
    phi = np.arctan2(a[ok, 1], a[ok, 0])
    delta = np.arccos(np.clip(c[ok], -1.0, 1.0))
    angles = np.mod(np.concatenate([phi + delta, phi - delta]), 2.0 * math.pi)
    if active_only and len(angles):
        owner = np.concatenate([i[ok], i[ok]])
        x = radius * np.column_stack([np.cos(angles), np.sin(angles)])
        dist = np.linalg.norm(x[:, None, :] - pts[None, :, :], axis=2)
        mine = dist[np.arange(len(angles)), owner]
        angles = angles[mine <= dist.min(axis=1) + 1e-12 * max(1.0, radius)]
    return angles


def _circle_cells(pts: np.ndarray, spec: DomainSpec) -> Partition:
    R = spec.M
    grid = 2.0 * math.pi * np.arange(spec.arc_resolution) / spec.arc_resolution
    theta = np.unique(np.concatenate([grid, circle_breakpoints(pts, R, active_only=True)]))
    samples = R * np.column_stack([np.cos(theta), np.sin(theta)])
    dist = np.linalg.norm(samples[:, None, :] - pts[None, :, :], axis=2)
    best = dist.min(axis=1, keepdims=True)
    member = dist <= best + 1e-12 * max(1.0, R)
    cells = []
    for i in range(len(pts)):
        cell = Polygon.from_vertices(samples[member[:, i]])
        # samples ascend in angle, which is already a ccw convex ring
        cell.__dict__["hull"] = _k.dedupe_ring(cell.rings[0]) if cell.rings else np.empty((0, 2))
        cells.append(cell)
    return Partition(tuple(cells), spec)
