"""One-center solvers: smallest enclosing circle, spherical center and the
radially weighted center of a polygon.

Every cost handled here has convex sublevel sets in ``x`` (disks, or
elliptic cylinders for a linear map), so the worst case over a cell is
attained at a vertex of its convex hull and the solvers only look at the
hull vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as _k
from .geometry import (
    GEOM_TOL,
    GeometryError,
    Polygon,
    _hull_array,
    separated_from_origin,
)

ENCLOSE_TOL = 1e-9


class SeparationError(ValueError):
    """A cell is not separated from the origin, so its radially weighted cost is >= 1."""


@dataclass(frozen=True)
class Circle:
    center: np.ndarray
    radius: float

    def contains(self, pts, tol: float = ENCLOSE_TOL) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius + tol


@dataclass(frozen=True)
class CenterResult:
    """Weighted center ``q_star`` of a cell with its optimal cost ``value``."""

    q_star: np.ndarray
    value: float
    witness: Circle | None = None


@dataclass(frozen=True, eq=False)
class WeightScheme:
    """Cost flavor: ``uniform`` (|q - x|), ``radial_inverse`` (|q - x| / |x|)
    or ``linear_map`` (|L (q - x)|)."""

    kind: str = "uniform"
    L: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "radial_inverse", "linear_map"):
            raise ValueError(f"unknown weight scheme {self.kind!r}")
        if self.kind == "linear_map":
            if self.L is None:
                raise ValueError("linear_map scheme needs a matrix L")
            L = np.atleast_2d(np.asarray(self.L, dtype=float))
            if L.shape[1] != 2:
                raise ValueError("linear map must act on planar points")
            object.__setattr__(self, "L", L)

    @classmethod
    def uniform(cls) -> "WeightScheme":
        return cls("uniform")

    @classmethod
    def radial_inverse(cls) -> "WeightScheme":
        return cls("radial_inverse")

    @classmethod
    def linear_map(cls, L) -> "WeightScheme":
        return cls("linear_map", L)

    @property
    def metric(self):
        """Matrix defining the Voronoi metric, or None for the Euclidean one."""
        return self.L if self.kind == "linear_map" else None

    def __eq__(self, other):
        if not isinstance(other, WeightScheme) or self.kind != other.kind:
            return False
        if self.kind != "linear_map":
            return True
        return self.L.shape == other.L.shape and bool(np.all(self.L == other.L))

    __hash__ = None


def _vertex_set(cell) -> np.ndarray:
    verts = cell.hull if isinstance(cell, Polygon) else np.asarray(cell, dtype=float)
    verts = verts.reshape(-1, 2)
    if len(verts) == 0:
        raise GeometryError("empty cell")
    return verts


def _scale_tol(P: np.ndarray) -> float:
    """Enclosure slack for exact comparisons, relative to the size of the point set."""
    return 1e-12 * max(1.0, float(np.max(np.abs(P))))


@lru_cache(maxsize=512)
def _shuffle(n: int) -> np.ndarray:
    return np.random.default_rng(0).permutation(n)


def min_enclosing_circle(points) -> Circle:
    """Smallest circle containing every point (incremental Welzl-style algorithm on the hull)."""
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(P) == 0:
        raise GeometryError("smallest enclosing circle of an empty set")
    hull = _hull_array(P)
    if len(hull) > 3:
        # deterministic shuffle keeps the expected running time linear
        hull = hull[_shuffle(len(hull))]
    cx, cy, r = _k.min_enclosing_circle(np.ascontiguousarray(hull), _scale_tol(hull))
    return Circle(np.array([cx, cy]), float(r))


def eval_cell_cost(q, cell, scheme: WeightScheme) -> float:
    """Worst-case cost of serving ``cell`` from ``q``.

    Uniform and linear-map costs, and radial costs below 1, peak at a hull
    vertex.  Radial costs of 1 or more can peak inside an edge, so the
    boundary is then searched exactly.
    """
    V = _vertex_set(cell)
    q = np.asarray(q, dtype=float)
    if scheme.kind == "uniform":
        return float(_k.max_distance(V, float(q[0]), float(q[1])))
    if scheme.kind == "linear_map":
        return float(np.max(np.linalg.norm((V - q) @ scheme.L.T, axis=1)))
    sep = cell.separated if isinstance(cell, Polygon) else separated_from_origin(V)
    if not sep:
        raise SeparationError("radially weighted cost needs a cell separated from the origin")
    qx, qy = float(q[0]), float(q[1])
    best = float(_k.max_radial_ratio(V, qx, qy))
    if best < 1.0:
        # the sublevel set at this value is a disk holding every vertex, so it holds the cell
        return best
    # at levels >= 1 the sublevel sets are no longer convex; scan the boundary edges
    rings = cell.rings if isinstance(cell, Polygon) else (_hull_array(V),)
    for ring in rings:
        best = max(best, float(_k.max_radial_ratio_edges(np.ascontiguousarray(ring), qx, qy)))
    return best


def two_vertex_candidate(v1, v2) -> Circle:
    """Circle through ``v1`` and ``v2`` minimizing radius / |center|."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if np.linalg.norm(v1 - v2) <= GEOM_TOL:
        raise GeometryError("two-vertex candidate needs distinct vertices")
    if np.linalg.norm(v1) == 0.0 or np.linalg.norm(v2) == 0.0:
        raise GeometryError("two-vertex candidate needs nonzero vertices")
    cx, cy, r = _k.pair_candidate(v1[0], v1[1], v2[0], v2[1])
    return Circle(np.array([cx, cy]), float(r))


def radially_weighted_center(cell) -> CenterResult:
    """Minimize max |q - x| / |x| over the cell by enumerating active vertex sets.

    The optimal circle (c, r) minimizing r/|c| among circles enclosing the
    vertices touches at least two vertices; it is either the best circle
    through a pair or the circumcircle of a triple.  The weighted center is
    then ``(1 - gamma^2) c`` with ``gamma = r / |c|``.
    """
    V = _vertex_set(cell)
    sep = cell.separated if isinstance(cell, Polygon) else separated_from_origin(V)
    if not sep:
        raise SeparationError("cell is not separated from the origin; optimal cost would be >= 1")
    P = V if isinstance(cell, Polygon) else _hull_array(V)
    if len(P) == 1:
        return CenterResult(P[0].copy(), 0.0, Circle(P[0].copy(), 0.0))

    found, g, r, cx, cy = _k.radial_center(np.ascontiguousarray(P), _scale_tol(P))
    if not found:
        raise GeometryError("no enclosing candidate circle; degenerate cell")
    c = np.array([cx, cy])
    return CenterResult((1.0 - g * g) * c, float(g), Circle(c.copy(), float(r)))


def spherical_center(cell_samples, radius: float = 1.0) -> CenterResult:
    """Center of an arc cell: the center of the smallest circle enclosing its samples.

    The returned point may lie strictly inside the circle.
    """
    S = _vertex_set(cell_samples)
    if np.any(np.abs(np.linalg.norm(S, axis=1) - radius) > GEOM_TOL * max(1.0, radius)):
        raise GeometryError("spherical cell samples must lie on the circle")
    circ = min_enclosing_circle(S)
    return CenterResult(circ.center.copy(), circ.radius, circ)


def linear_map_center(cell, L) -> CenterResult:
    """Minimize max |L (q - x)| over the cell.

    The vertices are mapped through ``L`` and the smallest enclosing ball is
    found in the image (an interval when ``L`` has rank one).  The returned
    point is a preimage of that center lying in the hull of the cell.
    """
    V = _vertex_set(cell)
    L = np.atleast_2d(np.asarray(L, dtype=float))
    Z = V @ L.T
    if L.shape[0] == 1 or np.linalg.matrix_rank(L) == 1:
        # rank one: collapse to the dominant row direction
        _, sv, vt = np.linalg.svd(L)
        ell = sv[0] * vt[0]
        z = V @ ell
        lo, hi = float(z.min()), float(z.max())
        target = 0.5 * (lo + hi)
        q = _preimage_in_hull(V, ell, target)
        return CenterResult(q, 0.5 * (hi - lo), None)
    circ = min_enclosing_circle(Z)
    q = np.linalg.lstsq(L, circ.center, rcond=None)[0]
    return CenterResult(q, circ.radius, None)


def _preimage_in_hull(V: np.ndarray, ell: np.ndarray, target: float) -> np.ndarray:
    """Midpoint of the chord ``{x in co(V) : ell.x = target}``."""
    H = _hull_array(V)
    z = H @ ell
    if len(H) == 1:
        return H[0].copy()
    pts = list(H[np.abs(z - target) <= 1e-12 * max(1.0, abs(target))])
    for a, b, za, zb in zip(H, np.roll(H, -1, axis=0), z, np.roll(z, -1)):
        if (za - target) * (zb - target) < 0.0:
            t = (target - za) / (zb - za)
            pts.append(a + t * (b - a))
    pts = np.array(pts)
    if len(pts) == 0:
        return H[np.argmin(np.abs(z - target))].copy()
    d = ell / (ell @ ell)
    perp = np.array([-ell[1], ell[0]])
    s = pts @ perp
    p_lo, p_hi = pts[np.argmin(s)], pts[np.argmax(s)]
    q = 0.5 * (p_lo + p_hi)
    # remove rounding drift off the level line
    return q + (target - q @ ell) * d


def weighted_center(cell, scheme: WeightScheme) -> CenterResult:
    if scheme.kind == "uniform":
        circ = min_enclosing_circle(_vertex_set(cell))
        return CenterResult(circ.center.copy(), circ.radius, circ)
    if scheme.kind == "radial_inverse":
        return radially_weighted_center(cell)
    return linear_map_center(cell, scheme.L)
