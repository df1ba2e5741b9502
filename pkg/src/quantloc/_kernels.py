"""Compiled inner loops for the planar geometry (numba).

Every function works on float64 arrays of shape (k, 2) and is called from the
public wrappers in :mod:`quantloc.geometry` and :mod:`quantloc.centers`.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# rings closer than this are treated as one vertex
DEDUPE_TOL = 1e-14
# triples whose circumcircle determinant is below this are collinear
COLLINEAR_DET = 1e-12


@njit(cache=True)
def dedupe_ring(ring):
    n = ring.shape[0]
    if n < 2:
        return ring.copy()
    out = np.empty_like(ring)
    m = 0
    for k in range(n):
        if m == 0 or abs(ring[k, 0] - out[m - 1, 0]) > DEDUPE_TOL \
                or abs(ring[k, 1] - out[m - 1, 1]) > DEDUPE_TOL:
            out[m] = ring[k]
            m += 1
    while m > 1 and abs(out[0, 0] - out[m - 1, 0]) <= DEDUPE_TOL \
            and abs(out[0, 1] - out[m - 1, 1]) <= DEDUPE_TOL:
        m -= 1
    return out[:m].copy()


@njit(cache=True)
def clip_ring(ring, a0, a1, b, tol):
    """Sutherland-Hodgman clip of one ring by ``a0 x + a1 y <= b`` (slack ``tol``).

    Returns ``(ring, changed)``.
    """
    n = ring.shape[0]
    lim = tol * max(1.0, math.hypot(a0, a1))
    d = np.empty(n)
    dmax = -np.inf
    dmin = np.inf
    for k in range(n):
        d[k] = a0 * ring[k, 0] + a1 * ring[k, 1] - b
        dmax = max(dmax, d[k])
        dmin = min(dmin, d[k])
    if dmax <= lim:
        return ring, False
    if n == 1 or dmin > lim:
        return np.empty((0, 2)), True
    out = np.empty((2 * n, 2))
    m = 0
    for k in range(n):
        j = (k + 1) % n
        kin = d[k] <= lim
        if kin:
            out[m] = ring[k]
            m += 1
        if kin != (d[j] <= lim):
            t = d[k] / (d[k] - d[j])
            out[m, 0] = ring[k, 0] + t * (ring[j, 0] - ring[k, 0])
            out[m, 1] = ring[k, 1] + t * (ring[j, 1] - ring[k, 1])
            m += 1
    return dedupe_ring(out[:m]), True


@njit(cache=True)
def _max_reach(ring, qx, qy):
    r = 0.0
    for k in range(ring.shape[0]):
        r = max(r, math.hypot(ring[k, 0] - qx, ring[k, 1] - qy))
    return r


@njit(cache=True)
def voronoi_ring_euclid(outer, pts, i):
    """Ring of the Euclidean Voronoi cell of ``pts[i]`` inside the convex-or-not ring ``outer``."""
    n = pts.shape[0]
    qx, qy = pts[i, 0], pts[i, 1]
    dist = np.empty(n)
    for j in range(n):
        dist[j] = math.hypot(pts[j, 0] - qx, pts[j, 1] - qy)
    order = np.argsort(dist, kind="mergesort")
    ring = outer
    reach = _max_reach(ring, qx, qy)
    for k in range(n):
        j = order[k]
        if j == i:
            continue
        # a farther generator cannot cut the current cell
        if dist[j] > 2.0 * reach:
            break
        a0 = pts[j, 0] - qx
        a1 = pts[j, 1] - qy
        b = 0.5 * (pts[j, 0] ** 2 + pts[j, 1] ** 2 - qx * qx - qy * qy)
        ring, changed = clip_ring(ring, a0, a1, b, 0.0)
        if ring.shape[0] == 0:
            break
        if changed:
            reach = _max_reach(ring, qx, qy)
    return ring


@njit(cache=True)
def voronoi_ring_metric(outer, pts, i, L):
    """Ring of the cell of ``pts[i]`` for the seminorm ``|L x|`` (all neighbours clipped)."""
    n = pts.shape[0]
    m = L.shape[0]
    img = np.zeros((n, m))
    for j in range(n):
        for r in range(m):
            img[j, r] = L[r, 0] * pts[j, 0] + L[r, 1] * pts[j, 1]
    ring = outer
    for j in range(n):
        if j == i:
            continue
        a0 = 0.0
        a1 = 0.0
        b = 0.0
        for r in range(m):
            diff = img[j, r] - img[i, r]
            a0 += 2.0 * L[r, 0] * diff
            a1 += 2.0 * L[r, 1] * diff
            b += img[j, r] ** 2 - img[i, r] ** 2
        ring, changed = clip_ring(ring, a0, a1, b, 0.0)
        if ring.shape[0] == 0:
            break
    return ring


@njit(cache=True)
def _cross(o0, o1, a0, a1, b0, b1):
    return (a0 - o0) * (b1 - o1) - (a1 - o1) * (b0 - o0)


@njit(cache=True)
def convex_hull(pts, coincide_tol):
    """Counterclockwise hull by monotone chain; collinear points are dropped."""
    n = pts.shape[0]
    if n == 0:
        return np.empty((0, 2))
    order = np.argsort(pts[:, 1], kind="mergesort")
    order = order[np.argsort(pts[order, 0], kind="mergesort")]
    P = np.empty((n, 2))
    m = 0
    for k in range(n):
        p = pts[order[k]]
        if m == 0 or p[0] != P[m - 1, 0] or p[1] != P[m - 1, 1]:
            P[m] = p
            m += 1
    scale = 0.0
    for k in range(m):
        scale = max(scale, abs(P[k, 0]), abs(P[k, 1]))
    if scale == 0.0:
        scale = 1.0
    eps = 1e-12 * scale * scale
    if m <= 2:
        if m == 2 and math.hypot(P[0, 0] - P[1, 0], P[0, 1] - P[1, 1]) <= coincide_tol:
            return P[:1].copy()
        return P[:m].copy()
    H = np.empty((2 * m, 2))
    h = 0
    for k in range(m):
        while h >= 2 and _cross(H[h - 2, 0], H[h - 2, 1], H[h - 1, 0], H[h - 1, 1],
                                P[k, 0], P[k, 1]) <= eps:
            h -= 1
        H[h] = P[k]
        h += 1
    lower = h + 1
    for k in range(m - 2, -1, -1):
        while h >= lower and _cross(H[h - 2, 0], H[h - 2, 1], H[h - 1, 0], H[h - 1, 1],
                                    P[k, 0], P[k, 1]) <= eps:
            h -= 1
        H[h] = P[k]
        h += 1
    h -= 1
    if h == 2 and math.hypot(H[0, 0] - H[1, 0], H[0, 1] - H[1, 1]) <= coincide_tol:
        return H[:1].copy()
    return H[:h].copy()


@njit(cache=True)
def _segment_distance(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    dd = dx * dx + dy * dy
    t = 0.0
    if dd > 0.0:
        t = min(1.0, max(0.0, ((px - ax) * dx + (py - ay) * dy) / dd))
    return math.hypot(px - ax - t * dx, py - ay - t * dy)


@njit(cache=True)
def convex_distance(H, px, py):
    """Distance from (px, py) to the ccw convex ring ``H`` (0 inside)."""
    n = H.shape[0]
    if n == 1:
        return math.hypot(H[0, 0] - px, H[0, 1] - py)
    inside = n >= 3
    best = np.inf
    for k in range(n):
        j = (k + 1) % n
        best = min(best, _segment_distance(px, py, H[k, 0], H[k, 1], H[j, 0], H[j, 1]))
        if _cross(H[k, 0], H[k, 1], H[j, 0], H[j, 1], px, py) < 0.0:
            inside = False
    return 0.0 if inside else best


@njit(cache=True)
def _circle2(ax, ay, bx, by):
    cx = 0.5 * (ax + bx)
    cy = 0.5 * (ay + by)
    return cx, cy, math.hypot(ax - cx, ay - cy)


@njit(cache=True)
def _circle3(ax, ay, bx, by, cx, cy):
    ux, uy = bx - ax, by - ay
    vx, vy = cx - ax, cy - ay
    d = 2.0 * (ux * vy - uy * vx)
    if abs(d) <= 1e-14 * (ux * ux + uy * uy + vx * vx + vy * vy):
        # collinear: the farthest pair spans the circle
        c1 = _circle2(ax, ay, bx, by)
        c2 = _circle2(ax, ay, cx, cy)
        c3 = _circle2(bx, by, cx, cy)
        best = c1
        if c2[2] > best[2]:
            best = c2
        if c3[2] > best[2]:
            best = c3
        return best
    u2 = ux * ux + uy * uy
    v2 = vx * vx + vy * vy
    ox = (vy * u2 - uy * v2) / d
    oy = (ux * v2 - vx * u2) / d
    return ax + ox, ay + oy, math.hypot(ox, oy)


@njit(cache=True)
def min_enclosing_circle(P, tol):
    """Incremental smallest enclosing circle; expected linear time on shuffled input."""
    n = P.shape[0]
    cx, cy, r = P[0, 0], P[0, 1], 0.0
    for i in range(1, n):
        if math.hypot(P[i, 0] - cx, P[i, 1] - cy) <= r + tol:
            continue
        cx, cy, r = P[i, 0], P[i, 1], 0.0
        for j in range(i):
            if math.hypot(P[j, 0] - cx, P[j, 1] - cy) <= r + tol:
                continue
            cx, cy, r = _circle2(P[i, 0], P[i, 1], P[j, 0], P[j, 1])
            for k in range(j):
                if math.hypot(P[k, 0] - cx, P[k, 1] - cy) > r + tol:
                    cx, cy, r = _circle3(P[i, 0], P[i, 1], P[j, 0], P[j, 1], P[k, 0], P[k, 1])
    # report the true farthest distance so the circle always encloses
    r = 0.0
    for k in range(n):
        r = max(r, math.hypot(P[k, 0] - cx, P[k, 1] - cy))
    return cx, cy, r


@njit(cache=True)
def pair_candidate(x1, y1, x2, y2):
    """Circle through two points minimizing radius / |center|.

    In the similarity frame putting the points at (+-1, 0) and the origin at
    (x0, y0), y0 >= 0, the best center is (0, ybar) with ybar the negative
    root of -y0 t^2 + (x0^2 + y0^2 - 1) t + y0 = 0.
    """
    mx = 0.5 * (x1 + x2)
    my = 0.5 * (y1 + y2)
    half = 0.5 * math.hypot(x1 - x2, y1 - y2)
    ux = (x1 - mx) / half
    uy = (y1 - my) / half
    nx, ny = -uy, ux
    ox = -mx / half
    oy = -my / half
    x0 = ox * ux + oy * uy
    y0 = ox * nx + oy * ny
    if y0 < 0.0:
        nx, ny, y0 = -nx, -ny, -y0
    s = x0 * x0 + y0 * y0 - 1.0
    root = math.sqrt(s * s + 4.0 * y0 * y0)
    ybar = 0.0
    if y0 > 0.0:
        if s >= 0.0:
            ybar = -2.0 * y0 / (s + root)
        else:
            ybar = (s - root) / (2.0 * y0)
    if not math.isfinite(ybar):
        ybar = 0.0
    cx = mx + half * ybar * nx
    cy = my + half * ybar * ny
    return cx, cy, math.hypot(cx - x1, cy - y1)


@njit(cache=True)
def _encloses(P, cx, cy, r, tol):
    for k in range(P.shape[0]):
        if math.hypot(P[k, 0] - cx, P[k, 1] - cy) > r + tol:
            return False
    return True


@njit(cache=True)
def _radial_candidates(P, tol):
    """All enclosing pair/triple candidate circles with |c| > r as rows (gamma, r, cx, cy)."""
    n = P.shape[0]
    cap = n * (n - 1) // 2 + n * (n - 1) * (n - 2) // 6
    out = np.empty((max(cap, 1), 4))
    m = 0
    for i in range(n):
        for j in range(i + 1, n):
            cx, cy, r = pair_candidate(P[i, 0], P[i, 1], P[j, 0], P[j, 1])
            norm = math.hypot(cx, cy)
            if norm > r and _encloses(P, cx, cy, r, tol):
                out[m, 0] = r / norm
                out[m, 1] = r
                out[m, 2] = cx
                out[m, 3] = cy
                m += 1
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                ax, ay = P[i, 0], P[i, 1]
                ux, uy = P[j, 0] - ax, P[j, 1] - ay
                vx, vy = P[k, 0] - ax, P[k, 1] - ay
                d = 2.0 * (ux * vy - uy * vx)
                if abs(d) <= COLLINEAR_DET:
                    continue
                u2 = ux * ux + uy * uy
                v2 = vx * vx + vy * vy
                ox = (vy * u2 - uy * v2) / d
                oy = (ux * v2 - vx * u2) / d
                cx, cy, r = ax + ox, ay + oy, math.hypot(ox, oy)
                norm = math.hypot(cx, cy)
                if norm > r and _encloses(P, cx, cy, r, tol):
                    out[m, 0] = r / norm
                    out[m, 1] = r
                    out[m, 2] = cx
                    out[m, 3] = cy
                    m += 1
    return out[:m]


@njit(cache=True)
def radial_center(P, tol):
    """Best enclosing circle by r/|c| with deterministic tie-breaking.

    Returns ``(found, gamma, r, cx, cy)``; ties in gamma (1e-12) go to the
    smaller radius, then the lexicographically smaller center.
    """
    C = _radial_candidates(P, tol)
    if C.shape[0] == 0:
        return False, 0.0, 0.0, 0.0, 0.0
    best = C[:, 0].min()
    pick = -1
    for k in range(C.shape[0]):
        if C[k, 0] > best + 1e-12:
            continue
        if pick < 0:
            pick = k
            continue
        if (C[k, 1], C[k, 2], C[k, 3]) < (C[pick, 1], C[pick, 2], C[pick, 3]):
            pick = k
    return True, C[pick, 0], C[pick, 1], C[pick, 2], C[pick, 3]


@njit(cache=True)
def max_distance(V, qx, qy):
    best = 0.0
    for k in range(V.shape[0]):
        best = max(best, math.hypot(V[k, 0] - qx, V[k, 1] - qy))
    return best


@njit(cache=True)
def max_radial_ratio(V, qx, qy):
    best = 0.0
    for k in range(V.shape[0]):
        best = max(best, math.hypot(V[k, 0] - qx, V[k, 1] - qy) / math.hypot(V[k, 0], V[k, 1]))
    return best


@njit(cache=True)
def max_radial_ratio_edges(R, qx, qy):
    """Largest ``|x - q| / |x|`` over the closed polyline ``R`` (edge interiors included).

    On an edge ``x = a + t d`` the squared ratio is a quotient of quadratics
    in ``t``; its stationary points solve a quadratic.
    """
    n = R.shape[0]
    best = 0.0
    for i in range(n):
        ax, ay = R[i, 0], R[i, 1]
        bx, by = R[(i + 1) % n, 0], R[(i + 1) % n, 1]
        dx, dy = bx - ax, by - ay
        ux, uy = ax - qx, ay - qy
        A = dx * dx + dy * dy
        best = max(best, math.hypot(ux, uy) / math.hypot(ax, ay))
        if A == 0.0 or n < 2:
            continue
        B = 2.0 * (ux * dx + uy * dy)
        C = ux * ux + uy * uy
        E = 2.0 * (ax * dx + ay * dy)
        F = ax * ax + ay * ay
        # (2At + B)(At^2 + Et + F) - (At^2 + Bt + C)(2At + E) = 0
        c2 = A * E - B * A
        c1 = 2.0 * (A * F - C * A)
        c0 = B * F - C * E
        roots = np.empty(2)
        nr = 0
        if c2 == 0.0:
            if c1 != 0.0:
                roots[0] = -c0 / c1
                nr = 1
        else:
            disc = c1 * c1 - 4.0 * c2 * c0
            if disc >= 0.0:
                sq = math.sqrt(disc)
                roots[0] = (-c1 + sq) / (2.0 * c2)
                roots[1] = (-c1 - sq) / (2.0 * c2)
                nr = 2
        for k in range(nr):
            t = roots[k]
            if 0.0 < t < 1.0:
                den = (A * t + E) * t + F
                if den > 0.0:
                    best = max(best, math.sqrt(((A * t + B) * t + C) / den))
    return best


@njit(cache=True)
def _segment_in_convex(H, px, py, qx, qy):
    """Parameter interval of p + t (q - p) inside the open convex ring ``H``.

    Returns ``(t_enter, t_exit, edge_enter, edge_exit)`` with t unclamped;
    an empty interval has ``t_enter >= t_exit``.
    """
    n = H.shape[0]
    t0 = -np.inf
    t1 = np.inf
    e0 = -1
    e1 = -1
    for k in range(n):
        j = (k + 1) % n
        fp = _cross(H[k, 0], H[k, 1], H[j, 0], H[j, 1], px, py)
        fq = _cross(H[k, 0], H[k, 1], H[j, 0], H[j, 1], qx, qy)
        slope = fq - fp
        if slope == 0.0:
            if fp <= 0.0:
                return 1.0, 0.0, -1, -1
            continue
        t = -fp / slope
        if slope > 0.0:
            if t > t0:
                t0, e0 = t, k
        elif t < t1:
            t1, e1 = t, k
    return t0, t1, e0, e1


@njit(cache=True)
def _edge_param(H, e, x, y):
    j = (e + 1) % H.shape[0]
    dx = H[j, 0] - H[e, 0]
    dy = H[j, 1] - H[e, 1]
    return ((x - H[e, 0]) * dx + (y - H[e, 1]) * dy) / (dx * dx + dy * dy)


@njit(cache=True)
def subtract_convex(C, H, eps):
    """Ring of convex ``C`` minus convex ``H`` when the boundary of ``C`` dips into ``H`` once.

    Returns ``(status, ring)``: 0 a single ring, 1 ``C`` untouched, 2 empty,
    -1 for anything else (several dips, ``H`` inside ``C``, touching
    configurations), which the caller handles with a general polygon library.
    """
    n = C.shape[0]
    m = H.shape[0]
    if n < 3 or m < 3:
        return -1, C
    start = -1
    n_inside = 0
    for k in range(n):
        # inside iff every edge function is positive
        depth = np.inf
        for e in range(m):
            j = (e + 1) % m
            depth = min(depth, _cross(H[e, 0], H[e, 1], H[j, 0], H[j, 1], C[k, 0], C[k, 1]))
        if abs(depth) <= eps:
            return -1, C
        if depth > 0.0:
            n_inside += 1
        elif start < 0:
            start = k
    if n_inside == n:
        return 2, C[:0].copy()
    # one dip writes at most n + m + 2 vertices
    out = np.empty((n + m + 4, 2))
    w = 0
    dips = 0
    inside = False
    e_in = -1
    s_in = 0.0
    for step in range(n):
        k = (start + step) % n
        j = (k + 1) % n
        px, py, qx, qy = C[k, 0], C[k, 1], C[j, 0], C[j, 1]
        if not inside:
            out[w, 0] = px
            out[w, 1] = py
            w += 1
        t0, t1, f0, f1 = _segment_in_convex(H, px, py, qx, qy)
        lo = max(t0, 0.0)
        hi = min(t1, 1.0)
        if hi - lo <= eps:
            if hi - lo > -eps:
                return -1, C
            continue
        if t0 > 0.0:
            if abs(t0) <= eps or abs(t0 - 1.0) <= eps or inside or dips > 0:
                return -1, C
            x = px + t0 * (qx - px)
            y = py + t0 * (qy - py)
            out[w, 0] = x
            out[w, 1] = y
            w += 1
            inside = True
            e_in = f0
            s_in = _edge_param(H, f0, x, y)
        if t1 < 1.0:
            if abs(t1) <= eps or abs(t1 - 1.0) <= eps or not inside:
                return -1, C
            x = px + t1 * (qx - px)
            y = py + t1 * (qy - py)
            s_out = _edge_param(H, f1, x, y)
            count = (e_in - f1) % m
            if count == 0 and s_out > s_in:
                count = m
            # clockwise along the hole from the entry edge to the exit edge
            for r in range(count):
                v = (e_in - r) % m
                out[w] = H[v]
                w += 1
            out[w, 0] = x
            out[w, 1] = y
            w += 1
            inside = False
            dips += 1
    if dips == 0:
        # untouched unless the whole hole sits inside C
        if convex_distance(C, H[0, 0], H[0, 1]) == 0.0:
            return -1, C
        return 1, C
    if inside:
        return -1, C
    return 0, dedupe_ring(out[:w])
