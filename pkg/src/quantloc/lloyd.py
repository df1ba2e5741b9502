"""Weighted multicenter cost and the Lloyd descent (Voronoi step + weighted-center step)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .centers import (
    CenterResult,
    SeparationError,
    WeightScheme,
    eval_cell_cost,
    spherical_center,
    weighted_center,
)
from .geometry import DomainSpec, Partition, as_points, separated_from_origin, voronoi_cells

COST_SLACK = 1e-12
DISPLACEMENT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class QuantizerDesign:
    """Quantization points with their partition cells, domain and cost flavor."""

    points: np.ndarray
    cells: Partition
    domain: DomainSpec
    scheme: WeightScheme
    cost: float

    def __post_init__(self):
        if len(self.points) != len(self.cells) or len(self.points) == 0:
            raise ValueError("a design needs N >= 1 points with one cell each")

    @property
    def N(self) -> int:
        return len(self.points)


@dataclass
class LloydReport:
    iterations: int
    cost_trace: list
    converged: bool
    sukharev_lower: float | None = None
    sukharev_upper: float | None = None
    displacement_trace: list = field(default_factory=list)


def cost(points, cells, scheme: WeightScheme) -> float:
    """Max over cells of the worst-case weighted cost; empty cells contribute nothing."""
    points = as_points(points)
    if len(points) != len(cells):
        raise ValueError("points and cells differ in length")
    worst = 0.0
    for q, cell in zip(points, cells):
        if cell.is_empty:
            continue
        worst = max(worst, eval_cell_cost(q, cell, scheme))
    return worst


def _center(cell, domain: DomainSpec, scheme: WeightScheme) -> CenterResult:
    if domain.kind == "circle" and scheme.kind == "uniform":
        return spherical_center(cell, radius=domain.M)
    return weighted_center(cell, scheme)


def _check_separation(cells: Partition) -> None:
    for i, cell in enumerate(cells):
        if not cell.is_empty and not cell.separated:
            raise SeparationError(
                f"cell {i} is not separated from the origin; "
                "increase N or change the initialization")


def design_from_points(points, domain: DomainSpec, scheme: WeightScheme) -> QuantizerDesign:
    """Design whose cells are the Voronoi partition of ``points``."""
    points = as_points(points).copy()
    cells = voronoi_cells(points, domain, metric=scheme.metric)
    if scheme.kind == "radial_inverse":
        _check_separation(cells)
    return QuantizerDesign(points, cells, domain, scheme, cost(points, cells, scheme))


def lloyd_step(design: QuantizerDesign) -> QuantizerDesign:
    """One application of the Lloyd map: re-partition, then move to weighted centers."""
    cells = voronoi_cells(design.points, design.domain, metric=design.scheme.metric)
    if design.scheme.kind == "radial_inverse":
        _check_separation(cells)
    new_points = design.points.copy()
    for i, cell in enumerate(cells):
        if cell.is_empty:
            continue
        res = _center(cell, design.domain, design.scheme)
        # keep the old point unless the center is a strict improvement; rounding
        # in the center solvers must not be able to raise the cost
        if res.value < eval_cell_cost(design.points[i], cell, design.scheme):
            new_points[i] = res.q_star
    new_cost = cost(new_points, cells, design.scheme)
    return QuantizerDesign(new_points, cells, design.domain, design.scheme, new_cost)


def sukharev_bounds(N: int, n: int) -> tuple:
    """Lower/upper bounds on the optimal multicenter cost for the unit n-cube."""
    if N < 1 or n < 1:
        raise ValueError("N and n must be positive")
    k = int(round(N ** (1.0 / n)))
    while k ** n > N:
        k -= 1
    while (k + 1) ** n <= N:
        k += 1
    return 1.0 / (2 * k), math.sqrt(n) / (2 * k)


def lloyd_run(init_points, domain: DomainSpec, scheme: WeightScheme,
              tol: float = 1e-6, max_iters: int = 100, patience: int = 3):
    """Iterate the Lloyd map until the cost decrease stays below ``tol``.

    The max-cost objective often sits on a plateau for a step or two while
    non-critical points keep moving, so the run stops only after ``patience``
    consecutive steps with decrease below ``tol``.  A step whose largest point
    displacement is below 1e-9 stops the run immediately.

    Returns ``(design, report)``; the report's cost trace starts with the cost
    of the initial points on their own Voronoi cells.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if patience < 1:
        raise ValueError("patience must be at least 1")
    design = design_from_points(init_points, domain, scheme)
    trace = [design.cost]
    moves = []
    converged = False
    it = 0
    stalled = 0
    while it < max_iters:
        nxt = lloyd_step(design)
        it += 1
        if nxt.cost > design.cost + COST_SLACK:
            raise RuntimeError(
                f"Lloyd step increased the cost from {design.cost!r} to {nxt.cost!r}")
        move = float(np.max(np.linalg.norm(nxt.points - design.points, axis=1)))
        decrease = design.cost - nxt.cost
        design = nxt
        trace.append(design.cost)
        moves.append(move)
        stalled = stalled + 1 if decrease < tol else 0
        if stalled >= patience or move < DISPLACEMENT_TOL:
            converged = True
            break
    lower = upper = None
    if domain.kind == "square":
        lo, hi = sukharev_bounds(design.N, 2)
        side = 2.0 * domain.M
        lower, upper = lo * side, hi * side
    report = LloydReport(it, trace, converged, lower, upper, moves)
    return design, report


def _halton(n: int, seed: int) -> np.ndarray:
    return qmc.Halton(d=2, scramble=True, seed=np.random.default_rng(seed)).random(n)


def _sample(domain: DomainSpec, N: int, seed) -> np.ndarray:
    u = _halton(N, seed)
    if domain.kind == "square":
        return domain.M * (2.0 * u - 1.0)
    theta = 2.0 * math.pi * u[:, 1]
    direction = np.column_stack([np.cos(theta), np.sin(theta)])
    if domain.kind == "circle":
        return domain.M * direction
    if domain.kind == "disk":
        r = domain.M * np.sqrt(u[:, 0])
    elif domain.kind == "annulus":
        r = np.sqrt(domain.m ** 2 + u[:, 0] * (domain.M ** 2 - domain.m ** 2))
    else:
        raise ValueError(f"no sampler for domain kind {domain.kind!r}")
    return r[:, None] * direction


def _lattice(domain: DomainSpec, N: int, seed) -> np.ndarray:
    if domain.kind == "square":
        k = math.isqrt(N)
        c = domain.M * ((2.0 * np.arange(k) + 1.0) / k - 1.0)
        gx, gy = np.meshgrid(c, c)
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        if k * k == N:
            return grid
        return np.vstack([grid, _sample(domain, N - k * k, seed)])
    if domain.kind == "disk":
        # hexagonal lattice with spacing matched to N, keeping the N points nearest the center
        h = domain.M * math.sqrt(2.0 * math.pi / (math.sqrt(3.0) * N))
        while True:
            r = int(math.ceil(domain.M / h)) + 1
            i, j = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1))
            pts = h * np.column_stack([(i + 0.5 * j).ravel(), (math.sqrt(3.0) / 2.0 * j).ravel()])
            pts = pts[np.linalg.norm(pts, axis=1) < domain.M]
            if len(pts) >= N:
                break
            h *= 0.95
        order = np.lexsort((np.arctan2(pts[:, 1], pts[:, 0]), np.round(np.hypot(*pts.T), 12)))
        return pts[order[:N]]
    raise ValueError(f"lattice initialization is available for square and disk, not {domain.kind!r}")


def init_points(domain: DomainSpec, N: int, seed: int = 0, scheme: WeightScheme | None = None,
                retries: int = 100, method: str = "halton") -> np.ndarray:
    """Seeded initial points inside the domain.

    ``method="halton"`` draws scrambled Halton points.  ``method="lattice"``
    starts from a regular grid (square) or hexagonal patch (disk), which
    avoids the rotated fixed points the max-cost descent can stall in.  On
    the annulus the sample is redrawn with sub-seeds until every initial
    Voronoi cell is separated from the origin.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if method not in ("halton", "lattice"):
        raise ValueError(f"unknown initialization {method!r}")
    if method == "lattice":
        return _lattice(domain, N, [seed, 0])
    if domain.kind != "annulus" and not (scheme is not None and scheme.kind == "radial_inverse"):
        return _sample(domain, N, [seed, 0])
    metric = None if scheme is None else scheme.metric
    for attempt in range(retries):
        pts = _sample(domain, N, [seed, attempt])
        cells = voronoi_cells(pts, domain, metric=metric)
        if all(c.is_empty or c.separated for c in cells):
            return pts
    raise SeparationError(
        f"no separated initialization for N={N} after {retries} attempts; "
        "N is too small for this annulus")


def with_points(design: QuantizerDesign, points) -> QuantizerDesign:
    """Same partition, new points (cost recomputed)."""
    points = as_points(points).copy()
    return replace(design, points=points, cost=cost(points, design.cells, design.scheme))
