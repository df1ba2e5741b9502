"""Quantizer evaluation: nearest-point designs, the logarithmic radial quantizer,
the radial x spherical product and scaled templates for zooming.

All evaluators come in a batch form ``quantize_many(X) -> (index, values)``
used by the simulator.  An index of ``SATURATED`` (with NaN values) marks a
state outside the quantizer's range.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .centers import WeightScheme
from .geometry import DomainSpec
from .lloyd import QuantizerDesign, cost, design_from_points

SATURATED = -1
TIE_RTOL = 1e-12


class SaturationError(ValueError):
    """The state lies outside the range where the quantizer is defined."""


def _outer_contains(domain: DomainSpec, X: np.ndarray) -> np.ndarray:
    # the annulus hole is served by the nearest point; only the outer boundary saturates
    if domain.kind == "annulus":
        return np.linalg.norm(X, axis=1) <= domain.M * (1.0 + 1e-9)
    return domain.contains(X)


def _nearest(points: np.ndarray, X: np.ndarray, L: np.ndarray | None = None) -> np.ndarray:
    """Index of the nearest point for each row of ``X``; ties go to the lowest index."""
    diff = X[:, None, :] - points[None, :, :]
    if L is not None:
        diff = diff @ L.T
    d2 = np.einsum("bnk,bnk->bn", diff, diff)
    best = d2.min(axis=1, keepdims=True)
    # relative to the magnitudes involved, so scaled copies of a design break ties alike
    scale = np.einsum("bk,bk->b", X, X)[:, None] + np.max(np.einsum("nk,nk->n", points, points))
    return np.argmax(d2 <= best + TIE_RTOL * scale, axis=1)


def quantize_many(design: QuantizerDesign, X) -> tuple:
    """Batch nearest-point quantization; rows outside the domain get ``SATURATED``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    idx = np.full(len(X), SATURATED, dtype=np.int64)
    out = np.full(X.shape, np.nan)
    ok = _outer_contains(design.domain, X)
    if ok.any():
        k = _nearest(design.points, X[ok], design.scheme.metric)
        idx[ok] = k
        out[ok] = design.points[k]
    return idx, out


def quantize(design: QuantizerDesign, x) -> tuple:
    """Nearest quantization point of ``x`` as ``(index, point)``.

    Raises :class:`SaturationError` outside the design domain.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    idx, out = quantize_many(design, x[None, :])
    if idx[0] == SATURATED:
        raise SaturationError(f"{x.tolist()} is outside the {design.domain.kind} domain")
    return int(idx[0]), out[0]


@dataclass(frozen=True)
class DesignQuantizer:
    """Adapter giving a design the batch evaluator interface used by the simulator."""

    design: QuantizerDesign

    def quantize_many(self, X):
        return quantize_many(self.design, X)

    @property
    def reach(self) -> float:
        return self.design.domain.M


@dataclass(frozen=True)
class RadialQuantizer:
    """Logarithmic quantizer of the radius ``s = |x|``.

    Interval ``i`` is ``((a/b)^i M, (a/b)^(i-1) M]`` with value
    ``(a^i / b^(i-1)) M``, so a value sitting on a breakpoint belongs to the
    inner interval.  Radii at or below ``(a/b)^N1 M`` form a dead zone with value 0.
    """

    M: float
    N1: int
    a: float
    b: float
    lam: float
    pbk_norm: float

    @cached_property
    def levels(self) -> np.ndarray:
        i = np.arange(1, self.N1 + 1)
        return self.a ** i / self.b ** (i - 1) * self.M

    @cached_property
    def breakpoints(self) -> np.ndarray:
        """``(a/b)^i M`` for ``i = 0 .. N1``, decreasing."""
        return (self.a / self.b) ** np.arange(self.N1 + 1) * self.M

    @property
    def inner_radius(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def tolerance(self) -> float:
        """Relative error bound lambda / (2 |PBK|)."""
        return self.lam / (2.0 * self.pbk_norm)

    def interval(self, s) -> np.ndarray:
        """Interval number 1..N1; 0 in the dead zone and N1 + 1 above M."""
        s = np.asarray(s, dtype=float)
        k = np.searchsorted(self.breakpoints[::-1], s, side="left")
        out = self.N1 + 1 - k
        return np.where(k == 0, 0, np.where(s > self.M, self.N1 + 1, out))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        i = self.interval(s)
        if np.any(i > self.N1):
            raise SaturationError(f"radius above M = {self.M!r}")
        vals = np.where(i == 0, 0.0, self.levels[np.clip(i - 1, 0, self.N1 - 1)])
        return vals if vals.ndim else float(vals)


def log_radial(M: float, N1: int, lam: float, pbk_norm: float) -> RadialQuantizer:
    """Radial quantizer with relative error at most ``lam / (2 pbk_norm)`` on ``((a/b)^N1 M, M]``."""
    if not M > 0:
        raise ValueError("M must be positive")
    if int(N1) != N1 or N1 < 1:
        raise ValueError("N1 must be a positive integer")
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie in (0, 1)")
    if not pbk_norm >= 0.5:
        raise ValueError("pbk_norm must be at least 1/2")
    t = lam / (2.0 * pbk_norm)
    return RadialQuantizer(float(M), int(N1), 1.0 - t, 1.0 + t, float(lam), float(pbk_norm))


@dataclass(frozen=True, eq=False)
class SphericalQuantizer:
    """Quantizer of directions: nearest of ``points`` (|q| <= 1) to a unit vector."""

    points: np.ndarray
    design: QuantizerDesign

    @classmethod
    def from_design(cls, design: QuantizerDesign) -> "SphericalQuantizer":
        if design.domain.kind != "circle" or design.domain.M != 1.0:
            raise ValueError("a spherical quantizer needs a design on the unit circle")
        pts = np.asarray(design.points, dtype=float)
        if np.any(np.linalg.norm(pts, axis=1) > 1.0 + 1e-12):
            raise ValueError("spherical quantization points must satisfy |q| <= 1")
        return cls(pts, design)

    @classmethod
    def from_points(cls, points, arc_resolution: int = 256) -> "SphericalQuantizer":
        design = design_from_points(points, DomainSpec.circle(1.0, arc_resolution),
                                    WeightScheme.uniform())
        return cls.from_design(design)

    @property
    def N2(self) -> int:
        return len(self.points)

    @property
    def cells(self):
        return self.design.cells

    @cached_property
    def delta_s(self) -> float:
        """Worst error ``|q^s(v) - v|`` over unit vectors ``v``.

        On an arc the distance to an interior point grows toward the direction
        opposite to it, so the maximum is at an arc end or at ``-q / |q|``
        when that direction belongs to the arc; cell samples include every
        arc end.
        """
        worst = cost(self.points, self.cells, WeightScheme.uniform())
        norms = np.linalg.norm(self.points, axis=1)
        for i, (q, r) in enumerate(zip(self.points, norms)):
            if r == 0.0:
                continue
            anti = -q / r
            if _nearest(self.points, anti[None, :])[0] == i:
                worst = max(worst, 1.0 + r)
        return float(worst)

    def index(self, V) -> np.ndarray:
        return _nearest(self.points, np.atleast_2d(V))

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.points[self.index(v)].reshape(v.shape)


@dataclass(frozen=True, eq=False)
class ProductQuantizer:
    """``q(x) = q^r(|x|) q^s(x / |x|)`` over ``N1 * N2`` lattice values.

    The index of lattice value ``(i, j)`` is ``(i - 1) N2 + j``; the dead zone
    maps to 0 with index ``N1 * N2``.
    """

    radial: RadialQuantizer
    spherical: SphericalQuantizer

    @property
    def size(self) -> int:
        return self.radial.N1 * self.spherical.N2

    @property
    def zero_index(self) -> int:
        return self.size

    @property
    def reach(self) -> float:
        return self.radial.M

    @cached_property
    def lattice(self) -> np.ndarray:
        lv = self.radial.levels
        return (lv[:, None, None] * self.spherical.points[None, :, :]).reshape(-1, 2)

    def quantize_many(self, X) -> tuple:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        r = np.linalg.norm(X, axis=1)
        i = self.radial.interval(r)
        idx = np.full(len(X), SATURATED, dtype=np.int64)
        out = np.full(X.shape, np.nan)
        dead = i == 0
        idx[dead] = self.zero_index
        out[dead] = 0.0
        live = (i >= 1) & (i <= self.radial.N1)
        if live.any():
            j = self.spherical.index(X[live] / r[live, None])
            k = (i[live] - 1) * self.spherical.N2 + j
            idx[live] = k
            out[live] = self.lattice[k]
        return idx, out

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(2)
        if not np.any(x):
            raise ValueError("the product quantizer is undefined at x = 0")
        idx, out = self.quantize_many(x[None, :])
        if idx[0] == SATURATED:
            raise SaturationError(f"|x| = {np.linalg.norm(x)!r} exceeds M = {self.radial.M!r}")
        return out[0]


def build_product(radial: RadialQuantizer, spherical: SphericalQuantizer) -> ProductQuantizer:
    return ProductQuantizer(radial, spherical)


def scale_design(design: QuantizerDesign, s: float) -> QuantizerDesign:
    """Multiply points, cells and domain radii by ``s``."""
    if not s > 0:
        raise ValueError("scale factor must be positive")
    if s == 1.0:
        return design
    points = design.points * s
    cells = design.cells.scaled(s)
    return replace(design, points=points, cells=cells, domain=cells.domain,
                   cost=cost(points, cells, design.scheme))


@dataclass(frozen=True)
class BinaryBallQuantizer:
    """Two-value quantizer reporting whether ``|x| <= mu`` (the boundary counts as inside)."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")

    def inside(self, x) -> bool:
        return bool(np.linalg.norm(np.asarray(x, dtype=float)) <= self.mu)


def binary_ball_quantizer(mu: float) -> BinaryBallQuantizer:
    return BinaryBallQuantizer(float(mu))

