import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quantloc.centers import WeightScheme
from quantloc.geometry import DomainSpec
from quantloc.lloyd import design_from_points, init_points
from quantloc.quantizer import (
    SATURATED,
    SaturationError,
    SphericalQuantizer,
    binary_ball_quantizer,
    build_product,
    log_radial,
    quantize,
    quantize_many,
    scale_design,
)

U = WeightScheme.uniform()
G = math.sqrt(2.5)


def disk_design(N=12, seed=0):
    spec = DomainSpec.disk(1.0)
    return design_from_points(init_points(spec, N, seed=seed), spec, U)


def test_quantize_at_point():
    d = disk_design()
    for i, q in enumerate(d.points):
        k, p = quantize(d, q)
        assert k == i and np.array_equal(p, q)


def test_tie_goes_to_lowest_index():
    spec = DomainSpec.square(1.0)
    pts = [(0.9, 0.9), (-0.9, 0.9), (-0.5, 0.0), (0.9, -0.9), (-0.9, -0.9), (0.5, 0.0)]
    d = design_from_points(pts, spec, U)
    assert quantize(d, (0.0, 0.0))[0] == 2
    assert quantize(d, (0.0, 0.3))[0] == 2


def test_nearest_against_linear_scan():
    d = disk_design(25, seed=4)
    X = np.random.default_rng(0).uniform(-1, 1, (20000, 2))
    X = X[np.linalg.norm(X, axis=1) < 1][:10000]
    idx, vals = quantize_many(d, X)
    for x, k in zip(X, idx):
        dist = [float(np.hypot(*(q - x))) for q in d.points]
        assert dist[k] == min(dist)
    assert np.array_equal(vals, d.points[idx])


def test_saturation():
    d = disk_design()
    with pytest.raises(SaturationError):
        quantize(d, (1.5, 0.0))
    idx, vals = quantize_many(d, [(1.5, 0.0), (0.1, 0.0)])
    assert idx[0] == SATURATED and np.isnan(vals[0]).all() and idx[1] >= 0


def test_annulus_hole_is_not_saturation():
    spec = DomainSpec.annulus(0.5, 1.0)
    R = WeightScheme.radial_inverse()
    d = design_from_points(init_points(spec, 8, scheme=R), spec, R)
    k, _ = quantize(d, (0.1, 0.0))
    assert k >= 0


def test_log_radial_example():
    r = log_radial(1.0, 1, 0.5, G)
    assert abs(r.a - 0.84189) < 5e-6 and abs(r.b - 1.15811) < 5e-6
    assert math.isclose(r.levels[0], r.a)
    assert abs(r.breakpoints[1] - 0.72695) < 5e-6
    assert r(1.0) == r.a
    assert r(r.breakpoints[1]) == 0.0  # breakpoint belongs to the inner interval
    assert math.isclose(abs(r(1.0) - 1.0), r.tolerance, rel_tol=1e-12)
    s = np.nextafter(r.breakpoints[1], 2.0)
    assert math.isclose(r(s) / s, r.b, rel_tol=1e-12)
    with pytest.raises(SaturationError):
        r(1.0 + 1e-9)


def test_log_radial_rejects_parameters():
    for args in [(1.0, 0, 0.5, G), (1.0, 2, 1.0, G), (1.0, 2, 0.5, 0.4), (0.0, 2, 0.5, G)]:
        with pytest.raises(ValueError):
            log_radial(*args)


@pytest.mark.parametrize("N1,lam,g", [(1, 0.5, G), (5, 0.4, G), (12, 0.2, 0.7)])
def test_relative_error_every_interval(N1, lam, g):
    r = log_radial(2.0, N1, lam, g)
    rng = np.random.default_rng(N1)
    bp = r.breakpoints
    assert np.all(np.diff(r.levels) < 0)
    assert 0 < r.a < 1 < r.b
    for i in range(1, N1 + 1):
        s = rng.uniform(bp[i], bp[i - 1], 1000)
        s = s[s > bp[i]]
        assert np.all(r.interval(s) == i)
        assert np.all(np.abs(r(s) / s - 1.0) <= r.tolerance * (1 + 1e-12))


def test_delta_s_against_dense_sampling():
    rng = np.random.default_rng(2)
    th = np.linspace(0, 2 * np.pi, 200001)
    V = np.column_stack([np.cos(th), np.sin(th)])
    for _ in range(5):
        ang = np.sort(rng.uniform(0, 2 * np.pi, 5))
        pts = rng.uniform(0.0, 1.0, (5, 1)) * np.column_stack([np.cos(ang), np.sin(ang)])
        sq = SphericalQuantizer.from_points(pts)
        sampled = np.linalg.norm(sq(V) - V, axis=1).max()
        assert sampled <= sq.delta_s + 1e-9
        assert sampled >= sq.delta_s - 1e-4


def test_spherical_rejects_outside_points():
    with pytest.raises(ValueError):
        SphericalQuantizer.from_points([(1.2, 0.0), (-0.5, 0.0)])


def test_product_example():
    r = log_radial(3.0, 1, 0.5, G)
    s = SphericalQuantizer.from_points([(0.0, 1.0), (0.0, -1.0)])
    p = build_product(r, s)
    assert np.allclose(p((0.0, 3.0)), (0.0, r.a * 3.0), rtol=0, atol=1e-15)
    assert p.size == 2 and len(p.lattice) == 2
    with pytest.raises(ValueError):
        p((0.0, 0.0))
    with pytest.raises(SaturationError):
        p((0.0, 3.1))
    idx, vals = p.quantize_many([(0.0, 0.1)])  # dead zone
    assert idx[0] == p.zero_index and np.array_equal(vals[0], (0.0, 0.0))


def test_product_origin_point():
    r = log_radial(1.0, 4, 0.4, G)
    p = build_product(r, SphericalQuantizer.from_points([(0.0, 0.0)]))
    X = np.random.default_rng(0).uniform(-0.7, 0.7, (500, 2))
    idx, vals = p.quantize_many(X)
    assert np.all(vals == 0.0)


def test_product_error_chain():
    r = log_radial(1.0, 6, 0.4, G)
    ang = 2 * np.pi * np.arange(16) / 16
    s = SphericalQuantizer.from_points(0.99 * np.column_stack([np.cos(ang), np.sin(ang)]))
    p = build_product(r, s)
    rng = np.random.default_rng(1)
    rad = rng.uniform(r.inner_radius, 1.0, 10000)
    th = rng.uniform(0, 2 * np.pi, 10000)
    X = rad[:, None] * np.column_stack([np.cos(th), np.sin(th)])
    X = X[rad > r.inner_radius]
    n = np.linalg.norm(X, axis=1)
    _, Q = p.quantize_many(X)
    V = X / n[:, None]
    lhs = np.linalg.norm(Q - X, axis=1)
    rhs = n * (np.abs(r(n) / n - 1) + np.linalg.norm(s(V) - V, axis=1))
    assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-15)
    assert np.all(lhs / n <= r.tolerance + s.delta_s + 1e-12)


def test_scale_identity_and_half():
    d = disk_design(10, seed=1)
    assert scale_design(d, 1.0) is d
    h = scale_design(d, 0.5)
    assert abs(h.cost - 0.5 * d.cost) <= 1e-12 * d.cost
    with pytest.raises(ValueError):
        scale_design(d, 0.0)


@given(st.floats(1e-8, 1e8), st.integers(0, 1000))
def test_scale_commutes_with_quantize(s, seed):
    d = disk_design(9, seed=2)
    ds = scale_design(d, s)
    rng = np.random.default_rng(seed)
    X = rng.uniform(-0.7, 0.7, (50, 2))
    i0, v0 = quantize_many(d, X)
    i1, v1 = quantize_many(ds, s * X)
    assert np.array_equal(i0, i1)
    assert np.allclose(v1, s * v0, rtol=1e-12, atol=0)


def test_binary_ball():
    q = binary_ball_quantizer(2.0)
    assert q.inside((2.0, 0.0)) and q.inside((0.0, 0.0)) and not q.inside((4.0, 0.0))
    with pytest.raises(ValueError):
        binary_ball_quantizer(0.0)
