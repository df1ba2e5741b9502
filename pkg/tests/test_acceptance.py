"""Acceptance criteria 1-10, each at its stated tolerance and runtime budget.

Every criterion prints one ``CRITERION k: PASS|FAIL ...`` line.  Run with
pytest, or directly as ``python tests/test_acceptance.py``.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from test_centers import brute_mec, grid_oracle, separated_polygon  # noqa: E402

from quantloc.centers import (  # noqa: E402
    WeightScheme,
    min_enclosing_circle,
    radially_weighted_center,
)
from quantloc.control import (  # noqa: E402
    CertParams,
    LinearPlant,
    MonotoneFn,
    certify,
    certify_nonlinear,
    destabilization_measure,
    lyapunov_solve,
)
from quantloc.geometry import DomainSpec, Polygon  # noqa: E402
from quantloc.lloyd import init_points, lloyd_run, lloyd_step, sukharev_bounds  # noqa: E402
from quantloc.quantizer import SphericalQuantizer, build_product, log_radial  # noqa: E402
from quantloc.sim import (  # noqa: E402
    ZoomSchedule,
    sample_in_level_set,
    simulate_batch,
    simulate_dynamic,
    verify_certificate,
)

U = WeightScheme.uniform()
R = WeightScheme.radial_inverse()
DI = LinearPlant([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [[-1.0, -2.0]])


def _regular(k, area):
    # circumradius of a regular k-gon with the given area
    r = math.sqrt(2 * area / (k * math.sin(2 * math.pi / k)))
    th = 2 * math.pi * np.arange(k) / k
    return r * np.column_stack([np.cos(th), np.sin(th)])


def criterion_1():
    t = time.perf_counter()
    hexagon = min_enclosing_circle(_regular(6, 1.0)).radius
    square = min_enclosing_circle(_regular(4, 1.0)).radius
    th = 2 * math.pi * np.arange(4096) / 4096
    disk = min_enclosing_circle(math.sqrt(1 / math.pi) * np.column_stack([np.cos(th), np.sin(th)])).radius
    tri_pts = _regular(3, 1.0)
    triangle = min_enclosing_circle(tri_pts).radius
    tri_oracle = brute_mec(tri_pts)[1]
    dt = time.perf_counter() - t
    ok = (abs(hexagon - 0.6204) <= 0.005 and abs(square - 0.7071) <= 0.001
          and abs(disk - 0.5642) <= 0.001 and abs(triangle - tri_oracle) <= 1e-9
          and abs(triangle - 0.877) <= 0.001 and dt < 1.0)
    return ok, (f"hexagon {hexagon:.5f}, square {square:.5f}, disk {disk:.5f}, triangle "
                f"{triangle:.5f} (brute force {tri_oracle:.5f}; printed 0.936 not reproduced), "
                f"{dt:.2f}s")


FLAVORS = {
    "square/uniform": (DomainSpec.square(0.5), U),
    "circle/spherical": (DomainSpec.circle(1.0), U),
    "annulus/radial": (DomainSpec.annulus(0.5, 1.0), R),
}


def criterion_2():
    t = time.perf_counter()
    worst_rise, worst_resid, runs, unconverged = -math.inf, 0.0, 0, 0
    for name, (spec, scheme) in FLAVORS.items():
        for N in (4, 7, 9, 16):
            for seed in range(20):
                d, rep = lloyd_run(init_points(spec, N, seed=seed, scheme=scheme), spec, scheme,
                                   tol=1e-10, max_iters=2000)
                tr = np.array(rep.cost_trace)
                worst_rise = max(worst_rise, float(np.max(np.diff(tr))))
                unconverged += not rep.converged
                worst_resid = max(worst_resid, abs(lloyd_step(d).cost - d.cost))
                runs += 1
    dt = time.perf_counter() - t
    ok = worst_rise <= 1e-12 and worst_resid < 1e-9 and unconverged == 0 and dt < 60
    return ok, (f"{runs} runs, largest cost rise {worst_rise:.2e}, largest fixed-point "
                f"residual {worst_resid:.2e}, unconverged {unconverged}, {dt:.1f}s")


def criterion_3():
    t = time.perf_counter()
    spec = DomainSpec.square(0.5)  # unit square
    out, ok = [], True
    for N in (9, 4):
        lo, hi = sukharev_bounds(N, 2)
        d, _ = lloyd_run(init_points(spec, N, method="lattice"), spec, U, tol=1e-10,
                         max_iters=500)
        ok &= lo - 1e-6 <= d.cost <= hi + 1e-6
        h, _ = lloyd_run(init_points(spec, N, seed=1), spec, U, tol=1e-10, max_iters=500)
        out.append(f"N={N}: {d.cost:.8f} in [{lo:.6f}, {hi:.6f}] (halton start {h.cost:.6f})")
    ok &= sukharev_bounds(4, 2) == (0.25, math.sqrt(2) / 4)
    dt = time.perf_counter() - t
    return ok and dt < 10, "; ".join(out) + f", {dt:.1f}s"


def criterion_4():
    t = time.perf_counter()
    rng = np.random.default_rng(2024)
    gap = ident = touch = 0.0
    for _ in range(50):
        poly = separated_polygon(rng)
        res = radially_weighted_center(poly)
        c, r, g = res.witness.center, res.witness.radius, res.value
        gap = max(gap, abs(g - grid_oracle(poly.vertices)))
        ident = max(ident, float(np.linalg.norm(res.q_star - (1 - g * g) * c)))
        d = np.sort(np.abs(np.linalg.norm(poly.vertices - c, axis=1) - r))
        touch = max(touch, float(d[1]))
    seg = radially_weighted_center(Polygon.from_vertices([(2, 1), (2, -1)])).value
    dt = time.perf_counter() - t
    ok = (gap <= 1e-3 and ident <= 1e-9 and touch <= 1e-7
          and abs(seg - 1 / math.sqrt(5)) <= 1e-9 and dt < 60)
    return ok, (f"oracle gap {gap:.2e}, identity {ident:.2e}, second touching vertex "
                f"{touch:.2e}, segment error {abs(seg - 1 / math.sqrt(5)):.1e}, {dt:.1f}s")


def criterion_5():
    t = time.perf_counter()
    spec = DomainSpec.circle(1.0)
    d, _ = lloyd_run(init_points(spec, 4, seed=0), spec, U, tol=1e-10, max_iters=500)
    ds = destabilization_measure(d, None, "delta_s")
    radii = np.linalg.norm(d.points, axis=1)
    dt = time.perf_counter() - t
    ok = (ds <= math.sin(math.pi / 4) + 1e-3 and np.all(np.abs(radii - math.cos(math.pi / 4)) <= 1e-3)
          and dt < 10)
    return ok, f"delta_s {ds:.6f}, radii {radii.min():.6f}..{radii.max():.6f}, {dt:.2f}s"


def criterion_6():
    t = time.perf_counter()
    cert = lyapunov_solve(DI)
    perr = float(np.abs(cert.P - [[1.5, 0.5], [0.5, 0.5]]).max())
    gerr = abs(cert.pbk_norm - math.sqrt(2.5))
    rng = np.random.default_rng(6)
    low, n = math.inf, 0
    while n < 100:
        A, B, K = rng.normal(size=(2, 2)), rng.normal(size=(2, 1)), 2 * rng.normal(size=(1, 2))
        if np.linalg.eigvals(A).real.max() < 0:
            continue
        p = LinearPlant(A, B, K)
        if np.linalg.eigvals(p.closed_loop).real.max() >= -0.05:
            continue
        low = min(low, lyapunov_solve(p).pbk_norm)
        n += 1
    dt = time.perf_counter() - t
    ok = perr <= 1e-10 and gerr <= 1e-10 and low >= 0.5 - 1e-12 and dt < 10
    return ok, f"P error {perr:.1e}, |PBK| error {gerr:.1e}, smallest |PBK| over 100 unstable {low:.4f}, {dt:.2f}s"


def _cross_check(cert, quantizer, rep, seed):
    X0 = sample_in_level_set(cert, rep.R1_level, 100, seed=seed)
    trajs = simulate_batch(DI, cert, quantizer, X0, rep.T * 1.01 + 0.01, report=rep)
    exits = sum(tr.first("left_R1") is not None for tr in trajs)
    entered = sum(tr.first("entered_R2") is not None
                  and tr.first("entered_R2").t <= rep.T + tr.dt for tr in trajs)
    passed = sum(verify_certificate(tr, rep).passed for tr in trajs)
    return exits, entered, passed


def criterion_7():
    t = time.perf_counter()
    cert = lyapunov_solve(DI)
    lines, ok = [], True

    disk = DomainSpec.disk(1.0)
    d, _ = lloyd_run(init_points(disk, 200, method="lattice"), disk, U, max_iters=60)
    rep = certify("L2", cert, CertParams(M=1.0, epsilon=0.1), destabilization_measure(d, cert, "delta"))
    res = _cross_check(cert, d, rep, 1) if rep.feasible else (None, 0, 0)
    ok &= rep.feasible and res == (0, 100, 100)
    lines.append(f"L2 T={rep.T:.1f} exits {res[0]} entered {res[1]}/100")

    circ = DomainSpec.circle(1.0)
    s, _ = lloyd_run(init_points(circ, 24, seed=0), circ, U, tol=1e-10, max_iters=500)
    sq = SphericalQuantizer.from_design(s)
    p3 = CertParams(M=1.0, epsilon=0.1, lam=0.4, N1=8, N2=24)
    rep = certify("L3", cert, p3, sq.delta_s)
    prod = build_product(log_radial(1.0, 8, 0.4, cert.pbk_norm), sq)
    res = _cross_check(cert, prod, rep, 2) if rep.feasible else (None, 0, 0)
    ok &= rep.feasible and res == (0, 100, 100)
    lines.append(f"L3 T={rep.T:.1f} exits {res[0]} entered {res[1]}/100")

    ann = DomainSpec.annulus(0.35, 1.0)
    a, _ = lloyd_run(init_points(ann, 48, seed=0, scheme=R), ann, R, max_iters=100)
    rep = certify("L4", cert, CertParams(M=1.0, epsilon=0.1, m=0.35),
                  destabilization_measure(a, cert, "delta_rw"))
    res = _cross_check(cert, a, rep, 3) if rep.feasible else (None, 0, 0)
    ok &= rep.feasible and res == (0, 100, 100)
    lines.append(f"L4 T={rep.T:.1f} exits {res[0]} entered {res[1]}/100")
    dt = time.perf_counter() - t
    return ok and dt < 120, "; ".join(lines) + f", {dt:.1f}s"


def criterion_8():
    cert = lyapunov_solve(DI)
    eps, g = 0.1, cert.pbk_norm
    a1 = MonotoneFn(lambda s: cert.lambda_min * s * s)
    a2 = MonotoneFn(lambda s: cert.lambda_max * s * s)
    a3 = MonotoneFn(lambda s: eps / (1 + eps) * s * s)
    rho = MonotoneFn(lambda s: 2 * (1 + eps) * g * s)
    lin = certify("L2", cert, CertParams(M=1.0, epsilon=eps), 0.1)
    nl = certify_nonlinear(a1, a2, a3, rho, 1.0, 0.1)
    th = lin.threshold
    # the nonlinear test turns infeasible exactly at the linear threshold
    at = certify_nonlinear(a1, a2, a3, rho, 1.0, th)
    below = certify_nonlinear(a1, a2, a3, rho, 1.0, th * (1 - 1e-9))
    th_err = abs(at.R1_level - at.R2_level) / at.R1_level
    bound_err = abs(nl.ultimate_bound - lin.ultimate_bound)
    ok = (abs(th - 0.11908) < 5e-6 and th_err <= 1e-9 and below.feasible and bound_err <= 1e-9
          and nl.feasible == lin.feasible and abs(nl.T - lin.T) <= 1e-9 * lin.T)
    return ok, f"threshold {th:.6f}, level mismatch at threshold {th_err:.1e}, bound error {bound_err:.1e}"


def criterion_9():
    t = time.perf_counter()
    cert = lyapunov_solve(DI)
    disk = DomainSpec.disk(1.0)
    tmpl, _ = lloyd_run(init_points(disk, 300, method="lattice"), disk, U, max_iters=60)
    eps = 0.5
    x0 = np.array([0.6, -0.4])
    first = simulate_dynamic(DI, cert, tmpl, x0, ZoomSchedule(1.0, 0.1), 1e-9, eps)
    rho = first.contraction
    bound = math.ceil(math.log(1e3) / math.log(1 / rho)) + 1
    T_stage = certify("L2", cert, CertParams(M=1.0, epsilon=eps),
                      destabilization_measure(tmpl, cert, "delta")).T
    res = simulate_dynamic(DI, cert, tmpl, x0, ZoomSchedule(1.0, 0.1), (bound + 2) * T_stage, eps)
    M = np.array(res.stage_M)
    m_ratio = float(np.max(np.abs(M[1:] / M[:-1] - rho))) / rho
    lv = cert.lambda_min * M ** 2
    lv_ratio = float(np.max(np.abs(lv[1:] / lv[:-1] - rho * rho))) / (rho * rho)
    tr = res.trajectory
    starts = [res.t0] + [e.t for e in tr.events if e.kind == "rescaled"]
    hit = np.flatnonzero(np.linalg.norm(tr.states, axis=1) < 1e-3 * np.linalg.norm(x0))
    stage = None if not len(hit) else int(np.searchsorted(starts, tr.times[hit[0]], side="right"))
    exits = sum(e.kind in ("left_R1", "saturated") for e in tr.events)
    dt = time.perf_counter() - t
    ok = (rho < 1 and m_ratio <= 1e-9 and lv_ratio <= 1e-9 and stage is not None
          and stage <= bound and exits == 0 and dt < 60)
    return ok, (f"rho_c {rho:.4f} (M ratio error {m_ratio:.1e}, level ratio rho_c^2 error "
                f"{lv_ratio:.1e}), 1e-3 reached in stage {stage} of bound {bound}, {dt:.1f}s")


def criterion_10():
    g = math.sqrt(2.5)
    worst_eq, worst_in, ok = 0.0, -math.inf, True
    rng = np.random.default_rng(10)
    for M, N1, lam in ((1.0, 1, 0.5), (1.0, 6, 0.4), (3.0, 12, 0.2)):
        r = log_radial(M, N1, lam, g)
        tol = lam / (2 * g)
        worst_eq = max(worst_eq, abs(abs(r.a - 1) - tol), abs(abs(r.b - 1) - tol),
                       abs(abs(r(M) / M - 1) - tol),
                       abs(abs(r.levels[0] / r.breakpoints[1] - 1) - tol))
        bp = r.breakpoints
        for i in range(1, N1 + 1):
            s = rng.uniform(bp[i], bp[i - 1], 1000)
            s = s[s > bp[i]]
            worst_in = max(worst_in, float(np.max(np.abs(r(s) / s - 1) - tol)))
    ok = worst_eq <= 1e-12 and worst_in <= 1e-12
    return ok, f"boundary equality error {worst_eq:.1e}, interior max excess {worst_in:.1e}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10]


def _line(k, ok, detail):
    return f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    # compile (or load cached) numba kernels so runtime budgets measure the work itself
    cert = lyapunov_solve(DI)
    spec = DomainSpec.disk(1.0)
    d, _ = lloyd_run(init_points(spec, 5), spec, U, max_iters=2)
    simulate_batch(DI, cert, d, [[0.1, 0.0]], 0.01)
    lloyd_step(lloyd_run(init_points(DomainSpec.annulus(0.5, 1.0), 6, scheme=R),
                         DomainSpec.annulus(0.5, 1.0), R, max_iters=1)[0])


@pytest.mark.parametrize("k", range(1, 11))
def test_criterion(k, capsys):
    ok, detail = CRITERIA[k - 1]()
    with capsys.disabled():
        print("\n" + _line(k, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for k, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        print(_line(k, ok, detail), flush=True)
        results.append(ok)
    sys.exit(0 if all(results) else 1)
