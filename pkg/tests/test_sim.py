import math
from dataclasses import replace

import numpy as np
import pytest

from quantloc.centers import WeightScheme
from quantloc.control import CertificationError
from quantloc.geometry import DomainSpec
from quantloc.lloyd import design_from_points, init_points
from quantloc.quantizer import DesignQuantizer
from quantloc.sim import (
    Event,
    Trajectory,
    ZoomSchedule,
    _integrate,
    rk4_step,
    sample_in_level_set,
    simulate_batch,
    simulate_dynamic,
    simulate_static,
    verify_certificate,
    zoom_contraction,
)


def test_equilibrium(double_integrator, di_cert):
    spec = DomainSpec.disk(1.0)
    d = design_from_points([(0.0, 0.0), (0.5, 0.0), (-0.5, 0.0)], spec, WeightScheme.uniform())
    tr = simulate_static(double_integrator, di_cert, d, (0.0, 0.0), 1.0, dt=0.01)
    assert np.all(tr.states == 0.0) and len(tr.times) == 101
    assert np.all(np.diff(tr.times) > 0)


def test_certified_cross_check(double_integrator, di_cert, di_disk_design, di_l2_report):
    rep = di_l2_report
    assert rep.feasible
    X0 = sample_in_level_set(di_cert, rep.R1_level, 100, seed=7)
    assert np.all(di_cert.V(X0) <= rep.R1_level * (1 + 1e-12))
    trajs = simulate_batch(double_integrator, di_cert, di_disk_design, X0, rep.T * 1.01,
                           report=rep)
    for tr in trajs:
        assert tr.first("left_R1") is None
        assert tr.first("entered_R2").t <= rep.T + tr.dt
        assert verify_certificate(tr, rep).passed


def test_saturation_event(double_integrator, di_cert, di_disk_design):
    tr = simulate_static(double_integrator, di_cert, di_disk_design, (1.5, 0.0), 0.1, dt=0.01)
    assert tr.first("saturated").t == 0.0
    assert len(tr.times) == 1


def test_rk4_fourth_order():
    F = np.array([[0.0, 1.0], [-2.0, -0.3]])
    g = np.array([[0.2, -0.1]])
    x0 = np.array([[1.0, 0.5]])
    # exact solution of x' = F x + g
    from scipy.linalg import expm
    xs = -np.linalg.solve(F, g[0])
    exact = xs + expm(F * 1.0) @ (x0[0] - xs)
    errs = []
    for n in (10, 20, 40):
        X = x0.copy()
        for _ in range(n):
            X = rk4_step(F, g, X, 1.0 / n)
        errs.append(np.linalg.norm(X[0] - exact))
    assert 14 < errs[0] / errs[1] < 18 and 14 < errs[1] / errs[2] < 18
    # Richardson: successive differences also shrink by 2^4
    X = [x0.copy() for _ in range(3)]
    for k, n in enumerate((10, 20, 40)):
        for _ in range(n):
            X[k] = rk4_step(F, g, X[k], 1.0 / n)
    d1 = np.linalg.norm(X[0] - X[1])
    d2 = np.linalg.norm(X[1] - X[2])
    assert 14 < d1 / d2 < 18


def test_static_richardson_within_one_cell(di_disk_design):
    # while the cell is fixed x' = A x + BK q is affine, so the simulator is fourth order
    from scipy.linalg import expm
    from quantloc.control import LinearPlant, lyapunov_solve
    plant = LinearPlant([[0.3, 1.0], [-2.0, 0.1]], [[0.0], [1.0]], [[-1.0, -2.0]])
    cert = lyapunov_solve(plant)
    x0 = di_disk_design.points[0] + np.array([0.01, 0.0])
    t_end = 0.02
    runs = [simulate_static(plant, cert, di_disk_design, x0, t_end, dt=h)
            for h in (0.004, 0.002, 0.001)]
    assert all(np.all(r.cell_index == r.cell_index[0]) for r in runs)
    q = di_disk_design.points[runs[0].cell_index[0]]
    aug = np.zeros((3, 3))
    aug[:2, :2] = plant.A
    aug[:2, 2] = plant.B @ plant.K @ q
    exact = (expm(aug * t_end) @ np.append(x0, 1.0))[:2]
    err = [np.linalg.norm(r.final_state - exact) for r in runs]
    assert 14 < err[0] / err[1] < 18 and 14 < err[1] / err[2] < 18
    e = [r.final_state for r in runs]
    assert 14 < np.linalg.norm(e[0] - e[1]) / np.linalg.norm(e[1] - e[2]) < 18


def test_hold_error_across_switches_is_small(double_integrator, di_cert, di_disk_design):
    # across cell switches the held output makes the step error first order; it stays small
    ends = [simulate_static(double_integrator, di_cert, di_disk_design, (0.4, -0.3), 1.0,
                            dt=h).final_state for h in (1e-3, 5e-4, 2.5e-4)]
    assert max(np.linalg.norm(a - b) for a, b in zip(ends, ends[1:])) < 1e-3


def test_verify_negative_control(double_integrator, di_cert, di_disk_design, di_l2_report):
    x0 = np.array([0.0, 1.0]) * math.sqrt(0.99 * di_l2_report.R1_level / di_cert.P[1, 1])
    tr = simulate_static(double_integrator, di_cert, di_disk_design, x0, di_l2_report.T,
                         report=di_l2_report, stop_on_entry=True)
    assert verify_certificate(tr, di_l2_report).passed
    bad = replace(tr, events=[Event(tr.dt, "left_R1")] + tr.events)
    v = verify_certificate(bad, di_l2_report)
    assert not v.passed and "left_R1" in v.violation and v.t == tr.dt
    never = replace(tr, events=[])
    assert not verify_certificate(never, di_l2_report).passed


def _synthetic(entry_t, dt, report):
    times = np.arange(0.0, entry_t + dt / 2, dt)
    V = np.linspace(report.R1_level * 0.9, report.R2_level, len(times))
    return Trajectory(times, np.zeros((len(times), 2)), np.zeros(len(times), dtype=np.int64), V,
                      [Event(entry_t, "entered_R2")], dt, {})


def test_verify_boundary(di_l2_report):
    T = di_l2_report.T
    assert verify_certificate(_synthetic(T, T / 100, di_l2_report), di_l2_report).passed
    late = T + 2 * (T / 100)
    assert not verify_certificate(_synthetic(late, T / 100, di_l2_report), di_l2_report).passed


def test_deterministic(double_integrator, di_cert, di_disk_design):
    a = simulate_static(double_integrator, di_cert, di_disk_design, (0.3, 0.2), 2.0)
    b = simulate_static(double_integrator, di_cert, di_disk_design, (0.3, 0.2), 2.0)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.cell_index, b.cell_index)


@pytest.mark.parametrize("stop,every", [(False, 1), (True, 7)])
def test_compiled_matches_reference(double_integrator, di_cert, di_disk_design, di_l2_report,
                                    stop, every):
    X0 = np.vstack([sample_in_level_set(di_cert, di_l2_report.R1_level, 4, seed=1),
                    [[1.2, 0.0]]])
    args = (double_integrator, di_cert, DesignQuantizer(di_disk_design), X0, 0.0, 3000, 1e-3,
            di_l2_report.R1_level, di_l2_report.R2_level, stop, every)
    fast, Xf = _integrate(*args, compiled=True)
    slow, Xs = _integrate(*args, compiled=False)
    assert np.array_equal(Xf, Xs)
    for a, b in zip(fast, slow):
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.cell_index, b.cell_index)
        assert np.array_equal(a.V, b.V)
        assert a.events == b.events
        assert a.monitor == b.monitor


def test_planar_only(di_cert, di_disk_design):
    from quantloc.control import LinearPlant
    p3 = LinearPlant(-np.eye(3), np.ones((3, 1)), np.ones((1, 3)) * -0.1)
    with pytest.raises(ValueError):
        simulate_static(p3, di_cert, di_disk_design, (0, 0), 1.0)


def test_zoom_schedule_validation(double_integrator):
    with pytest.raises(ValueError):
        ZoomSchedule(mu0=0.0, review_dt=0.1)
    with pytest.raises(ValueError):
        ZoomSchedule(mu0=1.0, review_dt=0.1, growth_rate=0.5).rate(double_integrator)
    assert ZoomSchedule(1.0, 0.1).rate(double_integrator) == 3.0


def test_dynamic_zero_state(double_integrator, di_cert, di_disk_design):
    # the origin is an equilibrium only when it is itself a quantization point
    pts = di_disk_design.points.copy()
    pts[np.argmin(np.linalg.norm(pts, axis=1))] = 0.0
    template = design_from_points(pts, di_disk_design.domain, di_disk_design.scheme)
    res = simulate_dynamic(double_integrator, di_cert, template, (0.0, 0.0),
                           ZoomSchedule(1.0, 0.1), 60.0, epsilon=0.5, dt=0.01)
    assert np.all(res.trajectory.states == 0.0)
    assert res.t0 == 0.0 and len(res.stage_M) > 1


def test_dynamic_locks_at_first_review(double_integrator, di_cert, di_disk_design):
    res = simulate_dynamic(double_integrator, di_cert, di_disk_design, (0.5, 0.0),
                           ZoomSchedule(1.0, 0.1), 10.0, epsilon=0.5, dt=0.01)
    lock = res.trajectory.first("zoom_out_locked")
    assert lock.t == 0.0
    assert math.isclose(lock.data[1], di_cert.kappa * 1.0)


def test_dynamic_zoom_out_then_in(double_integrator, di_cert, di_disk_design):
    sched = ZoomSchedule(0.1, 0.05)
    res = simulate_dynamic(double_integrator, di_cert, di_disk_design, (3.0, -1.0), sched,
                           80.0, epsilon=0.5, dt=0.005)
    lock = res.trajectory.first("zoom_out_locked")
    assert lock.t > 0
    assert abs(lock.t / 0.05 - round(lock.t / 0.05)) < 1e-9
    ratios = np.array(res.stage_M[1:]) / np.array(res.stage_M[:-1])
    assert np.allclose(ratios, res.contraction, rtol=1e-9, atol=0)
    assert res.trajectory.first("saturated") is None
    assert np.linalg.norm(res.trajectory.final_state) < 1e-2 * math.hypot(3.0, 1.0)
    assert all(e.kind != "left_R1" for e in res.trajectory.events)


def test_dynamic_rejects_coarse_template(double_integrator, di_cert):
    spec = DomainSpec.disk(1.0)
    coarse = design_from_points(init_points(spec, 20, seed=0), spec, WeightScheme.uniform())
    with pytest.raises(CertificationError):
        simulate_dynamic(double_integrator, di_cert, coarse, (0.1, 0.0),
                         ZoomSchedule(1.0, 0.1), 5.0, epsilon=0.1)


def test_contraction_formula(di_cert):
    r = zoom_contraction(di_cert, 0.1, 0.05, 1.0)
    assert math.isclose(r, math.sqrt(di_cert.lambda_max / di_cert.lambda_min) * 2.2
                        * di_cert.pbk_norm * 0.05)


def test_dynamic_many_stages_stay_certified(double_integrator, di_cert, di_disk_design):
    # sixty stages shrink M by about 1e-7; nearest-point ties must not depend on the scale
    res = simulate_dynamic(double_integrator, di_cert, di_disk_design, (4.0, -2.0),
                           ZoomSchedule(0.5, 0.1), 400.0, epsilon=0.5, record_every=50)
    kinds = {e.kind for e in res.trajectory.events}
    assert res.stage_M[-1] / res.stage_M[0] < 1e-6
    assert "left_R1" not in kinds and "saturated" not in kinds
