"""Closed-loop simulation of quantized state feedback.

The state obeys ``x' = (A + BK) x + BK e`` with ``e = q(x) - x``.  The
quantizer output ``q(x_k)`` is sampled at the start of each step and held over
it, so the step integrates ``x' = A x + BK q`` exactly as far as classical
fourth-order Runge-Kutta allows.  Events are recorded against
the Lyapunov levels of a certificate: ``entered_R2`` when ``V`` first drops to
the inner level, ``left_R1`` when it rises above the outer one, and
``saturated`` (terminal) when the state leaves the quantizer's range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import (
    CertificateReport,
    CertificationError,
    CertParams,
    LinearPlant,
    LyapunovCert,
    certify,
    destabilization_measure,
)
from .lloyd import QuantizerDesign
from . import _simkernel as _sk
from .quantizer import (
    SATURATED,
    TIE_RTOL,
    DesignQuantizer,
    binary_ball_quantizer,
    scale_design,
)

LEVEL_RTOL = 1e-12
EVENT_KINDS = ("entered_R2", "left_R1", "saturated", "rescaled", "zoom_out_locked")


@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    data: tuple = ()


@dataclass
class Trajectory:
    """Sampled solution: ``times[k] = t0 + k dt`` (possibly decimated), states,
    the cell index used from each sample and ``V`` at each sample."""

    times: np.ndarray
    states: np.ndarray
    cell_index: np.ndarray
    V: np.ndarray
    events: list
    dt: float
    # largest one-step rise and largest one-step change of V before R2 entry
    monitor: dict = field(default_factory=dict)

    def first(self, kind: str) -> Event | None:
        return next((e for e in self.events if e.kind == kind), None)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def rk4_step(F: np.ndarray, G: np.ndarray, X: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step of ``x' = F x + g`` for each row of ``X`` (``g`` row of ``G``)."""
    k1 = X @ F.T + G
    k2 = (X + 0.5 * h * k1) @ F.T + G
    k3 = (X + 0.5 * h * k2) @ F.T + G
    k4 = (X + h * k3) @ F.T + G
    return X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _as_quantizer(q):
    if isinstance(q, QuantizerDesign):
        return DesignQuantizer(q)
    if not hasattr(q, "quantize_many"):
        raise TypeError("quantizer must be a design or provide quantize_many")
    return q


def _levels(report: CertificateReport | None) -> tuple:
    if report is None:
        return math.inf, -math.inf
    return report.R1_level, report.R2_level


def _check_run(plant: LinearPlant, X0: np.ndarray, t_final: float, dt: float | None) -> float:
    if plant.n != 2:
        raise ValueError("simulation is planar: the plant must have n = 2")
    if not np.all(np.isfinite(X0)):
        raise ValueError("initial state must be finite")
    if not t_final >= 0:
        raise ValueError("t_final must be nonnegative")
    dt = plant.default_dt() if dt is None else float(dt)
    if not dt > 0:
        raise ValueError("dt must be positive")
    return dt


_EVENT_NAMES = {_sk.EV_ENTERED: "entered_R2", _sk.EV_LEFT: "left_R1", _sk.EV_SATURATED: "saturated"}


def _integrate(plant, cert, quantizer, X0, t0, n_steps, dt, R1, R2,
               stop_on_entry=False, record_every=1, compiled=True):
    """Advance every row of ``X0`` for ``n_steps`` steps and return one Trajectory per row.

    Nearest-point designs on ball-shaped or square domains run in the compiled
    loop; everything else (and ``compiled=False``) runs the reference loop below.
    """
    if (compiled and isinstance(quantizer, DesignQuantizer)
            and quantizer.design.domain.kind in ("disk", "annulus", "square")):
        return _integrate_compiled(plant, cert, quantizer, X0, t0, n_steps, dt, R1, R2,
                                   stop_on_entry, record_every)
    # within a cell x' = A x + BK q is affine, so RK4 keeps its order between switches
    F = plant.A
    BK = plant.B @ plant.K
    X = np.array(X0, dtype=float, copy=True)
    B = len(X)
    V = cert.V(X)
    r1 = R1 * (1.0 + LEVEL_RTOL)
    inside_R1 = V <= r1
    in_R2 = V <= R2
    entered = in_R2.copy()
    alive = np.ones(B, dtype=bool)
    events = [[Event(t0, "entered_R2")] if e else [] for e in in_R2]
    rise = np.zeros(B)
    change = np.zeros(B)
    rec_t = [[t0] for _ in range(B)]
    rec_x = [[X[i].copy()] for i in range(B)]
    rec_v = [[V[i]] for i in range(B)]
    if stop_on_entry:
        alive &= ~entered
    step = 0
    while step < n_steps and alive.any():
        act = np.flatnonzero(alive)
        idx, Q = quantizer.quantize_many(X[act])
        t = t0 + step * dt
        sat = idx == SATURATED
        if sat.any():
            for i in act[sat]:
                events[i].append(Event(t, "saturated"))
                alive[i] = False
                if rec_t[i][-1] != t:
                    rec_t[i].append(t)
                    rec_x[i].append(X[i].copy())
                    rec_v[i].append(V[i])
            keep = ~sat
            act, idx, Q = act[keep], idx[keep], Q[keep]
            if not len(act):
                break
        Xn = rk4_step(F, Q @ BK.T, X[act], dt)
        Vn = cert.V(Xn)
        step += 1
        t = t0 + step * dt
        pre = ~entered[act]
        dV = Vn - V[act]
        rise[act[pre]] = np.maximum(rise[act[pre]], dV[pre])
        change[act[pre]] = np.maximum(change[act[pre]], np.abs(dV[pre]))
        X[act] = Xn
        V[act] = Vn
        now_in_R2 = Vn <= R2
        now_in_R1 = Vn <= r1
        for j in np.flatnonzero(now_in_R2 & ~in_R2[act]):
            events[act[j]].append(Event(t, "entered_R2"))
        for j in np.flatnonzero(~now_in_R1 & inside_R1[act]):
            events[act[j]].append(Event(t, "left_R1"))
        in_R2[act] = now_in_R2
        inside_R1[act] = now_in_R1
        entered[act] |= now_in_R2
        done = np.zeros(len(act), dtype=bool)
        if stop_on_entry:
            done = entered[act]
            alive[act[done]] = False
        last = step == n_steps
        for j, i in enumerate(act):
            if step % record_every == 0 or last or done[j]:
                rec_t[i].append(t)
                rec_x[i].append(Xn[j].copy())
                rec_v[i].append(Vn[j])
    out = []
    for i in range(B):
        states = np.array(rec_x[i])
        # the quantizer is a pure function of the state, so the cell used from
        # each sample can be recovered afterwards
        cells, _ = quantizer.quantize_many(states)
        out.append(Trajectory(np.array(rec_t[i]), states, cells, cert.V(states), events[i], dt,
                              {"max_rise": float(rise[i]), "max_change": float(change[i])}))
    return out, X


def _integrate_compiled(plant, cert, quantizer, X0, t0, n_steps, dt, R1, R2,
                        stop_on_entry, record_every):
    design = quantizer.design
    L = design.scheme.metric
    use_metric = L is not None
    L = np.ascontiguousarray(L if use_metric else np.eye(2))
    kind = _sk.DOM_SQUARE if design.domain.kind == "square" else _sk.DOM_BALL
    X0 = np.ascontiguousarray(X0, dtype=float)
    rec_n, rec_step, rec_x, rec_v, ev, rise, change, X = _sk.run_nearest(
        np.ascontiguousarray(plant.A), np.ascontiguousarray(plant.B @ plant.K),
        np.ascontiguousarray(cert.P), np.ascontiguousarray(design.points), L, use_metric, kind,
        float(design.domain.M), X0, int(n_steps), float(dt), float(R1), float(R2),
        bool(stop_on_entry), int(record_every), TIE_RTOL, LEVEL_RTOL)
    events = [[] for _ in range(len(X0))]
    for i, step, k in ev:
        events[i].append(Event(t0 + step * dt, _EVENT_NAMES[k]))
    out = []
    for i in range(len(X0)):
        n = rec_n[i]
        states = rec_x[i, :n].copy()
        cells, _ = quantizer.quantize_many(states)
        # V is re-evaluated in the reference arithmetic so both paths report identical values
        out.append(Trajectory(t0 + rec_step[i, :n] * dt, states, cells, cert.V(states),
                              events[i], dt,
                              {"max_rise": float(rise[i]), "max_change": float(change[i])}))
    return out, X


def simulate_static(plant: LinearPlant, cert: LyapunovCert, design, x0, t_final: float,
                    dt: float | None = None, report: CertificateReport | None = None,
                    stop_on_entry: bool = False, record_every: int = 1) -> Trajectory:
    """Simulate one trajectory with a fixed quantizer.

    ``design`` is a :class:`QuantizerDesign` or any object with
    ``quantize_many``.  Without a ``report`` no level events are logged.
    """
    X0 = np.asarray(x0, dtype=float).reshape(1, 2)
    dt = _check_run(plant, X0, t_final, dt)
    R1, R2 = _levels(report)
    n = int(math.ceil(t_final / dt - 1e-9))
    trajs, _ = _integrate(plant, cert, _as_quantizer(design), X0, 0.0, n, dt, R1, R2,
                          stop_on_entry, record_every)
    return trajs[0]


def simulate_batch(plant: LinearPlant, cert: LyapunovCert, design, X0, t_final: float,
                   dt: float | None = None, report: CertificateReport | None = None,
                   stop_on_entry: bool = True, record_every: int = 100) -> list:
    """Simulate many initial states together (vectorized over the batch).

    Each row follows the same dynamics as :func:`simulate_static`; samples are kept
    every ``record_every`` steps while events are checked at every step.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    dt = _check_run(plant, X0, t_final, dt)
    R1, R2 = _levels(report)
    n = int(math.ceil(t_final / dt - 1e-9))
    trajs, _ = _integrate(plant, cert, _as_quantizer(design), X0, 0.0, n, dt, R1, R2,
                          stop_on_entry, record_every)
    return trajs


def sample_in_level_set(cert: LyapunovCert, level: float, k: int, seed: int = 0) -> np.ndarray:
    """``k`` seeded points uniform in the ellipse ``V(x) <= level``."""
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * math.pi, k)
    r = np.sqrt(rng.uniform(0.0, 1.0, k))
    U = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    # x = C^-1 u with P = C^T C maps the unit disk onto V <= 1
    C = np.linalg.cholesky(cert.P).T
    return math.sqrt(level) * np.linalg.solve(C, U.T).T


@dataclass(frozen=True)
class Verification:
    passed: bool
    violation: str | None = None
    t: float | None = None


def verify_certificate(traj: Trajectory, report: CertificateReport) -> Verification:
    """Check a trajectory against a feasible certificate.

    Passes iff there is no ``left_R1`` or ``saturated`` event before the first
    ``entered_R2``, that entry happens by ``T + dt``, and ``V`` does not rise
    before entry by more than ``10 dt max|V'|`` (the rate estimated from the
    largest one-step change).
    """
    if not report.feasible:
        return Verification(False, "certificate is not feasible")
    entry = traj.first("entered_R2")
    t_entry = entry.t if entry is not None else math.inf
    for e in traj.events:
        if e.kind in ("left_R1", "saturated") and e.t <= t_entry:
            return Verification(False, f"{e.kind} before entering R2", e.t)
    if entry is None:
        return Verification(False, "never entered R2")
    if entry.t > report.T + traj.dt * (1.0 + 1e-9):
        return Verification(False, f"entered R2 at {entry.t!r} after T + dt", entry.t)
    pre = traj.times <= t_entry
    v = traj.V[pre]
    rise = max(traj.monitor.get("max_rise", 0.0), float(np.max(np.diff(v), initial=0.0)))
    change = max(traj.monitor.get("max_change", 0.0), float(np.max(np.abs(np.diff(v)), initial=0.0)))
    if rise > 0.0 and rise > 10.0 * change:
        return Verification(False, f"V increased by {rise!r} before entering R2")
    return Verification(True)


@dataclass(frozen=True)
class ZoomSchedule:
    """Zoom-out growth law ``mu(t) = mu0 exp(growth_rate t)`` read at multiples of ``review_dt``."""

    mu0: float
    review_dt: float
    growth_rate: float | None = None

    def __post_init__(self):
        if not self.mu0 > 0 or not self.review_dt > 0:
            raise ValueError("mu0 and review_dt must be positive")
        if self.growth_rate is not None and not self.growth_rate > 0:
            raise ValueError("growth_rate must be positive")

    def rate(self, plant: LinearPlant) -> float:
        norm_a = float(np.linalg.norm(plant.A, 2))
        g = 2.0 * norm_a + 1.0 if self.growth_rate is None else self.growth_rate
        if not g > norm_a:
            raise ValueError(f"growth rate {g!r} does not dominate |A| = {norm_a!r}")
        return g

    def mu(self, t: float, plant: LinearPlant) -> float:
        return self.mu0 * math.exp(self.rate(plant) * t)


@dataclass
class DynamicResult:
    trajectory: Trajectory
    contraction: float
    stage_M: list
    stage_T: list
    t0: float


def zoom_contraction(cert: LyapunovCert, epsilon: float, delta_template: float, M_ref: float) -> float:
    """Ratio ``M_next / M`` of one zoom-in stage: the new R1 level equals the old R2 level."""
    return cert.kappa * 2.0 * (1.0 + epsilon) * cert.pbk_norm * delta_template / M_ref


def simulate_dynamic(plant: LinearPlant, cert: LyapunovCert, template: QuantizerDesign, x0,
                     schedule: ZoomSchedule, t_final: float, epsilon: float,
                     dt: float | None = None, record_every: int = 1) -> DynamicResult:
    """Zoom out with zero control until a binary reading captures the state, then zoom in.

    Each zoom-in stage runs the template rescaled to the current ``M`` for the
    certified time ``T`` and then shrinks ``M`` by the contraction ratio.
    """
    if template.domain.kind not in ("disk", "square"):
        raise CertificationError("the template domain must contain the ball of radius M")
    X0 = np.asarray(x0, dtype=float).reshape(1, 2)
    dt = _check_run(plant, X0, t_final, dt)
    M_ref = template.domain.M
    delta_t = destabilization_measure(template, cert, "delta")
    ref = certify("L2", cert, CertParams(M=M_ref, epsilon=epsilon), delta_t)
    if not ref.feasible:
        raise CertificationError("template design is not L2-certified at its reference M")
    rho = zoom_contraction(cert, epsilon, delta_t, M_ref)
    if not rho < 1.0:
        raise CertificationError(f"contraction factor {rho!r} >= 1; the template is too coarse")
    g = schedule.rate(plant)

    # zoom-out: u = 0, reviews at multiples of review_dt
    zero = np.zeros((2, 2))
    X = X0.copy()
    t = 0.0
    times, states = [0.0], [X[0].copy()]
    per_review = max(1, int(round(schedule.review_dt / dt)))
    k = 0
    while True:
        mu = schedule.mu0 * math.exp(g * t)
        if binary_ball_quantizer(mu).inside(X[0]):
            break
        if t >= t_final:
            raise RuntimeError("zoom-out did not capture the state before t_final")
        for _ in range(per_review):
            X = rk4_step(plant.A, zero[:1], X, dt)
            k += 1
            t = k * dt
            if k % record_every == 0:
                times.append(t)
                states.append(X[0].copy())
    t0 = t
    M = cert.kappa * mu
    events = [Event(t0, "zoom_out_locked", (t0, M))]
    if times[-1] != t0:
        times.append(t0)
        states.append(X[0].copy())
    cells = [-1] * len(times)
    V = list(cert.V(np.array(states)))
    monitor = {"max_rise": 0.0, "max_change": 0.0}
    stage_M, stage_T = [], []

    while t < t_final - 1e-12:
        s = M / M_ref
        rep = certify("L2", cert, CertParams(M=M, epsilon=epsilon), delta_t * s)
        stage_M.append(M)
        stage_T.append(rep.T)
        n = int(math.ceil(rep.T / dt - 1e-9))
        n = min(n, int(math.ceil((t_final - t) / dt - 1e-9)))
        design = scale_design(template, s)
        trajs, X = _integrate(plant, cert, DesignQuantizer(design), X, k * dt, n, dt,
                              rep.R1_level, rep.R2_level, False, record_every)
        tr = trajs[0]
        times.extend(tr.times[1:])
        states.extend(tr.states[1:])
        cells[-1] = int(tr.cell_index[0])
        cells.extend(tr.cell_index[1:].tolist())
        V.extend(tr.V[1:])
        events.extend(tr.events)
        k += n
        t = k * dt
        if any(e.kind == "saturated" for e in tr.events):
            break
        if n == 0 or t >= t_final - 1e-12:
            break
        M = rho * M
        events.append(Event(t, "rescaled", (M,)))
    traj = Trajectory(np.array(times), np.array(states), np.array(cells, dtype=np.int64),
                      np.array(V), events, dt, monitor)
    return DynamicResult(traj, rho, stage_M, stage_T, t0)
