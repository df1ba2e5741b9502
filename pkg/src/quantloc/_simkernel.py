"""Compiled closed-loop stepping for nearest-point quantizers (numba).

Mirrors the generic loop in :mod:`quantloc.sim` step for step; the generic
loop remains the reference and handles every other quantizer.
"""

from __future__ import annotations

import numpy as np
from numba import njit

EV_ENTERED = 0
EV_LEFT = 1
EV_SATURATED = 2

DOM_BALL = 0
DOM_SQUARE = 1


@njit(cache=True)
def _push(ev, count, i, step, kind):
    if count == ev.shape[0]:
        bigger = np.empty((2 * ev.shape[0], 3), dtype=np.int64)
        bigger[:count] = ev
        ev = bigger
    ev[count, 0] = i
    ev[count, 1] = step
    ev[count, 2] = kind
    return ev, count + 1


@njit(cache=True)
def _nearest(x0, x1, pts, L, use_metric, tie_rtol, pscale):
    n = pts.shape[0]
    d2 = np.empty(n)
    best = np.inf
    for j in range(n):
        dx = x0 - pts[j, 0]
        dy = x1 - pts[j, 1]
        if use_metric:
            s = 0.0
            for r in range(L.shape[0]):
                y = L[r, 0] * dx + L[r, 1] * dy
                s += y * y
            d2[j] = s
        else:
            d2[j] = dx * dx + dy * dy
        if d2[j] < best:
            best = d2[j]
    lim = best + tie_rtol * (pscale + (x0 * x0 + x1 * x1))
    for j in range(n):
        if d2[j] <= lim:
            return j
    return n - 1


@njit(cache=True)
def _V(P, x0, x1):
    return x0 * (P[0, 0] * x0 + P[0, 1] * x1) + x1 * (P[1, 0] * x0 + P[1, 1] * x1)


@njit(cache=True)
def run_nearest(F, BK, P, pts, L, use_metric, dom_kind, dom_M, X0, n_steps, dt, R1, R2,
                stop_on_entry, record_every, tie_rtol, level_rtol):
    B = X0.shape[0]
    cap = n_steps // record_every + 3
    rec_n = np.zeros(B, dtype=np.int64)
    rec_step = np.empty((B, cap), dtype=np.int64)
    rec_x = np.empty((B, cap, 2))
    rec_v = np.empty((B, cap))
    rise = np.zeros(B)
    change = np.zeros(B)
    ev = np.empty((16, 3), dtype=np.int64)
    nev = 0
    X = X0.copy()
    r1 = R1 * (1.0 + level_rtol)
    limit = dom_M + 1e-9 * dom_M
    pscale = 0.0
    for j in range(pts.shape[0]):
        pscale = max(pscale, pts[j, 0] * pts[j, 0] + pts[j, 1] * pts[j, 1])
    for i in range(B):
        x0 = X[i, 0]
        x1 = X[i, 1]
        v = _V(P, x0, x1)
        in1 = v <= r1
        in2 = v <= R2
        entered = in2
        rec_step[i, 0] = 0
        rec_x[i, 0, 0] = x0
        rec_x[i, 0, 1] = x1
        rec_v[i, 0] = v
        rec_n[i] = 1
        if in2:
            ev, nev = _push(ev, nev, i, 0, EV_ENTERED)
            if stop_on_entry:
                continue
        h = dt
        for step in range(n_steps):
            if dom_kind == DOM_BALL:
                inside = np.sqrt(x0 * x0 + x1 * x1) <= limit
            else:
                inside = max(abs(x0), abs(x1)) <= limit
            if not inside:
                ev, nev = _push(ev, nev, i, step, EV_SATURATED)
                k = rec_n[i]
                if rec_step[i, k - 1] != step:
                    rec_step[i, k] = step
                    rec_x[i, k, 0] = x0
                    rec_x[i, k, 1] = x1
                    rec_v[i, k] = v
                    rec_n[i] = k + 1
                break
            j = _nearest(x0, x1, pts, L, use_metric, tie_rtol, pscale)
            g0 = BK[0, 0] * pts[j, 0] + BK[0, 1] * pts[j, 1]
            g1 = BK[1, 0] * pts[j, 0] + BK[1, 1] * pts[j, 1]
            # classical RK4 for x' = A x + BK q with the quantizer output q held over the step
            a0 = F[0, 0] * x0 + F[0, 1] * x1 + g0
            a1 = F[1, 0] * x0 + F[1, 1] * x1 + g1
            y0 = x0 + 0.5 * h * a0
            y1 = x1 + 0.5 * h * a1
            b0 = F[0, 0] * y0 + F[0, 1] * y1 + g0
            b1 = F[1, 0] * y0 + F[1, 1] * y1 + g1
            y0 = x0 + 0.5 * h * b0
            y1 = x1 + 0.5 * h * b1
            c0 = F[0, 0] * y0 + F[0, 1] * y1 + g0
            c1 = F[1, 0] * y0 + F[1, 1] * y1 + g1
            y0 = x0 + h * c0
            y1 = x1 + h * c1
            d0 = F[0, 0] * y0 + F[0, 1] * y1 + g0
            d1 = F[1, 0] * y0 + F[1, 1] * y1 + g1
            x0 = x0 + (h / 6.0) * (a0 + 2.0 * b0 + 2.0 * c0 + d0)
            x1 = x1 + (h / 6.0) * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
            vn = _V(P, x0, x1)
            if not entered:
                dv = vn - v
                if dv > rise[i]:
                    rise[i] = dv
                if abs(dv) > change[i]:
                    change[i] = abs(dv)
            v = vn
            now2 = v <= R2
            now1 = v <= r1
            if now2 and not in2:
                ev, nev = _push(ev, nev, i, step + 1, EV_ENTERED)
            if in1 and not now1:
                ev, nev = _push(ev, nev, i, step + 1, EV_LEFT)
            in2 = now2
            in1 = now1
            entered = entered or now2
            done = stop_on_entry and entered
            if (step + 1) % record_every == 0 or step + 1 == n_steps or done:
                k = rec_n[i]
                rec_step[i, k] = step + 1
                rec_x[i, k, 0] = x0
                rec_x[i, k, 1] = x1
                rec_v[i, k] = v
                rec_n[i] = k + 1
            if done:
                break
        X[i, 0] = x0
        X[i, 1] = x1
    return rec_n, rec_step, rec_x, rec_v, ev[:nev], rise, change, X
