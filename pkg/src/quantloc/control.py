"""Lyapunov certificates for quantized linear feedback and the invariance-lemma arithmetic.

The closed loop is ``x' = (A + BK) x + BK e`` with ``e = q(x) - x``.  With ``P``
solving ``(A+BK)^T P + P (A+BK) = -I`` and ``V(x) = x^T P x``, a bound on the
quantization error turns into two nested invariant ellipsoids ``R1 ⊃ R2`` and
a time bound ``T`` for reaching the inner one.  The functions here compute
those quantities; :mod:`quantloc.sim` checks them against trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .centers import SeparationError, WeightScheme, eval_cell_cost
from .geometry import DomainSpec, Polygon, domain_region, intersect, polygonalize_domain

HURWITZ_MARGIN = 1e-9
INVERSE_TOL = 1e-10
LEMMAS = ("L1", "L2", "L3", "L4")
MEASURE_VARIANTS = ("delta", "delta_pbk", "delta_s", "delta_rw")


class CertificationError(ValueError):
    """Inputs outside the domain where a certificate is defined."""


@dataclass(frozen=True, eq=False)
class LinearPlant:
    """``x' = A x + B u`` under the state feedback ``u = K x``."""

    A: np.ndarray
    B: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        B = B.reshape(len(A), -1) if B.ndim < 2 else B
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise CertificationError("A must be square")
        if B.shape[0] != n or K.shape != (B.shape[1], n):
            raise CertificationError(f"shape mismatch: A {A.shape}, B {B.shape}, K {K.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B)) and np.all(np.isfinite(K))):
            raise CertificationError("plant matrices must be finite")
        if not B.any() or not K.any():
            raise CertificationError("B and K must be nonzero")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "K", K)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def closed_loop(self) -> np.ndarray:
        return self.A + self.B @ self.K

    def is_hurwitz(self) -> bool:
        return bool(np.max(np.linalg.eigvals(self.closed_loop).real) < -HURWITZ_MARGIN)

    def default_dt(self) -> float:
        """Integration step ``1e-3 / |A + BK|``."""
        return 1e-3 / float(np.linalg.norm(self.closed_loop, 2))

    def __eq__(self, other):
        if not isinstance(other, LinearPlant):
            return NotImplemented
        return all(np.array_equal(x, y) for x, y in
                   ((self.A, other.A), (self.B, other.B), (self.K, other.K)))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LyapunovCert:
    P: np.ndarray
    lambda_min: float
    lambda_max: float
    pbk_norm: float
    pbk: np.ndarray

    @property
    def kappa(self) -> float:
        """Condition number sqrt(lambda_max / lambda_min) linking balls and level sets."""
        return math.sqrt(self.lambda_max / self.lambda_min)

    def V(self, x) -> np.ndarray | float:
        """Lyapunov function ``x^T P x`` for one point or a ``(k, n)`` batch."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] == 2:
            # same operation order as the compiled simulator, so both agree bitwise
            P = self.P
            a, b = x[..., 0], x[..., 1]
            v = a * (P[0, 0] * a + P[0, 1] * b) + b * (P[1, 0] * a + P[1, 1] * b)
            return float(v) if x.ndim == 1 else v
        if x.ndim == 1:
            return float(x @ self.P @ x)
        return np.einsum("ij,jk,ik->i", x, self.P, x)


def _sym_index(n: int) -> list:
    return [(i, j) for i in range(n) for j in range(i, n)]


def lyapunov_solve(plant: LinearPlant) -> LyapunovCert:
    """Solve ``F^T P + P F = -I`` for ``F = A + BK`` over the independent entries of ``P``."""
    if not plant.is_hurwitz():
        raise CertificationError("A + BK is not Hurwitz; no Lyapunov certificate exists")
    F = plant.closed_loop
    n = plant.n
    idx = _sym_index(n)
    col = {pair: c for c, pair in enumerate(idx)}

    def var(i, j):
        return col[(i, j) if i <= j else (j, i)]

    # row (i, j) of F^T P + P F = sum_k F[k,i] P[k,j] + P[i,k] F[k,j]
    S = np.zeros((len(idx), len(idx)))
    rhs = np.zeros(len(idx))
    for r, (i, j) in enumerate(idx):
        for k in range(n):
            S[r, var(k, j)] += F[k, i]
            S[r, var(i, k)] += F[k, j]
        rhs[r] = -1.0 if i == j else 0.0
    try:
        p = np.linalg.solve(S, rhs)
    except np.linalg.LinAlgError as exc:  # cannot happen for Hurwitz F
        raise RuntimeError("singular Lyapunov system for a Hurwitz matrix") from exc
    P = np.zeros((n, n))
    for (i, j), v in zip(idx, p):
        P[i, j] = P[j, i] = v
    lo, hi = _eig_extremes(P)
    if lo <= 0.0:
        raise RuntimeError("Lyapunov solution is not positive definite")
    pbk = P @ plant.B @ plant.K
    return LyapunovCert(P, lo, hi, float(np.linalg.norm(pbk, 2)), pbk)


def _eig_extremes(P: np.ndarray) -> tuple:
    if P.shape == (2, 2):
        mean = 0.5 * (P[0, 0] + P[1, 1])
        rad = math.hypot(0.5 * (P[0, 0] - P[1, 1]), P[0, 1])
        return mean - rad, mean + rad
    w = np.linalg.eigvalsh(P)
    return float(w[0]), float(w[-1])


@dataclass(frozen=True)
class CertParams:
    """Certificate parameters: outer radius M, inner radius m, margins epsilon and lambda,
    radial and spherical level counts N1 and N2."""

    M: float
    epsilon: float
    m: float = 0.0
    lam: float | None = None
    N1: int | None = None
    N2: int | None = None

    def __post_init__(self):
        if not self.M > 0:
            raise CertificationError("M must be positive")
        if not 0.0 < self.epsilon < 1.0:
            raise CertificationError("epsilon must lie in (0, 1)")
        if self.m < 0:
            raise CertificationError("m must be nonnegative")
        if self.lam is not None and not 0.0 < self.lam < 1.0:
            raise CertificationError("lambda must lie in (0, 1)")
        for name in ("N1", "N2"):
            v = getattr(self, name)
            if v is not None and (int(v) != v or v < 1):
                raise CertificationError(f"{name} must be a positive integer")


@dataclass(frozen=True)
class CertificateReport:
    lemma: str
    feasible: bool
    R1_level: float
    R2_level: float
    T: float | None
    ultimate_bound: float | None
    measure: float
    measure_kind: str = "delta"
    threshold: float | None = None
    attractor_level: float | None = None
    notes: tuple = field(default=())

    def __post_init__(self):
        if self.feasible and not (self.R2_level < self.R1_level and self.T is not None
                                  and self.T > 0):
            raise ValueError("a feasible report needs R2 < R1 and T > 0")


def _linear_report(lemma, cert, R1, R2, rate, measure, kind, threshold, extra_ok=True,
                   attractor=None, notes=()):
    feasible = bool(R1 > R2 and extra_ok)
    T = (R1 - R2) / rate if feasible else None
    bound = math.sqrt(R2 / cert.lambda_min) if feasible else None
    return CertificateReport(lemma, feasible, float(R1), float(R2),
                             None if T is None else float(T), bound, float(measure), kind,
                             threshold, attractor, tuple(notes))


def certify(lemma: str, cert: LyapunovCert, params: CertParams, measure: float,
            measure_kind: str | None = None, r2_exponent: str = "N1") -> CertificateReport:
    """Check the invariance conditions of one lemma and compute R1, R2, T and the ultimate bound.

    ``measure`` is the destabilization measure matching the lemma: the
    worst-case error (or its ``delta_pbk`` refinement) for L2, the spherical
    error for L3 and the radially weighted error for L4.  ``r2_exponent``
    selects ``(a/b)^N1`` (default) or ``(a/b)^(2 N1)`` in the L3 inner level.
    """
    if not measure >= 0 or not math.isfinite(measure):
        raise CertificationError("measure must be a finite nonnegative number")
    lmin, lmax, g = cert.lambda_min, cert.lambda_max, cert.pbk_norm
    eps, M = params.epsilon, params.M
    R1 = lmin * M * M
    if lemma == "L2":
        kind = measure_kind or "delta"
        if kind not in ("delta", "delta_pbk"):
            raise CertificationError("L2 takes a delta or delta_pbk measure")
        # with delta_pbk the product |PBK|^2 Delta^2 is replaced by Delta_PBK^2
        err2 = measure ** 2 if kind == "delta_pbk" else g * g * measure ** 2
        scale = 1.0 if kind == "delta_pbk" else g
        R2 = lmax * 4.0 * (1.0 + eps) ** 2 * err2
        threshold = M / (cert.kappa * 2.0 * (1.0 + eps) * scale)
        if measure == 0.0:
            raise CertificationError("L2 needs a positive measure: with zero error R2 is the "
                                     "origin and no finite entry time exists")
        rate = 4.0 * err2 * (1.0 + eps) * eps
        return _linear_report("L2", cert, R1, R2, rate, measure, kind, threshold,
                              attractor=float(lmax * 4.0 * err2))
    if lemma == "L3":
        if params.lam is None or params.N1 is None:
            raise CertificationError("L3 needs lambda and N1")
        if params.lam + eps >= 1.0:
            raise CertificationError("L3 needs lambda + epsilon < 1")
        if r2_exponent not in ("N1", "2N1"):
            raise CertificationError("r2_exponent must be 'N1' or '2N1'")
        a = 1.0 - params.lam / (2.0 * g)
        b = 1.0 + params.lam / (2.0 * g)
        ratio = a / b
        power = params.N1 if r2_exponent == "N1" else 2 * params.N1
        R2 = lmax * ratio ** power * M * M
        threshold = (1.0 - params.lam - eps) / (2.0 * g)
        rate = ratio ** (2 * params.N1) * M * M * eps
        return _linear_report("L3", cert, R1, R2, rate, measure, "delta_s", threshold,
                              extra_ok=measure <= threshold,
                              notes=(f"r2_exponent={r2_exponent}",))
    if lemma == "L4":
        m = params.m
        if not 0.0 < m:
            raise CertificationError("L4 needs an inner radius m > 0")
        if m > M:
            raise CertificationError("L4 needs m <= M")
        R2 = lmax * m * m
        threshold = (1.0 - eps) / (2.0 * g)
        return _linear_report("L4", cert, R1, R2, m * m * eps, measure, "delta_rw", threshold,
                              extra_ok=measure <= threshold)
    if lemma == "L1":
        raise CertificationError("L1 is certified with certify_nonlinear")
    raise CertificationError(f"unknown lemma {lemma!r}")


class MonotoneFn:
    """Strictly increasing scalar function with ``f(0) = 0`` and a bisection inverse."""

    def __init__(self, fn: Callable[[float], float], name: str = "f", check: bool = True):
        self.fn = fn
        self.name = name
        if check:
            self._spot_check()

    def __call__(self, s: float) -> float:
        return float(self.fn(s))

    def _spot_check(self) -> None:
        if abs(self(0.0)) > 1e-12:
            raise CertificationError(f"{self.name}(0) must be 0")
        s = np.sort(np.exp(np.random.default_rng(0).uniform(-12.0, 6.0, size=(100, 2))), axis=1)
        for lo, hi in s:
            if lo < hi and not self(lo) < self(hi):
                raise CertificationError(f"{self.name} is not strictly increasing near {lo:.3g}")

    def inverse(self, y: float, tol: float = INVERSE_TOL) -> float:
        """Solve ``f(s) = y`` for ``s >= 0`` by bisection on an expanding bracket."""
        if y < 0:
            raise CertificationError("inverse of a negative value")
        if y == 0:
            return 0.0
        lo, hi = 0.0, 1.0
        while self(hi) < y:
            lo, hi = hi, 2.0 * hi
            if hi > 1e300:
                raise CertificationError(f"{self.name} does not reach {y}")
        while hi - lo > tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if self(mid) < y:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def certify_nonlinear(alpha1: MonotoneFn, alpha2: MonotoneFn, alpha3: MonotoneFn,
                      rho: MonotoneFn, M: float, delta: float) -> CertificateReport:
    """Invariance check for a nonlinear loop given its comparison functions."""
    if not M > 0 or not delta > 0:
        raise CertificationError("M and delta must be positive")
    R1 = alpha1(M)
    r = rho(delta)
    R2 = alpha2(r)
    feasible = R1 > R2
    T = (R1 - R2) / alpha3(r) if feasible else None
    bound = alpha1.inverse(R2) if feasible else None
    return CertificateReport("L1", bool(feasible), R1, R2, T, bound, float(delta), "delta")


def destabilization_measure(design, cert: LyapunovCert | None, variant: str,
                            region: Polygon | DomainSpec | None = None) -> float:
    """Worst quantization error of ``design`` in one of four senses.

    ``delta`` is the largest ``|q_i - x|``, ``delta_pbk`` the largest
    ``|PBK (q_i - x)|``, ``delta_s`` the worst error on the unit circle (the
    design must live on a circle domain) and ``delta_rw`` the largest
    ``|q_i - x| / |x|``.  With ``region`` each cell is first intersected with
    it, and the region must be covered by the cells.
    """
    if variant not in MEASURE_VARIANTS:
        raise CertificationError(f"unknown measure variant {variant!r}")
    if variant == "delta_pbk":
        if cert is None:
            raise CertificationError("delta_pbk needs a Lyapunov certificate")
        scheme = WeightScheme.linear_map(cert.pbk)
    elif variant == "delta_rw":
        scheme = WeightScheme.radial_inverse()
    else:
        scheme = WeightScheme.uniform()
    if variant == "delta_s":
        if design.domain.kind != "circle" or design.domain.M != 1.0 or region is not None:
            raise CertificationError("delta_s is defined for designs on the unit circle")
        from .quantizer import SphericalQuantizer

        return SphericalQuantizer.from_design(design).delta_s
    cells = list(design.cells)
    if region is not None:
        if design.domain.kind == "circle":
            raise CertificationError("region restriction is not available on circle designs")
        reg = domain_region(region) if isinstance(region, DomainSpec) else region
        cells = [intersect(c, reg) for c in cells]
        covered = sum(c.area for c in cells)
        if covered < reg.area * (1.0 - 1e-9) - 1e-12:
            raise CertificationError(
                f"coverage gap: cells cover {covered!r} of region area {reg.area!r}")
    worst = 0.0
    for q, cell in zip(design.points, cells):
        if cell.is_empty:
            continue
        try:
            worst = max(worst, eval_cell_cost(q, cell, scheme))
        except SeparationError as exc:
            raise CertificationError(f"delta_rw needs separated cells: {exc}") from exc
    return float(worst)


@dataclass(frozen=True, eq=False)
class ReducedProblem:
    """Multicenter instance for ``|PBK (q - x)|`` in the row space of ``PBK``."""

    L: np.ndarray
    scheme: WeightScheme
    domain: DomainSpec
    rank: int

    def image_interval(self) -> tuple:
        """Range of the single coordinate over the polygonalized domain (rank one)."""
        if self.rank != 1:
            raise CertificationError("image interval is defined for rank-one reductions")
        verts = np.vstack([p.vertices for p in polygonalize_domain(self.domain)[:1]])
        z = verts @ self.L[0]
        return float(z.min()), float(z.max())

    def optimum_1d(self, N: int) -> float:
        """Optimal cost of N centers on the rank-one image interval: length / (2N)."""
        lo, hi = self.image_interval()
        return (hi - lo) / (2.0 * N)


def reduce_pbk_problem(cert: LyapunovCert, domain: DomainSpec, rtol: float = 1e-12) -> ReducedProblem:
    """Factor ``PBK = U S V^T`` and keep ``L = S_r V_r^T`` so that ``|L y| = |PBK y|``."""
    U, s, Vt = np.linalg.svd(cert.pbk)
    if s[0] == 0.0:
        raise CertificationError("PBK is zero")
    r = int(np.sum(s > rtol * s[0]))
    L = s[:r, None] * Vt[:r]
    return ReducedProblem(L, WeightScheme.linear_map(L), domain, r)
