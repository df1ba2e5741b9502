"""
How coarse may a quantizer be?
==============================

A double integrator is stabilized by ``u = K x``; only a quantized state
``q(x)`` reaches the controller.  A quadratic Lyapunov function turns the
worst quantization error of a design into two nested ellipses: trajectories
starting in the outer one reach the inner one in a bounded time.  Three
designs are checked here, each against its own error measure, and each
certificate is then put to the test in simulation.
"""

from quantloc import (
    CertParams,
    DomainSpec,
    LinearPlant,
    SphericalQuantizer,
    WeightScheme,
    build_product,
    certify,
    destabilization_measure,
    init_points,
    log_radial,
    lloyd_run,
    lyapunov_solve,
    sample_in_level_set,
    simulate_batch,
    verify_certificate,
)

plant = LinearPlant([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [[-1.0, -2.0]])
cert = lyapunov_solve(plant)
print("P =", cert.P.tolist(), f" |PBK| = {cert.pbk_norm:.5f}")


def check(name, quantizer, report):
    X0 = sample_in_level_set(cert, report.R1_level, 50, seed=0)
    trajs = simulate_batch(plant, cert, quantizer, X0, report.T * 1.01, report=report)
    ok = sum(verify_certificate(tr, report).passed for tr in trajs)
    last = max(tr.first("entered_R2").t for tr in trajs)
    print(f"{name}: T = {report.T:6.2f}, latest entry {last:6.2f}, {ok}/50 runs verified")


# uniform design on the disk: worst error must stay below a fixed threshold
disk = DomainSpec.disk(1.0)
d, _ = lloyd_run(init_points(disk, 200, method="lattice"), disk, WeightScheme.uniform(), max_iters=40)
rep = certify("L2", cert, CertParams(M=1.0, epsilon=0.1), destabilization_measure(d, cert, "delta"))
print(f"uniform: delta {rep.measure:.4f} vs threshold {rep.threshold:.4f}")
check("uniform  ", d, rep)

# logarithmic radius times a direction quantizer: relative error instead of absolute
circle = DomainSpec.circle(1.0)
s, _ = lloyd_run(init_points(circle, 24), circle, WeightScheme.uniform(), tol=1e-10, max_iters=300)
sq = SphericalQuantizer.from_design(s)
rep = certify("L3", cert, CertParams(M=1.0, epsilon=0.1, lam=0.4, N1=8), sq.delta_s)
check("product  ", build_product(log_radial(1.0, 8, 0.4, cert.pbk_norm), sq), rep)

# radially weighted design on an annulus: the hole is the target region
ann = DomainSpec.annulus(0.35, 1.0)
R = WeightScheme.radial_inverse()
a, _ = lloyd_run(init_points(ann, 48, scheme=R), ann, R, max_iters=100)
rep = certify("L4", cert, CertParams(M=1.0, epsilon=0.1, m=0.35),
              destabilization_measure(a, cert, "delta_rw"))
print(f"annulus: delta_rw {rep.measure:.4f} vs threshold {rep.threshold:.4f}")
check("annulus  ", a, rep)
