import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from quantloc import LinearPlant, lyapunov_solve

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")


@pytest.fixture(scope="session")
def double_integrator():
    return LinearPlant([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [[-1.0, -2.0]])


@pytest.fixture(scope="session")
def di_cert(double_integrator):
    return lyapunov_solve(double_integrator)


def random_convex_polygon(rng, k=None, center=(0.0, 0.0), scale=1.0):
    """Convex polygon from sorted random angles on a jittered circle."""
    k = int(rng.integers(3, 9)) if k is None else k
    theta = np.sort(rng.uniform(0, 2 * np.pi, k))
    r = scale * rng.uniform(0.5, 1.0, k)
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)]) + np.asarray(center)
    from quantloc.geometry import convex_hull
    return convex_hull(pts)


@pytest.fixture(scope="session")
def di_disk_design():
    from quantloc.centers import WeightScheme
    from quantloc.geometry import DomainSpec
    from quantloc.lloyd import init_points, lloyd_run
    spec = DomainSpec.disk(1.0)
    design, _ = lloyd_run(init_points(spec, 200, method="lattice"), spec,
                          WeightScheme.uniform(), max_iters=30)
    return design


@pytest.fixture(scope="session")
def di_l2_report(di_cert, di_disk_design):
    from quantloc.control import CertParams, certify, destabilization_measure
    delta = destabilization_measure(di_disk_design, di_cert, "delta")
    return certify("L2", di_cert, CertParams(M=1.0, epsilon=0.1), delta)
