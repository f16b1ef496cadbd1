import numpy as np
import pytest

from lenslab.manifold import (
    BumpProfile,
    FlatProduct,
    PerturbedProduct,
    SurfaceOfRevolution,
)


@pytest.fixture
def flat2():
    return FlatProduct(n=2)


@pytest.fixture
def flat3():
    return FlatProduct(n=3)


@pytest.fixture
def bump0():
    return SurfaceOfRevolution(BumpProfile(0.05, 0.2, 0.0))


@pytest.fixture
def flat_cyl():
    return SurfaceOfRevolution(BumpProfile(amplitude=0.0))


@pytest.fixture
def perturbed2():
    return PerturbedProduct(FlatProduct(n=2), amplitude=0.1, radius=0.3,
                            center=(0.2, 0.0), mode="disc")


def fd_christoffel(spec, pos, h=1e-5):
    """Finite-difference Christoffel oracle from metric_at alone."""
    from lenslab.manifold import metric_at

    pos = np.asarray(pos, dtype=float)
    d = len(pos)
    D = np.zeros((d, d, d))
    for l in range(d):
        dp = np.zeros(d)
        dp[l] = h
        D[l] = (metric_at(spec, pos + dp) - metric_at(spec, pos - dp)) / (2 * h)
    g = metric_at(spec, pos)
    ginv = np.linalg.inv(g)
    E = D + D.transpose(1, 0, 2) - D.transpose(1, 2, 0)
    return 0.5 * np.einsum("kl,ijl->kij", ginv, E)


def interior_points(spec, rng, count):
    """Random chart points safely inside the domain."""
    pts = []
    for _ in range(count):
        if isinstance(spec, SurfaceOfRevolution):
            pts.append(np.array([rng.uniform(-0.95, 0.95),
                                 rng.uniform(0, 2 * np.pi)]))
        else:
            flat = spec if isinstance(spec, FlatProduct) else spec.base
            while True:
                x = rng.uniform(-1, 1, size=flat.n) * flat.disc_radius * 0.95
                if np.linalg.norm(x) < flat.disc_radius * 0.95:
                    break
            pts.append(np.append(x, rng.uniform(0, flat.circle_length)))
    return pts
