import numpy as np
import pytest

from phtrack import models, tracking


@pytest.fixture(scope="session")
def scara_sys():
    return models.scara()


@pytest.fixture(scope="session")
def paper_ref():
    return tracking.paper_reference()


@pytest.fixture(scope="session")
def paper_gains():
    return tracking.paper_gains()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def scara_mass_oracle(q, m1=1.0, m2=1.0, m3=1.0, l1=0.5, l2=0.5, g=9.81):
    """Straight-line evaluation of the benchmark inertia formulas, independent
    of the models module."""
    c2 = np.cos(q[1])
    M11 = (m2 + m3) * l1**2 + m3 * l2**2 + 2 * m3 * l1 * l2 * c2
    M12 = m3 * l2**2 + m3 * l1 * l2 * c2
    return np.array([[M11, M12, 0.0], [M12, m3 * l2**2, 0.0],
                     [0.0, 0.0, (m1 + m2 + m3) * g]])


def fd_mass_partials(sys, q, h=1e-6):
    """Brute-force central differences of the inertia matrix, entrywise."""
    n = q.size
    out = np.empty((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        out[k] = (sys.mass(q + e) - sys.mass(q - e)) / (2 * h)
    return out


def fd_coriolis(sys, q, v, h=1e-6):
    """S assembled from finite-difference partials of M (independent path)."""
    n = q.size
    dM = fd_mass_partials(sys, q, h)
    S = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            S[i, j] = 0.5 * sum(v[k] * (dM[j, i, k] - dM[i, j, k]) for k in range(n))
    return S
