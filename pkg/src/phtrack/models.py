"""Concrete system instances: the 3-dof SCARA benchmark and two toy systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phsys import MechanicalPHSystem

_GRID_POINTS = 720


@dataclass(frozen=True)
class ScaraParams:
    """Physical parameters of the SCARA arm (two revolute joints, one prismatic)."""

    m1: float = 1.0
    m2: float = 1.0
    m3: float = 1.0
    l1: float = 0.5
    l2: float = 0.5
    g: float = 9.81
    d: float = 0.2

    def __post_init__(self):
        for name in ("m1", "m2", "m3", "l1", "l2", "g", "d"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"SCARA parameter {name} must be positive")


def scara(params: ScaraParams | None = None) -> MechanicalPHSystem:
    """SCARA robot with q = (theta1, theta2, z).

    M22 is constant, only theta2 enters M, and the (3,3) entry carries the
    total weight (m1+m2+m3)*g; the potential is the linear lift term.
    D = d*I and G = I.
    """
    prm = params or ScaraParams()
    m2l1sq = (prm.m2 + prm.m3) * prm.l1**2
    m3l2sq = prm.m3 * prm.l2**2
    m3l1l2 = prm.m3 * prm.l1 * prm.l2
    weight = (prm.m1 + prm.m2 + prm.m3) * prm.g

    def inertia(q):
        c2 = np.cos(q[1])
        M11 = m2l1sq + m3l2sq + 2.0 * m3l1l2 * c2
        M12 = m3l2sq + m3l1l2 * c2
        return np.array([[M11, M12, 0.0], [M12, m3l2sq, 0.0], [0.0, 0.0, weight]])

    def inertia_batch(qs):
        c2 = np.cos(qs[:, 1])
        out = np.zeros((qs.shape[0], 3, 3))
        out[:, 0, 0] = m2l1sq + m3l2sq + 2.0 * m3l1l2 * c2
        out[:, 0, 1] = out[:, 1, 0] = m3l2sq + m3l1l2 * c2
        out[:, 1, 1] = m3l2sq
        out[:, 2, 2] = weight
        return out

    def inertia_partials(q):
        s2 = np.sin(q[1])
        dM = np.zeros((3, 3, 3))
        dM[1, 0, 0] = -2.0 * m3l1l2 * s2
        dM[1, 0, 1] = dM[1, 1, 0] = -m3l1l2 * s2
        return dM

    def potential(q):
        return weight * q[2]

    def potential_gradient(q):
        return np.array([0.0, 0.0, weight])

    D = prm.d * np.eye(3)
    G = np.eye(3)

    # Eigenvalue bounds of M over a theta2 sweep; M depends on theta2 only.
    lo = np.inf
    hi = -np.inf
    for th in np.linspace(0.0, 2.0 * np.pi, _GRID_POINTS, endpoint=False):
        w = np.linalg.eigvalsh(inertia(np.array([0.0, th, 0.0])))
        lo = min(lo, w[0])
        hi = max(hi, w[-1])
    if lo <= 0.0:
        raise ValueError("SCARA inertia loses positive definiteness for these parameters")

    return MechanicalPHSystem(
        n=3,
        inertia=inertia,
        inertia_partials=inertia_partials,
        potential=potential,
        potential_gradient=potential_gradient,
        damping=lambda q: D,
        input_map=lambda q: G,
        inertia_bounds=(lo, hi),
        inertia_batch=inertia_batch,
        name="scara",
    )


def toy_constant_inertia(n: int = 2, mass: float = 1.0, damping: float = 0.0) -> MechanicalPHSystem:
    """Constant M = mass*I, V = 0: every S and Mdot branch is identically zero."""
    if n < 1:
        raise ValueError("dimension must be positive")
    if mass <= 0.0:
        raise ValueError("mass must be positive")
    if damping < 0.0:
        raise ValueError("damping must be nonnegative")
    M = mass * np.eye(n)
    dM = np.zeros((n, n, n))
    D = damping * np.eye(n)
    G = np.eye(n)
    return MechanicalPHSystem(
        n=n,
        inertia=lambda q: M,
        inertia_partials=lambda q: dM,
        potential=lambda q: 0.0,
        potential_gradient=lambda q: np.zeros(n),
        damping=lambda q: D,
        input_map=lambda q: G,
        inertia_bounds=(mass, mass),
        name="constant_inertia",
    )


def toy_pendulum(
    mass: float = 1.0, length: float = 1.0, g: float = 9.81, damping: float = 0.0
) -> MechanicalPHSystem:
    """Planar pendulum: constant scalar inertia with a nonzero potential gradient."""
    if mass <= 0.0 or length <= 0.0:
        raise ValueError("mass and length must be positive")
    if damping < 0.0:
        raise ValueError("damping must be nonnegative")
    ml2 = mass * length**2
    mgl = mass * g * length
    M = np.array([[ml2]])
    dM = np.zeros((1, 1, 1))
    D = np.array([[damping]])
    G = np.eye(1)
    return MechanicalPHSystem(
        n=1,
        inertia=lambda q: M,
        inertia_partials=lambda q: dM,
        potential=lambda q: mgl * (1.0 - np.cos(q[0])),
        potential_gradient=lambda q: np.array([mgl * np.sin(q[0])]),
        damping=lambda q: D,
        input_map=lambda q: G,
        inertia_bounds=(ml2, ml2),
        name="pendulum",
    )
