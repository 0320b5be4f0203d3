"""Mechanical port-Hamiltonian systems on (q, p) phase space.

A system is described by its inertia matrix M(q), potential V(q), damping
D(q) and input map G(q).  The Hamiltonian is the total energy

    H(q, p) = 1/2 p^T M^-1(q) p + V(q),    p = M(q) qdot.

This module computes the structure matrices that appear in the equations of
motion: the skew-symmetric velocity-coupling matrix S(q, v) built from the
partial derivatives of M, the inertia rate Mdot, the lumped matrix
E = S - Mdot/2 + D, and the open-loop vector field in its two equivalent
assemblies (gradient form and S-based form).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

# Above this condition number M(q) is treated as numerically singular.
CONDITION_LIMIT = 1.0e12

# Relative step for all central-difference fallbacks.
FD_STEP = 1.0e-6


class SingularInertiaError(RuntimeError):
    """Inertia matrix is numerically singular at the requested configuration."""


class SingularInputMapError(RuntimeError):
    """Input map G(q) is numerically singular; the system is not fully actuated there."""


@dataclass(frozen=True)
class PhaseState:
    """A point (q, p) on the phase space at time t."""

    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(-1)
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if q.shape != p.shape:
            raise ValueError(f"q and p must have equal length, got {q.shape} and {p.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p)) and np.isfinite(self.t)):
            raise ValueError("phase state entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.q.size


@dataclass(frozen=True)
class MechanicalPHSystem:
    """Fully-actuated mechanical pH system defined by callable matrix providers.

    ``inertia_partials`` should return the stack dM[k] = dM/dq_k with shape
    (n, n, n); when omitted it is replaced by a central finite-difference
    approximation with step ``FD_STEP * max(1, |q_k|)``.  The same fallback
    applies to ``potential_gradient``.
    """

    n: int
    inertia: Callable[[np.ndarray], np.ndarray]
    potential: Callable[[np.ndarray], float]
    damping: Callable[[np.ndarray], np.ndarray]
    input_map: Callable[[np.ndarray], np.ndarray]
    inertia_partials: Optional[Callable[[np.ndarray], np.ndarray]] = None
    potential_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    inertia_bounds: Optional[Tuple[float, float]] = None
    # Optional vectorized provider: (m, n) configurations -> (m, n, n) inertias.
    inertia_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("configuration dimension must be a positive integer")
        if self.inertia_bounds is not None:
            lo, hi = self.inertia_bounds
            if not (0.0 < lo <= hi):
                raise ValueError("inertia bounds must satisfy 0 < m1 <= m2")

    def mass(self, q: np.ndarray) -> np.ndarray:
        return np.asarray(self.inertia(q), dtype=float)

    def mass_batch(self, qs: np.ndarray) -> np.ndarray:
        """Inertia at a batch of configurations, shape (m, n, n)."""
        if self.inertia_batch is not None:
            return np.asarray(self.inertia_batch(qs), dtype=float)
        out = np.empty((qs.shape[0], self.n, self.n))
        for i in range(qs.shape[0]):
            out[i] = self.inertia(qs[i])
        return out

    def mass_partials(self, q: np.ndarray) -> np.ndarray:
        """Stack of partial derivatives dM/dq_k, analytic or finite-difference."""
        if self.inertia_partials is not None:
            return np.asarray(self.inertia_partials(q), dtype=float)
        return finite_difference_partials(self.inertia, q, (self.n, self.n))

    def potential_grad(self, q: np.ndarray) -> np.ndarray:
        if self.potential_gradient is not None:
            return np.asarray(self.potential_gradient(q), dtype=float)
        return finite_difference_partials(self.potential, q, ())


def finite_difference_partials(fn, q, value_shape):
    """Central differences of a configuration-dependent quantity.

    Step per coordinate is FD_STEP * max(1, |q_k|).
    """
    q = np.asarray(q, dtype=float)
    out = np.empty((q.size,) + value_shape)
    for k in range(q.size):
        h = FD_STEP * max(1.0, abs(q[k]))
        e = np.zeros_like(q)
        e[k] = h
        out[k] = (np.asarray(fn(q + e), dtype=float) - np.asarray(fn(q - e), dtype=float)) / (2.0 * h)
    return out


def _checked_mass(sys: MechanicalPHSystem, q: np.ndarray) -> np.ndarray:
    M = sys.mass(q)
    w = np.abs(np.linalg.eigvalsh(M))
    if w[0] == 0.0 or w[-1] / w[0] > CONDITION_LIMIT:
        raise SingularInertiaError(
            f"inertia matrix numerically singular at q={np.array2string(q, precision=4)}"
        )
    return M


def _coriolis_from_stack(dM: np.ndarray, v: np.ndarray) -> np.ndarray:
    # S_ij = 1/2 sum_k v_k (dM_ik/dq_j - dM_jk/dq_i); dM[k, i, j] = dM_ij/dq_k.
    B = dM @ v  # B[i, j] = sum_k dM_jk/dq_i v_k
    return 0.5 * (B.T - B)


def _mdot_from_stack(dM: np.ndarray, qdot: np.ndarray) -> np.ndarray:
    n = qdot.size
    return (qdot @ dM.reshape(n, n * n)).reshape(n, n)


def _kinetic_gradient_from_stack(dM: np.ndarray, w: np.ndarray) -> np.ndarray:
    # d/dq_k (1/2 p^T M^-1 p) = -1/2 w^T (dM/dq_k) w with w = M^-1 p.
    return -0.5 * ((dM @ w) @ w)


def hamiltonian(sys: MechanicalPHSystem, x: PhaseState) -> float:
    """Total energy 1/2 p^T M^-1(q) p + V(q)."""
    M = _checked_mass(sys, x.q)
    w = np.linalg.solve(M, x.p)
    return 0.5 * float(x.p @ w) + float(sys.potential(x.q))


def hamiltonian_gradient(sys: MechanicalPHSystem, x: PhaseState) -> Tuple[np.ndarray, np.ndarray]:
    """(dH/dq, dH/dp), with the kinetic part assembled from the inertia partials."""
    M = _checked_mass(sys, x.q)
    w = np.linalg.solve(M, x.p)
    dM = sys.mass_partials(x.q)
    dH_dq = sys.potential_grad(x.q) + _kinetic_gradient_from_stack(dM, w)
    return dH_dq, w


def coriolis_S(sys: MechanicalPHSystem, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Skew-symmetric coupling matrix S(q, v), linear and homogeneous in v."""
    v = np.asarray(v, dtype=float)
    if v.size != sys.n:
        raise ValueError(f"velocity argument must have length {sys.n}")
    return _coriolis_from_stack(sys.mass_partials(q), v)


def coriolis_S_momentum(sys: MechanicalPHSystem, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Momentum form S(q, p): the velocity form evaluated at v = M^-1(q) p."""
    M = _checked_mass(sys, q)
    return _coriolis_from_stack(sys.mass_partials(q), np.linalg.solve(M, p))


def inertia_rate(sys: MechanicalPHSystem, q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
    """Mdot = sum_k (dM/dq_k) qdot_k, symmetric."""
    qdot = np.asarray(qdot, dtype=float)
    if qdot.size != sys.n:
        raise ValueError(f"velocity must have length {sys.n}")
    return _mdot_from_stack(sys.mass_partials(q), qdot)


def E_matrix(sys: MechanicalPHSystem, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """E(q, p) = S(q, M^-1 p) - Mdot(q, M^-1 p)/2 + D(q)."""
    M = _checked_mass(sys, q)
    w = np.linalg.solve(M, np.asarray(p, dtype=float))
    dM = sys.mass_partials(q)
    return (
        _coriolis_from_stack(dM, w)
        - 0.5 * _mdot_from_stack(dM, w)
        + np.asarray(sys.damping(q), dtype=float)
    )


def open_loop_field(sys: MechanicalPHSystem, x: PhaseState, u: np.ndarray) -> np.ndarray:
    """Open-loop phase velocity (qdot, pdot) in the gradient assembly.

    qdot = dH/dp, pdot = -dH/dq - D qdot + G u.  This assembly is the one the
    integrator uses; see ``open_loop_field_coriolis`` for the cross-check form.
    """
    u = np.asarray(u, dtype=float)
    dH_dq, w = hamiltonian_gradient(sys, x)
    D = np.asarray(sys.damping(x.q), dtype=float)
    G = np.asarray(sys.input_map(x.q), dtype=float)
    return np.concatenate([w, -dH_dq - D @ w + G @ u])


def open_loop_field_coriolis(sys: MechanicalPHSystem, x: PhaseState, u: np.ndarray) -> np.ndarray:
    """Equivalent assembly pdot = -dV/dq - E(q, p) M^-1 p + G u.

    Agrees with ``open_loop_field`` to roundoff; kept as an independent path so
    sign errors in S or Mdot are caught by the agreement check.
    """
    u = np.asarray(u, dtype=float)
    M = _checked_mass(sys, x.q)
    w = np.linalg.solve(M, x.p)
    E = E_matrix(sys, x.q, x.p)
    G = np.asarray(sys.input_map(x.q), dtype=float)
    return np.concatenate([w, -sys.potential_grad(x.q) - E @ w + G @ u])


def structure_decomposition(
    sys: MechanicalPHSystem, x: PhaseState
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Block matrices (J, R, Phi) of the constant-like-inertia rewriting.

    J = [[0, I], [-I, -S]] is skew, R = [[0, 0], [0, D]] is PSD and
    Phi = [[0, 0], [0, Mdot/2]] collects the inertia-rate disturbance.
    [J - (R - Phi)] (dV/dq, M^-1 p) plus the input reproduces the open-loop
    field.
    """
    n = sys.n
    M = _checked_mass(sys, x.q)
    w = np.linalg.solve(M, x.p)
    dM = sys.mass_partials(x.q)
    S = _coriolis_from_stack(dM, w)
    Mdot = _mdot_from_stack(dM, w)
    D = np.asarray(sys.damping(x.q), dtype=float)
    Z = np.zeros((n, n))
    I = np.eye(n)
    J = np.block([[Z, I], [-I, -S]])
    R = np.block([[Z, Z], [Z, D]])
    Phi = np.block([[Z, Z], [Z, 0.5 * Mdot]])
    return J, R, Phi


def coriolis_identity_residual(
    sys: MechanicalPHSystem, q: np.ndarray, p: np.ndarray, step: float = FD_STEP
) -> float:
    """Max-norm residual of [S(q,p) - Mdot/2] M^-1 p against the finite-difference
    gradient of the kinetic energy in q.  Near zero for a correct S and Mdot."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    M = _checked_mass(sys, q)
    w = np.linalg.solve(M, p)
    dM = sys.mass_partials(q)
    lhs = (_coriolis_from_stack(dM, w) - 0.5 * _mdot_from_stack(dM, w)) @ w

    def kinetic(qq):
        return 0.5 * p @ np.linalg.solve(sys.mass(qq), p)

    rhs = np.empty(sys.n)
    for k in range(sys.n):
        h = step * max(1.0, abs(q[k]))
        e = np.zeros(sys.n)
        e[k] = h
        rhs[k] = (kinetic(q + e) - kinetic(q - e)) / (2.0 * h)
    return float(np.max(np.abs(lhs - rhs)))
