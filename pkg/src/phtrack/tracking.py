"""Error coordinates, auxiliary momentum reference and the tracking control law.

The position error is qtilde = q - q_d(t).  The sliding variable is
sigma = p - p_r with the auxiliary momentum reference

    p_r = M(q) qdot_d(t) - Lambda qtilde,

so the manifold {sigma = 0} carries the reduced-order motion
qdot = M^-1 p_r.  The control input splits into an equivalent part u_eq,
which renders that manifold invariant, and an attractivity part u_at, which
drives the error system onto it.

Convention used throughout: Mdot denotes the derivative of M along the actual
flow, i.e. Mdot = sum_k (dM/dq_k) qdot_k with qdot = M^-1 p.  With this
reading the closed loop in error coordinates is exactly

    qtilde_dot = -M^-1 Lambda qtilde + M^-1 sigma
    sigma_dot  = -M^-1 Lambda qtilde - (E + K_d) M^-1 sigma

with E = S(q, sigma) - Mdot/2 + D evaluated at the sliding variable.  The
alternative reading (Mdot built from M^-1 sigma) breaks this equality for a
configuration-dependent inertia; the consistency tests pin the convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .phsys import (
    CONDITION_LIMIT,
    MechanicalPHSystem,
    PhaseState,
    SingularInertiaError,
    SingularInputMapError,
    _coriolis_from_stack,
    _kinetic_gradient_from_stack,
    _mdot_from_stack,
)


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Twice differentiable desired trajectory t -> (q_d, qdot_d, qddot_d)."""

    q_d: Callable[[float], np.ndarray]
    qdot_d: Callable[[float], np.ndarray]
    qddot_d: Callable[[float], np.ndarray]


def sinusoidal_reference(
    amplitude, omega, offset
) -> ReferenceTrajectory:
    """Per-joint reference q_d,i(t) = a_i sin(w_i t) + b_i."""
    a = np.asarray(amplitude, dtype=float)
    w = np.asarray(omega, dtype=float)
    b = np.asarray(offset, dtype=float)
    if not (a.shape == w.shape == b.shape):
        raise ValueError("amplitude, omega and offset must have equal length")
    return ReferenceTrajectory(
        q_d=lambda t: a * np.sin(w * t) + b,
        qdot_d=lambda t: a * w * np.cos(w * t),
        qddot_d=lambda t: -a * w**2 * np.sin(w * t),
    )


def constant_reference(q0) -> ReferenceTrajectory:
    q0 = np.asarray(q0, dtype=float)
    zero = np.zeros_like(q0)
    return ReferenceTrajectory(
        q_d=lambda t: q0, qdot_d=lambda t: zero, qddot_d=lambda t: zero
    )


def paper_reference() -> ReferenceTrajectory:
    """The SCARA benchmark reference: q_d = (sin t + 1, sin t, sin t)."""
    return sinusoidal_reference([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 0.0, 0.0])


def reference_consistency(ref: ReferenceTrajectory, ts, h: float = 1e-5) -> Tuple[float, float]:
    """Max residual of central differences of q_d against qdot_d, and of
    qdot_d against qddot_d, over the sampled times."""
    rv = ra = 0.0
    for t in ts:
        dv = (ref.q_d(t + h) - ref.q_d(t - h)) / (2.0 * h) - ref.qdot_d(t)
        da = (ref.qdot_d(t + h) - ref.qdot_d(t - h)) / (2.0 * h) - ref.qddot_d(t)
        rv = max(rv, float(np.max(np.abs(dv))))
        ra = max(ra, float(np.max(np.abs(da))))
    return rv, ra


@dataclass(frozen=True)
class ControllerGains:
    """Symmetric positive definite Lambda and symmetric PSD K_d."""

    Lambda: np.ndarray
    Kd: np.ndarray

    def __post_init__(self):
        L = np.atleast_2d(np.asarray(self.Lambda, dtype=float))
        K = np.atleast_2d(np.asarray(self.Kd, dtype=float))
        if L.shape != K.shape or L.shape[0] != L.shape[1]:
            raise ValueError("Lambda and Kd must be square matrices of equal size")
        if not np.allclose(L, L.T, atol=1e-12):
            raise ValueError("Lambda must be symmetric")
        if not np.allclose(K, K.T, atol=1e-12):
            raise ValueError("Kd must be symmetric")
        if np.linalg.eigvalsh(L)[0] <= 0.0:
            raise ValueError("Lambda must be positive definite")
        if np.linalg.eigvalsh(K)[0] < -1e-10:
            raise ValueError("Kd must be positive semidefinite")
        object.__setattr__(self, "Lambda", L)
        object.__setattr__(self, "Kd", K)

    @property
    def n(self) -> int:
        return self.Lambda.shape[0]


def diagonal_gains(lambda_diag, kd_diag) -> ControllerGains:
    return ControllerGains(np.diag(np.asarray(lambda_diag, dtype=float)),
                           np.diag(np.asarray(kd_diag, dtype=float)))


def paper_gains() -> ControllerGains:
    """SCARA benchmark gains Lambda = 15 I, K_d = diag(30, 60, 90)."""
    return diagonal_gains([15.0, 15.0, 15.0], [30.0, 60.0, 90.0])


@dataclass(frozen=True)
class ErrorState:
    """Position error and sliding variable at time t."""

    q_tilde: np.ndarray
    sigma: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        qt = np.asarray(self.q_tilde, dtype=float).reshape(-1)
        sg = np.asarray(self.sigma, dtype=float).reshape(-1)
        if qt.shape != sg.shape:
            raise ValueError("q_tilde and sigma must have equal length")
        if not (np.all(np.isfinite(qt)) and np.all(np.isfinite(sg))):
            raise ValueError("error state entries must be finite")
        object.__setattr__(self, "q_tilde", qt)
        object.__setattr__(self, "sigma", sg)

    @property
    def n(self) -> int:
        return self.q_tilde.size


class _Chart:
    """Per-sample cache of everything the controller and fields need at (q, p, t).

    One inertia factorization serves all solves; the condition check happens
    once.  All downstream formulas read from this object, so the public
    operations and the integrator hot path share a single code path.
    """

    __slots__ = (
        "q", "p", "t", "M", "dM", "D", "G", "q_d", "qdot_d", "qddot_d",
        "q_tilde", "p_r", "sigma", "qdot", "a", "b", "Minv_Lam_qt", "Mdot_flow",
    )

    def __init__(self, sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                 gains: ControllerGains, q: np.ndarray, p: np.ndarray, t: float):
        self.q = q
        self.p = p
        self.t = t
        M = sys.mass(q)
        w = np.abs(np.linalg.eigvalsh(M))
        if w[0] == 0.0 or w[-1] / w[0] > CONDITION_LIMIT:
            raise SingularInertiaError(f"inertia matrix numerically singular at t={t:.6g}")
        self.M = M
        self.dM = sys.mass_partials(q)
        self.D = np.asarray(sys.damping(q), dtype=float)
        self.G = np.asarray(sys.input_map(q), dtype=float)
        self.q_d = np.asarray(ref.q_d(t), dtype=float)
        self.qdot_d = np.asarray(ref.qdot_d(t), dtype=float)
        self.qddot_d = np.asarray(ref.qddot_d(t), dtype=float)
        self.q_tilde = q - self.q_d
        self.p_r = M @ self.qdot_d - gains.Lambda @ self.q_tilde
        self.sigma = p - self.p_r
        rhs = np.column_stack([p, self.p_r, self.sigma, gains.Lambda @ self.q_tilde])
        sol = np.linalg.solve(M, rhs)
        self.qdot = sol[:, 0]       # M^-1 p, the actual configuration velocity
        self.a = sol[:, 1]          # M^-1 p_r
        self.b = sol[:, 2]          # M^-1 sigma
        self.Minv_Lam_qt = sol[:, 3]
        self.Mdot_flow = _mdot_from_stack(self.dM, self.qdot)


def _chart_from_error(sys, ref, gains, q_tilde, sigma, t) -> _Chart:
    q_d = np.asarray(ref.q_d(t), dtype=float)
    q = q_tilde + q_d
    M = sys.mass(q)
    p_r = M @ np.asarray(ref.qdot_d(t), dtype=float) - gains.Lambda @ q_tilde
    return _Chart(sys, ref, gains, q, sigma + p_r, t)


def p_reference(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                gains: ControllerGains, q: np.ndarray, t: float) -> np.ndarray:
    """Auxiliary momentum reference p_r = M(q) qdot_d(t) - Lambda (q - q_d(t))."""
    q = np.asarray(q, dtype=float)
    from .phsys import _checked_mass

    M = _checked_mass(sys, q)
    return M @ np.asarray(ref.qdot_d(t), dtype=float) - gains.Lambda @ (q - np.asarray(ref.q_d(t), dtype=float))


def p_reference_rate(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                     gains: ControllerGains, x: PhaseState, t: float) -> np.ndarray:
    """Time derivative of p_r along the flow.

    The Mdot term is driven by the actual velocity qdot = M^-1 p (chain rule
    through the state-dependent inertia), not by the reference velocity.
    """
    c = _Chart(sys, ref, gains, x.q, x.p, t)
    return c.Mdot_flow @ c.qdot_d + c.M @ c.qddot_d - gains.Lambda @ (c.qdot - c.qdot_d)


def _gu_parts(sys: MechanicalPHSystem, gains: ControllerGains, c: _Chart) -> Tuple[np.ndarray, np.ndarray]:
    """Assemble (G u_eq, G u_at) from a chart."""
    S_a = _coriolis_from_stack(c.dM, c.a)
    p_r_dot = c.Mdot_flow @ c.qdot_d + c.M @ c.qddot_d - gains.Lambda @ (c.qdot - c.qdot_d)
    dV = sys.potential_grad(c.q)
    gu_eq = p_r_dot + dV + (S_a - 0.5 * c.Mdot_flow) @ c.a + c.D @ c.a
    S_b = _coriolis_from_stack(c.dM, c.b)
    gu_at = -gains.Kd @ c.b - c.Minv_Lam_qt + S_b @ c.a + S_a @ c.b
    return gu_eq, gu_at


def _solve_input(G: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    w = np.abs(np.linalg.eigvals(G))
    if w.min() == 0.0 or w.max() / w.min() > CONDITION_LIMIT:
        raise SingularInputMapError("input map G(q) is numerically singular")
    return np.linalg.solve(G, rhs)


def control_law(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                gains: ControllerGains, x: PhaseState, t: float
                ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tracking input (u, u_eq, u_at).

    G u_eq = p_r_dot + dV/dq + [S(q, p_r) - Mdot/2] M^-1 p_r + D M^-1 p_r
    G u_at = -K_d M^-1 sigma - M^-1 Lambda qtilde
             + S(q, sigma) M^-1 p_r + S(q, p_r) M^-1 sigma
    """
    c = _Chart(sys, ref, gains, x.q, x.p, t)
    gu_eq, gu_at = _gu_parts(sys, gains, c)
    sol = _solve_input(c.G, np.column_stack([gu_eq + gu_at, gu_eq, gu_at]))
    return sol[:, 0], sol[:, 1], sol[:, 2]


def error_coordinates(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                      gains: ControllerGains, x: PhaseState, t: float) -> ErrorState:
    """Map a phase-space point to (qtilde, sigma)."""
    qt = x.q - np.asarray(ref.q_d(t), dtype=float)
    sg = x.p - p_reference(sys, ref, gains, x.q, t)
    return ErrorState(qt, sg, t)


def sliding_variable_manifold_form(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                                   gains: ControllerGains, x: PhaseState, t: float) -> np.ndarray:
    """sigma assembled as ptilde_sigma + Lambda qtilde with ptilde_sigma = M (qdot - qdot_d).

    Equal to p - p_r by construction; kept as an independent assembly so the
    equivalence is testable.
    """
    from .phsys import _checked_mass

    M = _checked_mass(sys, x.q)
    qdot = np.linalg.solve(M, x.p)
    p_tilde_sigma = M @ (qdot - np.asarray(ref.qdot_d(t), dtype=float))
    return p_tilde_sigma + gains.Lambda @ (x.q - np.asarray(ref.q_d(t), dtype=float))


def phase_from_error(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                     gains: ControllerGains, e: ErrorState, t: float) -> PhaseState:
    """Inverse of ``error_coordinates``."""
    q = e.q_tilde + np.asarray(ref.q_d(t), dtype=float)
    p = e.sigma + p_reference(sys, ref, gains, q, t)
    return PhaseState(q, p, t)


def closed_loop_field(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                      gains: ControllerGains, x_flat: np.ndarray, t: float,
                      attractivity: bool = True) -> np.ndarray:
    """Phase velocity of the plant under the tracking law, on flat (q, p) arrays.

    With ``attractivity=False`` only the equivalent control acts and the
    sliding manifold is exactly invariant (ideal sliding motion).
    """
    n = sys.n
    c = _Chart(sys, ref, gains, x_flat[:n], x_flat[n:], t)
    gu_eq, gu_at = _gu_parts(sys, gains, c)
    gu = gu_eq + gu_at if attractivity else gu_eq
    dV = sys.potential_grad(c.q)
    dp = -dV - _kinetic_gradient_from_stack(c.dM, c.qdot) - c.D @ c.qdot + gu
    return np.concatenate([c.qdot, dp])


def closed_loop_error_field(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                            gains: ControllerGains, e: ErrorState, t: float) -> np.ndarray:
    """Error-coordinate vector field of the closed loop.

    qtilde_dot = -M^-1 Lambda qtilde + M^-1 sigma
    sigma_dot  = -M^-1 Lambda qtilde - (E + K_d) M^-1 sigma,

    E = S(q, sigma) - Mdot/2 + D with Mdot along the flow (module docstring).
    """
    c = _chart_from_error(sys, ref, gains, e.q_tilde, e.sigma, t)
    E = _coriolis_from_stack(c.dM, c.b) - 0.5 * c.Mdot_flow + c.D
    dqt = -c.Minv_Lam_qt + c.b
    dsg = -c.Minv_Lam_qt - (E + gains.Kd) @ c.b
    return np.concatenate([dqt, dsg])
