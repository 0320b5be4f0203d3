"""Contraction certificates for the closed-loop error system.

The differential Lyapunov function V = 1/2 delta^T P delta with
P = blockdiag(Lambda, M^-1) decays along the variational dynamics of the
virtual error system at the pointwise rate

    Vdot = -delta^T Sym(Xi) delta,      Sym(Xi) = 1/2 P Upsilon P,

so V(t) <= V(0) exp(-beta t) with beta = min eig(P^{1/2} Upsilon P^{1/2}).
``contraction_rate`` returns that eigenvalue.  The induced Riemannian
distance (metric Pi = Theta^T P Theta in original coordinates) therefore
shrinks at half that rate; ``ContractionCertificate.distance_rate`` exposes
beta/2 for envelope checks on distances.

The gain condition D + K_d + I/2 - (M^-1 + M)/4 > 0 is equivalent to
Upsilon > 0 (its Schur complement with respect to the 2 M^-1 block is twice
the condition matrix); ``gain_condition`` evaluates the margin.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .phsys import (
    MechanicalPHSystem,
    PhaseState,
    _checked_mass,
    _coriolis_from_stack,
)
from .tracking import (
    ControllerGains,
    ErrorState,
    ReferenceTrajectory,
    _chart_from_error,
)

_PD_TOL = 1.0e-10


@dataclass(frozen=True)
class ContractionCertificate:
    """Metric, rate matrix and scalar margins evaluated at one configuration."""

    P: np.ndarray
    Upsilon: np.ndarray
    schur_margin: float
    beta: float

    @property
    def valid(self) -> bool:
        return self.schur_margin > 0.0

    @property
    def distance_rate(self) -> float:
        """Decay rate of the induced distance (half the V-decay rate beta)."""
        return 0.5 * self.beta


def metric_P(sys: MechanicalPHSystem, gains: ControllerGains, q: np.ndarray) -> np.ndarray:
    """Block-diagonal metric diag(Lambda, M^-1(q))."""
    n = sys.n
    M = _checked_mass(sys, q)
    # Small n: the assembled inverse block is part of the metric definition.
    Minv = np.linalg.inv(M)
    P = np.zeros((2 * n, 2 * n))
    P[:n, :n] = gains.Lambda
    P[n:, n:] = 0.5 * (Minv + Minv.T)
    return P


def upsilon(sys: MechanicalPHSystem, gains: ControllerGains, q: np.ndarray) -> np.ndarray:
    """Rate matrix [[2 M^-1, M^-1 - I], [M^-1 - I, 2 (D + K_d)]]."""
    n = sys.n
    M = _checked_mass(sys, q)
    Minv = np.linalg.inv(M)
    Minv = 0.5 * (Minv + Minv.T)
    D = np.asarray(sys.damping(q), dtype=float)
    I = np.eye(n)
    return np.block([[2.0 * Minv, Minv - I], [Minv - I, 2.0 * (D + gains.Kd)]])


def gain_condition(sys: MechanicalPHSystem, gains: ControllerGains, q: np.ndarray
                   ) -> Tuple[bool, float]:
    """(holds, margin) of D + K_d + I/2 - (M^-1 + M)/4 at q."""
    n = sys.n
    M = _checked_mass(sys, q)
    Minv = np.linalg.inv(M)
    D = np.asarray(sys.damping(q), dtype=float)
    C = D + gains.Kd + 0.5 * np.eye(n) - 0.25 * (Minv + M)
    margin = float(np.linalg.eigvalsh(0.5 * (C + C.T))[0])
    return margin > 0.0, margin


def schur_complement_margin(sys: MechanicalPHSystem, gains: ControllerGains,
                            q: np.ndarray) -> float:
    """Min eigenvalue of the Schur complement of Upsilon w.r.t. its 2 M^-1 block."""
    n = sys.n
    U = upsilon(sys, gains, q)
    A = U[:n, :n]
    B = U[:n, n:]
    C = U[n:, n:]
    S = C - B.T @ np.linalg.solve(A, B)
    return float(np.linalg.eigvalsh(0.5 * (S + S.T))[0])


def _spd_sqrt(P: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(P)
    if w[0] < -_PD_TOL:
        raise ValueError(f"matrix is not positive semidefinite (min eig {w[0]:.3e})")
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


def _certificate_from_parts(M: np.ndarray, Minv: np.ndarray, D: np.ndarray,
                            gains: ControllerGains,
                            lam_sqrt: np.ndarray) -> ContractionCertificate:
    """Assemble the certificate from precomputed pieces (hot logging path)."""
    n = M.shape[0]
    Minv = 0.5 * (Minv + Minv.T)
    I = np.eye(n)
    P = np.zeros((2 * n, 2 * n))
    P[:n, :n] = gains.Lambda
    P[n:, n:] = Minv
    U = np.block([[2.0 * Minv, Minv - I], [Minv - I, 2.0 * (D + gains.Kd)]])
    C = D + gains.Kd + 0.5 * I - 0.25 * (Minv + M)
    margin = float(np.linalg.eigvalsh(0.5 * (C + C.T))[0])
    Ph = np.zeros((2 * n, 2 * n))
    Ph[:n, :n] = lam_sqrt
    Ph[n:, n:] = _spd_sqrt(Minv)
    A = Ph @ U @ Ph
    beta = float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])
    return ContractionCertificate(P=P, Upsilon=U, schur_margin=margin, beta=beta)


def contraction_rate(sys: MechanicalPHSystem, gains: ControllerGains, q: np.ndarray) -> float:
    """beta = min eig(P^{1/2} Upsilon P^{1/2}); positive iff Upsilon > 0."""
    P = metric_P(sys, gains, q)
    U = upsilon(sys, gains, q)
    Ph = _spd_sqrt(P)
    A = Ph @ U @ Ph
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


def certificate(sys: MechanicalPHSystem, gains: ControllerGains, q: np.ndarray
                ) -> ContractionCertificate:
    M = _checked_mass(sys, q)
    Minv = np.linalg.inv(M)
    D = np.asarray(sys.damping(q), dtype=float)
    return _certificate_from_parts(M, Minv, D, gains, _spd_sqrt(gains.Lambda))


def differential_lyapunov(P: np.ndarray, delta: np.ndarray) -> float:
    """V = 1/2 delta^T P delta."""
    delta = np.asarray(delta, dtype=float)
    return 0.5 * float(delta @ P @ delta)


def virtual_error_field(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                        gains: ControllerGains, e_a: ErrorState, e: ErrorState,
                        t: float) -> np.ndarray:
    """Virtual copy of the closed-loop error system, linear in (qtilde_a, sigma_a).

    The matrix E is frozen at the actual trajectory (q, sigma), so e_a = e and
    e_a = 0 are both particular solutions.
    """
    c = _chart_from_error(sys, ref, gains, e.q_tilde, e.sigma, t)
    E = _coriolis_from_stack(c.dM, c.b) - 0.5 * c.Mdot_flow + c.D
    rhs = np.column_stack([gains.Lambda @ e_a.q_tilde, e_a.sigma])
    sol = np.linalg.solve(c.M, rhs)
    lam_qa = sol[:, 0]
    b_a = sol[:, 1]
    return np.concatenate([-lam_qa + b_a, -lam_qa - (E + gains.Kd) @ b_a])


def variational_matrix(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                       gains: ControllerGains, e: ErrorState, t: float) -> np.ndarray:
    """Coefficient matrix of the variational dynamics of the virtual system,
    evaluated at the actual state: delta_dot = W delta with

        W = -[[M^-1 Lambda, -M^-1], [M^-1 Lambda, (E + K_d) M^-1]].
    """
    c = _chart_from_error(sys, ref, gains, e.q_tilde, e.sigma, t)
    Minv = np.linalg.inv(c.M)
    Minv = 0.5 * (Minv + Minv.T)
    E = _coriolis_from_stack(c.dM, c.b) - 0.5 * c.Mdot_flow + c.D
    ML = Minv @ gains.Lambda
    return -np.block([[ML, -Minv], [ML, (E + gains.Kd) @ Minv]])


def variational_field(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                      gains: ControllerGains, e: ErrorState, delta: np.ndarray,
                      t: float) -> np.ndarray:
    """Tangent velocity W(e, t) delta."""
    return variational_matrix(sys, ref, gains, e, t) @ np.asarray(delta, dtype=float)


def theta_transform(gains: ControllerGains) -> np.ndarray:
    """Tangent-space change of coordinates Theta = [[I, 0], [Lambda, I]]."""
    n = gains.n
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[I, Z], [gains.Lambda, I]])


def original_coordinates_variational_matrix(
    sys: MechanicalPHSystem, ref: ReferenceTrajectory, gains: ControllerGains,
    e: ErrorState, t: float) -> np.ndarray:
    """Variational matrix of the virtual system written in original coordinates.

    Uses A = E(q, sigma) + K_d + I and B = Lambda + K_d - S(q, p_r); conjugating
    by Theta recovers ``variational_matrix`` exactly.
    """
    n = sys.n
    c = _chart_from_error(sys, ref, gains, e.q_tilde, e.sigma, t)
    Minv = np.linalg.inv(c.M)
    Minv = 0.5 * (Minv + Minv.T)
    E_sigma = _coriolis_from_stack(c.dM, c.b) - 0.5 * c.Mdot_flow + c.D
    E_p = _coriolis_from_stack(c.dM, c.qdot) - 0.5 * c.Mdot_flow + c.D
    S_r = _coriolis_from_stack(c.dM, c.a)
    A = E_sigma + gains.Kd + np.eye(n)
    B = gains.Lambda + gains.Kd - S_r
    Z = np.zeros((n, n))
    return -np.block([[Z, -Minv], [A @ Minv @ gains.Lambda, (E_p + B) @ Minv]])


def riemannian_metric_Pi(sys: MechanicalPHSystem, gains: ControllerGains,
                         q: np.ndarray) -> np.ndarray:
    """Pi = [[Lambda + Lambda M^-1 Lambda, Lambda M^-1], [M^-1 Lambda, M^-1]].

    Equals Theta^T P Theta with Theta = [[I, 0], [Lambda, I]].
    """
    M = _checked_mass(sys, q)
    Minv = np.linalg.inv(M)
    Minv = 0.5 * (Minv + Minv.T)
    L = gains.Lambda
    LM = L @ Minv
    return np.block([[L + LM @ L, LM], [LM.T, Minv]])


def is_positive_definite(A: np.ndarray, tol: float = _PD_TOL) -> bool:
    return bool(np.linalg.eigvalsh(0.5 * (A + A.T))[0] > tol)


def _chord_metric_stack(sys: MechanicalPHSystem, gains: ControllerGains,
                        qs: np.ndarray) -> np.ndarray:
    """Pi evaluated at a batch of configurations, shape (m, 2n, 2n)."""
    m, n = qs.shape
    Minv = np.linalg.inv(sys.mass_batch(qs))
    Minv = 0.5 * (Minv + np.transpose(Minv, (0, 2, 1)))
    L = gains.Lambda
    LM = np.einsum("ij,mjk->mik", L, Minv)
    out = np.empty((m, 2 * n, 2 * n))
    out[:, :n, :n] = L + np.einsum("mij,jk->mik", LM, L)
    out[:, :n, n:] = LM
    out[:, n:, :n] = np.transpose(LM, (0, 2, 1))
    out[:, n:, n:] = Minv
    return out


def riemannian_distance(sys: MechanicalPHSystem, gains: ControllerGains,
                        x: PhaseState, x_d: PhaseState, segments: int = 16) -> float:
    """Length of the straight chord from x to x_d under the metric Pi.

    Composite midpoint rule with ``segments`` panels of the integrand
    sqrt(1/2 gammadot^T Pi(gamma(s)) gammadot); exact for configuration-
    independent inertia.
    """
    if segments < 1:
        raise ValueError("segments must be >= 1")
    delta = np.concatenate([x_d.q - x.q, x_d.p - x.p])
    if not np.any(delta):
        return 0.0
    s = (np.arange(segments) + 0.5) / segments
    qs = x.q[None, :] + s[:, None] * (x_d.q - x.q)[None, :]
    Pis = _chord_metric_stack(sys, gains, qs)
    vals = 0.5 * np.einsum("i,mij,j->m", delta, Pis, delta)
    return float(np.sqrt(np.clip(vals, 0.0, None)).mean())


def riemannian_distance_series(sys: MechanicalPHSystem, gains: ControllerGains,
                               xs: np.ndarray, xds: np.ndarray,
                               segments: int = 16) -> np.ndarray:
    """Chord distances for aligned batches of states, shape (m, 2n) each.

    Evaluates all midpoint configurations in one inertia batch; identical to
    calling ``riemannian_distance`` per row.
    """
    m = xs.shape[0]
    n = xs.shape[1] // 2
    deltas = xds - xs
    s = (np.arange(segments) + 0.5) / segments
    # (m, segments, n) midpoint configurations, flattened for one batch call
    qs = xs[:, None, :n] + s[None, :, None] * deltas[:, None, :n]
    Pis = _chord_metric_stack(sys, gains, qs.reshape(m * segments, n))
    Pis = Pis.reshape(m, segments, 2 * n, 2 * n)
    vals = 0.5 * np.einsum("mi,msij,mj->ms", deltas, Pis, deltas)
    out = np.sqrt(np.clip(vals, 0.0, None)).mean(axis=1)
    out[~np.any(deltas, axis=1)] = 0.0
    return out


@dataclass(frozen=True)
class ContractionReport:
    """Per-sample contraction audit along a prolonged trajectory."""

    beta: np.ndarray            # verbatim rate min eig(P^1/2 Upsilon P^1/2) per sample
    V: np.ndarray               # differential Lyapunov value per sample
    Vdot: np.ndarray            # analytic Vdot = -delta^T Sym(Xi) delta per sample
    max_violation: float        # max over samples of Vdot + beta V  (= Vdot + 2 (beta/2) V)
    envelope_ok: bool           # V(t) <= V(0) exp(-beta_min t) (1 + 1e-6)
    beta_min: float

    @property
    def distance_rate(self) -> np.ndarray:
        return 0.5 * self.beta


def contraction_check_along_trajectory(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                                       gains: ControllerGains, log) -> ContractionReport:
    """Audit V-decay along a simulated prolonged (state + tangent) trajectory.

    Uses the analytic derivative Vdot = -delta^T Sym(Xi) delta with
    Sym(Xi) = 1/2 P Upsilon P, and the pointwise rate beta; V decays as
    exp(-beta t), i.e. the induced distance decays at beta/2.
    """
    if log.delta is None:
        raise ValueError("log does not contain a tangent trajectory (prolonged mode)")
    m = log.t.size
    beta = np.empty(m)
    V = np.empty(m)
    Vdot = np.empty(m)
    for k in range(m):
        q = log.q[k]
        P = metric_P(sys, gains, q)
        U = upsilon(sys, gains, q)
        Ph = _spd_sqrt(P)
        A = Ph @ U @ Ph
        beta[k] = np.linalg.eigvalsh(0.5 * (A + A.T))[0]
        d = log.delta[k]
        V[k] = 0.5 * d @ P @ d
        Vdot[k] = -0.5 * d @ (P @ U @ P) @ d
    max_violation = float(np.max(Vdot + beta * V))
    beta_min = float(beta.min())
    envelope = V[0] * np.exp(-beta_min * (log.t - log.t[0])) * (1.0 + 1e-6)
    return ContractionReport(
        beta=beta,
        V=V,
        Vdot=Vdot,
        max_violation=max_violation,
        envelope_ok=bool(np.all(V <= envelope)),
        beta_min=beta_min,
    )


def grid_certificates(sys: MechanicalPHSystem, gains: ControllerGains,
                      qs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(margins, betas) of the gain condition and rate over configuration samples."""
    m = qs.shape[0]
    margins = np.empty(m)
    betas = np.empty(m)
    for i in range(m):
        _, margins[i] = gain_condition(sys, gains, qs[i])
        betas[i] = contraction_rate(sys, gains, qs[i])
    return margins, betas
