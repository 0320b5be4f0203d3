"""Randomized verification suites for the structural identities.

Each check draws seeded samples, evaluates a residual that is zero for a
correct implementation, and compares it against a stated tolerance.  The CLI
``verify`` subcommand runs the standard list; tests reuse individual checks
(including with deliberately broken ingredients to prove the checks can fail).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from . import contraction, tracking
from .phsys import (
    MechanicalPHSystem,
    PhaseState,
    coriolis_S,
    coriolis_identity_residual,
    hamiltonian,
    hamiltonian_gradient,
    inertia_rate,
    open_loop_field,
    open_loop_field_coriolis,
    structure_decomposition,
)
from .sim import Scenario, simulate
from .tracking import ControllerGains, ErrorState, ReferenceTrajectory


@dataclass(frozen=True)
class PropertyResult:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"{status:4s}  {self.name:38s} residual {self.residual:10.3e}  tol {self.tolerance:8.1e}"


def _random_states(sys, rng, count, q_scale=3.0, p_scale=5.0):
    for _ in range(count):
        yield rng.uniform(-q_scale, q_scale, sys.n), rng.uniform(-p_scale, p_scale, sys.n)


def skew_symmetry(sys: MechanicalPHSystem, rng: np.random.Generator, count: int,
                  tol: float = 1e-12) -> PropertyResult:
    worst = 0.0
    for q, v in _random_states(sys, rng, count):
        S = coriolis_S(sys, q, v)
        worst = max(worst, float(np.max(np.abs(S + S.T))))
    return PropertyResult("S skew-symmetry", worst, tol)


def s_linearity(sys: MechanicalPHSystem, rng: np.random.Generator, count: int,
                tol: float = 1e-10) -> PropertyResult:
    worst = 0.0
    for q, v1 in _random_states(sys, rng, count):
        v2 = rng.uniform(-5.0, 5.0, sys.n)
        a, b = rng.uniform(-2.0, 2.0, 2)
        lhs = coriolis_S(sys, q, a * v1 + b * v2)
        rhs = a * coriolis_S(sys, q, v1) + b * coriolis_S(sys, q, v2)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return PropertyResult("S linearity in v", worst, tol)


def velocity_coriolis_identity(sys: MechanicalPHSystem, rng: np.random.Generator,
                               count: int, tol: float = 1e-4) -> PropertyResult:
    """[S(q, v) - Mdot(q, v)/2] v + d/dq(1/2 v^T M v) = 0 with a finite-difference
    right-hand side."""
    worst = 0.0
    for q, v in _random_states(sys, rng, count):
        lhs = (coriolis_S(sys, q, v) - 0.5 * inertia_rate(sys, q, v)) @ v
        rhs = np.empty(sys.n)
        for k in range(sys.n):
            h = 1e-6 * max(1.0, abs(q[k]))
            e = np.zeros(sys.n)
            e[k] = h
            fp = 0.5 * v @ sys.mass(q + e) @ v
            fm = 0.5 * v @ sys.mass(q - e) @ v
            rhs[k] = (fp - fm) / (2.0 * h)
        worst = max(worst, float(np.max(np.abs(lhs + rhs))))
    return PropertyResult("velocity-form coupling identity", worst, tol)


def momentum_coriolis_identity(sys: MechanicalPHSystem, rng: np.random.Generator,
                               count: int, tol: float = 1e-4,
                               s_fn: Optional[Callable] = None) -> PropertyResult:
    """Momentum-form identity residual; ``s_fn`` lets tests inject a broken S."""
    worst = 0.0
    if s_fn is None:
        for q, p in _random_states(sys, rng, count):
            worst = max(worst, coriolis_identity_residual(sys, q, p))
    else:
        for q, p in _random_states(sys, rng, count):
            M = sys.mass(q)
            w = np.linalg.solve(M, p)
            lhs = (s_fn(sys, q, w) - 0.5 * inertia_rate(sys, q, w)) @ w
            rhs = np.empty(sys.n)
            for k in range(sys.n):
                h = 1e-6 * max(1.0, abs(q[k]))
                e = np.zeros(sys.n)
                e[k] = h
                rhs[k] = (0.5 * p @ np.linalg.solve(sys.mass(q + e), p)
                          - 0.5 * p @ np.linalg.solve(sys.mass(q - e), p)) / (2.0 * h)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return PropertyResult("momentum-form coupling identity", worst, tol)


def cross_gradient_identity(sys: MechanicalPHSystem, rng: np.random.Generator,
                            count: int, tol: float = 1e-4) -> PropertyResult:
    """d/dq(p_r^T M^-1 sigma) expanded through S and Mdot terms.

    The exact expansion is [S(q,sigma) - Mdot_sigma/2] M^-1 p_r
    + [S(q,p_r) - Mdot_r/2] M^-1 sigma, i.e. the bilinear split of the
    momentum-form identity; checked against central differences.
    """
    worst = 0.0
    for q, pr in _random_states(sys, rng, count):
        sg = rng.uniform(-5.0, 5.0, sys.n)
        M = sys.mass(q)
        a = np.linalg.solve(M, pr)
        b = np.linalg.solve(M, sg)
        lhs = ((coriolis_S(sys, q, b) - 0.5 * inertia_rate(sys, q, b)) @ a
               + (coriolis_S(sys, q, a) - 0.5 * inertia_rate(sys, q, a)) @ b)
        rhs = np.empty(sys.n)
        for k in range(sys.n):
            h = 1e-6 * max(1.0, abs(q[k]))
            e = np.zeros(sys.n)
            e[k] = h
            rhs[k] = (pr @ np.linalg.solve(sys.mass(q + e), sg)
                      - pr @ np.linalg.solve(sys.mass(q - e), sg)) / (2.0 * h)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return PropertyResult("cross-term gradient expansion", worst, tol)


def field_assembly_agreement(sys: MechanicalPHSystem, rng: np.random.Generator,
                             count: int, tol: float = 1e-8) -> PropertyResult:
    worst = 0.0
    for q, p in _random_states(sys, rng, count):
        u = rng.uniform(-2.0, 2.0, sys.n)
        x = PhaseState(q, p)
        worst = max(worst, float(np.max(np.abs(
            open_loop_field(sys, x, u) - open_loop_field_coriolis(sys, x, u)))))
    return PropertyResult("dual field assemblies agree", worst, tol)


def structure_reassembly(sys: MechanicalPHSystem, rng: np.random.Generator,
                         count: int, tol: float = 1e-8) -> PropertyResult:
    worst = 0.0
    for q, p in _random_states(sys, rng, count):
        u = rng.uniform(-2.0, 2.0, sys.n)
        x = PhaseState(q, p)
        J, R, Phi = structure_decomposition(sys, x)
        grad = np.concatenate([sys.potential_grad(q), np.linalg.solve(sys.mass(q), p)])
        Gu = np.asarray(sys.input_map(q), dtype=float) @ u
        rebuilt = (J - (R - Phi)) @ grad + np.concatenate([np.zeros(sys.n), Gu])
        worst = max(worst, float(np.max(np.abs(rebuilt - open_loop_field(sys, x, u)))))
        worst = max(worst, float(np.max(np.abs(J + J.T))))
        worst = max(worst, float(np.max(np.abs(R - R.T))))
    return PropertyResult("structure blocks reassemble the field", worst, tol)


def gradient_fd_agreement(sys: MechanicalPHSystem, rng: np.random.Generator,
                          count: int, tol: float = 1e-4) -> PropertyResult:
    """Relative error of the assembled dH/dq against finite differences of H."""
    worst = 0.0
    for q, p in _random_states(sys, rng, count):
        x = PhaseState(q, p)
        dH_dq, _ = hamiltonian_gradient(sys, x)
        fd = np.empty(sys.n)
        for k in range(sys.n):
            h = 1e-6 * max(1.0, abs(q[k]))
            e = np.zeros(sys.n)
            e[k] = h
            fd[k] = (hamiltonian(sys, PhaseState(q + e, p))
                     - hamiltonian(sys, PhaseState(q - e, p))) / (2.0 * h)
        scale = max(1.0, float(np.max(np.abs(fd))))
        worst = max(worst, float(np.max(np.abs(dH_dq - fd))) / scale)
    return PropertyResult("dH/dq matches finite differences", worst, tol)


def passivity_residual(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                       gains: ControllerGains, horizon: float = 5.0,
                       step: float = 1e-3, tol: float = 1e-3) -> PropertyResult:
    """|Hdot + qdot^T D qdot - u^T G^T qdot| sampled along an open-loop run,
    with Hdot from centered differences of the logged energy."""
    n = sys.n

    def u_fn(t):
        base = np.array([np.sin(t), np.cos(t), 0.1])
        return base[:n] if n <= 3 else np.concatenate([base, np.zeros(n - 3)])

    sc = Scenario(system=sys, reference=ref, gains=gains, horizon=horizon,
                  step=step, mode="open_loop", u_fn=u_fn)
    log = simulate(sc)
    Hdot = (log.H[2:] - log.H[:-2]) / (2.0 * step)
    worst = 0.0
    for k in range(1, log.t.size - 1):
        qdot = np.linalg.solve(sys.mass(log.q[k]), log.p[k])
        G = np.asarray(sys.input_map(log.q[k]), dtype=float)
        D = np.asarray(sys.damping(log.q[k]), dtype=float)
        res = Hdot[k - 1] + qdot @ D @ qdot - log.u[k] @ (G.T @ qdot)
        worst = max(worst, abs(float(res)))
    return PropertyResult("passivity balance along open loop", worst, tol)


def positivity_equivalence(sys: MechanicalPHSystem, gains: ControllerGains,
                           grid: np.ndarray, tol: float = 1e-10) -> PropertyResult:
    """Sign agreement of the gain-condition margin, the Schur complement of
    Upsilon and the smallest eigenvalue of Upsilon over a configuration grid.

    Residual is 0.0 when all three classify every grid point identically
    (margins within tol of zero are treated as boundary and skipped)."""
    disagreements = 0
    for q in grid:
        _, m1 = contraction.gain_condition(sys, gains, q)
        m2 = contraction.schur_complement_margin(sys, gains, q)
        U = contraction.upsilon(sys, gains, q)
        m3 = float(np.linalg.eigvalsh(0.5 * (U + U.T))[0])
        signs = [m for m in (m1, m2, m3) if abs(m) > tol]
        if signs and not (all(m > 0 for m in signs) or all(m < 0 for m in signs)):
            disagreements += 1
    return PropertyResult("positivity formulations agree in sign", float(disagreements), 0.5)


def sym_xi_identity(sys: MechanicalPHSystem, gains: ControllerGains,
                    rng: np.random.Generator, count: int, tol: float = 1e-10
                    ) -> PropertyResult:
    """Sym(Xi) = P Upsilon P / 2 where Xi collects the metric-weighted blocks
    of the variational dynamics."""
    n = sys.n
    worst = 0.0
    for _ in range(count):
        q = rng.uniform(-3.0, 3.0, n)
        M = sys.mass(q)
        Minv = np.linalg.inv(M)
        Minv = 0.5 * (Minv + Minv.T)
        L, Kd = gains.Lambda, gains.Kd
        D = np.asarray(sys.damping(q), dtype=float)
        Xi = np.block([
            [L @ Minv @ L, -L @ Minv],
            [Minv @ Minv @ L, Minv @ (D + Kd) @ Minv],
        ])
        P = contraction.metric_P(sys, gains, q)
        U = contraction.upsilon(sys, gains, q)
        worst = max(worst, float(np.max(np.abs(0.5 * (Xi + Xi.T) - 0.5 * P @ U @ P))))
    return PropertyResult("Sym(Xi) equals P Upsilon P / 2", worst, tol)


def theta_conjugation(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                      gains: ControllerGains, rng: np.random.Generator,
                      count: int, tol: float = 1e-8) -> PropertyResult:
    """Theta-conjugated original-coordinates variational matrix equals the
    error-coordinates variational matrix."""
    worst = 0.0
    Th = contraction.theta_transform(gains)
    Th_inv = np.linalg.inv(Th)
    for _ in range(count):
        qt = rng.uniform(-2.0, 2.0, sys.n)
        sg = rng.uniform(-5.0, 5.0, sys.n)
        t = rng.uniform(0.0, 10.0)
        e = ErrorState(qt, sg, t)
        W0 = contraction.original_coordinates_variational_matrix(sys, ref, gains, e, t)
        Wa = contraction.variational_matrix(sys, ref, gains, e, t)
        worst = max(worst, float(np.max(np.abs(Th @ W0 @ Th_inv - Wa))))
    return PropertyResult("Theta conjugation of variational systems", worst, tol)


def pi_dual_assembly(sys: MechanicalPHSystem, gains: ControllerGains,
                     rng: np.random.Generator, count: int, tol: float = 1e-10
                     ) -> PropertyResult:
    worst = 0.0
    Th = contraction.theta_transform(gains)
    for _ in range(count):
        q = rng.uniform(-3.0, 3.0, sys.n)
        Pi = contraction.riemannian_metric_Pi(sys, gains, q)
        P = contraction.metric_P(sys, gains, q)
        worst = max(worst, float(np.max(np.abs(Pi - Th.T @ P @ Th))))
    return PropertyResult("Pi equals Theta^T P Theta", worst, tol)


def distance_segment_convergence(sys: MechanicalPHSystem, gains: ControllerGains,
                                 rng: np.random.Generator, count: int,
                                 segments: int = 2048, tol: float = 1e-6
                                 ) -> PropertyResult:
    """Composite-midpoint error scales as 1/segments^2; the base count must be
    high enough that one more doubling moves the result below the tolerance
    for the widest sampled chords."""
    worst = 0.0
    for _ in range(count):
        q1 = rng.uniform(-1.0, 1.0, sys.n)
        q2 = rng.uniform(-1.0, 1.0, sys.n)
        p1 = rng.uniform(-2.0, 2.0, sys.n)
        p2 = rng.uniform(-2.0, 2.0, sys.n)
        x, xd = PhaseState(q1, p1), PhaseState(q2, p2)
        d1 = contraction.riemannian_distance(sys, gains, x, xd, segments)
        d2 = contraction.riemannian_distance(sys, gains, x, xd, 2 * segments)
        worst = max(worst, abs(d1 - d2))
    return PropertyResult("distance quadrature converged", worst, tol)


def u_at_vanishes_on_zero_error(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                                gains: ControllerGains, rng: np.random.Generator,
                                count: int, tol: float = 1e-10) -> PropertyResult:
    worst = 0.0
    for _ in range(count):
        t = rng.uniform(0.0, 10.0)
        x = tracking.phase_from_error(sys, ref, gains,
                                      ErrorState(np.zeros(sys.n), np.zeros(sys.n), t), t)
        _, _, u_at = tracking.control_law(sys, ref, gains, x, t)
        worst = max(worst, float(np.max(np.abs(u_at))))
    return PropertyResult("u_at vanishes on zero error", worst, tol)


def error_field_consistency(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                            gains: ControllerGains, horizon: float = 2.0,
                            step: float = 1e-3, tol: float = 1e-4) -> PropertyResult:
    """Centered differences of the mapped closed-loop error trajectory against
    the error-coordinate field."""
    sc = Scenario(system=sys, reference=ref, gains=gains, horizon=horizon,
                  step=step, mode="closed_loop")
    log = simulate(sc)
    e_series = np.hstack([log.q_tilde, log.sigma])
    worst = 0.0
    # skip the fast initial transient: centered differences need a resolved flow
    for k in range(log.t.size // 4, log.t.size - 1, 7):
        de_num = (e_series[k + 1] - e_series[k - 1]) / (2.0 * step)
        de_field = tracking.closed_loop_error_field(
            sys, ref, gains, ErrorState(log.q_tilde[k], log.sigma[k], log.t[k]), log.t[k])
        scale = max(1.0, float(np.max(np.abs(de_field))))
        worst = max(worst, float(np.max(np.abs(de_num - de_field))) / scale)
    return PropertyResult("error field matches mapped flow", worst, tol)


def sliding_invariance(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                       gains: ControllerGains, q_tilde0, horizon: float = 5.0,
                       step: float = 5e-4, tol: float = 1e-4) -> PropertyResult:
    """Under the equivalent control alone, sigma stays on the manifold."""
    e0 = ErrorState(np.asarray(q_tilde0, dtype=float), np.zeros(sys.n), 0.0)
    sc = Scenario(system=sys, reference=ref, gains=gains, horizon=horizon,
                  step=step, mode="ideal_sliding", e0=e0)
    log = simulate(sc)
    worst = float(np.max(np.abs(log.sigma)))
    return PropertyResult("sliding manifold invariant under u_eq", worst, tol)


def reference_consistency_check(ref: ReferenceTrajectory, ts, tol: float = 1e-4
                                ) -> PropertyResult:
    rv, ra = tracking.reference_consistency(ref, ts)
    return PropertyResult("reference derivatives consistent", max(rv, ra), tol)


def standard_suite(sys: MechanicalPHSystem, ref: ReferenceTrajectory,
                   gains: ControllerGains, seed: int = 12345, count: int = 200,
                   grid_points: int = 180) -> List[PropertyResult]:
    """The full randomized suite on one system/reference/gain set."""
    rng = np.random.default_rng(seed)
    grid = np.zeros((grid_points, sys.n))
    sweep = np.linspace(0.0, 2.0 * np.pi, grid_points, endpoint=False)
    grid[:, min(1, sys.n - 1)] = sweep
    results = [
        skew_symmetry(sys, rng, count),
        s_linearity(sys, rng, count),
        velocity_coriolis_identity(sys, rng, count),
        momentum_coriolis_identity(sys, rng, count),
        cross_gradient_identity(sys, rng, count),
        field_assembly_agreement(sys, rng, count),
        structure_reassembly(sys, rng, count),
        gradient_fd_agreement(sys, rng, count),
        passivity_residual(sys, ref, gains),
        positivity_equivalence(sys, gains, grid),
        sym_xi_identity(sys, gains, rng, count),
        theta_conjugation(sys, ref, gains, rng, count),
        pi_dual_assembly(sys, gains, rng, count),
        distance_segment_convergence(sys, gains, rng, max(4, count // 20)),
        u_at_vanishes_on_zero_error(sys, ref, gains, rng, count),
        error_field_consistency(sys, ref, gains),
        sliding_invariance(sys, ref, gains, 0.3 * np.ones(sys.n)),
        reference_consistency_check(ref, np.linspace(0.0, 10.0, 101)),
    ]
    return results
