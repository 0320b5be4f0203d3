"""Fixed-step RK4 integration of the plant, error, virtual and prolonged systems.

Every run produces a ``SimLog`` on a uniform time grid with the same column
set regardless of mode, so downstream consumers (CSV writer, figure scripts,
certificate audits) never branch.  Integration failures preserve the prefix
of the log and set ``failed``/``reason`` instead of discarding the run.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import contraction, tracking
from .phsys import (
    MechanicalPHSystem,
    PhaseState,
    SingularInertiaError,
    SingularInputMapError,
    open_loop_field,
)
from .tracking import ControllerGains, ErrorState, ReferenceTrajectory

MODES = ("open_loop", "closed_loop", "ideal_sliding", "error", "virtual", "prolonged")


class NonFiniteFieldError(RuntimeError):
    """A field evaluation produced a non-finite value; carries the offending state."""

    def __init__(self, t: float, state: np.ndarray):
        super().__init__(f"non-finite field evaluation at t={t:.6g}")
        self.t = t
        self.state = state


def rk4_step(fieldfn: Callable[[np.ndarray, float], np.ndarray],
             x: np.ndarray, t: float, h: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    if h <= 0.0:
        raise ValueError("step size must be positive")
    k1 = fieldfn(x, t)
    if not np.all(np.isfinite(k1)):
        raise NonFiniteFieldError(t, x)
    k2 = fieldfn(x + 0.5 * h * k1, t + 0.5 * h)
    if not np.all(np.isfinite(k2)):
        raise NonFiniteFieldError(t, x)
    k3 = fieldfn(x + 0.5 * h * k2, t + 0.5 * h)
    if not np.all(np.isfinite(k3)):
        raise NonFiniteFieldError(t, x)
    k4 = fieldfn(x + h * k3, t + h)
    if not np.all(np.isfinite(k4)):
        raise NonFiniteFieldError(t, x)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class Scenario:
    """One integration task: a system, a reference, gains and a dynamics mode.

    ``x0`` seeds phase-space modes; ``e0`` seeds the error-coordinate modes
    (when omitted it is derived from ``x0`` and vice versa).  ``delta0`` is
    the initial tangent vector for the prolonged mode; ``u_fn`` the open-loop
    input t -> u.
    """

    system: MechanicalPHSystem
    reference: ReferenceTrajectory
    gains: ControllerGains
    horizon: float
    step: float
    mode: str = "closed_loop"
    x0: Optional[PhaseState] = None
    e0: Optional[ErrorState] = None
    e_a0: Optional[ErrorState] = None
    delta0: Optional[np.ndarray] = None
    u_fn: Optional[Callable[[float], np.ndarray]] = None
    t0: float = 0.0
    distance_segments: int = 16

    def __post_init__(self):
        if self.step <= 0.0:
            raise ValueError("step size must be positive")
        if self.horizon < self.step:
            raise ValueError("horizon must be at least one step")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        n = self.system.n
        if self.x0 is None and self.e0 is None:
            self.x0 = PhaseState(np.zeros(n), np.zeros(n), self.t0)
        if self.x0 is None:
            self.x0 = tracking.phase_from_error(
                self.system, self.reference, self.gains, self.e0, self.t0)
        if self.e0 is None:
            self.e0 = tracking.error_coordinates(
                self.system, self.reference, self.gains, self.x0, self.t0)
        if self.x0.n != n or self.e0.n != n:
            raise ValueError("initial state dimension does not match the system")
        if self.mode == "prolonged":
            if self.delta0 is None:
                raise ValueError("prolonged mode needs an initial tangent vector")
            self.delta0 = np.asarray(self.delta0, dtype=float).reshape(-1)
            if self.delta0.size != 2 * n:
                raise ValueError("tangent vector must have length 2n")
        if self.mode == "virtual" and self.e_a0 is None:
            self.e_a0 = self.e0

    @property
    def num_steps(self) -> int:
        return int(round(self.horizon / self.step))


@dataclass
class SimLog:
    """Uniform-grid record of a run.  All series share the time grid length."""

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    q_d: np.ndarray
    u: np.ndarray
    u_eq: np.ndarray
    u_at: np.ndarray
    q_tilde: np.ndarray
    sigma: np.ndarray
    H: np.ndarray
    H_d: np.ndarray
    beta: np.ndarray
    margin: np.ndarray
    dist: np.ndarray
    V: np.ndarray
    delta: Optional[np.ndarray] = None
    e_virtual: Optional[np.ndarray] = None
    failed: bool = field(default=False)
    reason: Optional[str] = None


def _raw_initial(sc: Scenario) -> np.ndarray:
    n = sc.system.n
    if sc.mode in ("open_loop", "closed_loop", "ideal_sliding"):
        return np.concatenate([sc.x0.q, sc.x0.p])
    e = np.concatenate([sc.e0.q_tilde, sc.e0.sigma])
    if sc.mode == "error":
        return e
    if sc.mode == "virtual":
        return np.concatenate([e, sc.e_a0.q_tilde, sc.e_a0.sigma])
    return np.concatenate([e, sc.delta0])  # prolonged


def _field_for(sc: Scenario) -> Callable[[np.ndarray, float], np.ndarray]:
    sys, ref, gains = sc.system, sc.reference, sc.gains
    n = sys.n

    if sc.mode == "open_loop":
        u_fn = sc.u_fn or (lambda t: np.zeros(n))

        def f(x, t):
            return open_loop_field(sys, PhaseState(x[:n], x[n:], t), u_fn(t))

        return f

    if sc.mode in ("closed_loop", "ideal_sliding"):
        attract = sc.mode == "closed_loop"

        def f(x, t):
            return tracking.closed_loop_field(sys, ref, gains, x, t, attractivity=attract)

        return f

    if sc.mode == "error":

        def f(e, t):
            return tracking.closed_loop_error_field(
                sys, ref, gains, ErrorState(e[:n], e[n:], t), t)

        return f

    if sc.mode == "virtual":

        def f(z, t):
            e = ErrorState(z[:n], z[n : 2 * n], t)
            ea = ErrorState(z[2 * n : 3 * n], z[3 * n :], t)
            de = tracking.closed_loop_error_field(sys, ref, gains, e, t)
            dea = contraction.virtual_error_field(sys, ref, gains, ea, e, t)
            return np.concatenate([de, dea])

        return f

    def f(z, t):  # prolonged: error state + tangent in one evaluation
        e = ErrorState(z[:n], z[n : 2 * n], t)
        de = tracking.closed_loop_error_field(sys, ref, gains, e, t)
        W = contraction.variational_matrix(sys, ref, gains, e, t)
        return np.concatenate([de, W @ z[2 * n :]])

    return f


def simulate(scenario: Scenario) -> SimLog:
    """Integrate the selected dynamics and log every sample.

    On singular inertia or a non-finite field evaluation the completed prefix
    is logged and the result is flagged failed.
    """
    sc = scenario
    sys, ref, gains = sc.system, sc.reference, sc.gains
    n = sys.n
    N = sc.num_steps
    h = sc.step

    holds, _ = contraction.gain_condition(sys, gains, sc.x0.q)
    if not holds:
        warnings.warn("gain condition fails at the initial configuration; "
                      "the contraction certificate will not be valid there")

    fieldfn = _field_for(sc)
    states = np.empty((N + 1, _raw_initial(sc).size))
    states[0] = _raw_initial(sc)
    completed = N
    reason = None
    t0 = sc.t0
    for k in range(N):
        try:
            states[k + 1] = rk4_step(fieldfn, states[k], t0 + k * h, h)
        except (SingularInertiaError, SingularInputMapError, NonFiniteFieldError) as exc:
            completed = k
            reason = str(exc)
            break

    m = completed + 1
    ts = t0 + h * np.arange(m)
    states = states[:m]
    return _build_log(sc, ts, states, failed=reason is not None, reason=reason)


def _build_log(sc: Scenario, ts: np.ndarray, states: np.ndarray,
               failed: bool, reason: Optional[str]) -> SimLog:
    sys, ref, gains = sc.system, sc.reference, sc.gains
    n = sys.n
    m = ts.size
    q = np.empty((m, n))
    p = np.empty((m, n))
    q_d = np.empty((m, n))
    u = np.empty((m, n))
    u_eq = np.empty((m, n))
    u_at = np.empty((m, n))
    q_tilde = np.empty((m, n))
    sigma = np.empty((m, n))
    H = np.empty(m)
    H_d = np.empty(m)
    beta = np.empty(m)
    margin = np.empty(m)
    V = np.empty(m)
    delta = states[:, 2 * n :].copy() if sc.mode == "prolonged" else None
    e_virtual = states[:, 2 * n :].copy() if sc.mode == "virtual" else None

    in_phase_space = sc.mode in ("open_loop", "closed_loop", "ideal_sliding")
    lam_sqrt = contraction._spd_sqrt(gains.Lambda)
    zeros = np.zeros(n)
    for k in range(m):
        t = float(ts[k])
        if in_phase_space:
            c = tracking._Chart(sys, ref, gains, states[k, :n], states[k, n : 2 * n], t)
        else:
            c = tracking._chart_from_error(sys, ref, gains, states[k, :n],
                                           states[k, n : 2 * n], t)
        q[k], p[k] = c.q, c.p
        q_tilde[k], sigma[k] = c.q_tilde, c.sigma
        q_d[k] = c.q_d

        if sc.mode == "open_loop":
            uk = sc.u_fn(t) if sc.u_fn is not None else zeros
            u[k], u_eq[k], u_at[k] = uk, uk, zeros
        else:
            gu_eq, gu_at = tracking._gu_parts(sys, gains, c)
            if sc.mode == "ideal_sliding":
                sol = tracking._solve_input(c.G, gu_eq)
                u[k], u_eq[k], u_at[k] = sol, sol, zeros
            else:
                sol = tracking._solve_input(c.G, np.column_stack([gu_eq + gu_at, gu_eq, gu_at]))
                u[k], u_eq[k], u_at[k] = sol[:, 0], sol[:, 1], sol[:, 2]

        H[k] = 0.5 * c.p @ c.qdot + sys.potential(c.q)
        H_d[k] = 0.5 * c.qdot_d @ sys.mass(c.q_d) @ c.qdot_d + sys.potential(c.q_d)

        cert = contraction._certificate_from_parts(
            c.M, np.linalg.inv(c.M), c.D, gains, lam_sqrt)
        beta[k] = cert.beta
        margin[k] = cert.schur_margin
        tangent = delta[k] if delta is not None else np.concatenate([c.q_tilde, c.sigma])
        V[k] = contraction.differential_lyapunov(cert.P, tangent)

    q_d_dots = np.empty((m, n))
    for k in range(m):
        q_d_dots[k] = ref.qdot_d(float(ts[k]))
    p_d = np.einsum("mij,mj->mi", sys.mass_batch(q_d), q_d_dots)
    dist = contraction.riemannian_distance_series(
        sys, gains, np.hstack([q, p]), np.hstack([q_d, p_d]),
        segments=sc.distance_segments)

    return SimLog(t=ts, q=q, p=p, q_d=q_d, u=u, u_eq=u_eq, u_at=u_at,
                  q_tilde=q_tilde, sigma=sigma, H=H, H_d=H_d, beta=beta,
                  margin=margin, dist=dist, V=V, delta=delta,
                  e_virtual=e_virtual, failed=failed, reason=reason)
