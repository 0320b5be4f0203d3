import numpy as np
import pytest

from phtrack import contraction, models
from phtrack.contraction import (
    certificate,
    contraction_check_along_trajectory,
    contraction_rate,
    differential_lyapunov,
    gain_condition,
    is_positive_definite,
    metric_P,
    riemannian_distance,
    riemannian_metric_Pi,
    schur_complement_margin,
    theta_transform,
    upsilon,
    variational_field,
    variational_matrix,
    virtual_error_field,
)
from phtrack.phsys import PhaseState
from phtrack.sim import Scenario, simulate
from phtrack.tracking import (
    ControllerGains,
    ErrorState,
    closed_loop_error_field,
    constant_reference,
    diagonal_gains,
)

# Grid minimum of the rate on the benchmark with the paper gains; frozen
# regression value (the rate is independent of theta2 there: the slow block
# is the constant z pair).
SCARA_BETA_MIN = 0.9279324708952


def unit_gains(n=2):
    return diagonal_gains(np.ones(n), np.zeros(n))


class TestMetricP:
    def test_identity_case(self):
        sys = models.toy_constant_inertia(n=2, mass=1.0)
        P = metric_P(sys, unit_gains(), np.zeros(2))
        np.testing.assert_allclose(P, np.eye(4), atol=1e-15)

    def test_diagonal_case(self):
        sys = models.toy_constant_inertia(n=3, mass=1.0)
        gains = diagonal_gains([15.0] * 3, [0.0] * 3)
        P = metric_P(sys, gains, np.zeros(3))
        np.testing.assert_allclose(P, np.diag([15.0] * 3 + [1.0] * 3), atol=1e-15)

    def test_scara_lower_block_is_inverse(self, scara_sys, paper_gains):
        P = metric_P(scara_sys, paper_gains, np.zeros(3))
        Minv = np.linalg.inv(scara_sys.mass(np.zeros(3)))
        np.testing.assert_allclose(P[3:, 3:], Minv, atol=1e-12)
        assert is_positive_definite(P)


class TestUpsilon:
    def test_zero_gain_case(self):
        sys = models.toy_constant_inertia(n=2, mass=1.0, damping=0.0)
        U = upsilon(sys, unit_gains(), np.zeros(2))
        expected = np.zeros((4, 4))
        expected[:2, :2] = 2.0 * np.eye(2)
        np.testing.assert_allclose(U, expected, atol=1e-15)

    def test_kd_case(self):
        sys = models.toy_constant_inertia(n=2, mass=1.0, damping=0.25)
        gains = diagonal_gains([1.0, 1.0], [0.5, 0.5])
        U = upsilon(sys, gains, np.zeros(2))
        np.testing.assert_allclose(U[2:, 2:], 2 * (0.25 + 0.5) * np.eye(2), atol=1e-15)
        np.testing.assert_allclose(U[:2, 2:], np.zeros((2, 2)), atol=1e-15)

    def test_scara_assembly(self, scara_sys, paper_gains):
        q = np.array([0.0, 1.234, 0.0])
        U = upsilon(scara_sys, paper_gains, q)
        Minv = np.linalg.inv(scara_sys.mass(q))
        np.testing.assert_allclose(U[:3, :3], 2 * Minv, atol=1e-12)
        np.testing.assert_allclose(U[:3, 3:], Minv - np.eye(3), atol=1e-12)
        np.testing.assert_allclose(U[3:, 3:], 2 * (0.2 * np.eye(3) + paper_gains.Kd), atol=1e-12)


class TestGainCondition:
    def test_boundary_case(self):
        sys = models.toy_constant_inertia(n=2, mass=1.0, damping=0.0)
        holds, margin = gain_condition(sys, unit_gains(), np.zeros(2))
        assert margin == pytest.approx(0.0, abs=1e-14)
        assert not holds

    def test_unit_kd(self):
        sys = models.toy_constant_inertia(n=2, mass=1.0, damping=0.0)
        gains = diagonal_gains([1.0, 1.0], [1.0, 1.0])
        holds, margin = gain_condition(sys, gains, np.zeros(2))
        assert holds and margin == pytest.approx(1.0)

    def test_three_formulations_agree(self, scara_sys, paper_gains, rng):
        for th in np.linspace(0, 2 * np.pi, 90, endpoint=False):
            q = np.array([0.0, th, 0.0])
            holds, m1 = gain_condition(scara_sys, paper_gains, q)
            m2 = schur_complement_margin(scara_sys, paper_gains, q)
            U = upsilon(scara_sys, paper_gains, q)
            m3 = np.linalg.eigvalsh(0.5 * (U + U.T))[0]
            assert holds
            assert m1 > 1e-10 and m2 > 1e-10 and m3 > 1e-10
            # Schur complement is exactly twice the condition-matrix margin
            assert m2 == pytest.approx(2 * m1, rel=1e-9)

    def test_failing_gains_agree_in_sign(self):
        sys = models.toy_constant_inertia(n=2, mass=4.0, damping=0.0)
        gains = diagonal_gains([1.0, 1.0], [0.0, 0.0])
        holds, m1 = gain_condition(sys, gains, np.zeros(2))
        m2 = schur_complement_margin(sys, gains, np.zeros(2))
        U = upsilon(sys, gains, np.zeros(2))
        m3 = np.linalg.eigvalsh(0.5 * (U + U.T))[0]
        assert not holds and m1 < -1e-10 and m2 < -1e-10 and m3 < -1e-10
        assert m1 == pytest.approx(-0.5625)


class TestContractionRate:
    def test_singular_upsilon_gives_zero(self):
        sys = models.toy_constant_inertia(n=2, mass=1.0, damping=0.0)
        beta = contraction_rate(sys, unit_gains(), np.zeros(2))
        assert beta == pytest.approx(0.0, abs=1e-12)

    def test_block_diagonal_case(self):
        # M = I, Lambda = I, Kd = D = I/2: P = I, Upsilon = 2I, beta = 2
        sys = models.toy_constant_inertia(n=2, mass=1.0, damping=0.5)
        gains = diagonal_gains([1.0, 1.0], [0.5, 0.5])
        assert contraction_rate(sys, gains, np.zeros(2)) == pytest.approx(2.0, abs=1e-12)

    def test_scara_grid_minimum_regression(self, scara_sys, paper_gains):
        betas = []
        for th in np.linspace(0, 2 * np.pi, 180, endpoint=False):
            betas.append(contraction_rate(scara_sys, paper_gains, np.array([0.0, th, 0.0])))
        betas = np.asarray(betas)
        assert betas.min() == pytest.approx(SCARA_BETA_MIN, abs=1e-9)
        # the minimizing pair is theta2-independent, so the rate is flat
        assert betas.max() - betas.min() < 1e-12

    def test_certificate_consistency(self, scara_sys, paper_gains):
        q = np.array([0.3, -1.0, 0.5])
        cert = certificate(scara_sys, paper_gains, q)
        assert cert.beta == pytest.approx(contraction_rate(scara_sys, paper_gains, q), abs=1e-10)
        _, margin = gain_condition(scara_sys, paper_gains, q)
        assert cert.schur_margin == pytest.approx(margin, abs=1e-12)
        assert cert.valid
        assert cert.distance_rate == pytest.approx(cert.beta / 2)
        assert is_positive_definite(cert.P)


class TestDifferentialLyapunov:
    def test_zero_tangent(self):
        assert differential_lyapunov(np.eye(4), np.zeros(4)) == 0.0

    def test_identity_metric(self):
        assert differential_lyapunov(np.eye(2), np.array([1.0, 1.0])) == pytest.approx(1.0)

    def test_envelope_along_prolonged_run(self, scara_sys, paper_ref, paper_gains):
        delta0 = np.ones(6) / np.sqrt(6.0)
        sc = Scenario(system=scara_sys, reference=paper_ref, gains=paper_gains,
                      horizon=3.0, step=1e-3, mode="prolonged", delta0=delta0)
        log = simulate(sc)
        report = contraction_check_along_trajectory(scara_sys, paper_ref, paper_gains, log)
        assert report.envelope_ok
        assert report.max_violation <= 1e-6
        assert report.beta_min >= SCARA_BETA_MIN - 1e-9


class TestVirtualSystem:
    def test_actual_is_particular_solution(self, scara_sys, paper_ref, paper_gains, rng):
        for _ in range(10):
            e = ErrorState(rng.uniform(-1, 1, 3), rng.uniform(-3, 3, 3), 0.0)
            t = rng.uniform(0, 10)
            f_virtual = virtual_error_field(scara_sys, paper_ref, paper_gains, e, e, t)
            f_actual = closed_loop_error_field(scara_sys, paper_ref, paper_gains, e, t)
            np.testing.assert_allclose(f_virtual, f_actual, atol=1e-12)

    def test_origin_is_particular_solution(self, scara_sys, paper_ref, paper_gains, rng):
        e = ErrorState(rng.uniform(-1, 1, 3), rng.uniform(-3, 3, 3), 0.0)
        zero = ErrorState(np.zeros(3), np.zeros(3), 0.0)
        f = virtual_error_field(scara_sys, paper_ref, paper_gains, zero, e, 0.7)
        np.testing.assert_allclose(f, np.zeros(6), atol=1e-14)

    def test_cointegration_stays_on_actual(self, scara_sys, paper_ref, paper_gains):
        sc = Scenario(system=scara_sys, reference=paper_ref, gains=paper_gains,
                      horizon=10.0, step=1e-3, mode="virtual")
        log = simulate(sc)
        e_actual = np.hstack([log.q_tilde, log.sigma])
        assert np.max(np.abs(log.e_virtual - e_actual)) < 1e-6


class TestVariational:
    def test_zero_tangent(self, scara_sys, paper_ref, paper_gains):
        e = ErrorState(np.array([0.2, 0.1, -0.3]), np.array([1.0, 0.0, 2.0]), 0.0)
        f = variational_field(scara_sys, paper_ref, paper_gains, e, np.zeros(6), 1.0)
        np.testing.assert_array_equal(f, np.zeros(6))

    def test_linearity(self, scara_sys, paper_ref, paper_gains, rng):
        e = ErrorState(rng.uniform(-1, 1, 3), rng.uniform(-3, 3, 3), 0.0)
        t = 0.4
        d1 = rng.uniform(-1, 1, 6)
        d2 = rng.uniform(-1, 1, 6)
        a, b = 1.7, -0.6
        lhs = variational_field(scara_sys, paper_ref, paper_gains, e, a * d1 + b * d2, t)
        rhs = (a * variational_field(scara_sys, paper_ref, paper_gains, e, d1, t)
               + b * variational_field(scara_sys, paper_ref, paper_gains, e, d2, t))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_matches_fd_jacobian_of_virtual_field(self, scara_sys, paper_ref, paper_gains, rng):
        for _ in range(5):
            e = ErrorState(rng.uniform(-1, 1, 3), rng.uniform(-3, 3, 3), 0.0)
            t = rng.uniform(0, 10)
            W = variational_matrix(scara_sys, paper_ref, paper_gains, e, t)
            ea0 = np.concatenate([e.q_tilde, e.sigma])
            J = np.empty((6, 6))
            h = 1e-6
            for j in range(6):
                ep = ea0.copy(); ep[j] += h
                em = ea0.copy(); em[j] -= h
                fp = virtual_error_field(scara_sys, paper_ref, paper_gains,
                                         ErrorState(ep[:3], ep[3:], t), e, t)
                fm = virtual_error_field(scara_sys, paper_ref, paper_gains,
                                         ErrorState(em[:3], em[3:], t), e, t)
                J[:, j] = (fp - fm) / (2 * h)
            scale = max(1.0, np.max(np.abs(W)))
            assert np.max(np.abs(W - J)) / scale < 1e-4


class TestThetaConjugation:
    def test_conjugation_identity(self, scara_sys, paper_ref, paper_gains, rng):
        Th = theta_transform(paper_gains)
        Th_inv = np.linalg.inv(Th)
        for _ in range(20):
            e = ErrorState(rng.uniform(-2, 2, 3), rng.uniform(-5, 5, 3), 0.0)
            t = rng.uniform(0, 10)
            W0 = contraction.original_coordinates_variational_matrix(
                scara_sys, paper_ref, paper_gains, e, t)
            Wa = variational_matrix(scara_sys, paper_ref, paper_gains, e, t)
            assert np.max(np.abs(Th @ W0 @ Th_inv - Wa)) < 1e-8

    def test_sym_xi_identity(self, scara_sys, paper_gains, rng):
        for _ in range(20):
            q = rng.uniform(-3, 3, 3)
            M = scara_sys.mass(q)
            Minv = np.linalg.inv(M)
            Minv = 0.5 * (Minv + Minv.T)
            L, Kd = paper_gains.Lambda, paper_gains.Kd
            D = scara_sys.damping(q)
            Xi = np.block([
                [L @ Minv @ L, -L @ Minv],
                [Minv @ Minv @ L, Minv @ (D + Kd) @ Minv],
            ])
            P = metric_P(scara_sys, paper_gains, q)
            U = upsilon(scara_sys, paper_gains, q)
            assert np.max(np.abs(0.5 * (Xi + Xi.T) - 0.5 * P @ U @ P)) < 1e-10


class TestRiemannianMetric:
    def test_degenerate_without_position_gain(self):
        sys = models.toy_constant_inertia(n=2, mass=2.0)
        # Lambda -> 0 limit collapses the position block; assemble directly
        M = sys.mass(np.zeros(2))
        Minv = np.linalg.inv(M)
        L = np.zeros((2, 2))
        Pi = np.block([[L + L @ Minv @ L, L @ Minv], [Minv @ L, Minv]])
        assert not is_positive_definite(Pi)

    def test_unit_case(self):
        sys = models.toy_constant_inertia(n=2, mass=1.0)
        Pi = riemannian_metric_Pi(sys, unit_gains(), np.zeros(2))
        I = np.eye(2)
        expected = np.block([[2 * I, I], [I, I]])
        np.testing.assert_allclose(Pi, expected, atol=1e-15)

    def test_dual_assembly(self, scara_sys, paper_gains, rng):
        Th = theta_transform(paper_gains)
        for _ in range(10):
            q = rng.uniform(-3, 3, 3)
            Pi = riemannian_metric_Pi(scara_sys, paper_gains, q)
            P = metric_P(scara_sys, paper_gains, q)
            assert np.max(np.abs(Pi - Th.T @ P @ Th)) < 1e-10
            assert is_positive_definite(Pi)


class TestRiemannianDistance:
    def test_zero_for_equal_points(self, scara_sys, paper_gains):
        x = PhaseState([0.1, 0.2, 0.3], [1.0, -1.0, 0.5])
        assert riemannian_distance(scara_sys, paper_gains, x, x) == 0.0

    def test_constant_metric_exact(self):
        sys = models.toy_constant_inertia(n=2, mass=2.0)
        gains = diagonal_gains([3.0, 3.0], [1.0, 1.0])
        x = PhaseState([0.0, 0.0], [0.0, 0.0])
        xd = PhaseState([1.0, -1.0], [2.0, 0.5])
        delta = np.array([1.0, -1.0, 2.0, 0.5])
        Pi = riemannian_metric_Pi(sys, gains, np.zeros(2))
        expected = np.sqrt(0.5 * delta @ Pi @ delta)
        for segments in (1, 4, 16):
            assert riemannian_distance(sys, gains, x, xd, segments) == pytest.approx(
                expected, rel=1e-14)

    def test_segment_convergence(self, scara_sys, paper_gains):
        x = PhaseState([0.0, 0.5, 0.1], [1.0, 0.0, -2.0])
        xd = PhaseState([0.4, 1.1, -0.2], [0.0, 1.0, 1.0])
        d1 = riemannian_distance(scara_sys, paper_gains, x, xd, 256)
        d2 = riemannian_distance(scara_sys, paper_gains, x, xd, 512)
        assert abs(d1 - d2) < 1e-6

    def test_series_matches_scalar(self, scara_sys, paper_gains, rng):
        xs = rng.uniform(-1, 1, (7, 6))
        xds = rng.uniform(-1, 1, (7, 6))
        series = contraction.riemannian_distance_series(scara_sys, paper_gains, xs, xds, 16)
        for i in range(7):
            d = riemannian_distance(scara_sys, paper_gains,
                                    PhaseState(xs[i, :3], xs[i, 3:]),
                                    PhaseState(xds[i, :3], xds[i, 3:]), 16)
            assert series[i] == pytest.approx(d, rel=1e-12)

    def test_invalid_segments(self, scara_sys, paper_gains):
        x = PhaseState(np.zeros(3), np.zeros(3))
        with pytest.raises(ValueError):
            riemannian_distance(scara_sys, paper_gains, x, x, 0)


class TestTrajectoryCheck:
    def test_zero_tangent_trivially_satisfied(self, scara_sys, paper_ref, paper_gains):
        sc = Scenario(system=scara_sys, reference=paper_ref, gains=paper_gains,
                      horizon=0.5, step=1e-3, mode="prolonged", delta0=np.zeros(6))
        log = simulate(sc)
        report = contraction_check_along_trajectory(scara_sys, paper_ref, paper_gains, log)
        assert report.max_violation <= 1e-12
        assert report.envelope_ok

    def test_requires_tangent_log(self, scara_sys, paper_ref, paper_gains):
        sc = Scenario(system=scara_sys, reference=paper_ref, gains=paper_gains,
                      horizon=0.1, step=1e-3, mode="closed_loop")
        log = simulate(sc)
        with pytest.raises(ValueError):
            contraction_check_along_trajectory(scara_sys, paper_ref, paper_gains, log)
