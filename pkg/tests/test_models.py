import numpy as np
import pytest

from phtrack import models
from phtrack.phsys import PhaseState, hamiltonian, open_loop_field

from conftest import fd_mass_partials, scara_mass_oracle


class TestScara:
    def test_inertia_at_zero(self, scara_sys):
        M = scara_sys.mass(np.zeros(3))
        assert M[0, 0] == pytest.approx(1.25)
        assert M[0, 1] == pytest.approx(0.5)
        assert M[1, 1] == pytest.approx(0.25)
        assert M[2, 2] == pytest.approx(29.43)
        np.testing.assert_allclose(M, M.T)

    def test_inertia_at_right_angle(self, scara_sys):
        # cosine term drops out at theta2 = pi/2
        M = scara_sys.mass(np.array([0.0, np.pi / 2, 0.0]))
        assert M[0, 0] == pytest.approx((1 + 1) * 0.25 + 0.25, abs=1e-12)
        assert M[0, 1] == pytest.approx(0.25, abs=1e-12)

    def test_partial_at_right_angle(self, scara_sys):
        dM = scara_sys.mass_partials(np.array([0.0, np.pi / 2, 0.0]))
        assert dM[1, 0, 0] == pytest.approx(-0.5)
        np.testing.assert_array_equal(dM[0], np.zeros((3, 3)))
        np.testing.assert_array_equal(dM[2], np.zeros((3, 3)))

    def test_matches_oracle_formulas(self, scara_sys, rng):
        for _ in range(20):
            q = rng.uniform(-np.pi, np.pi, 3)
            np.testing.assert_allclose(scara_sys.mass(q), scara_mass_oracle(q), atol=1e-14)

    def test_positive_definite_on_grid(self, scara_sys):
        lo, hi = scara_sys.inertia_bounds
        assert lo > 0
        for th in np.linspace(0, 2 * np.pi, 720, endpoint=False):
            w = np.linalg.eigvalsh(scara_sys.mass(np.array([0.0, th, 0.0])))
            assert w[0] > 0
            assert lo - 1e-12 <= w[0] and w[-1] <= hi + 1e-12

    def test_analytic_partials_match_fd(self, scara_sys, rng):
        for _ in range(10):
            q = rng.uniform(-np.pi, np.pi, 3)
            analytic = scara_sys.mass_partials(q)
            fd = fd_mass_partials(scara_sys, q)
            scale = max(1.0, np.max(np.abs(analytic)))
            assert np.max(np.abs(analytic - fd)) / scale < 1e-6

    def test_batch_inertia_matches(self, scara_sys, rng):
        qs = rng.uniform(-np.pi, np.pi, (40, 3))
        batch = scara_sys.mass_batch(qs)
        for i in range(40):
            np.testing.assert_allclose(batch[i], scara_sys.mass(qs[i]), atol=1e-15)

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            models.ScaraParams(m1=-1.0)
        with pytest.raises(ValueError):
            models.ScaraParams(l2=0.0)

    def test_damping_and_input_map_shape(self, scara_sys, rng):
        for _ in range(10):
            q = rng.uniform(-np.pi, np.pi, 3)
            D = scara_sys.damping(q)
            np.testing.assert_allclose(D, D.T)
            assert np.linalg.eigvalsh(D).min() >= 0.0
            assert np.linalg.matrix_rank(scara_sys.input_map(q)) == 3


class TestToyConstantInertia:
    def test_validation(self):
        with pytest.raises(ValueError):
            models.toy_constant_inertia(n=0)
        with pytest.raises(ValueError):
            models.toy_constant_inertia(mass=0.0)
        with pytest.raises(ValueError):
            models.toy_constant_inertia(damping=-0.1)

    def test_energy_conserved_without_damping(self):
        # M constant and V = 0: pdot = 0, so H is constant along the flow.
        sys = models.toy_constant_inertia(n=2, mass=2.0, damping=0.0)
        x = PhaseState([0.0, 0.0], [1.0, -1.0])
        f = open_loop_field(sys, x, np.zeros(2))
        np.testing.assert_array_equal(f[2:], np.zeros(2))
        assert hamiltonian(sys, x) == pytest.approx(0.5)

    def test_gain_margin_formula(self):
        # margin = damping + kd + 1/2 - (1/m + m)/4 for scalar gains
        from phtrack.contraction import gain_condition
        from phtrack.tracking import diagonal_gains

        m, kd, d = 4.0, 0.0, 0.0
        sys = models.toy_constant_inertia(n=2, mass=m, damping=d)
        gains = diagonal_gains([1.0, 1.0], [kd, kd])
        holds, margin = gain_condition(sys, gains, np.zeros(2))
        assert margin == pytest.approx(d + kd + 0.5 - 0.25 * (1 / m + m))
        assert margin == pytest.approx(-0.5625)
        assert not holds


class TestToyPendulum:
    def test_validation(self):
        with pytest.raises(ValueError):
            models.toy_pendulum(mass=0.0)
        with pytest.raises(ValueError):
            models.toy_pendulum(length=-1.0)

    def test_equilibrium_field(self):
        sys = models.toy_pendulum()
        f = open_loop_field(sys, PhaseState([0.0], [0.0]), np.zeros(1))
        np.testing.assert_array_equal(f, np.zeros(2))

    def test_potential_gradient(self, rng):
        sys = models.toy_pendulum(mass=1.2, length=0.7, g=9.81)
        for _ in range(10):
            q = rng.uniform(-np.pi, np.pi, 1)
            expected = 1.2 * 9.81 * 0.7 * np.sin(q)
            np.testing.assert_allclose(sys.potential_grad(q), expected, atol=1e-12)

    def test_small_angle_tracking_converges(self):
        from phtrack.sim import Scenario, simulate
        from phtrack.tracking import diagonal_gains, sinusoidal_reference

        sys = models.toy_pendulum(damping=0.1)
        ref = sinusoidal_reference([0.1], [1.0], [0.0])
        gains = diagonal_gains([4.0], [6.0])
        sc = Scenario(system=sys, reference=ref, gains=gains, horizon=8.0, step=1e-3,
                      x0=PhaseState([0.3], [0.0]))
        log = simulate(sc)
        assert not log.failed
        assert np.abs(log.q_tilde[-1]).max() < 1e-3
        assert np.abs(log.sigma[-1]).max() < 1e-3
