import math

import numpy as np
import pytest

from spintrack.errors import ConfigurationError, UnsupportedCaseError
from spintrack.model import DesignParams, PlantParams, Priors, fluctuating_plant
from spintrack.numerics import ou_increment
from spintrack.riccati import (controller_gain, exact_steady_sigma, riccati_at_times,
                               steady_state_gains, transient_sigma_b)
from spintrack.lqg_filter import design_plant
from spintrack import total_covariance as tc

FLUCT = fluctuating_plant(J=1e6, gamma=1e6, M=1e4, gamma_b=1e5, sigma_bfree=1.0)
PRIOR = Priors(sigma_z0=5e5, sigma_b0=1.0)


def _matched_setup(lam=1e-4, t_end=5e-8, ratio=0.005):
    d = DesignParams(J_prime=1e6, lam=lam)
    offset = FLUCT.sigma_M / PRIOR.sigma_z0
    grid = [0.0]
    t = 0.0
    while t < t_end:
        t = min(t + ratio * (t + offset), t_end)
        grid.append(t)
    grid = np.array(grid)
    cov = riccati_at_times(FLUCT, PRIOR, grid)
    k1, k2 = cov.gain(FLUCT.sigma_M)
    alpha, beta = tc.build_alpha_beta(FLUCT, d, (grid, k1, k2), controller_gain(FLUCT, d))
    return d, grid, cov, alpha, beta


class TestStructure:
    def test_matched_uncontrolled_blocks(self):
        d = DesignParams(J_prime=1e6, lam=0.0)
        alpha, beta = tc.build_alpha_beta(FLUCT, d, lambda t: (2.0, 3.0), np.zeros(2))
        a = alpha(0.0)
        assert np.allclose(a[:2, 2:], 0.0)                       # no control feedthrough
        assert np.allclose(a[2:, :2], [[2.0, 0.0], [3.0, 0.0]])  # K_O C block

    def test_beta_constant_field(self):
        p = PlantParams(J=1e6, gamma=1e6, M=1e4)
        d = DesignParams(J_prime=1e6, lam=0.0)
        _, beta = tc.build_alpha_beta(p, d, lambda t: (2.0, 3.0), np.zeros(2))
        b = beta(0.0)
        sm = math.sqrt(p.sigma_M)
        expected = np.zeros((4, 4))
        expected[2, 2] = 2.0 * sm
        expected[3, 2] = 3.0 * sm
        assert np.allclose(b, expected)

    def test_lower_right_block_identity(self):
        d = DesignParams(J_prime=2e6, lam=0.5)
        kc = controller_gain(FLUCT, d)
        alpha, _ = tc.build_alpha_beta(FLUCT, d, lambda t: (7.0, 11.0), kc)
        a = alpha(0.0)
        gjp = FLUCT.gamma * d.J_prime
        a_des = np.array([[0.0, gjp], [0.0, -FLUCT.gamma_b]])
        b_des = np.array([gjp, 0.0])
        expected = a_des - np.outer(b_des, kc) - np.array([[7.0, 0.0], [11.0, 0.0]])
        assert np.allclose(a[2:, 2:], expected)

    def test_gain_table_shape_mismatch(self):
        with pytest.raises(ConfigurationError):
            tc.build_alpha_beta(FLUCT, DesignParams(J_prime=1e6),
                                (np.zeros(3), np.zeros(2), np.zeros(3)), np.zeros(2))


class TestMagnetometryError:
    def test_perfect_correlation_gives_zero(self):
        th = np.zeros((4, 4))
        for i in (1, 3):
            for j in (1, 3):
                th[i, j] = 2.5
        assert tc.magnetometry_error(th) == 0.0

    def test_initial_condition_returns_field_prior(self):
        assert tc.magnetometry_error(tc.theta_init(PRIOR)) == PRIOR.sigma_b0

    def test_matched_saturation(self):
        d, grid, cov, alpha, beta = _matched_setup()
        traj = tc.integrate_theta(alpha, beta, tc.theta_init(PRIOR), 0, 0,
                                  method="rk4", times=grid)
        _, _, sb = exact_steady_sigma(FLUCT)
        assert tc.magnetometry_error(traj[len(traj) - 1]) == pytest.approx(sb, rel=5e-3)


class TestMatchedIdentity:
    def test_sigma_bE_equals_sigma_bR(self):
        d, grid, cov, alpha, beta = _matched_setup()
        traj = tc.integrate_theta(alpha, beta, tc.theta_init(PRIOR), 0, 0,
                                  method="rk4", times=grid)
        rel = np.abs(traj.sigma_bE[1:] / cov.sigma_bR[1:] - 1.0)
        assert rel.max() < 1e-6

    def test_integrating_factor_matches_rk4_frozen_gains(self):
        # piecewise-constant gains: both routes solve the same flow
        d = DesignParams(J_prime=1e6, lam=1e-4)
        g = steady_state_gains(FLUCT, d)
        k1, k2 = g.K_O
        alpha, beta = tc.build_alpha_beta(FLUCT, d, lambda t: (k1, k2), g.K_C)
        times = np.linspace(0.0, 2e-8, 400)
        rk4 = tc.integrate_theta(alpha, beta, tc.theta_init(PRIOR), 0, 0,
                                 method="rk4", times=times)
        exm = tc.integrate_theta(alpha, beta, tc.theta_init(PRIOR), 0, 0,
                                 method="expm", times=times)
        rel = np.abs(exm.sigma_bE[1:] / rk4.sigma_bE[1:] - 1.0)
        assert rel.max() < 1e-6

    def test_disconnected_filter_marginals(self):
        # K_O' = K_C' = 0: the truth marginals must follow the open plant
        d = DesignParams(J_prime=1e6, lam=0.0)
        alpha, beta = tc.build_alpha_beta(FLUCT, d, lambda t: (0.0, 0.0), np.zeros(2))
        times = np.linspace(0.0, 1e-6, 200)
        traj = tc.integrate_theta(alpha, beta, tc.theta_init(PRIOR), 0, 0,
                                  method="rk4", times=times)
        a_true = np.array([[0.0, FLUCT.gamma * FLUCT.J], [0.0, -FLUCT.gamma_b]])
        q_true = np.diag([0.0, FLUCT.sigma_bF])
        p = np.diag([PRIOR.sigma_z0, PRIOR.sigma_b0])
        for k in range(1, len(times)):
            phi, g = ou_increment(a_true, q_true, times[k] - times[k - 1])
            p = phi @ p @ phi.T + g
        assert traj.thetas[-1][0, 0] == pytest.approx(p[0, 0], rel=1e-8)
        assert traj.thetas[-1][1, 1] == pytest.approx(p[1, 1], rel=1e-8)


class TestMismatchFactors:
    def test_matched_is_unity(self):
        assert tc.mismatch_factors(1.0, "controlled_steady") == 1.0
        assert tc.mismatch_factors(1.0, "controlled_transient") == 1.0
        assert tc.mismatch_factors(1.0, "uncontrolled_fluctuating") == 0.0

    def test_large_f_limits(self):
        assert tc.mismatch_factors(1e9, "controlled_steady") == pytest.approx(0.5, rel=1e-8)
        assert tc.mismatch_factors(1e9, "controlled_transient") == pytest.approx(0.25, rel=1e-8)

    def test_worse_than_no_estimation(self):
        assert tc.mismatch_factors(3.0, "uncontrolled_fluctuating") == 4.0

    def test_transient_validity_boundary(self):
        with pytest.raises(UnsupportedCaseError):
            tc.mismatch_factors(0.5, "controlled_transient")
        assert tc.mismatch_factors(0.51, "controlled_transient") > 0

    def test_unknown_regime(self):
        with pytest.raises(ConfigurationError):
            tc.mismatch_factors(1.0, "bogus")


class TestSteadyStateError:
    def test_controlled_factor_curve(self):
        d = DesignParams(J_prime=1e6, lam=1.0)
        for f in (0.5, 2.0, 10.0):
            p = fluctuating_plant(J=f * 1e6, gamma=1e6, M=1e4, gamma_b=1e5, sigma_bfree=1.0)
            err = tc.steady_state_error(p, d)
            ref = steady_state_gains(design_plant(p, d), d).sigma_bS
            assert err / ref == pytest.approx(tc.mismatch_factors(f, "controlled_steady"), rel=0.02)

    def test_uncontrolled_saturation(self):
        d = DesignParams(J_prime=1e6, lam=0.0)
        for f in (0.5, 2.0, 10.0):
            p = fluctuating_plant(J=f * 1e6, gamma=1e6, M=1e4, gamma_b=1e5, sigma_bfree=1.0)
            err = tc.steady_state_error(p, d)
            assert err == pytest.approx((1.0 - f) ** 2 * 1.0, rel=0.02)

    def test_matched_uncontrolled_is_optimal(self):
        d = DesignParams(J_prime=1e6, lam=0.0)
        err = tc.steady_state_error(FLUCT, d)
        _, _, sb = exact_steady_sigma(FLUCT)
        assert err == pytest.approx(sb, rel=1e-6)

    def test_constant_field_rejected(self):
        with pytest.raises(UnsupportedCaseError):
            tc.steady_state_error(PlantParams(J=1e6, gamma=1e6, M=1e4),
                                  DesignParams(J_prime=1e6, lam=1.0))

    def test_consistent_with_integration(self):
        # the stationary solve is a fixed point of the integrated flow
        d = DesignParams(J_prime=1e6, lam=1e-4)
        g = steady_state_gains(FLUCT, d)
        k1, k2 = g.K_O
        alpha, beta = tc.build_alpha_beta(FLUCT, d, lambda t: (k1, k2), g.K_C)
        times = np.linspace(0.0, 3e-7, 300)
        traj = tc.integrate_theta(alpha, beta, tc.theta_init(PRIOR), 0, 0,
                                  method="expm", times=times)
        err = tc.steady_state_error(FLUCT, d)
        assert traj.sigma_bE[-1] == pytest.approx(err, rel=5e-3)


def test_theta_csv_schema():
    d = DesignParams(J_prime=1e6, lam=0.0)
    alpha, beta = tc.build_alpha_beta(FLUCT, d, lambda t: (0.0, 0.0), np.zeros(2))
    traj = tc.integrate_theta(alpha, beta, tc.theta_init(PRIOR), 0, 0,
                              method="expm", times=np.linspace(0.0, 1e-8, 5))
    header, cols = tc.theta_csv_columns(traj)
    assert header[:2] == ["t", "sigma_bE"]
    assert len(header) == 12 and len(cols) == 12  # 10 distinct entries
    assert all(len(c) == 5 for c in cols)
    assert cols[header.index("theta_bb")][0] == pytest.approx(PRIOR.sigma_b0)


class TestTransientCurve:
    def test_matched_follows_transient_law(self):
        p = PlantParams(J=1e6, gamma=1e6, M=1e4)
        prior = Priors(sigma_z0=5e5, sigma_b0=1.0)
        d = DesignParams(J_prime=1e6, lam=1.0)
        t_eval = np.array([1e-6, 1e-5])
        traj = tc.transient_error_curve(p, prior, d, t_eval)
        for t, sb in zip(t_eval, traj.sigma_bE):
            assert sb == pytest.approx(transient_sigma_b(p, t), rel=5e-3)

    def test_reference_mismatch_point(self):
        # f = 2 at late transient: measured factor sits near (but below)
        # the approximate closed form; see the acceptance suite discussion
        f = 2.0
        p = PlantParams(J=f * 1e6, gamma=1e6, M=1e4)
        prior = Priors(sigma_z0=p.J / 2.0, sigma_b0=1.0)
        d = DesignParams(J_prime=1e6, lam=1.0)
        traj = tc.transient_error_curve(p, prior, d, np.array([1e-5]))
        factor = traj.sigma_bE[0] / transient_sigma_b(p, 1e-5, J=1e6)
        assert 0.3 < factor < 0.45

    def test_psd_throughout(self):
        p = PlantParams(J=2e6, gamma=1e6, M=1e4)
        prior = Priors(sigma_z0=1e6, sigma_b0=1.0)
        d = DesignParams(J_prime=1e6, lam=1.0)
        traj = tc.transient_error_curve(p, prior, d, np.geomspace(1e-8, 1e-5, 8))
        for k in range(len(traj)):
            assert np.min(np.linalg.eigvalsh(traj.thetas[k])) >= -1e-9 * np.trace(traj.thetas[k])
        assert np.all(traj.sigma_bE >= 0.0)
