import math

import numpy as np
import pytest

from spintrack.errors import ConfigurationError, ControllerFaultError
from spintrack.model import PlantParams, Priors, fluctuating_plant
from spintrack.numerics import RngStream, trial_normals
from spintrack.truth_sim import (simulate_field, simulate_field_ensemble,
                                 simulate_open_loop, simulate_plant)


class _ZeroStream:
    """Stand-in stream with all draws forced to zero (noise-free runs)."""

    def normals(self, n):
        return np.zeros(n)


class TestSimulateField:
    def test_frozen_field(self):
        p = PlantParams(J=1.0, gamma=1.0, M=1.0)
        b = simulate_field(p, Priors(1.0, 4.0), RngStream(1), 1e-3, 0.1)
        assert np.all(b == b[0])
        assert b[0] != 0.0

    def test_step_guard(self):
        p = PlantParams(J=1.0, gamma=1.0, M=1.0, gamma_b=1e3, sigma_bF=1.0)
        with pytest.raises(ConfigurationError):
            simulate_field(p, Priors(1.0, 0.0), RngStream(1), 1e-3, 0.1)

    def test_stationary_variance(self):
        # OU at stationarity: Var[b(T)] -> sigma_bF / (2 gamma_b) = 1
        p = fluctuating_plant(J=1e6, gamma=1e6, M=1e4, gamma_b=1e5, sigma_bfree=1.0)
        trials = 10_000
        b = simulate_field_ensemble(p, Priors(1.0, 1.0), seed=21, trials=trials,
                                    dt=1e-7, T=5e-5)
        var = b[:, -1].var(ddof=1)
        se = math.sqrt(2.0 / trials)
        # small positive Euler bias ~ gamma_b dt / 2 = 0.5% is inside the band
        assert abs(var - 1.0) < 3.0 * se + 0.01

    def test_wiener_growth_without_damping(self):
        p = PlantParams(J=1.0, gamma=1.0, M=1.0, gamma_b=0.0, sigma_bF=1.0)
        trials = 10_000
        b = simulate_field_ensemble(p, Priors(1.0, 0.5), seed=4, trials=trials,
                                    dt=1e-3, T=0.25)
        var = b[:, -1].var(ddof=1)
        expected = 0.5 + 0.25
        assert abs(var / expected - 1.0) < 3.0 * math.sqrt(2.0 / trials)

    def test_ensemble_matches_scalar_path(self):
        p = fluctuating_plant(J=1.0, gamma=1.0, M=1.0, gamma_b=10.0, sigma_bfree=2.0)
        mat = simulate_field_ensemble(p, Priors(1.0, 1.0), seed=9, trials=3, dt=1e-3, T=0.02)
        from spintrack.numerics import trial_stream
        for k in range(3):
            b = simulate_field(p, Priors(1.0, 1.0), trial_stream(9, k), 1e-3, 0.02)
            assert np.allclose(mat[k], b, rtol=0, atol=0)


class TestSimulatePlant:
    def _plant(self):
        return PlantParams(J=100.0, gamma=1.0, M=1e4)

    def test_cheating_controller_freezes_z(self):
        p = self._plant()
        prior = Priors(sigma_z0=50.0, sigma_b0=1.0)
        rng = RngStream(3)
        field = simulate_field(p, prior, rng, 1e-6, 1e-4)

        def cancel(t, ydt_hist):
            k = int(round(t / 1e-6))
            return -field[k]

        traj = simulate_plant(p, prior, field, cancel, rng, 1e-6, 1e-4)
        assert np.allclose(traj.z, traj.z[0])

    def test_noise_free_ramp(self):
        p = self._plant()
        prior = Priors(sigma_z0=50.0, sigma_b0=1.0)
        b0 = 0.25
        field = np.full(101, b0)
        traj = simulate_plant(p, prior, field, None, _ZeroStream(), 1e-6, 1e-4)
        expected = traj.z[0] + p.gamma * p.J * b0 * traj.t
        assert np.allclose(traj.z, expected, rtol=1e-12)

    def test_record_invariant(self):
        p = self._plant()
        prior = Priors(sigma_z0=50.0, sigma_b0=0.0)
        traj = simulate_open_loop(p, prior, RngStream(12), 1e-6, 1e-4)
        n = traj.n_steps
        recon = traj.z[:n] * traj.dt + math.sqrt(p.sigma_M) * traj.dW2[:n]
        assert np.array_equal(traj.ydt[:n], recon)

    def test_whiteness_of_residuals(self):
        p = self._plant()
        prior = Priors(sigma_z0=50.0, sigma_b0=1.0)
        trials, n = 200, 500
        resid = []
        for k in range(trials):
            traj = simulate_open_loop(p, prior, RngStream(1000).spawn(k), 1e-7, n * 1e-7)
            r = (traj.ydt[:n] - traj.z[:n] * traj.dt) / math.sqrt(p.sigma_M * traj.dt)
            resid.append(r)
        pooled = np.concatenate(resid)
        m = len(pooled)
        assert m >= 1e5
        assert abs(pooled.mean()) < 3.0 / math.sqrt(m)
        assert abs(pooled.var() - 1.0) < 3.0 * math.sqrt(2.0 / m)

    def test_intercept_variance_matches_quantum_prior(self):
        # open-loop line fits across an ensemble: intercept variance = J/2
        # plus the known fit-noise contribution
        p = self._plant()
        prior = Priors(sigma_z0=p.J / 2.0, sigma_b0=1e-4)
        trials, n, dt = 10_000, 200, 5e-7
        draws = trial_normals(31, np.arange(trials), 2 + n)
        z0 = math.sqrt(prior.sigma_z0) * draws[:, 1]
        b0 = math.sqrt(prior.sigma_b0) * draws[:, 0]
        t = np.arange(n) * dt
        z = z0[:, None] + p.gamma * p.J * b0[:, None] * t[None, :]
        w = z + math.sqrt(p.sigma_M / dt) * draws[:, 2:]
        tbar = t.mean()
        stt = float(np.dot(t - tbar, t - tbar))
        slopes = (w @ (t - tbar)) / stt
        intercepts = w.mean(axis=1) - slopes * tbar
        fit_var = (p.sigma_M / dt) * (1.0 / n + tbar ** 2 / stt)
        expected = prior.sigma_z0 + fit_var
        measured = intercepts.var(ddof=1)
        assert abs(measured / expected - 1.0) < 3.5 * math.sqrt(2.0 / trials)

    def test_early_record_covariance_carries_spin_prior(self):
        # across trials, Cov[y(0), y(tau)] at early times equals the shared
        # spin offset variance sigma_z0 (the shot noise is independent)
        p = self._plant()
        prior = Priors(sigma_z0=p.J / 2.0, sigma_b0=1e-6)
        trials, n, dt = 10_000, 8, 1e-7
        draws = trial_normals(64, np.arange(trials), 2 + n)
        z0 = math.sqrt(prior.sigma_z0) * draws[:, 1]
        b0 = math.sqrt(prior.sigma_b0) * draws[:, 0]
        t = np.arange(n) * dt
        z = z0[:, None] + p.gamma * p.J * b0[:, None] * t[None, :]
        w = z + math.sqrt(p.sigma_M / dt) * draws[:, 2:]
        cov = np.cov(w[:, 0], w[:, 5])[0, 1]
        se = prior.sigma_z0 * math.sqrt(2.0 / trials) * 2.0
        assert abs(cov - prior.sigma_z0) < 3.0 * se

    def test_controller_fault(self):
        p = self._plant()
        prior = Priors(sigma_z0=1.0, sigma_b0=0.0)
        field = np.zeros(11)
        with pytest.raises(ControllerFaultError):
            simulate_plant(p, prior, field, lambda t, h: math.nan, RngStream(0), 1e-6, 1e-5)

    def test_control_callback_is_causal(self):
        p = self._plant()
        prior = Priors(sigma_z0=1.0, sigma_b0=0.0)
        field = np.zeros(11)
        seen = []

        def probe(t, ydt_hist):
            seen.append((t, len(ydt_hist)))
            return 0.0

        simulate_plant(p, prior, field, probe, RngStream(5), 1e-6, 1e-5)
        for k, (t, m) in enumerate(seen):
            assert m == k  # only increments strictly before t are visible

    def test_determinism(self):
        p = self._plant()
        prior = Priors(sigma_z0=1.0, sigma_b0=1.0)
        a = simulate_open_loop(p, prior, RngStream(77), 1e-6, 1e-4)
        b = simulate_open_loop(p, prior, RngStream(77), 1e-6, 1e-4)
        for name in ("t", "z", "b", "u", "ydt"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_long_horizon_warns(self):
        p = self._plant()
        prior = Priors(sigma_z0=1.0, sigma_b0=0.0)
        field = np.zeros(int(round(2e-4 / 1e-6)) + 1)
        with pytest.warns(UserWarning, match="1/M"):
            simulate_plant(p, prior, field, None, RngStream(1), 1e-6, 2e-4)
