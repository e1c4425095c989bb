"""Kalman filtering and LQG control against simulated measurement records.

The estimate m = (z~, b~) follows

    dm = A' m dt + B' u dt + K_O(t) [y dt - C m dt],    m(0) = (0, 0)

discretized by explicit Euler on the record grid (the record and filter
share dt; keep dt * K_O1 small, with the saturated gain as the proxy).
Primed quantities use the design spin J'; the observer's own prior is the
coherent variance J'/2 for spin together with the scenario field prior.
The controller applies u = -K_C m with the stationary controller gain.

Modes: ``dynamic_gain`` uses the time-dependent Riccati gain K_O(t);
``steady_gain`` freezes K_O at its stationary value for the whole run,
which is the filter a constant transfer function would realize.  Both
reach the same saturation level; the frozen-gain transient is worse.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError
from .model import DesignParams, PlantParams, Priors
from .numerics import RngStream, trial_normals
from .riccati import CovTrajectory, controller_gain, integrate_estimator_riccati, steady_state_gains
from .truth_sim import Trajectory

MODES = ("dynamic_gain", "steady_gain")


@dataclass
class FilterState:
    """Estimate mean, optional covariance snapshot, and current time."""

    m: np.ndarray
    Sigma: np.ndarray | None
    t: float


@dataclass
class RunResult:
    """One closed-loop trial: truth trajectory plus the filter history.

    m[k] is the estimate at t[k] built from increments before t[k], so the
    grids align and innovation k is ydt[k] - m[k, 0] * dt.
    """

    trajectory: Trajectory
    m: np.ndarray
    sigma: CovTrajectory | None = None

    @property
    def z_tilde(self) -> np.ndarray:
        return self.m[:, 0]

    @property
    def b_tilde(self) -> np.ndarray:
        return self.m[:, 1]

    @property
    def bE_sq(self) -> np.ndarray:
        return (self.m[:, 1] - self.trajectory.b) ** 2

    @property
    def zE_sq(self) -> np.ndarray:
        return (self.m[:, 0] - self.trajectory.z) ** 2


def design_prior(d: DesignParams, prior: Priors) -> Priors:
    """What the observer assumes initially: coherent spin variance J'/2
    plus the scenario's field prior."""
    return Priors(sigma_z0=d.J_prime / 2.0, sigma_b0=prior.sigma_b0)


def design_plant(p: PlantParams, d: DesignParams) -> PlantParams:
    """The plant the observer believes in: true rates with spin J'."""
    return replace(p, J=d.J_prime)


def kalman_step(s: FilterState, ydt: float, u: float, a_design: np.ndarray,
                b_design: np.ndarray, k_o: np.ndarray, dt: float) -> FilterState:
    """One explicit-Euler filter update against a measurement increment."""
    m = s.m
    innovation = ydt - m[0] * dt
    m_new = m + (a_design @ m + b_design * u) * dt + k_o * innovation
    if not np.all(np.isfinite(m_new)):
        raise ConfigurationError(f"kalman_step: estimate diverged at t = {s.t:.6e}")
    return FilterState(m=m_new, Sigma=s.Sigma, t=s.t + dt)


def filter_record(a_design: np.ndarray, b_design: np.ndarray, k1: np.ndarray,
                  k2: np.ndarray, ydt: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Re-run the filter over a stored record; returns m with m[0] = 0.

    k1, k2 are the gain components tabulated on the record grid; u is the
    control history actually applied (zeros for open loop).
    """
    n = len(ydt) - 1
    m = np.zeros((n + 1, 2))
    a01 = a_design[0, 1]
    a11 = a_design[1, 1]
    b0 = b_design[0]
    for k in range(n):
        innov = ydt[k] - m[k, 0] * dt
        m[k + 1, 0] = m[k, 0] + (a01 * m[k, 1] + b0 * u[k]) * dt + k1[k] * innov
        m[k + 1, 1] = m[k, 1] + a11 * m[k, 1] * dt + k2[k] * innov
    return m


def _gain_arrays(p: PlantParams, prior: Priors, d: DesignParams, mode: str,
                 dt: float, n: int):
    """Observer gain components on the record grid, per mode."""
    if mode not in MODES:
        raise ConfigurationError(f"unknown filter mode '{mode}'; choose one of {MODES}")
    p_des = design_plant(p, d)
    if mode == "steady_gain":
        if not p.sigma_bF > 0:
            raise ConfigurationError("steady_gain mode needs sigma_bF > 0 (gains undefined otherwise)")
        g = steady_state_gains(p_des, d)
        k1 = np.full(n + 1, g.K_O[0])
        k2 = np.full(n + 1, g.K_O[1])
        return k1, k2, None
    cov = integrate_estimator_riccati(p_des, design_prior(d, prior), dt, n * dt)
    k1, k2 = cov.gain(p_des.sigma_M)
    return k1, k2, cov


def run_closed_loop(p: PlantParams, prior: Priors, d: DesignParams, mode: str,
                    rng: RngStream, dt: float, T: float) -> RunResult:
    """Single closed-loop trial with u = -K_C m applied causally.

    Draw layout: z(0), b(0), then (dW1, dW2) per step; the vectorized
    ensemble consumes the identical layout per trial stream.
    """
    n = int(round(T / dt))
    if T > 1.0 / p.M:
        warnings.warn("run_closed_loop: T exceeds 1/M; the small-time model is not valid there",
                      stacklevel=2)
    k1, k2, cov = _gain_arrays(p, prior, d, mode, dt, n)
    kc = controller_gain(p, d)
    gj = p.gamma * p.J
    gjp = p.gamma * d.J_prime
    gb = p.gamma_b
    sqrt_sm = math.sqrt(p.sigma_M)
    sqrt_sbf = math.sqrt(p.sigma_bF)
    sqrt_dt = math.sqrt(dt)

    draws = rng.normals(2 + 2 * n)
    z0 = math.sqrt(prior.sigma_z0) * draws[0]
    b0 = math.sqrt(prior.sigma_b0) * draws[1]
    dW1 = draws[2::2] * sqrt_dt
    dW2 = draws[3::2] * sqrt_dt

    t = np.arange(n + 1) * dt
    z = np.empty(n + 1)
    b = np.empty(n + 1)
    u = np.zeros(n + 1)
    ydt = np.zeros(n + 1)
    m = np.zeros((n + 1, 2))
    z[0], b[0] = z0, b0
    for k in range(n):
        uk = -(kc[0] * m[k, 0] + kc[1] * m[k, 1])
        u[k] = uk
        ydt[k] = z[k] * dt + sqrt_sm * dW2[k]
        innov = ydt[k] - m[k, 0] * dt
        z[k + 1] = z[k] + gj * (b[k] + uk) * dt
        b[k + 1] = b[k] - gb * b[k] * dt + sqrt_sbf * dW1[k]
        m[k + 1, 0] = m[k, 0] + (gjp * m[k, 1] + gjp * uk) * dt + k1[k] * innov
        m[k + 1, 1] = m[k, 1] - gb * m[k, 1] * dt + k2[k] * innov
    u[n] = u[n - 1] if n > 0 else 0.0
    traj = Trajectory(t=t, z=z, b=b, u=u, ydt=ydt, dW1=dW1, dW2=dW2, dt=dt)
    return RunResult(trajectory=traj, m=m, sigma=cov)


def run_ensemble(p: PlantParams, prior: Priors, d: DesignParams, mode: str,
                 seed: int, trials: int, dt: float, T: float,
                 decimate: int = 1, trial_offset: int = 0, chunk_steps: int = 1024):
    """Vectorized closed-loop ensemble; per-trial draws match run_closed_loop
    on trial stream seed XOR (trial_offset + k).

    Returns (t_out, sums) where sums stacks, per output time, the trial
    sums and sums of squares of (b~-b)^2 and (z~-z)^2 (rows: s1_b, s2_b,
    s1_z, s2_z).  Summation order is fixed by trial index, so results are
    identical however the ensemble is split.
    """
    n = int(round(T / dt))
    if trials < 1:
        raise ConfigurationError("run_ensemble: need at least one trial")
    k1, k2, _ = _gain_arrays(p, prior, d, mode, dt, n)
    kc = controller_gain(p, d)
    gj = p.gamma * p.J
    gjp = p.gamma * d.J_prime
    gb = p.gamma_b
    sqrt_sm = math.sqrt(p.sigma_M)
    sqrt_sbf = math.sqrt(p.sigma_bF)
    sqrt_dt = math.sqrt(dt)

    out_idx = np.arange(0, n + 1, decimate)
    if out_idx[-1] != n:
        out_idx = np.append(out_idx, n)
    t_out = out_idx * dt
    sums = np.zeros((4, len(out_idx)))
    out_pos = {int(k): i for i, k in enumerate(out_idx)}

    ids = np.arange(trials) + trial_offset
    init = trial_normals(seed, ids, 2)
    z = math.sqrt(prior.sigma_z0) * init[:, 0]
    b = math.sqrt(prior.sigma_b0) * init[:, 1]
    mz = np.zeros(trials)
    mb = np.zeros(trials)

    def record(k):
        i = out_pos[k]
        eb = mb - b
        ez = mz - z
        eb2 = eb * eb
        ez2 = ez * ez
        sums[0, i] = eb2.sum()
        sums[1, i] = (eb2 * eb2).sum()
        sums[2, i] = ez2.sum()
        sums[3, i] = (ez2 * ez2).sum()

    record(0)
    for k0 in range(0, n, chunk_steps):
        k_end = min(k0 + chunk_steps, n)
        # draws 2 + 2k and 3 + 2k are (dW1_k, dW2_k); fetch the chunk block
        block = trial_normals(seed, ids, 2 * (k_end - k0), start=2 + 2 * k0)
        for j, k in enumerate(range(k0, k_end)):
            dW1 = block[:, 2 * j] * sqrt_dt
            dW2 = block[:, 2 * j + 1] * sqrt_dt
            u = -(kc[0] * mz + kc[1] * mb)
            ydt = z * dt + sqrt_sm * dW2
            innov = ydt - mz * dt
            z = z + gj * (b + u) * dt
            b = b - gb * b * dt + sqrt_sbf * dW1
            mz, mb = (mz + (gjp * mb + gjp * u) * dt + k1[k] * innov,
                      mb - gb * mb * dt + k2[k] * innov)
            if (k + 1) in out_pos:
                record(k + 1)
    return t_out, sums


def summarize_ensemble(sums: np.ndarray, trials: int):
    """Means and standard errors of (b~-b)^2 and (z~-z)^2 from trial sums."""
    if trials < 2:
        raise ConfigurationError("summarize_ensemble: need at least two trials for standard errors")
    out = {}
    for name, s1, s2 in (("b", sums[0], sums[1]), ("z", sums[2], sums[3])):
        mean = s1 / trials
        var = np.maximum(s2 / trials - mean ** 2, 0.0)
        out[f"sigma_{name}E"] = mean
        out[f"se_{name}E"] = np.sqrt(var / (trials - 1))
    return out


def run_open_loop_linefit(p: PlantParams, prior: Priors, J_assumed: float, records):
    """Estimate constant fields by least-squares line fits to the record rate.

    For each trajectory the rate samples w_k = ydt_k / dt scatter around
    the ramp z(t) = z(0) + gamma J b t, so the fitted slope divided by
    gamma * J_assumed estimates b.  Returns one estimate per record.
    """
    if isinstance(records, Trajectory):
        records = [records]
    out = np.empty(len(records))
    for i, rec in enumerate(records):
        n = rec.n_steps
        if n < 3:
            raise ConfigurationError("run_open_loop_linefit: need at least 3 samples to fit a line")
        t = rec.t[:n]
        w = rec.ydt[:n] / rec.dt
        tbar = t.mean()
        slope = np.dot(t - tbar, w) / np.dot(t - tbar, t - tbar)
        out[i] = slope / (p.gamma * J_assumed)
    return out
