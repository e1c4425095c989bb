"""Joint truth-plus-estimator covariance under possibly mismatched design.

Stack the true state and the estimate into theta = (z, b, z~, b~).  For a
linear plant, filter, and controller the stack is a (time-dependent)
Ornstein-Uhlenbeck process d theta = alpha(t) theta dt + beta(t) dW with

    alpha = [[A,          -B K_C'               ],
             [K_O'(t) C,  A' - B' K_C' - K_O'(t) C]]

    beta  = diag-structured: sqrt(sigma_bF) drives b, and the measurement
            noise enters the estimator rows through sqrt(sigma_M) K_O'(t).

Primes mark design quantities built with the assumed spin J'.  The 4x4
covariance Theta(t) = E[theta theta^T] then obeys the deterministic flow

    dTheta/dt = alpha Theta + Theta alpha^T + beta beta^T

from Theta(0) = diag(sigma_z0, sigma_b0, 0, 0) (the estimate starts at
zero regardless of the truth draw).  The magnetometry error is read off as
sigma_bE = Theta_bb + Theta_b~b~ - 2 Theta_bb~, with no Monte Carlo.

Two propagation routes are provided: RK4 on the matrix flow (accurate for
mildly stiff configurations) and the integrating-factor form, stepping
with exact constant-coefficient increments Theta <- Phi Theta Phi^T + G
per interval.  The latter is unconditionally stable, which matters for
aggressive control (rates up to lam * gamma * J * f).

Closed-form mismatch factors, f = J / J':

    uncontrolled saturation   (1 - f)^2           (times sigma_b0 or sigma_bFree)
    controlled steady state   (1 + f) / (2 f)
    controlled transient      (f^2 + 2) / (4 f^2 - 1),  valid for f > 1/2
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, InstabilityError, UnsupportedCaseError
from .model import DesignParams, PlantParams, Priors, build_design_system, build_system
from .numerics import ou_increment, rk4_nonuniform
from .riccati import controller_gain, riccati_at_times, steady_state_gains
from .lqg_filter import design_plant, design_prior

REGIMES = ("uncontrolled_fluctuating", "uncontrolled_constant",
           "controlled_steady", "controlled_transient")


@dataclass
class TotalCov:
    """One snapshot of the joint covariance."""

    t: float
    Theta: np.ndarray


# change of variables to error coordinates (z, b, z~-z, b~-b); the
# magnetometry error becomes a direct variance entry instead of a
# cancellation-prone combination of order-one entries
_S_ERR = np.array([[1.0, 0.0, 0.0, 0.0],
                   [0.0, 1.0, 0.0, 0.0],
                   [-1.0, 0.0, 1.0, 0.0],
                   [0.0, -1.0, 0.0, 1.0]])
_S_ERR_INV = np.array([[1.0, 0.0, 0.0, 0.0],
                       [0.0, 1.0, 0.0, 0.0],
                       [1.0, 0.0, 1.0, 0.0],
                       [0.0, 1.0, 0.0, 1.0]])


class ThetaTrajectory:
    """Sequence of TotalCov snapshots stored as arrays.

    When produced by an error-basis integration, sigma_bE/sigma_zE come
    from the error-coordinate variances directly (well conditioned even
    when the tracking error is many orders below the field variance).
    """

    def __init__(self, t: np.ndarray, thetas: np.ndarray,
                 sigma_bE: np.ndarray | None = None, sigma_zE: np.ndarray | None = None):
        self.t = t
        self.thetas = thetas
        self._sigma_bE = sigma_bE
        self._sigma_zE = sigma_zE

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> TotalCov:
        return TotalCov(t=float(self.t[i]), Theta=self.thetas[i])

    @property
    def sigma_bE(self) -> np.ndarray:
        if self._sigma_bE is not None:
            return self._sigma_bE
        th = self.thetas
        return th[:, 1, 1] + th[:, 3, 3] - 2.0 * th[:, 1, 3]

    @property
    def sigma_zE(self) -> np.ndarray:
        if self._sigma_zE is not None:
            return self._sigma_zE
        th = self.thetas
        return th[:, 0, 0] + th[:, 2, 2] - 2.0 * th[:, 0, 2]


def theta_init(prior: Priors) -> np.ndarray:
    """Initial joint covariance: truth variances, estimator rows zero."""
    return np.diag([prior.sigma_z0, prior.sigma_b0, 0.0, 0.0])


_THETA_LABELS = ("zz", "zb", "zzt", "zbt", "bb", "bzt", "bbt", "ztzt", "ztbt", "btbt")
_THETA_INDEX = ((0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3))


def theta_csv_columns(traj: ThetaTrajectory):
    """(header, columns) for export: t, sigma_bE, and the 10 distinct
    joint-covariance entries (zt/bt marking the estimator components)."""
    header = ["t", "sigma_bE"] + [f"theta_{lbl}" for lbl in _THETA_LABELS]
    cols = [traj.t, traj.sigma_bE]
    for i, j in _THETA_INDEX:
        cols.append(traj.thetas[:, i, j])
    return header, cols


def magnetometry_error(theta) -> float:
    """sigma_bE = Theta_bb + Theta_b~b~ - 2 Theta_bb~ from one snapshot."""
    th = theta.Theta if isinstance(theta, TotalCov) else np.asarray(theta)
    return float(th[1, 1] + th[3, 3] - 2.0 * th[1, 3])


def build_alpha_beta(p: PlantParams, d: DesignParams, gains, k_c: np.ndarray):
    """Assemble alpha(t), beta(t) callables for the joint flow.

    ``gains`` is either a callable t -> (K_O1, K_O2) or a tuple
    (t_grid, k1, k2) tabulated on the integration grid (interpolated
    linearly in between).  ``k_c`` is the constant controller gain.
    """
    if callable(gains):
        k_of_t = gains
    else:
        try:
            tg, k1g, k2g = gains
        except Exception as exc:
            raise ConfigurationError(
                "build_alpha_beta: gains must be callable or (t_grid, k1, k2)") from exc
        tg = np.asarray(tg, dtype=np.float64)
        if len(tg) != len(k1g) or len(tg) != len(k2g):
            raise ConfigurationError("build_alpha_beta: gain tables do not match their time grid")

        def k_of_t(t):
            return np.interp(t, tg, k1g), np.interp(t, tg, k2g)

    a_true, b_true, c, _ = build_system(p)
    a_des, b_des = build_design_system(d, p)
    k_c = np.asarray(k_c, dtype=np.float64)
    sqrt_sbf = math.sqrt(p.sigma_bF)
    sqrt_sm = math.sqrt(p.sigma_M)

    def alpha(t: float) -> np.ndarray:
        k1, k2 = k_of_t(t)
        ko_c = np.array([[k1, 0.0], [k2, 0.0]])
        out = np.zeros((4, 4))
        out[:2, :2] = a_true
        out[:2, 2:] = -np.outer(b_true, k_c)
        out[2:, :2] = ko_c
        out[2:, 2:] = a_des - np.outer(b_des, k_c) - ko_c
        return out

    def beta(t: float) -> np.ndarray:
        k1, k2 = k_of_t(t)
        out = np.zeros((4, 4))
        out[1, 1] = sqrt_sbf
        out[2, 2] = sqrt_sm * k1
        out[3, 2] = sqrt_sm * k2
        return out

    return alpha, beta


def _check_theta_psd(traj: ThetaTrajectory):
    for i in range(len(traj)):
        th = traj.thetas[i]
        scale = max(np.trace(th), 1e-300)
        if np.min(np.linalg.eigvalsh(th)) < -1e-9 * scale:
            raise InstabilityError(
                f"joint covariance lost positivity at t = {traj.t[i]:.6e}; refine the grid")


def integrate_theta(alpha, beta, theta0: np.ndarray, dt: float, T: float,
                    method: str = "rk4", times=None, basis: str = "error") -> ThetaTrajectory:
    """Propagate Theta over [0, T] (uniform dt, or an explicit grid).

    method="rk4" integrates the matrix flow directly; method="expm" uses
    the integrating-factor step with alpha frozen at each interval
    midpoint, exact for piecewise-constant coefficients and stable for
    arbitrarily stiff stable generators.

    basis="error" (default) conjugates the flow into the coordinates
    (z, b, z~-z, b~-b) so that the tracking-error variances stay accurate
    when they are many orders of magnitude below the state variances; the
    stored Theta snapshots are mapped back to the raw labeling.
    """
    if times is None:
        if dt <= 0 or T <= 0:
            raise ConfigurationError("integrate_theta: dt and T must be positive")
        n = int(round(T / dt))
        times = np.arange(n + 1) * dt
    else:
        times = np.asarray(times, dtype=np.float64)
    if basis == "error":
        s, s_inv = _S_ERR, _S_ERR_INV

        def alpha_w(t):
            return s @ alpha(t) @ s_inv

        def beta_w(t):
            return s @ beta(t)

        theta_w = s @ np.asarray(theta0, dtype=np.float64) @ s.T
    elif basis == "raw":
        alpha_w, beta_w = alpha, beta
        theta_w = np.array(theta0, dtype=np.float64)
    else:
        raise ConfigurationError(f"integrate_theta: unknown basis '{basis}'")

    out = np.empty((len(times), 4, 4))
    out[0] = theta_w
    if method == "rk4":
        def rhs(t, th_flat):
            th = th_flat.reshape(4, 4)
            a = alpha_w(t)
            bb = beta_w(t)
            d_th = a @ th + th @ a.T + bb @ bb.T
            return d_th.reshape(-1)

        states = rk4_nonuniform(rhs, theta_w.reshape(-1), times)
        out = states.reshape(len(times), 4, 4)
    elif method == "expm":
        theta = theta_w
        for k in range(len(times) - 1):
            h = times[k + 1] - times[k]
            tm = 0.5 * (times[k] + times[k + 1])
            a = alpha_w(tm)
            bb = beta_w(tm)
            phi, g = ou_increment(a, bb @ bb.T, h)
            theta = phi @ theta @ phi.T + g
            theta = 0.5 * (theta + theta.T)
            out[k + 1] = theta
    else:
        raise ConfigurationError(f"integrate_theta: unknown method '{method}'")

    if basis == "error":
        sigma_bE = out[:, 3, 3].copy()
        sigma_zE = out[:, 2, 2].copy()
        raw = np.einsum("ij,njk,lk->nil", _S_ERR_INV, out, _S_ERR_INV)
        traj = ThetaTrajectory(times, raw, sigma_bE=sigma_bE, sigma_zE=sigma_zE)
    else:
        traj = ThetaTrajectory(times, out)
    _check_theta_psd(traj)
    return traj


def mismatch_factors(f: float, regime: str) -> float:
    """Closed-form error factor for spin-number mismatch f = J / J'."""
    if not f > 0:
        raise ConfigurationError("mismatch_factors: f must be positive")
    if regime in ("uncontrolled_fluctuating", "uncontrolled_constant"):
        return (1.0 - f) ** 2
    if regime == "controlled_steady":
        return (1.0 + f) / (2.0 * f)
    if regime == "controlled_transient":
        if f <= 0.5:
            raise UnsupportedCaseError(
                "mismatch_factors: the transient factor is valid for f > 1/2 only")
        return (f * f + 2.0) / (4.0 * f * f - 1.0)
    raise ConfigurationError(f"mismatch_factors: unknown regime '{regime}'; choose from {REGIMES}")


# ---------------------------------------------------------------------------
# steady-state and transient mismatch errors
# ---------------------------------------------------------------------------

def steady_state_error(p: PlantParams, d: DesignParams) -> float:
    """Saturated sigma_bE for a fluctuating field under a J' design.

    Controlled designs (lam > 0) solve the 4x4 stationary Lyapunov
    equation alpha X + X alpha^T + beta beta^T = 0 with frozen gains.  For
    lam = 0 the raw stack is not stationary (z integrates the field), so
    the closed stable subsystem (z - z~, b, b~) is solved instead.
    """
    if not p.fluctuating:
        raise UnsupportedCaseError("steady_state_error: needs a fluctuating field")
    g = steady_state_gains(design_plant(p, d), d)
    k1, k2 = g.K_O
    sm = p.sigma_M
    if d.lam > 0:
        alpha, beta = build_alpha_beta(p, d, lambda t: (k1, k2), g.K_C)
        a = _S_ERR @ alpha(0.0) @ _S_ERR_INV
        if np.max(np.linalg.eigvals(a).real) >= 0:
            raise InstabilityError("steady_state_error: mismatched closed loop is unstable")
        bb = _S_ERR @ beta(0.0)
        x = scipy.linalg.solve_continuous_lyapunov(a, -(bb @ bb.T))
        return float(x[3, 3])
    # lam = 0: the raw stack is not stationary (z integrates the field);
    # solve the closed stable subsystem (e_z, b, e_b) = (z~-z, b, b~-b)
    gj = p.gamma * p.J
    gjp = p.gamma * d.J_prime
    gb = p.gamma_b
    sqrt_sbf = math.sqrt(p.sigma_bF)
    sqrt_sm = math.sqrt(sm)
    a = np.array([[-k1, gjp - gj, gjp],
                  [0.0, -gb, 0.0],
                  [-k2, 0.0, -gb]])
    b_noise = np.array([[0.0, k1 * sqrt_sm],
                        [sqrt_sbf, 0.0],
                        [-sqrt_sbf, k2 * sqrt_sm]])
    x = scipy.linalg.solve_continuous_lyapunov(a, -(b_noise @ b_noise.T))
    return float(x[2, 2])


def transient_error_curve(p: PlantParams, prior: Priors, d: DesignParams,
                          t_eval: np.ndarray) -> ThetaTrajectory:
    """sigma_bE(t) for a constant field under a J' design, dynamic gains.

    Gains come from the observer's own Riccati solution (J' system, J'/2
    spin prior); the joint flow starts from the true priors.  Uses the
    integrating-factor route on a quasi-geometric grid, so large lam * J
    is handled without step-size collapse.
    """
    t_eval = np.atleast_1d(np.asarray(t_eval, dtype=np.float64))
    t_end = float(t_eval.max())
    p_des = design_plant(p, d)
    prior_des = design_prior(d, prior)
    offset = p.sigma_M / max(prior.sigma_z0, prior_des.sigma_z0)
    grid = [0.0]
    t = 0.0
    while t < t_end:
        t = min(t + 0.02 * (t + offset), t_end)
        grid.append(t)
    grid = np.union1d(np.array(grid), t_eval)
    cov = riccati_at_times(p_des, prior_des, grid)
    k1, k2 = cov.gain(p_des.sigma_M)
    alpha, beta = build_alpha_beta(p, d, (grid, k1, k2), controller_gain(p, d))
    traj = integrate_theta(alpha, beta, theta_init(prior), 0.0, 0.0,
                           method="expm", times=grid)
    idx = np.searchsorted(grid, t_eval)
    return ThetaTrajectory(t_eval, traj.thetas[idx])
