"""Stochastic truth-model simulation: OU field, spin precession, noisy record.

The plant is deliberately minimal.  Driven by the total field
h(t) = b(t) + u(t), the spin z-component ramps as dz = gamma J h dt while
the photocurrent record accumulates

    y(t) dt = z(t) dt + sqrt(sigma_M) dW2(t),

and the field follows db = -gamma_b b dt + sqrt(sigma_bF) dW1.  Initial
conditions are drawn from the priors: z(0) ~ N(0, sigma_z0) (the quantum
coherent-state variance), b(0) ~ N(0, sigma_b0).  The model holds for
t << 1/M, before measurement-induced damping of the spin length matters;
simulating past 1/M triggers a warning, not an error.

Wiener increments are stored with each trajectory so filters can be
re-run against identical records.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ControllerFaultError
from .model import PlantParams, Priors
from .numerics import RngStream


@dataclass
class Trajectory:
    """Sampled truth run on the uniform grid t[k] = k dt.

    All arrays share length n+1.  ydt[k] is the measurement increment
    accumulated over [t[k], t[k+1]) and pairs with z[k] (start of
    interval); u[k] is the control held over the same interval.  The
    trailing entries ydt[n] and u[n] are padding (0 and the last held
    value) so the arrays stay aligned.
    """

    t: np.ndarray
    z: np.ndarray
    b: np.ndarray
    u: np.ndarray
    ydt: np.ndarray
    dW1: np.ndarray  # field Wiener increments (already sqrt(dt)-scaled), length n
    dW2: np.ndarray  # measurement Wiener increments, length n
    dt: float

    @property
    def n_steps(self) -> int:
        return len(self.t) - 1


def simulate_field(p: PlantParams, prior: Priors, rng: RngStream, dt: float, T: float) -> np.ndarray:
    """Field sample path b(0..T) under db = -gamma_b b dt + sqrt(sigma_bF) dW1.

    Draw layout on ``rng``: b(0), then one increment per step.
    """
    if dt <= 0 or T <= 0:
        raise ConfigurationError("simulate_field: dt and T must be positive")
    if dt * p.gamma_b >= 0.1:
        raise ConfigurationError(
            f"simulate_field: dt * gamma_b = {dt * p.gamma_b:.3g} >= 0.1; reduce dt")
    n = int(round(T / dt))
    draws = rng.normals(1 + n)
    b = np.empty(n + 1)
    b[0] = math.sqrt(prior.sigma_b0) * draws[0]
    decay = 1.0 - p.gamma_b * dt
    amp = math.sqrt(p.sigma_bF * dt)
    for k in range(n):
        b[k + 1] = decay * b[k] + amp * draws[1 + k]
    return b


def simulate_field_ensemble(p: PlantParams, prior: Priors, seed: int, trials: int,
                            dt: float, T: float) -> np.ndarray:
    """Vectorized field paths, row k identical to simulate_field on
    trial stream seed XOR k."""
    from .numerics import trial_normals

    if dt * p.gamma_b >= 0.1:
        raise ConfigurationError("simulate_field_ensemble: dt * gamma_b >= 0.1; reduce dt")
    n = int(round(T / dt))
    draws = trial_normals(seed, np.arange(trials), 1 + n)
    b = np.empty((trials, n + 1))
    b[:, 0] = math.sqrt(prior.sigma_b0) * draws[:, 0]
    decay = 1.0 - p.gamma_b * dt
    amp = math.sqrt(p.sigma_bF * dt)
    for k in range(n):
        b[:, k + 1] = decay * b[:, k] + amp * draws[:, 1 + k]
    return b


def simulate_plant(p: PlantParams, prior: Priors, field: np.ndarray, control,
                   rng: RngStream, dt: float, T: float) -> Trajectory:
    """Spin trajectory and measurement record for a given field path.

    ``control`` is called once per step as control(t_k, ydt_history) where
    ydt_history is the read-only record of increments strictly before t_k;
    it must return the field value applied over [t_k, t_k+dt).  Pass None
    for open loop.  Draw layout on ``rng``: z(0), then one measurement
    increment per step.
    """
    if dt <= 0 or T <= 0:
        raise ConfigurationError("simulate_plant: dt and T must be positive")
    n = int(round(T / dt))
    if len(field) != n + 1:
        raise ConfigurationError(
            f"simulate_plant: field has {len(field)} samples, expected {n + 1}")
    if T > 1.0 / p.M:
        warnings.warn("simulate_plant: T exceeds 1/M; the small-time model is not valid there",
                      stacklevel=2)
    draws = rng.normals(1 + n)
    gj = p.gamma * p.J
    sqrt_sm = math.sqrt(p.sigma_M)
    sqrt_dt = math.sqrt(dt)

    t = np.arange(n + 1) * dt
    z = np.empty(n + 1)
    u = np.zeros(n + 1)
    ydt = np.zeros(n + 1)
    dW2 = draws[1:] * sqrt_dt
    z[0] = math.sqrt(prior.sigma_z0) * draws[0]
    for k in range(n):
        if control is not None:
            uk = float(control(t[k], ydt[:k]))
            if not math.isfinite(uk):
                raise ControllerFaultError(
                    f"simulate_plant: controller returned non-finite value at t = {t[k]:.6e}")
            u[k] = uk
        ydt[k] = z[k] * dt + sqrt_sm * dW2[k]
        z[k + 1] = z[k] + gj * (field[k] + u[k]) * dt
    u[n] = u[n - 1] if n > 0 else 0.0
    dW1 = np.diff(field) + p.gamma_b * field[:-1] * dt if p.sigma_bF > 0 else np.zeros(n)
    if p.sigma_bF > 0:
        dW1 = dW1 / math.sqrt(p.sigma_bF)
    return Trajectory(t=t, z=z, b=np.asarray(field, dtype=np.float64).copy(), u=u,
                      ydt=ydt, dW1=dW1, dW2=dW2, dt=dt)


def simulate_open_loop(p: PlantParams, prior: Priors, rng: RngStream, dt: float, T: float) -> Trajectory:
    """Field plus plant with u = 0, consuming one stream sequentially."""
    field = simulate_field(p, prior, rng, dt, T)
    return simulate_plant(p, prior, field, None, rng, dt, T)
