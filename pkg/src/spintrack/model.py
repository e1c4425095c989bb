"""Physical parameters and state-space matrices for the magnetometry loop.

The plant is a collective spin of magnitude J polarized along x, precessing
in a y-axis field b(t) while its z-component is monitored continuously.  In
the small-angle regime the truth model is linear:

    dx = A x dt + B u dt + [0, sqrt(sigma_bF)]^T dW1,   x = (z, b)
    y dt = C x dt + sqrt(sigma_M) dW2

with A = [[0, gamma*J], [0, -gamma_b]], B = [gamma*J, 0]^T, C = [1, 0],
measurement sensitivity sigma_M = 1/(4*M*eta), and the field following an
Ornstein-Uhlenbeck process of bandwidth gamma_b and stationary variance
sigma_bF / (2*gamma_b).

Units are natural: time in seconds, field and spin dimensionless as in the
reference scenarios.  Quantum efficiency defaults to 1.  Constant-field
scenarios are encoded as gamma_b = 0, sigma_bF = 0 with sigma_b0 > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UnsupportedCaseError


@dataclass(frozen=True)
class PlantParams:
    """True plant: spin magnitude, coupling, measurement and field rates.

    J        collective spin (N/2 for N spin-1/2 particles)
    gamma    gyromagnetic ratio, 1/(field s)
    M        measurement rate, 1/s
    eta      detection quantum efficiency in (0, 1]
    gamma_b  field bandwidth, 1/s (0 for constant fields)
    sigma_bF field diffusion strength, field^2/s (0 for constant fields)
    """

    J: float
    gamma: float
    M: float
    eta: float = 1.0
    gamma_b: float = 0.0
    sigma_bF: float = 0.0

    def __post_init__(self):
        if not (self.J > 0 and self.gamma > 0 and self.M > 0):
            raise ConfigurationError("PlantParams: J, gamma, M must be positive")
        if not (0.0 < self.eta <= 1.0):
            raise ConfigurationError("PlantParams: eta must lie in (0, 1]")
        if self.gamma_b < 0 or self.sigma_bF < 0:
            raise ConfigurationError("PlantParams: gamma_b and sigma_bF must be nonnegative")

    @property
    def sigma_M(self) -> float:
        return sigma_m(self.M, self.eta)

    @property
    def sigma_bFree(self) -> float:
        return sigma_bfree(self)

    @property
    def fluctuating(self) -> bool:
        return self.sigma_bF > 0 and self.gamma_b > 0


@dataclass(frozen=True)
class Priors:
    """Initial variances: sigma_z0 for spin (J/2 for a coherent state along x,
    imposed by the quantum state), sigma_b0 for the field (classical)."""

    sigma_z0: float
    sigma_b0: float

    def __post_init__(self):
        if not self.sigma_z0 > 0:
            raise ConfigurationError("Priors: sigma_z0 must be positive (J/2 for a coherent state)")
        if self.sigma_b0 < 0:
            raise ConfigurationError("Priors: sigma_b0 must be nonnegative")


def coherent_priors(J: float, sigma_b0: float) -> Priors:
    """Coherent-state spin prior J/2 together with a field prior."""
    return Priors(sigma_z0=J / 2.0, sigma_b0=sigma_b0)


@dataclass(frozen=True)
class DesignParams:
    """Observer/controller design: assumed spin J_prime and control cost
    ratio lam = sqrt(p/q) (lam = 0 disables control)."""

    J_prime: float
    lam: float = 0.0

    def __post_init__(self):
        if not self.J_prime > 0:
            raise ConfigurationError("DesignParams: J_prime must be positive")
        if self.lam < 0:
            raise ConfigurationError("DesignParams: lam must be nonnegative")


def build_system(p: PlantParams):
    """State-space matrices (A, B, C, Sigma1) of the linear truth model."""
    gj = p.gamma * p.J
    a = np.array([[0.0, gj], [0.0, -p.gamma_b]])
    b = np.array([gj, 0.0])
    c = np.array([[1.0, 0.0]])
    sigma1 = np.array([[0.0, 0.0], [0.0, p.sigma_bF]])
    return a, b, c, sigma1


def build_design_system(d: DesignParams, template: PlantParams):
    """Matrices the observer believes in: the template plant with J_prime."""
    gj = template.gamma * d.J_prime
    a = np.array([[0.0, gj], [0.0, -template.gamma_b]])
    b = np.array([gj, 0.0])
    return a, b


def sigma_m(M: float, eta: float) -> float:
    """Measurement sensitivity 1/(4*M*eta); the shot-noise intensity of y dt."""
    if not M > 0:
        raise ConfigurationError("sigma_m: M must be positive")
    if not (0.0 < eta <= 1.0):
        raise ConfigurationError("sigma_m: eta must lie in (0, 1]; eta = 0 discards the measurement")
    return 1.0 / (4.0 * M * eta)


def sigma_bfree(p: PlantParams) -> float:
    """Stationary field variance sigma_bF / (2*gamma_b) of the OU field."""
    if not p.gamma_b > 0:
        raise UnsupportedCaseError(
            "sigma_bfree: stationary variance undefined for gamma_b = 0 (constant field)")
    return p.sigma_bF / (2.0 * p.gamma_b)


def fluctuating_plant(J: float, gamma: float, M: float, gamma_b: float,
                      sigma_bfree: float, eta: float = 1.0) -> PlantParams:
    """Plant with an OU field specified by bandwidth and stationary variance."""
    return PlantParams(J=J, gamma=gamma, M=M, eta=eta, gamma_b=gamma_b,
                       sigma_bF=2.0 * gamma_b * sigma_bfree)


def mismatch_ratio(p: PlantParams, d: DesignParams) -> float:
    """f = J / J_prime, the true spin over the spin assumed by the design."""
    return p.J / d.J_prime


def large_lambda_threshold(p: PlantParams, d: DesignParams) -> float:
    """Smallest lam^2 counting as 'control much cheaper than estimation',
    with a factor-100 margin: lam^2 >= 100 * sqrt(sqrt(sigma_bF/sigma_M) /
    (2*gamma*J_prime))."""
    r = math.sqrt(p.sigma_bF / p.sigma_M)
    return 100.0 * math.sqrt(r / (2.0 * p.gamma * d.J_prime))
