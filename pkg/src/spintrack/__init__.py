"""Continuous-measurement spin-ensemble magnetometry toolkit.

Simulation of the classical-equivalent plant (spin precession driven by an
Ornstein-Uhlenbeck or constant field, with a shot-noise-limited record),
Kalman/LQG estimation and control, Riccati covariance analysis, joint
truth-plus-estimator covariance propagation under spin-number mismatch,
frequency-domain loop analysis and robust controller design, and a
small-spin stochastic-master-equation oracle that validates the Gaussian
reduction.
"""

__version__ = "0.1.0"
