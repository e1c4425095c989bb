"""Closed-loop transfer functions, characteristic frequencies, loop shaping.

Once the observer and controller gains have saturated, the filter mapping
the record y to the estimate m is linear time-invariant:

    m(s) = (s I - A' + B' K_C + K_O C)^{-1} K_O y(s) = (G_z(s), G_b(s)) y(s)
    u(s) = -K_C m(s) = G_u(s) y(s)

G_u has the shelf-plus-rolloff shape G_uDC (1 + s/w_H) / (1 + (1 + s/w_Q) s/w_L)
with, in the regime lam^2 >> sqrt(sqrt(sigma_bF/sigma_M) / (2 gamma J')) and
gamma J' >> gamma_b^2 sqrt(sigma_M/sigma_bF),

    w_L -> gamma_b                      w_H -> sqrt((gamma J'/2) r)
    w_C -> sqrt(2 gamma J' r) = 2 w_H   w_Q -> lam gamma J'
    G_uDC -> -r / gamma_b               G_uAC -> -sqrt(2 r / (gamma J'))

where r = sqrt(sigma_bF / sigma_M).  The loop closes where
|P(jw) G_u(jw)| = 1 against the integrator plant P(s) = gamma J / s.

The robust designer inverts this structure: given spin bounds
[J_min, J_max], a hardware roll-off w_Q, and a performance band edge w_1,
the achievable suppression obeys the trade-off

    W10 * w_1 = w_Q * J_min / J_max                    (exact, by construction)

and the controller

    C(s) = |C|_C * 1/(1 + s/w_Q) * (w_H/w_L) (1 + s/w_H)/(1 + s/w_L),
    |C|_C = w_Q / (gamma J_max),   w_H = w_1 W10,   w_L below w_H (default w_H/100)

is checked against the criterion ||W1 S||_inf < 1 for every plant in the
family, W1(s) = W10 / (1 + s/w_1), S = 1/(1 + P C).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import numpy.polynomial.polynomial as npoly

from .errors import ConfigurationError, InstabilityError, UnsupportedCaseError
from .model import DesignParams, PlantParams
from .riccati import steady_state_gains
from .lqg_filter import design_plant


@dataclass
class RationalTF:
    """Ratio of real polynomials in s, coefficients in ascending degree."""

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        self.num = np.atleast_1d(np.asarray(self.num, dtype=np.float64))
        self.den = np.atleast_1d(np.asarray(self.den, dtype=np.float64))
        self.num = _trim(self.num)
        self.den = _trim(self.den)
        if len(self.den) == 0 or self.den[-1] == 0.0:
            raise ConfigurationError("RationalTF: denominator leading coefficient must be nonzero")
        self.num, self.den = _cancel_common_roots(self.num, self.den)

    def __call__(self, s):
        s = np.asarray(s, dtype=np.complex128)
        with np.errstate(divide="ignore", invalid="ignore"):
            return npoly.polyval(s, self.num) / npoly.polyval(s, self.den)

    def __mul__(self, other):
        if isinstance(other, RationalTF):
            return RationalTF(npoly.polymul(self.num, other.num),
                              npoly.polymul(self.den, other.den))
        return RationalTF(self.num * float(other), self.den)

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, RationalTF):
            other = RationalTF([float(other)], [1.0])
        return RationalTF(
            npoly.polyadd(npoly.polymul(self.num, other.den), npoly.polymul(other.num, self.den)),
            npoly.polymul(self.den, other.den))

    def inverse(self) -> "RationalTF":
        return RationalTF(self.den, self.num)

    def poles(self) -> np.ndarray:
        return np.roots(self.den[::-1]) if len(self.den) > 1 else np.empty(0, dtype=complex)


def _trim(c: np.ndarray) -> np.ndarray:
    # drop exact-zero leading coefficients only; with loop frequencies
    # spanning many decades a coefficient far below its neighbors can
    # still dominate at high |s|
    keep = len(c)
    while keep > 1 and c[keep - 1] == 0.0:
        keep -= 1
    return c[:keep].copy()


def _cancel_common_roots(num: np.ndarray, den: np.ndarray, tol: float = 1e-9):
    """Remove root pairs shared by numerator and denominator within tol."""
    if len(num) < 2 or len(den) < 2:
        return num, den
    rn = list(np.roots(num[::-1]))
    rd = list(np.roots(den[::-1]))
    matched = False
    for r in list(rn):
        for q in rd:
            if abs(r - q) <= tol * max(1.0, abs(r), abs(q)):
                rn.remove(r)
                rd.remove(q)
                matched = True
                break
    if not matched:
        return num, den
    lead_n = num[-1]
    lead_d = den[-1]
    new_num = np.real_if_close(np.poly(rn)[::-1] * lead_n, tol=1e6) if rn else np.array([lead_n])
    new_den = np.real_if_close(np.poly(rd)[::-1] * lead_d, tol=1e6) if rd else np.array([lead_d])
    return np.real(new_num), np.real(new_den)


@dataclass(frozen=True)
class CharFreqs:
    """Characteristic frequencies and gains of the saturated loop."""

    omega_L: float
    omega_H: float
    omega_C: float
    omega_Q: float
    G_uDC: float
    G_uAC: float


def closed_loop_tfs(p: PlantParams, d: DesignParams):
    """(G_z, G_b, G_u) of the saturated filter/controller, exact rationals.

    Built by inverting the 2x2 resolvent s I - A' + B' K_C + K_O C
    symbolically; needs a fluctuating field so the stationary gains exist.
    """
    g = steady_state_gains(design_plant(p, d), d)
    k1, k2 = g.K_O
    kc1, kc2 = g.K_C
    a = p.gamma * d.J_prime
    gb = p.gamma_b
    den = np.array([(a * kc1 + k1) * gb + a * k2 * (1.0 - kc2),
                    gb + a * kc1 + k1,
                    1.0])
    gz = RationalTF(np.array([k1 * gb + a * k2 * (1.0 - kc2), k1]), den)
    gbb = RationalTF(np.array([k2 * a * kc1, k2]), den)
    gu = RationalTF(np.array([-(kc1 * (k1 * gb + a * k2 * (1.0 - kc2)) + kc2 * k2 * a * kc1),
                              -(kc1 * k1 + kc2 * k2)]), den)
    return gz, gbb, gu


def bode(tf: RationalTF, omega_grid) -> tuple[np.ndarray, np.ndarray]:
    """(magnitude dB, unwrapped phase deg) on a positive sorted grid.

    Samples landing on a pole of the rational function are flagged NaN.
    """
    omega = np.asarray(omega_grid, dtype=np.float64)
    if np.any(omega <= 0) or np.any(np.diff(omega) <= 0):
        raise ConfigurationError("bode: omega grid must be positive and strictly increasing")
    s = 1j * omega
    den_vals = npoly.polyval(s, tf.den)
    num_vals = npoly.polyval(s, tf.num)
    # a sample sits on a pole when the evaluated denominator is tiny
    # compared with the no-cancellation magnitude sum |c_k| |s|^k
    den_scale = sum(abs(c) * np.abs(s) ** k for k, c in enumerate(tf.den))
    flagged = np.abs(den_vals) < 1e-9 * den_scale
    with np.errstate(divide="ignore", invalid="ignore"):
        h = num_vals / den_vals
        mag = 20.0 * np.log10(np.abs(h))
    phase = np.degrees(np.unwrap(np.angle(h)))
    mag[flagged] = np.nan
    phase[flagged] = np.nan
    return mag, phase


def approximation_margins(p: PlantParams, d: DesignParams) -> dict:
    """How strongly the two simplifying inequalities hold (as ratios)."""
    r = math.sqrt(p.sigma_bF / p.sigma_M)
    gj = p.gamma * d.J_prime
    lam_margin = d.lam ** 2 / math.sqrt(r / (2.0 * gj)) if d.lam > 0 else 0.0
    gj_margin = gj / (p.gamma_b ** 2 * math.sqrt(p.sigma_M / p.sigma_bF)) if p.gamma_b > 0 else math.inf
    return {"lambda_margin": lam_margin, "gammaJ_margin": gj_margin}


def char_freqs(p: PlantParams, d: DesignParams, check_closure: bool = True) -> CharFreqs:
    """Limit expressions for the loop frequencies; requires both
    approximation margins to be at least 100.

    When check_closure is set, the closing frequency is also found
    independently by bisection on |P G_u| = 1 and must agree with 2 w_H
    within 5 percent.
    """
    if not p.sigma_bF > 0:
        raise UnsupportedCaseError("char_freqs: needs a fluctuating field")
    m = approximation_margins(p, d)
    if m["lambda_margin"] < 100.0:
        raise UnsupportedCaseError(
            f"char_freqs: lam^2 / sqrt(r / (2 gamma J')) = {m['lambda_margin']:.3g} < 100")
    if m["gammaJ_margin"] < 100.0:
        raise UnsupportedCaseError(
            f"char_freqs: gamma J' / (gamma_b^2 sqrt(sigma_M/sigma_bF)) = {m['gammaJ_margin']:.3g} < 100")
    r = math.sqrt(p.sigma_bF / p.sigma_M)
    gj = p.gamma * d.J_prime
    omega_h = math.sqrt(0.5 * gj * r)
    freqs = CharFreqs(
        omega_L=p.gamma_b,
        omega_H=omega_h,
        omega_C=2.0 * omega_h,
        omega_Q=d.lam * gj,
        G_uDC=-r / p.gamma_b if p.gamma_b > 0 else -math.inf,
        G_uAC=-math.sqrt(2.0 * r / gj),
    )
    if not (freqs.omega_L < freqs.omega_H < freqs.omega_Q):
        raise UnsupportedCaseError(
            "char_freqs: frequency ordering w_L < w_H < w_Q violated "
            f"({freqs.omega_L:.3g}, {freqs.omega_H:.3g}, {freqs.omega_Q:.3g})")
    if check_closure:
        _, _, gu = closed_loop_tfs(p, d)
        wc = closure_frequency(gu, gj, hint=omega_h)
        if abs(wc / freqs.omega_C - 1.0) > 0.05:
            raise InstabilityError(
                f"char_freqs: bisection closure {wc:.4g} disagrees with 2 w_H {freqs.omega_C:.4g}")
    return freqs


def closure_frequency(gu: RationalTF, gammaJ: float, hint: float) -> float:
    """Frequency where |P(jw) G_u(jw)| = 1 with P = gamma J / s, by bisection."""

    def loop_mag(w):
        return abs(gammaJ / (1j * w) * gu(1j * w))

    lo, hi = hint * 1e-2, hint * 1e2
    for _ in range(8):
        if loop_mag(lo) > 1.0:
            break
        lo *= 1e-2
    for _ in range(8):
        if loop_mag(hi) < 1.0:
            break
        hi *= 1e2
    if not (loop_mag(lo) > 1.0 > loop_mag(hi)):
        raise UnsupportedCaseError("closure_frequency: could not bracket |P G_u| = 1")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if loop_mag(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.0 + 1e-12:
            break
    return math.sqrt(lo * hi)


# ---------------------------------------------------------------------------
# robust loop shaping
# ---------------------------------------------------------------------------

def performance_weight(w10: float, omega_1: float) -> RationalTF:
    """W1(s) = W10 / (1 + s/w_1): suppression 1/W10 demanded below w_1."""
    return RationalTF([w10], [1.0, 1.0 / omega_1])


def design_robust_controller(J_min: float, J_max: float, omega_Q: float,
                             omega_1: float, gamma: float,
                             omega_L: float | None = None):
    """Shape a fixed controller for the integrator family gamma J / s,
    J in [J_min, J_max].

    Returns (C, W10).  W10 is pinned by the trade-off
    W10 * w_1 = w_Q * J_min / J_max, the flat gain by |C|_C = w_Q/(gamma J_max),
    and the gain shelf starts at w_H = w_1 W10 (the lowest closing
    frequency of the family).  w_L defaults to w_H / 100.
    """
    if not (0 < J_min <= J_max):
        raise ConfigurationError("design_robust_controller: need 0 < J_min <= J_max")
    if omega_Q <= 0 or omega_1 <= 0 or gamma <= 0:
        raise ConfigurationError("design_robust_controller: frequencies and gamma must be positive")
    w10 = omega_Q * J_min / (J_max * omega_1)
    omega_h = omega_1 * w10
    if omega_L is None:
        omega_L = omega_h / 100.0
    if not (omega_L < omega_h):
        raise ConfigurationError(
            f"design_robust_controller: infeasible ordering, need w_L ({omega_L:.3g}) < w_H ({omega_h:.3g})")
    if not (omega_h <= omega_Q):
        raise ConfigurationError(
            f"design_robust_controller: infeasible ordering, need w_H ({omega_h:.3g}) <= w_Q ({omega_Q:.3g})")
    gain = omega_Q / (gamma * J_max)
    # gain * 1/(1+s/wQ) * (wH/wL) * (1+s/wH)/(1+s/wL)
    num = np.array([1.0, 1.0 / omega_h]) * (gain * omega_h / omega_L)
    den = npoly.polymul([1.0, 1.0 / omega_Q], [1.0, 1.0 / omega_L])
    return RationalTF(num, den), w10


def sensitivity(c: RationalTF, J: float, gamma: float) -> RationalTF:
    """S = 1/(1 + P C) for the integrator plant P = gamma J / s."""
    s_dc = npoly.polymul([0.0, 1.0], c.den)
    return RationalTF(s_dc, npoly.polyadd(s_dc, gamma * J * c.num))


def nyquist_stable(loop_vals: np.ndarray) -> bool:
    """Grid winding check of 1 + L(jw) for an integrator-type loop.

    For open loops with no right-half-plane poles (one pole at the origin,
    handled by the indentation), closed-loop stability is equivalent to
    the unwrapped phase of 1 + L moving from -pi/2 to 0, a net change of
    +pi/2; any extra full or half turn marks an encirclement.  The grid
    must extend well below and above crossover (the documented density is
    at least 400 log-spaced points across the loop's active decades).
    """
    if np.max(np.abs(loop_vals)) < 1.0:
        return True  # a loop that never reaches unit magnitude cannot encircle -1
    arg = np.unwrap(np.angle(1.0 + loop_vals))
    delta = arg[-1] - arg[0]
    return 0.0 < delta < math.pi


def sensitivity_norm(c: RationalTF, J: float, gamma: float, w1: RationalTF,
                     omega_grid) -> float:
    """max over the grid of |W1(jw) S(jw)|, with local refinement.

    The grid must be positive, sorted, and have at least 400 points
    (log-spaced across the loop's active decades); the closed loop is
    first checked stable by the Nyquist winding on the same grid.
    """
    omega = np.asarray(omega_grid, dtype=np.float64)
    if len(omega) < 400:
        raise ConfigurationError("sensitivity_norm: grid too coarse; supply >= 400 log-spaced points")
    if np.any(omega <= 0) or np.any(np.diff(omega) <= 0):
        raise ConfigurationError("sensitivity_norm: grid must be positive and increasing")
    s = 1j * omega
    p_vals = gamma * J / s
    loop = p_vals * c(s)
    if not nyquist_stable(loop):
        raise InstabilityError(f"sensitivity_norm: closed loop unstable for J = {J:.4g}")

    def ws_mag(w):
        sv = 1j * w
        sens = 1.0 / (1.0 + gamma * J / sv * c(sv))
        return abs(w1(sv) * sens)

    mags = np.abs(w1(s) / (1.0 + loop))
    i = int(np.argmax(mags))
    lo = omega[max(i - 1, 0)]
    hi = omega[min(i + 1, len(omega) - 1)]
    # golden-section refinement on log frequency
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    x1 = b - gr * (b - a)
    x2 = a + gr * (b - a)
    f1, f2 = ws_mag(math.exp(x1)), ws_mag(math.exp(x2))
    while (b - a) > 1e-3:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + gr * (b - a)
            f2 = ws_mag(math.exp(x2))
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - gr * (b - a)
            f1 = ws_mag(math.exp(x1))
    return max(float(np.max(mags)), f1, f2)
