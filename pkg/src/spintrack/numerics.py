"""Dense small-matrix kernels, fixed-step integrators, and reproducible noise.

Everything here is deterministic: integrators take explicit step schedules
(no error-adaptive control) and the random stream is counter-based, so a
(seed, position) pair always yields the same draw on every platform.

Random numbers
--------------
``RngStream`` implements splitmix64: output ``j`` of stream ``s0`` is
``finalize(s0 + (j + 1) * GAMMA)`` with the standard finalizer constants.
Standard normals use Box-Muller on consecutive outputs; normal draw ``i``
consumes uint64 outputs ``2i`` and ``2i + 1``:

    u1 = (out[2i]   >> 11 + 1) * 2**-53   in (0, 1]
    u2 = (out[2i+1] >> 11)     * 2**-53   in [0, 1)
    z  = sqrt(-2 ln u1) * cos(2 pi u2)

Sub-streams: stream ``k`` of base seed ``s`` is the stream of the derived
seed ``finalize(s) XOR k`` (the base seed is finalized first so that
nearby integer seeds do not share key sets under the XOR).  Each Monte
Carlo trial owns one sub-stream, which makes ensembles independent of
batch splitting and worker count.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError, DivergenceError

# splitmix64 constants (Steele, Lea & Flood 2014)
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_U64 = np.uint64
_TWO53 = float(1 << 53)


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on a uint64 array (wraps mod 2**64)."""
    with np.errstate(over="ignore"):
        x = np.asarray(x, dtype=_U64).copy()
        x ^= x >> _U64(30)
        x *= _U64(_MIX1)
        x ^= x >> _U64(27)
        x *= _U64(_MIX2)
        x ^= x >> _U64(31)
    return x


def _raw_outputs(state0: int, start: int, count: int) -> np.ndarray:
    """uint64 outputs [start, start+count) of the splitmix64 stream."""
    with np.errstate(over="ignore"):
        idx = np.arange(start + 1, start + count + 1, dtype=_U64)
        return _mix64(idx * _U64(_GAMMA) + _U64(state0))


class RngStream:
    """Counter-based standard-normal stream; reproducible and splittable."""

    def __init__(self, seed: int):
        seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.seed = seed
        self._state0 = int(_mix64(np.array(seed, dtype=_U64)))
        self._pos = 0  # normals consumed so far

    def spawn(self, k: int) -> "RngStream":
        """Independent sub-stream k (finalized base seed XOR k)."""
        return RngStream(self._state0 ^ int(k))

    def normals_at(self, start: int, n: int) -> np.ndarray:
        """Normals [start, start+n) by counter, without touching position."""
        if n == 0:
            return np.empty(0)
        raw = _raw_outputs(self._state0, 2 * start, 2 * n)
        u1 = ((raw[0::2] >> _U64(11)).astype(np.float64) + 1.0) / _TWO53
        u2 = (raw[1::2] >> _U64(11)).astype(np.float64) / _TWO53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def normals(self, n: int) -> np.ndarray:
        """Next n standard-normal draws, advancing the stream."""
        out = self.normals_at(self._pos, int(n))
        self._pos += int(n)
        return out

    def normal(self) -> float:
        return float(self.normals(1)[0])


def spread_seed(seed: int) -> int:
    """Finalized base seed used as the root of the sub-stream family."""
    return int(_mix64(np.array(int(seed) & 0xFFFFFFFFFFFFFFFF, dtype=_U64)))


def trial_stream(seed: int, trial: int) -> RngStream:
    """Stream for Monte Carlo trial ``trial`` under base ``seed``."""
    return RngStream(spread_seed(seed) ^ int(trial))


def trial_normals(seed: int, trials: np.ndarray, n: int, start: int = 0) -> np.ndarray:
    """Matrix of draws, row k = normals [start, start+n) of trial_stream(seed, trials[k]).

    Vectorized across trials; identical to calling each trial's stream.
    Random access by position makes ensembles independent of how work is
    chunked across steps or workers.
    """
    trials = np.asarray(trials, dtype=np.int64)
    with np.errstate(over="ignore"):
        base = np.array([spread_seed(seed)], dtype=_U64)
        s0 = _mix64(base ^ trials.astype(_U64))
        idx = np.arange(2 * start + 1, 2 * (start + n) + 1, dtype=_U64)
        raw = _mix64(idx[None, :] * _U64(_GAMMA) + s0[:, None])
    u1 = ((raw[:, 0::2] >> _U64(11)).astype(np.float64) + 1.0) / _TWO53
    u2 = (raw[:, 1::2] >> _U64(11)).astype(np.float64) / _TWO53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


# ---------------------------------------------------------------------------
# matrix exponential
# ---------------------------------------------------------------------------

_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)


def mat_expm(a: np.ndarray) -> np.ndarray:
    """exp(a) by scaling-and-squaring with a fixed order-13 Pade core.

    Scales so the 1-norm is at most 2 before the Pade step, then squares
    back.  Sized for the small dense matrices used throughout (2x2 to a
    few hundred square).
    """
    a = np.asarray(a, dtype=np.complex128 if np.iscomplexobj(a) else np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"mat_expm needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DivergenceError("mat_expm: non-finite entries in input")
    n = a.shape[0]
    norm = np.linalg.norm(a, 1)
    s = max(0, int(math.ceil(math.log2(norm / 2.0))) if norm > 2.0 else 0)
    a_s = a / (2.0 ** s)

    b = _PADE13
    ident = np.eye(n, dtype=a.dtype)
    a2 = a_s @ a_s
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a_s @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
               + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


# ---------------------------------------------------------------------------
# integrators
# ---------------------------------------------------------------------------

def _rk4_step(f, t, x, h):
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def ode_rk4(f, x0, t0: float, t1: float, dt: float):
    """Classical fixed-step RK4 of dx/dt = f(t, x) from t0 to t1.

    The final step is shortened to land exactly on t1.  Returns
    (times, states) with states[k] = x(times[k]).
    """
    if dt <= 0:
        raise DimensionError("ode_rk4: dt must be positive")
    if t1 <= t0:
        raise DimensionError("ode_rk4: t1 must exceed t0")
    x = np.array(x0, dtype=np.float64, copy=True)
    times = [t0]
    states = [x.copy()]
    t = t0
    while t < t1 - 1e-15 * max(abs(t1), 1.0):
        h = min(dt, t1 - t)
        x = _rk4_step(f, t, x, h)
        t = t + h
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"ode_rk4: non-finite state at t = {t:.6e}")
        times.append(t)
        states.append(x.copy())
    return np.array(times), np.array(states)


def rk4_nonuniform(f, x0, times):
    """RK4 over an explicit increasing time grid; returns states on it."""
    times = np.asarray(times, dtype=np.float64)
    x = np.array(x0, dtype=np.float64, copy=True)
    out = np.empty((len(times),) + x.shape)
    out[0] = x
    for k in range(len(times) - 1):
        h = times[k + 1] - times[k]
        x = _rk4_step(f, times[k], x, h)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"rk4_nonuniform: non-finite state at t = {times[k + 1]:.6e}")
        out[k + 1] = x
    return out


def euler_maruyama_step(x, drift, diffusion, dt: float, dw):
    """One Ito-Euler update: x + drift*dt + diffusion @ dw.

    dw must already be scaled by sqrt(dt) (i.e. a Wiener increment).
    """
    x = np.asarray(x, dtype=np.float64)
    drift = np.asarray(drift, dtype=np.float64)
    diffusion = np.asarray(diffusion, dtype=np.float64)
    dw = np.asarray(dw, dtype=np.float64)
    if dt <= 0:
        raise DimensionError("euler_maruyama_step: dt must be positive")
    if drift.shape != x.shape:
        raise DimensionError(f"drift shape {drift.shape} != state shape {x.shape}")
    if diffusion.ndim != 2 or diffusion.shape[0] != x.shape[0] or diffusion.shape[1] != dw.shape[0]:
        raise DimensionError(
            f"diffusion shape {diffusion.shape} incompatible with state {x.shape} and noise {dw.shape}")
    return x + drift * dt + diffusion @ dw


# ---------------------------------------------------------------------------
# linear covariance propagation
# ---------------------------------------------------------------------------

# 5-point Gauss-Legendre nodes/weights on [0, 1]
_GL_NODES = np.array([0.04691007703066800, 0.23076534494715845, 0.5,
                      0.76923465505284155, 0.95308992296933200])
_GL_WEIGHTS = np.array([0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
                        0.23931433524968324, 0.11846344252809454])


def ou_increment(alpha: np.ndarray, q: np.ndarray, dt: float):
    """Exact one-step propagator for a linear SDE covariance.

    For dX = alpha X dt + (noise with intensity q), the covariance obeys
    P(t+dt) = Phi P(t) Phi^T + G with Phi = exp(alpha dt) and
    G = int_0^dt exp(alpha s) q exp(alpha^T s) ds.  Returns (Phi, G).

    G is built on a sub-step small enough that ||alpha h|| <= 0.25
    (5-point Gauss-Legendre, machine accurate there) and assembled by
    interval doubling: G(2h) = G(h) + Phi(h) G(h) Phi(h)^T.  The doubling
    is unconditionally stable, so arbitrarily stiff stable generators are
    fine.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    n = alpha.shape[0]
    if alpha.shape != (n, n) or q.shape != (n, n):
        raise DimensionError("ou_increment: alpha and q must be square and same size")
    if dt == 0.0:
        return np.eye(n), np.zeros((n, n))
    norm = np.linalg.norm(alpha, 1) * dt
    s = max(0, int(math.ceil(math.log2(norm / 0.25))) if norm > 0.25 else 0)
    h = dt / (2.0 ** s)

    g = np.zeros((n, n))
    for node, w in zip(_GL_NODES, _GL_WEIGHTS):
        e = mat_expm(alpha * (node * h))
        g += (w * h) * (e @ q @ e.T)
    phi = mat_expm(alpha * h)
    for _ in range(s):
        g = g + phi @ g @ phi.T
        phi = phi @ phi
    return phi, 0.5 * (g + g.T)


def geometric_times(t_start: float, t_end: float, ratio: float, t_offset: float = 0.0):
    """Deterministic quasi-geometric grid from t_start to t_end.

    Steps grow as dt = (ratio - 1) * (t + t_offset), which tracks dynamics
    whose local timescale is proportional to elapsed time (Riccati
    transients).  The grid is a pure function of its arguments.
    """
    if not (t_end > t_start >= 0.0 and ratio > 1.0):
        raise DimensionError("geometric_times: need t_end > t_start >= 0 and ratio > 1")
    times = [t_start]
    t = t_start
    g = ratio - 1.0
    while t < t_end:
        t = min(t + g * (t + t_offset), t_end)
        times.append(t)
    return np.array(times)
