"""Least-squares ARX identification of the twin model from recorded
closed-loop input/output data, plus the excitation and fit utilities."""
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as _sig
from scipy.linalg import solve_triangular

from . import _kernels
from .control import DEFAULT_LOCAL_GAINS
from .model import DiscreteStateSpace, simulate


class SysIdError(RuntimeError):
    pass


class RankDeficientError(SysIdError):
    """Regressor matrix numerically rank deficient; names the columns."""


@dataclass(frozen=True)
class IoDataset:
    u: np.ndarray
    y: np.ndarray
    Ts: float

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.u.shape != self.y.shape or self.u.ndim != 1:
            raise SysIdError("u and y must be 1-D arrays of equal length")
        if not self.Ts > 0.0:
            raise SysIdError("Ts must be positive")

    def __len__(self):
        return self.u.shape[0]

    def to_csv(self, path):
        with open(path, "w") as f:
            f.write(f"# Ts={self.Ts:.17g}\n")
            f.write("u,y\n")
            for uk, yk in zip(self.u, self.y):
                f.write(f"{uk:.17g},{yk:.17g}\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as f:
            header = f.readline().strip()
            if not header.startswith("# Ts="):
                raise SysIdError("missing Ts header comment")
            ts = float(header.split("=", 1)[1])
            f.readline()  # column names
            data = np.loadtxt(f, delimiter=",")
        return cls(u=data[:, 0], y=data[:, 1], Ts=ts)


@dataclass(frozen=True)
class ArxOrders:
    na: int = 2
    nb: int = 2
    nk: int = 4

    def __post_init__(self):
        if self.na < 1 or self.nb < 1 or self.nk < 0:
            raise SysIdError("orders must satisfy na>=1, nb>=1, nk>=0")


@dataclass(frozen=True)
class Excitation:
    """PRBS setpoint levels around the operating point."""
    level: float = 1.0
    amplitude: float = 0.5
    hold: float = 0.5   # seconds per symbol


def prbs_array(n_samples, ts, level, amplitude, hold, rng):
    nh = max(1, int(round(hold / ts)))
    nbits = n_samples // nh + 1
    bits = rng.integers(0, 2, nbits)
    sig = level + amplitude * (2.0 * bits - 1.0)
    return np.repeat(sig, nh)[:n_samples]


def collect(params, excitation, duration, seed, gains=DEFAULT_LOCAL_GAINS,
            q_process=0.0, r_meas=0.0, ts=0.01, n_inner=10, r0=None,
            bound=1000.0):
    """Record (u, y) from the closed physical loop under a PRBS setpoint.

    `seed` is either an int or a triple of SeedSequences
    (excitation, process noise, measurement noise).  The loop starts at the
    excitation's center level unless r0 overrides it.
    """
    n = int(round(duration / ts))
    if n < 1000:
        raise SysIdError("duration must cover at least 1000 samples")
    if isinstance(seed, (tuple, list)):
        ss_p, ss_w, ss_v = seed
    else:
        ss_p, ss_w, ss_v = np.random.SeedSequence(seed).spawn(3)
    rng_p = np.random.Generator(np.random.PCG64(ss_p))
    rng_w = np.random.Generator(np.random.PCG64(ss_w))
    rng_v = np.random.Generator(np.random.PCG64(ss_v))
    r_exc = prbs_array(n, ts, excitation.level, excitation.amplitude,
                       excitation.hold, rng_p)
    w = rng_w.normal(0.0, math.sqrt(q_process), n) if q_process > 0 else np.zeros(n)
    v = rng_v.normal(0.0, math.sqrt(r_meas), n) if r_meas > 0 else np.zeros(n)
    if r0 is None:
        r0 = excitation.level
    K = _kernels.get_kernels()
    y, ym, u, div = K.physical_loop(
        r_exc, w, v, ts, n_inner,
        params.m, params.R_ball, params.J, params.g, params.d, params.L,
        params.tau_servo,
        gains.kp, gains.ki, gains.kd, gains.deriv_filter_n,
        gains.u_min, gains.u_max, r0, 0.0, 0.0, bound)
    if div != -1:
        raise SysIdError(f"plant diverged during collection at sample {div}")
    return IoDataset(u=u, y=ym, Ts=ts)


def prefilter(x, fc_hz, ts, order=4):
    """Forward low-pass (Butterworth) applied to both channels before the
    regression, suppressing out-of-band measurement noise."""
    b, a = _sig.butter(order, fc_hz * 2.0 * ts)
    return _sig.lfilter(b, a, x)


def _regressor(u, y, na, nb, nk):
    nn = max(na, nb + nk - 1)
    M = len(u)
    rows = M - nn
    Phi = np.empty((rows, na + nb))
    names = []
    for i in range(1, na + 1):
        Phi[:, i - 1] = -y[nn - i:M - i]
        names.append(f"y[k-{i}]")
    for j in range(1, nb + 1):
        Phi[:, na + j - 1] = u[nn - nk - j + 1:M - nk - j + 1]
        names.append(f"u[k-{nk + j - 1}]")
    return Phi, y[nn:M], names


def identify_arx(data, orders, q_process=0.0, r_meas=0.0, prefilter_hz=None):
    """ARX fit -> observable-canonical DiscreteStateSpace.

    Solves the least-squares problem through a QR factorization of the
    regressor (never the normal equations).  The returned model carries
    G on its last state with Q=q_process and R=r_meas, F=1.
    """
    na, nb, nk = orders.na, orders.nb, orders.nk
    if len(data) <= 10 * (na + nb):
        raise SysIdError("dataset too short for the requested orders")
    u, y = data.u, data.y
    if prefilter_hz is not None:
        u = prefilter(u, prefilter_hz, data.Ts)
        y = prefilter(y, prefilter_hz, data.Ts)
    Phi, Y, names = _regressor(u, y, na, nb, nk)
    Qm, Rm = np.linalg.qr(Phi)
    diag = np.abs(np.diag(Rm))
    tol = max(Phi.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    bad = [names[i] for i in range(len(names)) if diag[i] <= tol]
    if bad:
        raise RankDeficientError(
            "regressor rank deficient in columns: " + ", ".join(bad))
    theta = solve_triangular(Rm, Qm.T @ Y)
    a, b = theta[:na], theta[na:]
    return arx_to_statespace(a, b, nk, data.Ts,
                             q_process=q_process, r_meas=r_meas)


def arx_to_statespace(a, b, nk, ts, q_process=0.0, r_meas=0.0):
    """Observable-canonical realization of y_k + a1 y_{k-1} + ... = b1 u_{k-nk} + ...

    Process noise enters through the last state (G = [0,...,0,1]^T).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    n = max(na, nb + nk - 1)
    den = np.zeros(n)
    den[:na] = a
    num = np.zeros(n)
    num[nk - 1:nk - 1 + nb] = b
    A = np.zeros((n, n))
    A[:n - 1, 1:] = np.eye(n - 1)
    A[:, 0] = -den
    C = np.zeros(n)
    C[0] = 1.0
    G = np.zeros(n)
    G[n - 1] = 1.0
    return DiscreteStateSpace(A=A, B=num.copy(), C=C, G=G, F=np.eye(1),
                              Q=np.array([[q_process]]),
                              R=np.array([[r_meas]]), Ts=ts)


def fit_metric(mdl, data):
    """Normalized-RMSE fit: 100 * (1 - ||y - y_sim|| / ||y - mean(y)||).

    y_sim is the model's free run under data.u, with the initial state
    chosen by least squares (the model is judged on its dynamics, not on an
    arbitrary zero start).  Raises on constant y, where the metric is
    undefined.
    """
    denom = np.linalg.norm(data.y - data.y.mean())
    if denom == 0.0:
        raise SysIdError("fit metric undefined for constant y")
    n = mdl.n
    _, base = simulate(mdl, np.zeros(n), data.u)
    base = base[:, 0]
    cols = np.empty((len(data), n))
    zero_u = np.zeros(len(data))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        _, resp = simulate(mdl, e, zero_u)
        cols[:, i] = resp[:, 0]
    x0, *_ = np.linalg.lstsq(cols, data.y - base, rcond=None)
    yhat = base + cols @ x0
    return 100.0 * (1.0 - np.linalg.norm(data.y - yhat) / denom)
