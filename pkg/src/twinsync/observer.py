"""Kalman filter with value semantics, built around DiscreteStateSpace.

The two phases are kept exactly in the classic form:

    time update:         x = A x + B u,     P = G Q G' + A P A'
    measurement update:  K = P C' (C P C' + F R F')^-1
                         x = x + K (y - C x)
                         P = (I - K C) P, then resymmetrized

Resymmetrization P <- (P + P')/2 after each measurement update is the only
numerical safeguard; no Joseph form, no square-root filtering.
"""
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .model import DiscreteStateSpace


class ObserverError(RuntimeError):
    pass


@dataclass(frozen=True)
class KalmanFilter:
    model: DiscreteStateSpace
    x_hat: np.ndarray
    P: np.ndarray
    K_last: Optional[np.ndarray] = None

    @classmethod
    def init(cls, model, x0=None, p0=1.0):
        """Fresh filter: x_hat = x0 (default 0), P = I * p0."""
        n = model.n
        x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)
        P = np.eye(n) * float(p0)
        return cls(model=model, x_hat=x, P=P)


def time_update(kf, u):
    """Predict one sample ahead with input u.

    Args:
        kf: current filter state.
        u: input vector (or scalar for single-input models).
    Returns:
        A new KalmanFilter with the predicted mean and covariance.
    """
    m = kf.model
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape[0] != m.B.shape[1]:
        raise ObserverError("input dimension mismatch")
    x = m.A @ kf.x_hat + m.B @ u
    P = m.G @ m.Q @ m.G.T + m.A @ kf.P @ m.A.T
    return replace(kf, x_hat=x, P=P)


def measurement_update(kf, y):
    """Correct the estimate with measurement y.

    Raises ObserverError when the innovation covariance C P C' + F R F' is
    singular (to working precision), identifying the offending block.
    """
    m = kf.model
    y = np.atleast_1d(np.asarray(y, dtype=float))
    p = m.C.shape[0]
    if y.shape[0] != p:
        raise ObserverError("measurement dimension mismatch")
    PCt = kf.P @ m.C.T
    S = m.C @ PCt + m.F @ m.R @ m.F.T
    # 1-D problems dominate here; solve() still covers the general case
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > 1e12:
        raise ObserverError(
            f"singular innovation covariance C P C' + F R F' = {S.tolist()}")
    K = np.linalg.solve(S.T, PCt.T).T
    x = kf.x_hat + K @ (y - m.C @ kf.x_hat)
    P = (np.eye(m.n) - K @ m.C) @ kf.P
    P = 0.5 * (P + P.T)
    return replace(kf, x_hat=x, P=P, K_last=K)


def estimate_output(kf):
    """Reconstructed output y_hat = C x_hat."""
    return kf.model.C @ kf.x_hat
