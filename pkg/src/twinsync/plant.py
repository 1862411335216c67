"""Nonlinear ball-and-beam plant with a first-order servo lag.

State is the ball position r along the beam, its velocity, and the servo
gear angle theta.  The beam angle is alpha = (d/L)*theta and is never stored
separately.  Dynamics:

    r_ddot = (m*r*alpha_dot^2 - m*g*sin(alpha)) / (J/R_ball^2 + m)
    theta_dot = (theta_cmd - theta) / tau_servo

Integration is fixed-step RK4; discrete process noise is added to the
velocity state after each step (G = [0, 1, 0]^T), measurement noise to the
position reading.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np


class PlantError(ValueError):
    pass


class PlantDiverged(RuntimeError):
    """Raised when the state magnitude passes the configured blow-up bound."""


@dataclass(frozen=True)
class BallBeamParams:
    m: float = 0.111          # ball mass, kg
    R_ball: float = 0.015     # ball radius, m
    J: float = 9.99e-6        # ball moment of inertia, kg*m^2
    g: float = 9.8            # gravity, m/s^2
    d: float = 0.03           # lever arm offset, m
    L: float = 1.0            # beam length, m
    tau_servo: float = 0.1    # servo first-order time constant, s

    def __post_init__(self):
        for name in ("m", "R_ball", "J", "g", "d", "L", "tau_servo"):
            if not getattr(self, name) > 0.0:
                raise PlantError(f"plant parameter {name} must be positive")

    @property
    def accel_denom(self):
        return self.J / (self.R_ball * self.R_ball) + self.m


@dataclass(frozen=True)
class PlantState:
    r: float = 0.0
    r_dot: float = 0.0
    theta: float = 0.0
    t: float = 0.0

    def alpha(self, params):
        return (params.d / params.L) * self.theta


@dataclass
class NoiseSpec:
    """Covariances plus the seeded streams that realize them.

    q_process is the variance of the per-sample velocity kick, r_meas the
    variance of the position measurement noise.  Process and measurement
    draws come from independent child streams of the seed.
    """
    q_process: float = 0.0
    r_meas: float = 0.0
    seed: int = 0
    _gen_w: np.random.Generator = field(init=False, repr=False, default=None)
    _gen_v: np.random.Generator = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.q_process < 0.0 or self.r_meas < 0.0:
            raise PlantError("noise covariances must be nonnegative")
        kids = np.random.SeedSequence(self.seed).spawn(2)
        self._gen_w = np.random.Generator(np.random.PCG64(kids[0]))
        self._gen_v = np.random.Generator(np.random.PCG64(kids[1]))

    def draw_w(self):
        if self.q_process == 0.0:
            return 0.0
        return self._gen_w.normal(0.0, math.sqrt(self.q_process))

    def draw_v(self):
        if self.r_meas == 0.0:
            return 0.0
        return self._gen_v.normal(0.0, math.sqrt(self.r_meas))


def derivative(state, theta_cmd, params):
    """Time derivatives (dr, dr_dot, dtheta) at the given state and command.

    Purely functional; rejects non-finite inputs.
    """
    vals = (state.r, state.r_dot, state.theta, theta_cmd)
    if not all(math.isfinite(x) for x in vals):
        raise PlantError("non-finite plant state or command")
    a = (params.d / params.L) * state.theta
    dth = (theta_cmd - state.theta) / params.tau_servo
    ad = (params.d / params.L) * dth
    dv = (params.m * state.r * ad * ad
          - params.m * params.g * math.sin(a)) / params.accel_denom
    return state.r_dot, dv, dth


def step(state, theta_cmd, dt, params, noise=None, bound=1000.0):
    """One RK4 step of size dt, then a discrete velocity noise kick.

    Raises PlantDiverged instead of silently producing NaN/Inf once the
    state magnitude passes `bound`.
    """
    if not dt > 0.0:
        raise PlantError("dt must be positive")
    r, v, th = state.r, state.r_dot, state.theta
    k1r, k1v, k1t = _deriv(r, v, th, theta_cmd, params)
    k2r, k2v, k2t = _deriv(r + 0.5 * dt * k1r, v + 0.5 * dt * k1v,
                           th + 0.5 * dt * k1t, theta_cmd, params)
    k3r, k3v, k3t = _deriv(r + 0.5 * dt * k2r, v + 0.5 * dt * k2v,
                           th + 0.5 * dt * k2t, theta_cmd, params)
    k4r, k4v, k4t = _deriv(r + dt * k3r, v + dt * k3v,
                           th + dt * k3t, theta_cmd, params)
    r += dt * (k1r + 2.0 * k2r + 2.0 * k3r + k4r) / 6.0
    v += dt * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
    th += dt * (k1t + 2.0 * k2t + 2.0 * k3t + k4t) / 6.0
    if noise is not None:
        v += noise.draw_w()
    if not (math.isfinite(r) and math.isfinite(v)) \
            or abs(r) > bound or abs(v) > bound:
        raise PlantDiverged(f"plant state blew up at t={state.t + dt:.3f}")
    return replace(state, r=r, r_dot=v, theta=th, t=state.t + dt)


def _deriv(r, v, th, u, p):
    # unpacked variant used by the RK4 stages (matches `derivative`)
    a = (p.d / p.L) * th
    dth = (u - th) / p.tau_servo
    ad = (p.d / p.L) * dth
    dv = (p.m * r * ad * ad - p.m * p.g * math.sin(a)) / p.accel_denom
    return v, dv, dth


def measure(state, noise):
    """Position measurement y = r + v_k from the seeded stream."""
    return state.r + noise.draw_v()


def linearized_matrices(params):
    """Continuous-time (Ac, Bc) around r=0, r_dot=0, theta=0.

    The small-angle gain m*g*d / (L*(J/R_ball^2 + m)) is about 0.21 with the
    default parameter set.  Input is the commanded servo angle.
    """
    kacc = params.m * params.g * params.d / (params.L * params.accel_denom)
    Ac = np.array([[0.0, 1.0, 0.0],
                   [0.0, 0.0, -kacc],
                   [0.0, 0.0, -1.0 / params.tau_servo]])
    Bc = np.array([0.0, 0.0, 1.0 / params.tau_servo])
    return Ac, Bc
