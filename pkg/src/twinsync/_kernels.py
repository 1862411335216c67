"""Hot inner loops shared by the scenario engine.

Each kernel exists twice: a plain-Python reference build and (when numba is
importable) a JIT-compiled build of the *same* function objects, so the two
paths cannot drift apart.  Selection happens per call via ``get_kernels``;
set ``TWINSYNC_DISABLE_NUMBA=1`` to force the interpreted path.
"""
import math
import os
from types import SimpleNamespace

import numpy as np


def _build(jit):
    if jit:
        from numba import njit
        dec = njit(cache=False)
    else:
        def dec(f):
            return f

    @dec
    def pid_tick(e, integ, prev_e, prev_d, kp, ki, kd, nf, umin, umax, dt):
        # first-order-filtered backward-difference derivative
        d = (prev_d + nf * (e - prev_e)) / (1.0 + nf * dt)
        # trapezoidal integral candidate; committed only when it does not
        # push the output further into saturation (clamping anti-windup)
        cand = integ + 0.5 * dt * (e + prev_e)
        u = kp * e + ki * cand + kd * d
        if u > umax:
            u = umax
            if cand < integ:
                integ = cand
        elif u < umin:
            u = umin
            if cand > integ:
                integ = cand
        else:
            integ = cand
        return u, integ, e, d

    @dec
    def plant_deriv(r, v, th, u, m, rb, J, g, d, L, tau):
        a = (d / L) * th
        dth = (u - th) / tau
        ad = (d / L) * dth
        den = J / (rb * rb) + m
        dv = (m * r * ad * ad - m * g * math.sin(a)) / den
        return v, dv, dth

    @dec
    def plant_interval(r, v, th, u, dt, n, m, rb, J, g, d, L, tau):
        # n fixed-step RK4 steps with the command held
        for _ in range(n):
            k1r, k1v, k1t = plant_deriv(r, v, th, u, m, rb, J, g, d, L, tau)
            k2r, k2v, k2t = plant_deriv(r + 0.5 * dt * k1r, v + 0.5 * dt * k1v,
                                        th + 0.5 * dt * k1t, u, m, rb, J, g, d, L, tau)
            k3r, k3v, k3t = plant_deriv(r + 0.5 * dt * k2r, v + 0.5 * dt * k2v,
                                        th + 0.5 * dt * k2t, u, m, rb, J, g, d, L, tau)
            k4r, k4v, k4t = plant_deriv(r + dt * k3r, v + dt * k3v,
                                        th + dt * k3t, u, m, rb, J, g, d, L, tau)
            r += dt * (k1r + 2.0 * k2r + 2.0 * k3r + k4r) / 6.0
            v += dt * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
            th += dt * (k1t + 2.0 * k2t + 2.0 * k3t + k4t) / 6.0
        return r, v, th

    @dec
    def physical_loop(r_ref, w, v, ts, n_inner,
                      m, rb, J, g, d, L, tau,
                      kp, ki, kd, nf, umin, umax,
                      r0, v0, th0, bound):
        """Closed loop of plant + local PID at ts.  Returns
        (y_true, y_meas, u_applied, diverged_index); index -1 means clean."""
        N = r_ref.shape[0]
        y_true = np.empty(N)
        y_meas = np.empty(N)
        u_out = np.empty(N)
        r = r0
        rv = v0
        th = th0
        integ = 0.0
        pe = 0.0
        pd = 0.0
        dt = ts / n_inner
        div = -1
        for k in range(N):
            y_true[k] = r
            y_meas[k] = r + v[k]
            e = r_ref[k] - r
            u, integ, pe, pd = pid_tick(e, integ, pe, pd, kp, ki, kd, nf,
                                        umin, umax, ts)
            # positive beam angle accelerates the ball toward -r
            u = -u
            u_out[k] = u
            r, rv, th = plant_interval(r, rv, th, u, dt, n_inner,
                                       m, rb, J, g, d, L, tau)
            # process noise enters the velocity state once per control sample
            rv += w[k]
            if not (math.isfinite(r) and math.isfinite(rv)) \
                    or abs(r) > bound or abs(rv) > bound:
                div = k
                for j in range(k + 1, N):
                    y_true[j] = np.nan
                    y_meas[j] = np.nan
                    u_out[j] = np.nan
                break
        return y_true, y_meas, u_out, div

    @dec
    def replay_twin(r_ref, y_fb, A, B, C, ts, kp, ki, kd, nf, umin, umax):
        # model + copy of the local controller, fed the delivered measurement
        N = r_ref.shape[0]
        n = A.shape[0]
        x = np.zeros(n)
        yt = np.empty(N)
        integ = 0.0
        pe = 0.0
        pd = 0.0
        for k in range(N):
            yt[k] = C @ x
            e = r_ref[k] - y_fb[k]
            u, integ, pe, pd = pid_tick(e, integ, pe, pd, kp, ki, kd, nf,
                                        umin, umax, ts)
            u = -u
            x = A @ x + B * u
        return yt

    @dec
    def observer_twin(u_fb, y_val, y_flag, A, B, C, G, q, rm, P0):
        # Kalman filter: predict every tick with the held input, correct
        # only on ticks where a fresh sample arrived
        N = u_fb.shape[0]
        n = A.shape[0]
        x = np.zeros(n)
        P = P0.copy()
        yt = np.empty(N)
        for k in range(N):
            x = A @ x + B * u_fb[k]
            P = A @ P @ A.T + q * np.outer(G, G)
            if y_flag[k] == 1:
                PC = P @ C
                S = C @ PC + rm
                K = PC / S
                x = x + K * (y_val[k] - C @ x)
                P = P - np.outer(K, PC)
                P = 0.5 * (P + P.T)
            yt[k] = C @ x
        return yt

    @dec
    def tracker_twin(y_ref, A, B, C, ts, kp, ki, kd, nf, umin, umax):
        # model closed with a PID that chases the delivered measurement
        N = y_ref.shape[0]
        n = A.shape[0]
        x = np.zeros(n)
        yt = np.empty(N)
        integ = 0.0
        pe = 0.0
        pd = 0.0
        for k in range(N):
            yp = C @ x
            yt[k] = yp
            e = y_ref[k] - yp
            u, integ, pe, pd = pid_tick(e, integ, pe, pd, kp, ki, kd, nf,
                                        umin, umax, ts)
            u = -u
            x = A @ x + B * u
        return yt

    return SimpleNamespace(jit=jit,
                           pid_tick=pid_tick,
                           plant_deriv=plant_deriv,
                           plant_interval=plant_interval,
                           physical_loop=physical_loop,
                           replay_twin=replay_twin,
                           observer_twin=observer_twin,
                           tracker_twin=tracker_twin)


_PURE = None
_JITTED = None


def _numba_available():
    try:
        import numba  # noqa: F401
        return True
    except ImportError:
        return False


def get_kernels(disable_jit=None):
    """Return the kernel set.  disable_jit overrides the env switch."""
    global _PURE, _JITTED
    if disable_jit is None:
        disable_jit = os.environ.get("TWINSYNC_DISABLE_NUMBA", "") not in ("", "0")
    if not disable_jit and _numba_available():
        if _JITTED is None:
            _JITTED = _build(True)
        return _JITTED
    if _PURE is None:
        _PURE = _build(False)
    return _PURE
