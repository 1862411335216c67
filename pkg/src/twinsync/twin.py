"""Scenario engine: wires plant, channel, controllers, and observer into the
three twin-synchronization architectures and produces run traces.

Architecture I  (run_arch1): identified model + a copy of the local
controller; the controller's feedback is the network-delivered physical
measurement (held across losses).  Expected to diverge -- model mismatch is
integrated open-loop.

Architecture II (run_arch2): the applied command and the measurement are
sent each sample as one packet; the twin is a Kalman filter that predicts
every tick with the held command and corrects when a packet arrives.

Architecture III (run_arch3): the twin model is closed with its own PID
whose reference is the delivered measurement and whose feedback is the
twin's own output.

All three consume the *same* physical trajectory and the same loss pattern
for a given master seed; only the twin side differs.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .control import PidGains, pid_step, PidState, setpoint_array
from .model import DiscreteStateSpace
from .netsim import ChannelConfig, deliver_series
from .plant import BallBeamParams
from .sysid import ArxOrders, Excitation, IoDataset, collect, fit_metric, identify_arx

TRACE_COLUMNS = ("t", "r_ref", "y_physical", "u_physical", "y_twin",
                 "error", "y_delivered", "u_delivered")


class ScenarioError(RuntimeError):
    pass


@dataclass
class RunTrace:
    arch: int
    t: np.ndarray
    r_ref: np.ndarray
    y_physical: np.ndarray
    u_physical: np.ndarray
    y_twin: np.ndarray
    error: np.ndarray
    y_delivered: np.ndarray
    u_delivered: np.ndarray
    delivered_flags: np.ndarray
    status: str = "completed"
    diverged_at: Optional[float] = None

    def to_csv(self, path):
        cols = [getattr(self, c) for c in TRACE_COLUMNS]
        with open(path, "w") as f:
            f.write(",".join(TRACE_COLUMNS) + "\n")
            for row in zip(*cols):
                f.write(",".join(f"{x:.17g}" for x in row) + "\n")


@dataclass
class PhysicalRun:
    t: np.ndarray
    r_ref: np.ndarray
    y: np.ndarray
    y_meas: np.ndarray
    u: np.ndarray
    status: str = "completed"
    diverged_at: Optional[float] = None


@dataclass
class Scenario:
    """Everything one experiment needs, resolved from a config mapping.

    The master seed fans out into six independent child streams in a fixed
    order (process noise, measurement noise, channel, excitation,
    collection process noise, collection measurement noise), so the
    physical trajectory and the loss pattern are identical whichever
    architecture consumes them.
    """
    params: BallBeamParams
    q_process: float
    r_meas: float
    channel: ChannelConfig          # seed field unused; scenario supplies it
    local_gains: PidGains
    track_gains: PidGains
    reference_hold: bool
    obs_q: float
    obs_r: float
    obs_p0: float
    duration: float
    ts: float
    n_inner: int
    level: float
    ramp_start: float
    ramp_slope: float
    seed: int
    divergence_bound: float
    blowup_bound: float
    orders: ArxOrders
    excitation: Excitation
    collect_duration: float
    prefilter_hz: float
    val_duration: float
    val_hold: float
    arch: Optional[int] = None
    model: Optional[DiscreteStateSpace] = None
    model_fit: Optional[float] = None
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_config(cls, cfg, arch=None, seed=None, duration=None):
        p = cfg["plant"]
        params = BallBeamParams(m=p["m"], R_ball=p["r_ball"], J=p["j"],
                                g=p["g"], d=p["d"], L=p["l"],
                                tau_servo=p["tau_servo"])
        ts = cfg["experiment"]["ts"]
        n_inner = int(round(ts / p["dt_inner"]))
        lg = cfg["controllers"]["local"]
        tg = cfg["controllers"]["tracking"]
        ident = cfg["experiment"]["identification"]
        exp = cfg["experiment"]
        dur = float(duration if duration is not None else exp["duration"])
        n = dur / ts
        if abs(n - round(n)) > 1e-9:
            raise ScenarioError("ts must divide duration")
        return cls(
            params=params,
            q_process=cfg["noise"]["q_process"],
            r_meas=cfg["noise"]["r_meas"],
            channel=ChannelConfig(delay=cfg["network"]["delay"],
                                  loss_prob=cfg["network"]["loss_prob"]),
            local_gains=PidGains(kp=lg["kp"], ki=lg["ki"], kd=lg["kd"],
                                 deriv_filter_n=lg["deriv_filter_n"],
                                 u_min=lg["u_min"], u_max=lg["u_max"]),
            track_gains=PidGains(kp=tg["kp"], ki=tg["ki"], kd=tg["kd"],
                                 deriv_filter_n=tg["deriv_filter_n"],
                                 u_min=tg["u_min"], u_max=tg["u_max"]),
            reference_hold=bool(tg["reference_hold"]),
            obs_q=cfg["observer"]["q_design"],
            obs_r=cfg["observer"]["r_design"],
            obs_p0=cfg["observer"]["p0"],
            duration=dur,
            ts=ts,
            n_inner=n_inner,
            level=exp["setpoint_level"],
            ramp_start=exp["ramp_start"],
            ramp_slope=exp["ramp_slope"],
            seed=int(seed if seed is not None else exp["seed"]),
            divergence_bound=exp["divergence_bound"],
            blowup_bound=p["blowup_bound"],
            orders=ArxOrders(na=ident["na"], nb=ident["nb"], nk=ident["nk"]),
            excitation=Excitation(level=exp["setpoint_level"],
                                  amplitude=ident["amplitude"],
                                  hold=ident["hold"]),
            collect_duration=ident["duration"],
            prefilter_hz=ident["prefilter_hz"],
            val_duration=ident["val_duration"],
            val_hold=ident["val_hold"],
            arch=arch,
        )

    # -- seed plumbing -------------------------------------------------

    def seed_streams(self):
        kids = np.random.SeedSequence(self.seed).spawn(6)
        return dict(w=kids[0], v=kids[1], chan=kids[2], exc=kids[3],
                    coll_w=kids[4], coll_v=kids[5],
                    val_exc=kids[3].spawn(1)[0])

    # -- identification ------------------------------------------------

    def identify(self):
        """Collect + fit the twin model once; later calls reuse it."""
        if self.model is not None:
            return self.model, self.model_fit
        ss = self.seed_streams()
        data = collect(self.params, self.excitation, self.collect_duration,
                       (ss["exc"], ss["coll_w"], ss["coll_v"]),
                       gains=self.local_gains, q_process=self.q_process,
                       r_meas=self.r_meas, ts=self.ts, n_inner=self.n_inner,
                       bound=self.blowup_bound)
        mdl = identify_arx(data, self.orders, q_process=self.q_process,
                           r_meas=self.r_meas, prefilter_hz=self.prefilter_hz)
        val_exc = Excitation(level=self.excitation.level,
                             amplitude=self.excitation.amplitude,
                             hold=self.val_hold)
        val = collect(self.params, val_exc, self.val_duration,
                      (ss["val_exc"], ss["coll_w"], ss["coll_v"]),
                      gains=self.local_gains, q_process=0.0, r_meas=0.0,
                      ts=self.ts, n_inner=self.n_inner,
                      bound=self.blowup_bound)
        self.model = mdl
        self.model_fit = fit_metric(mdl, val)
        return self.model, self.model_fit

    # -- shared streams -------------------------------------------------

    def _physical(self):
        if "phys" in self._cache:
            return self._cache["phys"]
        ss = self.seed_streams()
        n = int(round(self.duration / self.ts))
        r_ref = setpoint_array(n, self.ts, self.level, self.ramp_start,
                               self.ramp_slope)
        rng_w = np.random.Generator(np.random.PCG64(ss["w"]))
        rng_v = np.random.Generator(np.random.PCG64(ss["v"]))
        w = rng_w.normal(0.0, math.sqrt(self.q_process), n) \
            if self.q_process > 0 else np.zeros(n)
        v = rng_v.normal(0.0, math.sqrt(self.r_meas), n) \
            if self.r_meas > 0 else np.zeros(n)
        K = _kernels.get_kernels()
        g = self.local_gains
        p = self.params
        y, ym, u, div = K.physical_loop(
            r_ref, w, v, self.ts, self.n_inner,
            p.m, p.R_ball, p.J, p.g, p.d, p.L, p.tau_servo,
            g.kp, g.ki, g.kd, g.deriv_filter_n, g.u_min, g.u_max,
            0.0, 0.0, 0.0, self.blowup_bound)
        t = np.arange(n) * self.ts
        if div != -1:
            # truncate at the blow-up; downstream twins see the short grid
            end = div + 1
            run = PhysicalRun(t[:end], r_ref[:end], y[:end], ym[:end],
                              u[:end], status="diverged",
                              diverged_at=float(t[div]))
        else:
            run = PhysicalRun(t, r_ref, y, ym, u)
        self._cache["phys"] = run
        return run

    def _delivered(self):
        """One uplink channel per run: (u, y) travel as a single packet, so
        every architecture sees the same loss pattern."""
        if "held" in self._cache:
            return self._cache["held"]
        run = self._physical()
        ss = self.seed_streams()
        cc = ChannelConfig(delay=self.channel.delay,
                           loss_prob=self.channel.loss_prob, seed=ss["chan"])
        payload = np.column_stack([run.y_meas, run.u])
        held, fresh = deliver_series(payload, self.ts, cc, init=0.0)
        out = (held[:, 0], held[:, 1], fresh)
        self._cache["held"] = out
        return out

    def _kernel_model(self):
        # contiguous 1-D views of the single-input/single-output model
        mdl = self.model
        return (np.ascontiguousarray(mdl.A),
                np.ascontiguousarray(mdl.B[:, 0]),
                np.ascontiguousarray(mdl.C[0]),
                np.ascontiguousarray(mdl.G[:, 0]))

    def _trace(self, arch, y_twin):
        run = self._physical()
        y_held, u_held, fresh = self._delivered()
        return RunTrace(arch=arch, t=run.t, r_ref=run.r_ref,
                        y_physical=run.y, u_physical=run.u, y_twin=y_twin,
                        error=run.y - y_twin, y_delivered=y_held,
                        u_delivered=u_held, delivered_flags=fresh,
                        status=run.status, diverged_at=run.diverged_at)


def run_physical_loop(scenario):
    """The closed physical loop alone (identical across architectures)."""
    return scenario._physical()


def run_arch1(scenario):
    scenario.identify()
    run = scenario._physical()
    y_held, _, _ = scenario._delivered()
    K = _kernels.get_kernels()
    g = scenario.local_gains
    A, B, C, _ = scenario._kernel_model()
    y_twin = K.replay_twin(run.r_ref, y_held, A, B, C,
                           scenario.ts, g.kp, g.ki, g.kd, g.deriv_filter_n,
                           g.u_min, g.u_max)
    return scenario._trace(1, y_twin)


def run_arch2(scenario):
    mdl, _ = scenario.identify()
    y_held, u_held, fresh = scenario._delivered()
    K = _kernels.get_kernels()
    P0 = np.eye(mdl.n) * scenario.obs_p0
    A, B, C, G = scenario._kernel_model()
    y_twin = K.observer_twin(u_held, y_held, fresh, A, B, C, G,
                             scenario.obs_q, scenario.obs_r, P0)
    if not np.all(np.isfinite(y_twin)):
        bad = int(np.argmax(~np.isfinite(y_twin)))
        raise ScenarioError(f"observer produced non-finite output at step {bad}")
    return scenario._trace(2, y_twin)


def run_arch3(scenario):
    mdl, _ = scenario.identify()
    y_held, _, fresh = scenario._delivered()
    K = _kernels.get_kernels()
    g = scenario.track_gains
    if scenario.reference_hold:
        A, B, C, _ = scenario._kernel_model()
        y_twin = K.tracker_twin(y_held, A, B, C,
                                scenario.ts, g.kp, g.ki, g.kd,
                                g.deriv_filter_n, g.u_min, g.u_max)
    else:
        y_twin = _tracker_delivery_rate(y_held, fresh, mdl, scenario.ts, g)
    return scenario._trace(3, y_twin)


def _tracker_delivery_rate(y_ref, fresh, mdl, ts, gains):
    # variant: the PID ticks only when a packet arrives (dt = elapsed gap);
    # the model still advances every sample with the held command
    A, B, C = mdl.A, mdl.B[:, 0], mdl.C[0]
    n = A.shape[0]
    x = np.zeros(n)
    yt = np.empty(len(y_ref))
    st = PidState()
    u = 0.0
    last_k = None
    for k in range(len(y_ref)):
        yp = C @ x
        yt[k] = yp
        if fresh[k] == 1:
            dt = ts if last_k is None else (k - last_k) * ts
            up, st = pid_step(gains, st, y_ref[k] - yp, dt)
            u = -up
            last_k = k
        x = A @ x + B * u
    return yt


def run_architecture(scenario, arch):
    if arch == 1:
        return run_arch1(scenario)
    if arch == 2:
        return run_arch2(scenario)
    if arch == 3:
        return run_arch3(scenario)
    raise ScenarioError(f"unknown architecture {arch!r}")
