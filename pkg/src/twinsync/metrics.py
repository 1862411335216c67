"""Trace evaluation: mean absolute error, 2% settling time, divergence."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class MetricsError(ValueError):
    pass


# relative band floor: below this |y| the 2% band is taken of the floor
ZERO_GUARD = 1e-6


def mean_abs_error(trace, window=None):
    """Mean of |e| over the samples with t in [t0, t1] (inclusive)."""
    t = trace.t
    e = trace.error
    if window is not None:
        t0, t1 = window
        mask = (t >= t0) & (t <= t1)
        if not mask.any():
            raise MetricsError("empty averaging window")
        e = e[mask]
    return float(np.mean(np.abs(e)))


def settling_time(trace, band=0.02):
    """Smallest t* with |e(t)| <= band*max(|y(t)|, guard) for all t >= t*.

    Returns 0.0 when the whole trace is inside the band and math.inf when
    the last sample is still outside ("never").
    """
    thr = band * np.maximum(np.abs(trace.y_physical), ZERO_GUARD)
    bad = np.abs(trace.error) > thr
    if not bad.any():
        return 0.0
    last = int(np.max(np.nonzero(bad)[0]))
    if last == len(trace.t) - 1:
        return math.inf
    return float(trace.t[last + 1])


def detect_divergence(trace, bound=10.0):
    """First time |y_twin| exceeds the bound, or None if it never does."""
    if not bound > 0.0:
        raise MetricsError("bound must be positive")
    over = np.abs(trace.y_twin) > bound
    if not over.any():
        return None
    return float(trace.t[int(np.argmax(over))])


@dataclass(frozen=True)
class RunSummary:
    arch: int
    mean_abs_error_full: float
    mean_abs_error_steady: float   # NaN when the trace never settles
    settling_time: float           # math.inf encodes "never"
    diverged: bool
    diverged_at: Optional[float]
    samples: int

    def record(self):
        """Flat key=value text block, one line per field."""
        lines = [
            f"arch={self.arch}",
            f"mean_abs_error_full={_fmt(self.mean_abs_error_full)}",
            f"mean_abs_error_steady={_fmt(self.mean_abs_error_steady)}",
            f"settling_time={_fmt_settle(self.settling_time)}",
            f"diverged={str(self.diverged).lower()}",
            f"diverged_at={_fmt(self.diverged_at) if self.diverged_at is not None else ''}",
            f"samples={self.samples}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text):
        kv = {}
        for line in text.strip().splitlines():
            k, _, v = line.partition("=")
            kv[k] = v
        st = math.inf if kv["settling_time"] == "never" else float(kv["settling_time"])
        da = float(kv["diverged_at"]) if kv["diverged_at"] else None
        return cls(arch=int(kv["arch"]),
                   mean_abs_error_full=float(kv["mean_abs_error_full"]),
                   mean_abs_error_steady=float(kv["mean_abs_error_steady"]),
                   settling_time=st,
                   diverged=kv["diverged"] == "true",
                   diverged_at=da,
                   samples=int(kv["samples"]))


def _fmt(x):
    return f"{x:.17g}"


def _fmt_settle(x):
    return "never" if math.isinf(x) else f"{x:.17g}"


def summarize(trace, divergence_bound=10.0):
    """Full RunSummary for one trace.

    The steady-state error is averaged from the settling instant to the end
    of the run; it is NaN when the trace never settles.  Divergence covers
    both the twin passing the bound and a physically diverged run.
    """
    st = settling_time(trace)
    m_full = mean_abs_error(trace)
    if math.isinf(st):
        m_steady = math.nan
    else:
        m_steady = mean_abs_error(trace, window=(st, trace.t[-1]))
    dtime = detect_divergence(trace, divergence_bound)
    phys_div = getattr(trace, "status", "completed") == "diverged"
    if phys_div and dtime is None:
        dtime = trace.diverged_at
    return RunSummary(arch=trace.arch,
                      mean_abs_error_full=m_full,
                      mean_abs_error_steady=m_steady,
                      settling_time=st,
                      diverged=dtime is not None or phys_div,
                      diverged_at=dtime,
                      samples=len(trace.t))
