"""One-directional network channel: constant delay, i.i.d. Bernoulli loss,
seeded and deterministic, in-order delivery.

The drop decision is drawn at send time (one uniform per packet), so the
loss pattern depends only on (seed, number of sends) -- consumers polling at
different rates see the same fate per packet.
"""
from collections import deque
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class Packet:
    seq: int
    send_time: float
    payload: Any
    delivery_time: float = 0.0


@dataclass(frozen=True)
class ChannelConfig:
    delay: float = 0.04
    loss_prob: float = 0.025
    seed: Any = 0

    def __post_init__(self):
        if self.delay < 0.0:
            raise ChannelError("delay must be nonnegative")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ChannelError("loss_prob must lie in [0, 1]")


class Channel:
    def __init__(self, config):
        self.config = config
        self._rng = np.random.Generator(np.random.PCG64(config.seed))
        self._queue = deque()
        self._log = []          # (seq, send_time, delivered_flag, delivery_time)
        self._last_send = -np.inf
        self._last_poll = -np.inf
        self._last_delivered: Optional[Packet] = None
        self._next_seq = 0
        self.sent = 0
        self.dropped = 0
        self.delivered = 0

    def send(self, payload, now):
        """Enqueue a packet; returns its seq whether it survives or not."""
        if now < self._last_send:
            raise ChannelError("send time regressed")
        self._last_send = now
        seq = self._next_seq
        self._next_seq += 1
        self.sent += 1
        lost = self._rng.random() < self.config.loss_prob
        if lost:
            self.dropped += 1
            self._log.append((seq, now, 0, np.nan))
        else:
            dt = now + self.config.delay
            self._queue.append(Packet(seq, now, payload, dt))
            self._log.append((seq, now, 1, dt))
        return seq

    def poll(self, now):
        """All packets due by `now`, in seq order, each returned once.

        The due-time comparison carries a ~1e-12 relative slack so that a
        one-ulp rounding mismatch between `send_time + delay` and a poll
        instant computed as k*ts cannot push a delivery a whole tick late.
        """
        if now < self._last_poll:
            raise ChannelError("poll time regressed")
        self._last_poll = now
        eps = max(1e-15, 1e-12 * abs(now))
        out = []
        while self._queue and self._queue[0].delivery_time <= now + eps:
            pkt = self._queue.popleft()
            out.append(pkt)
            self._last_delivered = pkt
            self.delivered += 1
        return out

    def last_delivered(self):
        return self._last_delivered

    def write_log(self, path):
        with open(path, "w") as f:
            f.write("seq,send_time,delivered_flag,delivery_time\n")
            for seq, st, flag, dt in self._log:
                dts = "" if flag == 0 else f"{dt:.17g}"
                f.write(f"{seq},{st:.17g},{flag},{dts}\n")


def deliver_series(values, ts, config, init=0.0):
    """Run a sample-per-tick send/poll schedule through a fresh Channel.

    values[k] is sent at t = k*ts and the channel is polled at every tick.
    Returns (held, fresh) where held[k] is the newest delivered payload as
    of tick k (or `init` before the first delivery) and fresh[k] flags the
    ticks where a new packet arrived.  values may be a 2-D array; the
    payload then is the whole row.
    """
    arr = np.asarray(values, dtype=float)
    N = arr.shape[0]
    ch = Channel(config)
    held = np.empty(arr.shape, dtype=float)
    fresh = np.zeros(N, dtype=np.int64)
    cur = np.broadcast_to(np.asarray(init, dtype=float), arr.shape[1:]).copy() \
        if arr.ndim > 1 else float(init)
    for k in range(N):
        now = k * ts
        ch.send(arr[k], now)
        got = ch.poll(now)
        if got:
            cur = got[-1].payload
            fresh[k] = 1
        held[k] = cur
    return held, fresh
