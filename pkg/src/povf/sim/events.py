"""Event queue and network delay sampling.

Time is integer milliseconds.  Events scheduled for the same millisecond run
in the order they were scheduled, which (with a single seeded RNG) makes the
whole run a pure function of the config.
"""

from __future__ import annotations

import heapq
import math
import random
from typing import Any, Callable

from povf.sim.config import LatencyModel


class EventQueue:
    """Calendar queue: one FIFO bucket per millisecond plus a heap of times.

    Simulated traffic clusters on few distinct times, so this beats a heap of
    individual events by a wide margin.
    """

    __slots__ = ("_buckets", "_times", "now", "processed")

    def __init__(self):
        self._buckets: dict[int, list] = {}
        self._times: list[int] = []
        self.now = 0
        self.processed = 0

    def schedule(self, at: int, fn: Callable, *args: Any) -> None:
        if at < self.now:
            at = self.now
        bucket = self._buckets.get(at)
        if bucket is None:
            self._buckets[at] = [(fn, args)]
            heapq.heappush(self._times, at)
        else:
            bucket.append((fn, args))

    def __len__(self) -> int:
        return sum(len(b) for b in self._buckets.values())

    def run_until(self, end: int) -> None:
        times = self._times
        buckets = self._buckets
        while times and times[0] <= end:
            t = heapq.heappop(times)
            self.now = t
            bucket = buckets[t]
            i = 0
            # handlers may append to this bucket while it is being drained
            while i < len(bucket):
                fn, args = bucket[i]
                i += 1
                fn(*args)
            self.processed += i
            del buckets[t]
        self.now = max(self.now, end)


class LatencySampler:
    def __init__(self, model: LatencyModel, rng: random.Random):
        self.model = model
        self.rng = rng
        self._mu = math.log(model.median_ms) if model.median_ms > 0 else None

    def sample(self) -> int:
        m = self.model
        if m.kind == "constant":
            d = m.median_ms
        elif m.kind == "uniform":
            d = self.rng.uniform(m.low_ms, m.high_ms)
        elif self._mu is None:
            d = 0.0
        else:
            d = self.rng.lognormvariate(self._mu, m.sigma)
        return max(1, int(d))
