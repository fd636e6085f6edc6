"""NTP-style pairwise offset estimation and logical clocks.

A node's logical clock is its physical clock plus an accumulated correction
``theta``.  Each sync round measures the offset to a peer from one
request/response exchange and moves ``theta`` a fraction ``alpha`` of the way.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

Number = Union[int, float]

DEFAULT_ALPHA = 0.5


class ClockSyncError(ValueError):
    pass


def ntp_offset(t1: Number, t2: Number, t3: Number, t4: Number) -> Number:
    """Estimated offset of the server clock relative to the client.

    ``t1``/``t4`` are client send/receive times, ``t2``/``t3`` server
    receive/send times.  Integer inputs give an integer result, halved
    toward zero.
    """
    if t2 > t3:
        raise ClockSyncError(f"server times out of order: t2={t2} > t3={t3}")
    if t1 > t4:
        raise ClockSyncError(f"client times out of order: t1={t1} > t4={t4}")
    total = (t2 - t1) + (t3 - t4)
    if all(isinstance(t, int) for t in (t1, t2, t3, t4)):
        half = abs(total) // 2
        return half if total >= 0 else -half
    return total / 2


def round_trip_delay(t1: Number, t2: Number, t3: Number, t4: Number) -> Number:
    return (t4 - t1) - (t3 - t2)


@dataclass(frozen=True)
class ClockState:
    """``physical_offset`` and ``drift_rate`` are simulation ground truth;
    only ``logical_offset_theta`` is under the node's control.  ``drift_rate``
    is in milliseconds gained per simulated second."""

    physical_offset: float = 0.0
    logical_offset_theta: float = 0.0
    drift_rate: float = 0.0

    def physical_time(self, global_ms: float) -> float:
        return global_ms + self.physical_offset + self.drift_rate * global_ms / 1000.0

    def logical_time(self, global_ms: float) -> float:
        return self.physical_time(global_ms) + self.logical_offset_theta


def apply_sync_round(state: ClockState, measured_theta: Number,
                     alpha: float = DEFAULT_ALPHA) -> ClockState:
    if not 0 < alpha <= 1:
        raise ClockSyncError("alpha must be in (0, 1]")
    if measured_theta == 0:
        return state
    return replace(state, logical_offset_theta=state.logical_offset_theta + alpha * measured_theta)
