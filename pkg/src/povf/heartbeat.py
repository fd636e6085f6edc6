"""Identity registry driven by registrations and VDF-chained heartbeats.

An identity registers ``<pk, x', st>`` with ``x' = SHA-256(pk || st)`` and
then keeps itself alive by broadcasting successive heartbeat VDF outputs: the
first heartbeat is computed from ``x'`` mapped into the group, every later one
from the previous heartbeat output.  An identity that goes more than
``t_max`` milliseconds without an accepted heartbeat is expired and its
blocks are no longer valid.

Times are logical-clock milliseconds (integers).
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass
from typing import Callable, Optional

from povf.vdf import VdfParams, seed_to_group, vdf_verify
from povf.verdict import ACCEPT, Verdict, reject

DEFAULT_REGISTRATION_WINDOW_MS = 2000

HASH_MISMATCH = "hash-mismatch"
STALE_TIMESTAMP = "stale-timestamp"
DUPLICATE_SEED = "duplicate-seed"
ALREADY_REGISTERED = "already-registered"
UNKNOWN_IDENTITY = "unknown-identity"
EXPIRED_IDENTITY = "expired-identity"
BAD_PROOF = "bad-proof"

# (params, x_prev, y, pi, rounds) -> bool
VerifyFn = Callable[[VdfParams, int, int, int, int], bool]


def encode_time(ms: int) -> bytes:
    return int(ms).to_bytes(8, "big", signed=True)


def registration_seed(public_key: bytes, st: int) -> int:
    """``x' = SHA-256(pk || st)`` as a 256-bit integer."""
    return int.from_bytes(hashlib.sha256(public_key + encode_time(st)).digest(), "big")


@dataclass(slots=True)
class RegistryEntry:
    public_key: bytes
    seed_x_prime: int
    register_time_st: int
    last_update: int
    latest_x: int
    chain_length: int = 0


class Registry:
    """Per-node view of the global active-identity list.

    ``active_count`` is called for every block a node builds or validates,
    so it is kept O(log n) amortised: a min-heap of expiry deadlines is
    drained against the highest ``now`` seen so far.  Queries with an
    earlier ``now`` fall back to a linear scan.
    """

    def __init__(self, params: VdfParams, t_max: int,
                 registration_window: int = DEFAULT_REGISTRATION_WINDOW_MS,
                 verify: Optional[VerifyFn] = None):
        if t_max < 0:
            raise ValueError("t_max must be non-negative")
        self.params = params
        self.t_max = t_max
        self.registration_window = registration_window
        self.entries: dict[bytes, RegistryEntry] = {}
        self.seen_seeds: set[tuple[bytes, int]] = set()
        self._verify = verify or vdf_verify
        self._deadlines: list[tuple[int, bytes]] = []
        self._alive: set[bytes] = set()   # active as of self._high_water
        self._high_water: Optional[int] = None

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, public_key: bytes) -> bool:
        return public_key in self.entries

    # -- bookkeeping ------------------------------------------------------

    def _track(self, entry: RegistryEntry) -> None:
        deadline = entry.last_update + self.t_max
        pk = entry.public_key
        if self._high_water is None or deadline >= self._high_water:
            self._alive.add(pk)
            heapq.heappush(self._deadlines, (deadline, pk))
        else:
            self._alive.discard(pk)

    def _advance(self, now: int) -> None:
        self._high_water = now
        heap = self._deadlines
        while heap and heap[0][0] < now:
            deadline, pk = heapq.heappop(heap)
            entry = self.entries.get(pk)
            if entry is not None and entry.last_update + self.t_max == deadline:
                self._alive.discard(pk)

    # -- queries ----------------------------------------------------------

    def is_active(self, public_key: bytes, now: int) -> bool:
        entry = self.entries.get(public_key)
        return entry is not None and now - entry.last_update <= self.t_max

    def active_count(self, now: int) -> int:
        if self._high_water is None or now >= self._high_water:
            self._advance(now)
            return len(self._alive)
        return sum(1 for e in self.entries.values() if now - e.last_update <= self.t_max)

    def active_keys(self, now: int) -> list[bytes]:
        """Active public keys in registration order."""
        return [pk for pk, e in self.entries.items() if now - e.last_update <= self.t_max]

    def expected_input(self, public_key: bytes) -> Optional[int]:
        """Group element the next heartbeat for ``public_key`` must start from."""
        entry = self.entries.get(public_key)
        if entry is None:
            return None
        return entry.latest_x

    # -- updates ----------------------------------------------------------

    def register(self, public_key: bytes, st: int, x_prime: int, now: int) -> Verdict:
        if not isinstance(public_key, bytes) or type(st) is not int or type(x_prime) is not int:
            return reject(HASH_MISMATCH)
        if x_prime != registration_seed(public_key, st):
            return reject(HASH_MISMATCH)
        if (public_key, st) in self.seen_seeds:
            return reject(DUPLICATE_SEED)
        if abs(st - now) > self.registration_window:
            return reject(STALE_TIMESTAMP)
        if self.is_active(public_key, now):
            return reject(ALREADY_REGISTERED)
        self.seen_seeds.add((public_key, st))
        entry = RegistryEntry(public_key, x_prime, st, max(now, st),
                              seed_to_group(x_prime, self.params.modulus_N))
        self.entries[public_key] = entry
        self._track(entry)
        return ACCEPT

    def process_heartbeat(self, public_key: bytes, x_i: int, pi_i: int, now: int) -> Verdict:
        entry = self.entries.get(public_key)
        if entry is None:
            return reject(UNKNOWN_IDENTITY)
        if now - entry.last_update > self.t_max:
            return reject(EXPIRED_IDENTITY)
        if not self._verify(self.params, entry.latest_x, x_i, pi_i, self.params.heartbeat_t):
            return reject(BAD_PROOF)
        entry.last_update = max(entry.last_update, now)
        entry.latest_x = x_i
        entry.chain_length += 1
        self._track(entry)
        return ACCEPT

    def copy(self) -> "Registry":
        """Independent snapshot (used when a node joins from a peer's view)."""
        other = Registry(self.params, self.t_max, self.registration_window, self._verify)
        other.entries = {pk: RegistryEntry(e.public_key, e.seed_x_prime, e.register_time_st,
                                           e.last_update, e.latest_x, e.chain_length)
                         for pk, e in self.entries.items()}
        other.seen_seeds = set(self.seen_seeds)
        other._deadlines = list(self._deadlines)
        other._alive = set(self._alive)
        other._high_water = self._high_water
        return other


def register(registry: Registry, public_key: bytes, st: int, x_prime: int, now: int) -> Verdict:
    return registry.register(public_key, st, x_prime, now)


def process_heartbeat(registry: Registry, public_key: bytes, x_i: int, pi_i: int,
                      now: int) -> Verdict:
    return registry.process_heartbeat(public_key, x_i, pi_i, now)


def is_active(registry: Registry, public_key: bytes, now: int) -> bool:
    return registry.is_active(public_key, now)


def active_count(registry: Registry, now: int) -> int:
    return registry.active_count(now)
