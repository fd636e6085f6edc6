"""Adversary behaviours for the Sybil, replay and prophecy scenarios.

Each behaviour drives one adversary-controlled view node through
:class:`~povf.sim.runner.Hooks`; it never touches honest state directly.
Counters collected along the way are returned by ``stats()`` and end up in
the run report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from povf.sim.config import AdversaryModel, ConfigError
from povf.vrf import VrfKeyPair

# a heartbeat must land this long before the expiry deadline to be worth computing
_SAFETY_MARGIN_MS = 300


@dataclass
class Identity:
    keypair: VrfKeyPair
    st: int
    x_prime: int
    x: int
    deadline: float = 0.0
    busy: bool = False
    heartbeats: list = field(default_factory=list)

    @property
    def pk(self) -> bytes:
        return self.keypair.public_key


class Behavior:
    kind = "none"

    def __init__(self, model: AdversaryModel, node_id: int, hooks):
        self.model = model
        self.node_id = node_id
        self.hooks = hooks
        self.counters: dict[str, int] = {}
        self.identities: list[Identity] = []

    def bump(self, key: str, inc: int = 1) -> None:
        self.counters[key] = self.counters.get(key, 0) + inc

    def start(self) -> None:
        pass

    def on_epoch(self, e: int) -> None:
        pass

    def _register(self, label: bytes) -> Identity:
        h = self.hooks
        kp = h.keygen(label)
        st, xp, x_in = h.registration(kp.public_key)
        h.send_registration(kp.public_key, st, xp)
        self.bump("registrations")
        ident = Identity(kp, st, xp, x_in, deadline=h.now() + h.cfg.t_max_ms)
        self.identities.append(ident)
        return ident

    def _propose_if_selected(self, e: int, idents, jitter: bool = True) -> None:
        h = self.hooks
        n = h.active_count()
        for ident in idents:
            if h.is_selected(ident.keypair, e, n):
                h.record_selected(e)
                self.bump("blocks_proposed")
                delay = h.jitter() if jitter else 0
                h.schedule(delay, h.propose, ident.keypair, e, n)

    def stats(self) -> dict:
        return {"kind": self.kind, "identities": [i.pk.hex() for i in self.identities],
                "counters": dict(sorted(self.counters.items()))}


class SybilBehavior(Behavior):
    """``k`` identities, ``c`` compute units.

    Each unit evaluates one heartbeat at a time and takes ``heartbeat_ms``.
    Free units pick the identity with the earliest expiry deadline that can
    still be refreshed in time; identities that cannot be saved are given up.
    Active identities propose like honest nodes.
    """

    kind = "sybil"

    def start(self) -> None:
        for i in range(self.model.identities):
            self._register(b"sybil|" + i.to_bytes(4, "big"))
        self._idle = list(range(self.model.compute_units))
        self._dispatch()

    def _dispatch(self) -> None:
        h = self.hooks
        need = h.cfg.heartbeat_ms + _SAFETY_MARGIN_MS
        while self._idle:
            now = h.now()
            feasible = [i for i in self.identities if not i.busy and now + need <= i.deadline]
            if not feasible:
                return
            ident = min(feasible, key=lambda i: (i.deadline, i.pk))
            unit = self._idle.pop(0)
            ident.busy = True
            self.bump("heartbeats_started")
            h.schedule(h.cfg.heartbeat_ms, self._done, unit, ident)

    def _done(self, unit: int, ident: Identity) -> None:
        h = self.hooks
        y, pi = h.heartbeat_eval(ident.x)
        ident.x = y
        ident.busy = False
        ident.deadline = h.now() + h.cfg.t_max_ms
        h.send_heartbeat(ident.pk, y, pi)
        self.bump("heartbeats_sent")
        self._idle.append(unit)
        self._idle.sort()
        self._dispatch()

    def on_epoch(self, e: int) -> None:
        h = self.hooks
        self._propose_if_selected(e, [i for i in self.identities if h.is_active(i.pk)])


class ReplayBehavior(Behavior):
    """Warm up silently, stop heartbeating, then replay old material.

    After its identities have expired the adversary, once per epoch,
    re-broadcasts each original registration ``(pk, st, x')``, replays a
    stale heartbeat, sends a registration pairing a fresh ``st`` with the old
    ``x'``, and proposes blocks whenever its VRF output would be selected.
    """

    kind = "replay"

    def start(self) -> None:
        h = self.hooks
        for i in range(self.model.identities):
            ident = self._register(b"replay|" + i.to_bytes(4, "big"))
            h.schedule(h.cfg.heartbeat_ms, self._heartbeat, ident)
        self._stop_at = self.model.warmup_epochs * h.cfg.epoch_ms
        self._attack_from = self._stop_at + h.cfg.t_max_ms + h.cfg.clock_tolerance_ms

    def _heartbeat(self, ident: Identity) -> None:
        h = self.hooks
        if h.now() > self._stop_at:
            return
        y, pi = h.heartbeat_eval(ident.x)
        ident.heartbeats.append((y, pi))
        ident.x = y
        h.send_heartbeat(ident.pk, y, pi)
        self.bump("warmup_heartbeats")
        h.schedule(h.cfg.heartbeat_ms, self._heartbeat, ident)

    def on_epoch(self, e: int) -> None:
        h = self.hooks
        if h.now() < self._attack_from:
            return
        for ident in self.identities:
            h.send_registration(ident.pk, ident.st, ident.x_prime, "reg-replay")
            self.bump("replayed_registrations")
            if ident.heartbeats:
                y, pi = ident.heartbeats[h.rng.randrange(len(ident.heartbeats))]
                h.send_heartbeat(ident.pk, y, pi, "hb-replay")
                self.bump("replayed_heartbeats")
            h.send_registration(ident.pk, h.logical(), ident.x_prime, "reg-forged")
            self.bump("forged_registrations")
        self._propose_if_selected(e, self.identities)


class ProphecyBehavior(Behavior):
    """Run the epoch chain ``s`` times faster and pre-select keys.

    Shortly before honest nodes finish epoch ``e`` the adversary already
    knows ``x_e``.  It draws ``keys_per_epoch`` fresh keypairs, keeps those
    whose VRF output on ``x_e`` clears the threshold, registers them inside
    the timestamp window, and proposes the moment ``e`` completes (without
    assembly jitter).  No heartbeats are ever computed.
    """

    kind = "prophecy"

    def start(self) -> None:
        self._serial = 0
        self._pending: dict[int, list[Identity]] = {}
        h = self.hooks
        self._lead_ms = min(h.cfg.registration_window_ms // 2, h.cfg.epoch_ms // 2)
        h.schedule(h.cfg.epoch_ms - self._lead_ms, self._prepare, 1)

    def known_epochs(self) -> int:
        h = self.hooks
        return int(h.now() * self.model.speed_factor // h.cfg.epoch_ms)

    def _prepare(self, e: int) -> None:
        h = self.hooks
        h.schedule(h.cfg.epoch_ms, self._prepare, e + 1)
        if e > self.known_epochs():
            self.bump("epochs_not_ahead")
            return
        n = h.active_count()
        winners = []
        for _ in range(self.model.keys_per_epoch):
            kp = h.keygen(b"prophecy|" + self._serial.to_bytes(8, "big"))
            self._serial += 1
            self.bump("keys_generated")
            # assume our own registrations are counted by the validators
            if h.is_selected(kp, e, n + len(winners) + 1):
                winners.append(kp)
        for kp in winners:
            st, xp, x_in = h.registration(kp.public_key)
            h.send_registration(kp.public_key, st, xp)
            self.bump("registrations")
            self.identities.append(Identity(kp, st, xp, x_in))
        self._pending[e] = self.identities[len(self.identities) - len(winners):]

    def on_epoch(self, e: int) -> None:
        idents = self._pending.pop(e, [])
        h = self.hooks
        n = h.active_count()
        for ident in idents:
            h.record_selected(e)
            self.bump("blocks_proposed")
            h.propose(ident.keypair, e, n)


_KINDS = {"sybil": SybilBehavior, "replay": ReplayBehavior, "prophecy": ProphecyBehavior}


def apply_adversary(scenario: AdversaryModel, node_id: int, hooks) -> Behavior:
    """Behaviour object that overrides the adversary node's honest logic."""
    cls = _KINDS.get(scenario.kind)
    if cls is None:
        raise ConfigError("adversary.kind", f"unknown scenario {scenario.kind!r}")
    return cls(scenario, node_id, hooks)
