"""Discrete-event simulation of a PoVF network.

Model summary
-------------
* Global time is integer milliseconds.  Each node owns a clock
  (:class:`~povf.clocksync.ClockState`); everything a node stamps or checks
  uses its logical clock, floored to an integer and never allowed to run
  backwards.
* Every node computes the epoch VDF chain itself.  Epoch ``e`` completes on
  a node at ``e * epoch_ms / speed``; the chain values are the real VDF
  outputs (small parameters), computed once and shared, so proofs verify.
* Heartbeats are real VDF evaluations of ``heartbeat_t`` rounds, broadcast
  every ``heartbeat_ms / speed``.
* Gossip is a one-hop full mesh towards the validating ("full") nodes with
  per-message latency drawn from the configured model.  On a lossless
  network that delivers exactly what flooding would.  When ``drop_prob`` is
  positive, every honest full node also relays a message the first time it
  sees it, to ``RELAY_FANOUT`` random peers.  With ``full_nodes``
  set, the remaining honest nodes are light participants: they register,
  heartbeat and propose, but read the registry and chain through a gateway
  full node instead of validating everything themselves.
* A selected node assembles its block after a uniform
  ``[0, assembly_jitter_ms]`` delay, on top of the deepest block of the
  path its delay buffer would confirm, restricted to earlier epochs.
"""

from __future__ import annotations

import bisect
import hashlib
import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Optional

from povf.chain import (
    FUTURE_TIMESTAMP,
    Block,
    Epoch,
    GenesisParams,
    Transaction,
    build_genesis,
    epoch_message,
    propose_block,
    validate_block,
)
from povf.clocksync import ClockState, apply_sync_round, ntp_offset
from povf.delay_buffer import DelayBuffer
from povf.heartbeat import Registry, registration_seed
from povf.selection import consensus_probability, selection_threshold
from povf.sim.config import SimConfig
from povf.sim.events import EventQueue, LatencySampler
from povf.vdf import VdfParams, seed_to_group, vdf_eval, vdf_setup, vdf_verify
from povf.verdict import Verdict
from povf.vrf import VrfKeyPair, vrf_eval, vrf_keygen

ADVERSARY_NODE_ID = -1
_FUTURE_RETRIES = 3
RELAY_FANOUT = 8


class SimulationAbort(RuntimeError):
    """An internal invariant broke; carries the event-trace position."""

    def __init__(self, message: str, time_ms: int, events_processed: int):
        super().__init__(f"{message} (t={time_ms} ms, after {events_processed} events)")
        self.time_ms = time_ms
        self.events_processed = events_processed


@lru_cache(maxsize=1 << 18)
def _cached_verify(params: VdfParams, x_prev: int, y: int, pi: int, rounds: int) -> bool:
    return vdf_verify(params, x_prev, y, pi, rounds)


def _derive(seed: int, label: str) -> int:
    data = seed.to_bytes(16, "big", signed=True) + label.encode()
    return int.from_bytes(hashlib.sha256(data).digest(), "big")


class Node:
    __slots__ = (
        "id", "keypair", "pk", "speed", "clock", "last_read", "live", "full", "adversarial",
        "registry", "buffer", "gateway", "epoch", "next_epoch_at", "next_hb_at", "hb_x",
        "deferred", "waiting", "seen", "oracle", "behavior", "joined_at", "left_at",
        "proposed", "heartbeats_sent", "confirm_log", "offsets", "registered", "relayed",
    )

    def __init__(self, node_id: int, speed: float, clock: ClockState, full: bool):
        self.id = node_id
        self.keypair: Optional[VrfKeyPair] = None
        self.pk = b""
        self.speed = speed
        self.clock = clock
        self.last_read = -(1 << 62)
        self.live = True
        self.full = full
        self.adversarial = False
        self.registry: Optional[Registry] = None
        self.buffer: Optional[DelayBuffer] = None
        self.gateway: Optional[Node] = None
        self.epoch = 0
        self.next_epoch_at = 0.0
        self.next_hb_at = 0.0
        self.hb_x = 0
        self.deferred: dict[int, list[Block]] = {}
        self.waiting: dict[bytes, list[Block]] = {}
        self.seen: set[bytes] = set()
        self.oracle: Optional[Callable[[int], Optional[int]]] = None
        self.behavior = None
        self.joined_at = 0
        self.left_at: Optional[int] = None
        self.proposed = 0
        self.heartbeats_sent = 0
        self.confirm_log: list[tuple[Block, int, int]] = []
        self.offsets: list[list[float]] = []
        self.registered = False
        self.relayed: set[int] = set()

    @property
    def view(self) -> "Node":
        return self if self.full else self.gateway


@dataclass
class SimReport:
    """Everything a run produced, in trace-ready form (see :mod:`povf.sim.report`)."""

    config: SimConfig
    genesis_params: GenesisParams
    genesis: Block
    epochs: list[dict]
    nodes: list[dict]
    block_logs: dict[int, list[dict]]
    clock_samples: list[dict]
    adversary: Optional[dict]
    adversary_active: list[dict]
    counters: dict[str, Any]
    reference_node: int
    events_processed: int
    extra: dict = field(default_factory=dict)


class Simulator:
    def __init__(self, config: SimConfig,
                 progress_sink: Optional[Callable[[float], None]] = None):
        self.cfg = cfg = config
        self.progress_sink = progress_sink
        self.rng = random.Random(_derive(cfg.rng_seed, "main"))
        self.tx_rng = random.Random(_derive(cfg.rng_seed, "transactions"))
        self.q = EventQueue()
        self.latency = LatencySampler(cfg.latency, self.rng)
        seed = cfg.rng_seed.to_bytes(16, "big", signed=True)
        vp = vdf_setup(cfg.modulus_bits, cfg.vdf_T, cfg.heartbeat_t, b"povf-sim|" + seed)
        self.vdf_params = vp
        x0 = seed_to_group(_derive(cfg.rng_seed, "x0"), vp.modulus_N)
        while math.gcd(x0, vp.modulus_N) != 1:
            x0 = seed_to_group(x0 + 1, vp.modulus_N)
        self.gp = GenesisParams(vp.modulus_N, vp.proof_prime_l, cfg.vdf_T, cfg.heartbeat_t,
                                cfg.t_max_ms, x0, cfg.omega)
        self.genesis = build_genesis(self.gp, 0)
        self._chain: list[tuple[int, int]] = [(x0, 0)]
        self.nodes: list[Node] = []
        self.live: list[Node] = []          # every live participant, adversary included
        self.full: list[Node] = []          # live validating nodes
        self.honest_full: list[Node] = []
        self.validation_cache: dict = {}
        self.block_origin: dict[bytes, int] = {}
        self.msg_seq = 0
        self.tx_cursor: dict[bytes, int] = {self.genesis.hash: 0}
        self.txs: list[Transaction] = []
        self.tx_ts: list[int] = []
        self._tx_clock = 0.0
        self._tx_seq = 0
        self.tx_visibility = max(1, int(cfg.latency.median_ms))
        self.epoch_records: dict[int, dict] = {}
        self.clock_samples: list[dict] = []
        self.adversary_active: list[dict] = []
        self.tally: dict[str, int] = {}
        self.hb_rejects: dict[bytes, int] = {}
        self.adversary_keys: set[bytes] = set()
        self.adversary_node: Optional[Node] = None
        self._next_id = 0

    # -- helpers ------------------------------------------------------------

    @property
    def now(self) -> int:
        return self.q.now

    def abort(self, message: str):
        raise SimulationAbort(message, self.q.now, self.q.processed)

    def logical(self, v: Node) -> int:
        t = math.floor(v.clock.logical_time(self.q.now))
        if t < v.last_read:
            t = v.last_read
        v.last_read = t
        return t

    def logical_f(self, v: Node) -> float:
        return v.clock.logical_time(self.q.now)

    def at(self, delay: float, fn, *args) -> None:
        self.q.schedule(self.q.now + int(round(delay)), fn, *args)

    def count(self, key: str, inc: int = 1) -> None:
        self.tally[key] = self.tally.get(key, 0) + inc

    def epoch_value(self, e: int) -> tuple[int, int]:
        """``(x_e, pi_e)`` of the shared epoch chain (``x_0`` has ``pi = 0``)."""
        chain = self._chain
        while len(chain) <= e:
            out = vdf_eval(self.vdf_params, chain[-1][0])
            chain.append((out.output_y, out.proof_pi))
        return chain[e]

    def epoch_record(self, e: int) -> dict:
        rec = self.epoch_records.get(e)
        if rec is None:
            rec = {"epoch": e, "live_nodes": 0, "selected": 0, "selected_adversary": 0,
                   "proposed": 0}
            self.epoch_records[e] = rec
        return rec

    def sample_latency(self) -> int:
        return self.latency.sample()

    def _ensure_txs(self, until: int) -> None:
        rate = self.cfg.tx_rate_per_s / 1000.0
        if rate <= 0:
            return
        while self._tx_clock <= until:
            self._tx_clock += self.tx_rng.expovariate(rate)
            ts = int(self._tx_clock)
            tx = Transaction.create(self._tx_seq.to_bytes(8, "big"), ts)
            self._tx_seq += 1
            self.txs.append(tx)
            self.tx_ts.append(ts)

    def tx_slice(self, parent: Block) -> tuple[list[Transaction], int]:
        start = self.tx_cursor.get(parent.hash, 0)
        cutoff = self.q.now - self.tx_visibility
        self._ensure_txs(cutoff)
        end = bisect.bisect_right(self.tx_ts, cutoff)
        end = max(start, min(end, start + self.cfg.block_tx_limit))
        return self.txs[start:end], end

    # -- node lifecycle -------------------------------------------------------

    def _new_node(self, node_id: int, full: bool) -> Node:
        cfg = self.cfg
        speed = self.rng.uniform(*cfg.node_speed_range)
        clock = ClockState(physical_offset=self.rng.uniform(*cfg.clock_offset_range_ms),
                           drift_rate=self.rng.uniform(*cfg.clock_drift_range))
        v = Node(node_id, speed, clock, full)
        v.joined_at = self.q.now
        self.nodes.append(v)
        self.live.append(v)
        if full:
            self.full.append(v)
            v.oracle = self._make_oracle(v)
        return v

    def _make_oracle(self, v: Node):
        def oracle(index: int) -> Optional[int]:
            if index < 1 or index > v.epoch:
                return None
            return self.epoch_value(index - 1)[0]
        return oracle

    def _fresh_views(self, v: Node, donor: Optional[Node]) -> None:
        if donor is None:
            v.registry = Registry(self.vdf_params, self.cfg.t_max_ms,
                                  self.cfg.registration_window_ms, _cached_verify)
            v.buffer = DelayBuffer(self.genesis, self.cfg.delay_height)
        else:
            v.registry = donor.registry.copy()
            v.buffer = donor.buffer.copy()

    def add_honest(self, donor: Optional[Node] = None, start: bool = True) -> Node:
        cfg = self.cfg
        node_id = self._next_id
        self._next_id += 1
        full = cfg.full_nodes is None or node_id < cfg.full_nodes
        v = self._new_node(node_id, full)
        seed = cfg.rng_seed.to_bytes(16, "big", signed=True) + b"|node|" + node_id.to_bytes(8, "big")
        v.keypair = vrf_keygen(seed, cfg.vrf_bits)
        v.pk = v.keypair.public_key
        if full:
            self.honest_full.append(v)
            self._fresh_views(v, donor)
        else:
            v.gateway = donor or self.rng.choice(self.honest_full)
        if donor is None:
            v.epoch = 0
            v.next_epoch_at = cfg.epoch_ms / v.speed
        else:
            v.epoch = donor.epoch
            v.next_epoch_at = donor.next_epoch_at
        self.q.schedule(int(round(v.next_epoch_at)), self._on_epoch, v, v.epoch + 1)
        if start:
            self.start_node(v)
        return v

    def start_node(self, v: Node) -> None:
        self._start_identity(v)
        self.at(self.rng.uniform(0, self.cfg.sync_interval_ms), self._sync_tick, v)

    def add_adversary_view(self) -> Node:
        v = self._new_node(ADVERSARY_NODE_ID, True)
        v.adversarial = True
        self._fresh_views(v, None)
        v.next_epoch_at = self.cfg.epoch_ms
        self.q.schedule(self.cfg.epoch_ms, self._on_epoch, v, 1)
        self.at(self.rng.uniform(0, self.cfg.sync_interval_ms), self._sync_tick, v)
        self.adversary_node = v
        return v

    def remove(self, v: Node) -> None:
        v.live = False
        v.left_at = self.q.now
        self.live.remove(v)
        if v.full:
            self.full.remove(v)
            if v in self.honest_full:
                self.honest_full.remove(v)

    # -- identities: registration and heartbeats -----------------------------

    def registration_for(self, v: Node, pk: bytes) -> tuple[int, int, int]:
        """Pick ``st`` (logical now, nudged if needed) and return ``(st, x', x_in)``."""
        st = self.logical(v)
        n = self.vdf_params.modulus_N
        while True:
            xp = registration_seed(pk, st)
            x_in = seed_to_group(xp, n)
            if math.gcd(x_in, n) == 1:
                return st, xp, x_in
            st += 1

    def broadcast_registration(self, src: Node, pk: bytes, st: int, xp: int,
                               tag: str = "reg") -> None:
        if src.full:
            src.registry.register(pk, st, xp, self.logical(src))
        self._gossip(src, self._on_registration, pk, st, xp, tag)

    def broadcast_heartbeat(self, src: Node, pk: bytes, x: int, pi: int,
                            tag: str = "hb") -> None:
        if src.full:
            src.registry.process_heartbeat(pk, x, pi, self.logical(src))
        self._gossip(src, self._on_heartbeat, pk, x, pi, tag)

    def _start_identity(self, v: Node) -> None:
        st, xp, x_in = self.registration_for(v, v.pk)
        v.hb_x = x_in
        v.registered = True
        self.broadcast_registration(v, v.pk, st, xp)
        v.next_hb_at = self.q.now + self.cfg.heartbeat_ms / v.speed
        self.q.schedule(int(round(v.next_hb_at)), self._on_heartbeat_done, v)

    def _on_heartbeat_done(self, v: Node) -> None:
        if not v.live:
            return
        out = vdf_eval(self.vdf_params, v.hb_x, self.cfg.heartbeat_t)
        v.hb_x = out.output_y
        v.heartbeats_sent += 1
        self.broadcast_heartbeat(v, v.pk, out.output_y, out.proof_pi)
        v.next_hb_at += self.cfg.heartbeat_ms / v.speed
        self.q.schedule(int(round(v.next_hb_at)), self._on_heartbeat_done, v)

    # -- gossip -----------------------------------------------------------------

    def _gossip(self, src: Node, handler, *args) -> None:
        drop = self.cfg.drop_prob
        rng = self.rng
        now = self.q.now
        origin = src.adversarial
        sample = self.latency.sample
        schedule = self.q.schedule
        if drop:
            self.msg_seq += 1
            src.relayed.add(self.msg_seq)
            args = (self.msg_seq, handler) + args
            handler = self._relay
        for dst in self.full:
            if dst is src:
                continue
            if drop and rng.random() < drop:
                continue
            schedule(now + sample(), handler, dst, origin, *args)

    def _relay(self, dst: Node, origin_adv: bool, msg: int, handler, *args) -> None:
        """Lossy-network delivery: dedupe by broadcast, forward once, then handle."""
        if not dst.live or msg in dst.relayed:
            return
        dst.relayed.add(msg)
        if not dst.adversarial:
            peers = [p for p in self.full if p is not dst]
            drop = self.cfg.drop_prob
            now = self.q.now
            for p in self.rng.sample(peers, min(RELAY_FANOUT, len(peers))):
                if self.rng.random() >= drop:
                    self.q.schedule(now + self.latency.sample(), self._relay, p, origin_adv,
                                    msg, handler, *args)
        handler(dst, origin_adv, *args)

    def _record(self, dst: Node, origin_adv: bool, tag: str, verdict: Verdict) -> None:
        if dst.adversarial:
            return
        who = "adversary" if origin_adv else "honest"
        self.count(f"{who}.{tag}.{'accepted' if verdict.valid else verdict.reason}")

    def _on_registration(self, dst: Node, origin_adv: bool, pk: bytes, st: int, xp: int,
                         tag: str) -> None:
        if not dst.live:
            return
        verdict = dst.registry.register(pk, st, xp, self.logical(dst))
        self._record(dst, origin_adv, tag, verdict)

    def _on_heartbeat(self, dst: Node, origin_adv: bool, pk: bytes, x: int, pi: int,
                      tag: str) -> None:
        if not dst.live:
            return
        verdict = dst.registry.process_heartbeat(pk, x, pi, self.logical(dst))
        self._record(dst, origin_adv, tag, verdict)
        if not verdict.valid and not dst.adversarial:
            self.hb_rejects[pk] = self.hb_rejects.get(pk, 0) + 1

    # -- blocks -------------------------------------------------------------------

    def broadcast_block(self, src: Node, block: Block) -> None:
        self.block_origin[block.hash] = src.id
        if src.full:
            self._on_block(src, src.adversarial, block, 0)
        self._gossip(src, self._on_block, block, 0)

    def _on_block(self, v: Node, origin_adv: bool, block: Block, tries: int) -> None:
        if not v.live or block.hash in v.seen:
            return
        try:
            epoch = block.epoch_index
        except ValueError:
            self._record(v, origin_adv, "block", Verdict(False, "malformed"))
            v.seen.add(block.hash)
            return
        if epoch > v.epoch:
            v.seen.add(block.hash)
            v.deferred.setdefault(epoch, []).append(block)
            return
        self._consider(v, origin_adv, block, tries)

    def _consider(self, v: Node, origin_adv: bool, block: Block, tries: int) -> None:
        h = block.hash
        parent = v.buffer.get(block.parent_hash)
        if parent is None:
            if block.parent_hash in v.buffer or block.height <= v.buffer.confirmed_tip.height:
                self._record(v, origin_adv, "block", Verdict(False, "below-confirmed"))
                v.seen.add(h)
            else:
                v.seen.add(h)
                v.waiting.setdefault(block.parent_hash, []).append(block)
            return
        cfg = self.cfg
        now_l = self.logical(v)
        verdict = validate_block(block, parent, v.registry, self.gp, v.oracle, now_l,
                                 randlen=cfg.randlen, clock_tolerance=cfg.clock_tolerance_ms,
                                 cache=self.validation_cache)
        if not verdict.valid:
            if verdict.reason == FUTURE_TIMESTAMP and tries < _FUTURE_RETRIES:
                v.seen.discard(h)
                wait = block.timestamp - cfg.clock_tolerance_ms - now_l + 1
                self.at(max(wait, 1), self._on_block, v, origin_adv, block, tries + 1)
                return
            self._record(v, origin_adv, "block", verdict)
            v.seen.add(h)
            return
        self._record(v, origin_adv, "block", verdict)
        v.seen.add(h)
        v.buffer.insert_block(block)
        for child in v.waiting.pop(h, ()):
            self._consider(v, self.block_origin.get(child.hash) == ADVERSARY_NODE_ID, child, 0)
        for b in v.buffer.try_confirm():
            v.confirm_log.append((b, self.q.now, now_l))

    # -- epochs and proposals ---------------------------------------------------------

    def _on_epoch(self, v: Node, e: int) -> None:
        if not v.live:
            return
        v.epoch = e
        v.next_epoch_at += self.cfg.epoch_ms / v.speed
        self.q.schedule(int(round(v.next_epoch_at)), self._on_epoch, v, e + 1)
        if v.full:
            for block in v.deferred.pop(e, ()):
                self._consider(v, self.block_origin.get(block.hash) == ADVERSARY_NODE_ID,
                               block, 0)
        if v.behavior is not None:
            v.behavior.on_epoch(e)
        elif v.registered:
            self._try_select(v, e)

    def selection(self, keypair: VrfKeyPair, e: int, active_n: int) -> bool:
        x_e = self.epoch_value(e)[0]
        out = vrf_eval(keypair.secret_key, epoch_message(x_e), self.cfg.randlen)
        thr = selection_threshold(consensus_probability(active_n, self.cfg.omega),
                                  self.cfg.randlen)
        return out.value_r <= thr

    def _try_select(self, v: Node, e: int) -> None:
        view = v.view
        if view is None or not view.live:
            if not self.honest_full:
                return
            v.gateway = view = self.rng.choice(self.honest_full)
        now_l = self.logical(view)
        if not view.registry.is_active(v.pk, now_l):
            return
        n = view.registry.active_count(now_l)
        if not self.selection(v.keypair, e, n):
            return
        self.epoch_record(e)["selected"] += 1
        self.at(self.rng.randint(0, self.cfg.assembly_jitter_ms), self.assemble, v,
                v.keypair, e, n)

    def assemble(self, v: Node, keypair: VrfKeyPair, e: int, active_n: int,
                 timestamp: Optional[int] = None) -> Optional[Block]:
        """Build and broadcast ``keypair``'s block for epoch ``e`` from ``v``'s view."""
        if not v.live:
            return None
        view = v.view
        parent = view.buffer.preferred_tip(lambda b: b.epoch_index < e)
        txs, end = self.tx_slice(parent)
        x_prev = self.epoch_value(e - 1)[0]
        x_e, pi_e = self.epoch_value(e)
        ts = self.logical(v) if timestamp is None else timestamp
        block = propose_block(parent, txs, keypair, Epoch(e, x_prev, x_e, pi_e), ts,
                              genesis=self.gp, active_n=active_n, randlen=self.cfg.randlen,
                              block_tx_limit=self.cfg.block_tx_limit)
        if block is None:
            if v.adversarial:
                self.count("adversary.block.not-built")
                return None
            self.abort(f"node {v.id} lost its selection for epoch {e} between checks")
        self.tx_cursor[block.hash] = end
        v.proposed += 1
        self.epoch_record(e)["proposed"] += 1
        self.broadcast_block(v, block)
        return block

    # -- clock synchronisation ------------------------------------------------------

    def _sync_tick(self, v: Node) -> None:
        if not v.live:
            return
        self.at(self.cfg.sync_interval_ms, self._sync_tick, v)
        if len(self.live) < 2:
            return
        peer = v
        while peer is v:
            peer = self.rng.choice(self.live)
        self.at(self.sample_latency(), self._sync_server, v, peer, self.logical_f(v))

    def _sync_server(self, v: Node, peer: Node, t1: float) -> None:
        if not peer.live:
            return
        t2 = self.logical_f(peer)
        self.at(self.sample_latency(), self._sync_client, v, t1, t2, t2)

    def _sync_client(self, v: Node, t1: float, t2: float, t3: float) -> None:
        if not v.live:
            return
        theta = ntp_offset(t1, t2, t3, self.logical_f(v))
        v.clock = apply_sync_round(v.clock, theta, self.cfg.sync_alpha)

    # -- churn ------------------------------------------------------------------------

    def _schedule_churn(self, kind: str) -> None:
        rate = getattr(self.cfg.churn, f"{kind}_rate") / self.cfg.epoch_ms
        if rate > 0:
            self.at(self.rng.expovariate(rate), self._on_churn, kind)

    def _on_churn(self, kind: str) -> None:
        self._schedule_churn(kind)
        if kind == "join":
            donor = self.rng.choice(self.honest_full) if self.honest_full else None
            self.add_honest(donor)
        else:
            candidates = [v for v in self.live
                          if not v.adversarial and v.id != 0
                          and (self.cfg.full_nodes is None or not v.full)]
            if candidates:
                self.remove(self.rng.choice(candidates))

    # -- sampling -------------------------------------------------------------------

    def _on_clock_sample(self) -> None:
        self.at(self.cfg.clock_sample_ms, self._on_clock_sample)
        t = self.q.now
        offsets = [v.clock.logical_time(t) - t for v in self.live if not v.adversarial]
        if offsets:
            self.clock_samples.append({"t": t, "spread_ms": round(max(offsets) - min(offsets), 6),
                                       "nodes": len(offsets)})
        if self.adversary_keys:
            best = 0
            for v in self.honest_full:
                now_l = self.logical(v)
                k = sum(1 for pk in self.adversary_keys if v.registry.is_active(pk, now_l))
                best = max(best, k)
            self.adversary_active.append({"t": t, "max_active": best})

    def _on_offset_sample(self) -> None:
        self.at(self.cfg.node_offset_sample_ms, self._on_offset_sample)
        t = self.q.now
        for v in self.live:
            v.offsets.append([t, round(v.clock.logical_time(t) - t, 6)])

    def _on_epoch_tick(self, e: int) -> None:
        self.at(self.cfg.epoch_ms, self._on_epoch_tick, e + 1)
        rec = self.epoch_record(e)
        rec["live_nodes"] = sum(1 for v in self.live if not v.adversarial)
        counts = [v.registry.active_count(self.logical(v)) for v in self.honest_full]
        rec["active_min"] = min(counts, default=0)
        rec["active_max"] = max(counts, default=0)
        if self.progress_sink is not None:
            self.progress_sink(min(1.0, e / self.cfg.duration_epochs))

    # -- driver ------------------------------------------------------------------------

    def run(self) -> SimReport:
        cfg = self.cfg
        initial = [self.add_honest(None, start=False) for _ in range(cfg.node_count)]
        view = None
        if cfg.adversary is not None:
            from povf.sim.adversary import apply_adversary
            view = self.add_adversary_view()
            view.behavior = apply_adversary(cfg.adversary, ADVERSARY_NODE_ID, Hooks(self, view))
        # every validating node exists before anyone broadcasts
        for v in initial:
            self.start_node(v)
        if view is not None:
            view.behavior.start()
        self._schedule_churn("join")
        self._schedule_churn("leave")
        self.q.schedule(0, self._on_clock_sample)
        self.q.schedule(0, self._on_offset_sample)
        self.q.schedule(cfg.epoch_ms, self._on_epoch_tick, 1)
        self.q.run_until(cfg.duration_ms)
        return self._report()

    def _report(self) -> SimReport:
        from povf.chain import block_to_json

        cfg = self.cfg
        epochs = []
        for e in range(1, cfg.duration_epochs + 1):
            rec = dict(self.epoch_record(e))
            rec["x"] = format(self.epoch_value(e)[0], "x")
            epochs.append(rec)
        adv_ids = self.adversary_keys
        nodes = []
        for v in self.nodes:
            if v.adversarial:
                continue
            nodes.append({
                "node": v.id, "public_key": v.pk.hex(), "full": v.full, "speed": v.speed,
                "joined_at": v.joined_at, "left_at": v.left_at, "proposed": v.proposed,
                "heartbeats_sent": v.heartbeats_sent,
                "heartbeat_rejections": self.hb_rejects.get(v.pk, 0),
                "confirmed_logged": len(v.confirm_log),
                "initial_clock_offset_ms": v.clock.physical_offset,
                "clock_offsets": v.offsets,
            })
        logs: dict[int, list[dict]] = {}
        for v in self.nodes:
            if not v.full or v.adversarial:
                continue
            rows = [dict(block_to_json(self.genesis), confirmed_at=0, confirmed_at_logical=0,
                         proposer_node=None, adversarial=False)]
            for b, t_glob, t_log in v.confirm_log:
                origin = self.block_origin.get(b.hash)
                rows.append(dict(block_to_json(b), confirmed_at=t_glob,
                                 confirmed_at_logical=t_log, proposer_node=origin,
                                 adversarial=b.header.public_key in adv_ids))
            logs[v.id] = rows
        adv = None
        if self.adversary_node is not None:
            adv = self.adversary_node.behavior.stats()
        counters = dict(sorted(self.tally.items()))
        counters["events_processed"] = self.q.processed
        counters["transactions_generated"] = len(self.txs)
        return SimReport(cfg, self.gp, self.genesis, epochs, nodes, logs, self.clock_samples,
                         adv, self.adversary_active, counters, 0, self.q.processed)


class Hooks:
    """What an adversary behaviour may do: act through its own view node."""

    def __init__(self, sim: Simulator, node: Node):
        self._sim = sim
        self.node = node
        self.cfg = sim.cfg
        self.rng = random.Random(_derive(sim.cfg.rng_seed, "adversary"))
        self.vdf_params = sim.vdf_params
        self.genesis_params = sim.gp

    def now(self) -> int:
        return self._sim.now

    def logical(self) -> int:
        return self._sim.logical(self.node)

    def schedule(self, delay: float, fn, *args) -> None:
        self._sim.at(delay, fn, *args)

    def keygen(self, label: bytes) -> VrfKeyPair:
        seed = self.cfg.rng_seed.to_bytes(16, "big", signed=True) + b"|adv|" + label
        kp = vrf_keygen(seed, self.cfg.vrf_bits)
        self._sim.adversary_keys.add(kp.public_key)
        return kp

    def registration(self, pk: bytes) -> tuple[int, int, int]:
        return self._sim.registration_for(self.node, pk)

    def send_registration(self, pk: bytes, st: int, xp: int, tag: str = "reg") -> None:
        self._sim.broadcast_registration(self.node, pk, st, xp, tag)

    def send_heartbeat(self, pk: bytes, x: int, pi: int, tag: str = "hb") -> None:
        self._sim.broadcast_heartbeat(self.node, pk, x, pi, tag)

    def heartbeat_eval(self, x: int) -> tuple[int, int]:
        out = vdf_eval(self.vdf_params, x, self.cfg.heartbeat_t)
        return out.output_y, out.proof_pi

    def epoch_value(self, e: int) -> tuple[int, int]:
        return self._sim.epoch_value(e)

    def active_count(self) -> int:
        return self.node.registry.active_count(self.logical())

    def is_active(self, pk: bytes) -> bool:
        return self.node.registry.is_active(pk, self.logical())

    def is_selected(self, keypair: VrfKeyPair, e: int, active_n: int) -> bool:
        return self._sim.selection(keypair, e, active_n)

    def record_selected(self, e: int) -> None:
        self._sim.epoch_record(e)["selected_adversary"] += 1

    def propose(self, keypair: VrfKeyPair, e: int, active_n: int,
                timestamp: Optional[int] = None) -> Optional[Block]:
        return self._sim.assemble(self.node, keypair, e, active_n, timestamp)

    def jitter(self) -> int:
        return self.rng.randint(0, self.cfg.assembly_jitter_ms)


def run(config: SimConfig, progress_sink: Optional[Callable[[float], None]] = None) -> SimReport:
    """Run one simulation; identical configs give identical reports."""
    return Simulator(config, progress_sink).run()
