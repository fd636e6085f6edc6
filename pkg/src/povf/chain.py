"""Blocks: canonical encoding, hashing, construction and validation.

Every variable-length field is written as a 4-byte big-endian length followed
by its bytes; integers inside params are unsigned big-endian with no padding,
header integers are 8-byte signed.  The block hash is SHA-256 over the header
fields in table order with ``block_hash`` itself left out.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Iterable, Optional, Sequence, Union

from povf.heartbeat import Registry, encode_time
from povf.selection import (
    consensus_probability,
    selection_threshold,
    tolerated_threshold,
)
from povf.vdf import VdfDomainError, VdfParams, vdf_verify
from povf.verdict import ACCEPT, Verdict, reject
from povf.vrf import RANDLEN, VrfKeyPair, VrfOutput, vrf_eval, vrf_verify

ZERO_HASH = bytes(32)
EMPTY_ROOT = hashlib.sha256(b"").digest()
DEFAULT_BLOCK_TX_LIMIT = 500
DEFAULT_CLOCK_TOLERANCE_MS = 1000

BAD_HASH = "bad-hash"
BAD_PARENT = "bad-parent"
BAD_HEIGHT = "bad-height"
BAD_MERKLE = "bad-merkle"
STALE_EPOCH = "stale-epoch"
BAD_VDF = "bad-vdf"
BAD_VRF = "bad-vrf"
NOT_SELECTED = "not-selected"
EXPIRED_IDENTITY = "expired-identity"
TIMESTAMP_BEFORE_PARENT = "timestamp-before-parent"
FUTURE_TIMESTAMP = "future-timestamp"
MALFORMED = "malformed"


class ChainError(ValueError):
    pass


class StaleEpochError(ChainError):
    """Epoch is not beyond the parent's epoch."""


class DecodeError(ChainError):
    pass


# -- primitive encoding ----------------------------------------------------

def _lp(data: bytes) -> bytes:
    return len(data).to_bytes(4, "big") + data


def _uint(v: int) -> bytes:
    if v < 0:
        raise ChainError("negative integer in params")
    return v.to_bytes((v.bit_length() + 7) // 8, "big")


class _Reader:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise DecodeError("truncated input")
        out = self.buf[self.pos:end]
        self.pos = end
        return out

    def field(self) -> bytes:
        return self.take(int.from_bytes(self.take(4), "big"))

    def uint(self) -> int:
        return int.from_bytes(self.field(), "big")

    def done(self) -> None:
        if self.pos != len(self.buf):
            raise DecodeError("trailing bytes")


# -- transactions -----------------------------------------------------------

def transaction_id(payload: bytes, timestamp: int) -> bytes:
    return hashlib.sha256(payload + encode_time(timestamp)).digest()


@dataclass(frozen=True)
class Transaction:
    id: bytes
    payload: bytes
    timestamp: int

    @classmethod
    def create(cls, payload: bytes, timestamp: int) -> "Transaction":
        return cls(transaction_id(payload, timestamp), payload, timestamp)

    def sort_key(self) -> tuple[int, bytes]:
        return (self.timestamp, self.id)


def merkle_root(transactions: Sequence[Transaction]) -> bytes:
    level = [tx.id for tx in transactions]
    if not level:
        return EMPTY_ROOT
    sha = hashlib.sha256
    while len(level) > 1:
        nxt = [sha(level[i] + level[i + 1]).digest() for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


# -- params -------------------------------------------------------------------

_GENESIS_TAG = b"G"
_REGULAR_TAG = b"R"


@dataclass(frozen=True)
class GenesisParams:
    modulus_N: int
    proof_prime_l: int
    time_T: int
    heartbeat_t: int
    t_max: int
    x0: int
    omega: int

    def __post_init__(self):
        self.vdf_params  # runs the VdfParams checks
        if self.omega < 1:
            raise ChainError("omega must be >= 1")
        if self.t_max < 0:
            raise ChainError("t_max must be >= 0")
        if not 1 < self.x0 < self.modulus_N:
            raise ChainError("x0 must lie in (1, N)")

    @cached_property
    def vdf_params(self) -> VdfParams:
        return VdfParams(self.modulus_N, self.proof_prime_l, self.time_T, self.heartbeat_t)

    def encode(self) -> bytes:
        return _GENESIS_TAG + b"".join(_lp(_uint(v)) for v in (
            self.modulus_N, self.proof_prime_l, self.time_T, self.heartbeat_t,
            self.t_max, self.x0, self.omega))


@dataclass(frozen=True)
class RegularParams:
    epoch_x: int
    epoch_pi: int
    epoch_index: int
    vrf_r: int
    vrf_pi: bytes

    def encode(self) -> bytes:
        return (_REGULAR_TAG + _lp(_uint(self.epoch_x)) + _lp(_uint(self.epoch_pi))
                + _lp(_uint(self.epoch_index)) + _lp(_uint(self.vrf_r)) + _lp(self.vrf_pi))


def decode_params(data: bytes) -> Union[GenesisParams, RegularParams]:
    if not data:
        raise DecodeError("empty params")
    r = _Reader(data[1:])
    if data[:1] == _GENESIS_TAG:
        vals = [r.uint() for _ in range(7)]
        r.done()
        try:
            return GenesisParams(*vals)
        except ValueError as exc:
            raise DecodeError(str(exc)) from None
    if data[:1] == _REGULAR_TAG:
        x, pi, idx, vr = r.uint(), r.uint(), r.uint(), r.uint()
        proof = r.field()
        r.done()
        return RegularParams(x, pi, idx, vr, proof)
    raise DecodeError("unknown params tag")


# -- blocks -------------------------------------------------------------------

@dataclass(frozen=True)
class BlockHeader:
    timestamp: int
    prev_block_hash: bytes
    block_hash: bytes
    merkle_root: bytes
    height: int
    public_key: bytes
    params: bytes

    def hash_input(self) -> bytes:
        return (encode_time(self.timestamp) + _lp(self.prev_block_hash) + _lp(self.merkle_root)
                + encode_time(self.height) + _lp(self.public_key) + _lp(self.params))

    def compute_hash(self) -> bytes:
        return hashlib.sha256(self.hash_input()).digest()


@dataclass(frozen=True, eq=False)
class Block:
    header: BlockHeader
    transactions: tuple[Transaction, ...] = field(default=())

    def __eq__(self, other):
        return isinstance(other, Block) and self.encode() == other.encode()

    def __hash__(self):
        return hash(self.header.block_hash)

    @property
    def hash(self) -> bytes:
        return self.header.block_hash

    @property
    def height(self) -> int:
        return self.header.height

    @property
    def timestamp(self) -> int:
        return self.header.timestamp

    @property
    def parent_hash(self) -> bytes:
        return self.header.prev_block_hash

    @property
    def tx_count(self) -> int:
        return len(self.transactions)

    @cached_property
    def decoded_params(self) -> Union[GenesisParams, RegularParams]:
        return decode_params(self.header.params)

    @property
    def epoch_index(self) -> int:
        p = self.decoded_params
        return 0 if isinstance(p, GenesisParams) else p.epoch_index

    def encode(self) -> bytes:
        h = self.header
        out = [h.hash_input(), _lp(h.block_hash), len(self.transactions).to_bytes(4, "big")]
        for tx in self.transactions:
            out.append(_lp(tx.id) + _lp(tx.payload) + encode_time(tx.timestamp))
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> "Block":
        r = _Reader(data)
        ts = int.from_bytes(r.take(8), "big", signed=True)
        prev = r.field()
        root = r.field()
        height = int.from_bytes(r.take(8), "big", signed=True)
        pk = r.field()
        params = r.field()
        bh = r.field()
        txs = []
        for _ in range(int.from_bytes(r.take(4), "big")):
            tid = r.field()
            payload = r.field()
            txs.append(Transaction(tid, payload, int.from_bytes(r.take(8), "big", signed=True)))
        r.done()
        return cls(BlockHeader(ts, prev, bh, root, height, pk, params), tuple(txs))


def _seal(timestamp: int, prev: bytes, txs: tuple[Transaction, ...], height: int,
          public_key: bytes, params: bytes) -> Block:
    root = merkle_root(txs)
    draft = BlockHeader(timestamp, prev, b"", root, height, public_key, params)
    header = BlockHeader(timestamp, prev, draft.compute_hash(), root, height, public_key, params)
    return Block(header, txs)


def build_genesis(gp: GenesisParams, timestamp: int) -> Block:
    if not isinstance(gp, GenesisParams):
        raise ChainError("genesis requires GenesisParams")
    return _seal(timestamp, ZERO_HASH, (), 0, b"", gp.encode())


def epoch_message(x: int) -> bytes:
    """VRF input for an epoch: the VDF output as lowercase hex."""
    return format(x, "x").encode()


@dataclass(frozen=True)
class Epoch:
    index: int
    x_prev: int
    x: int
    pi: int


def select_transactions(txs: Iterable[Transaction], limit: int) -> tuple[Transaction, ...]:
    return tuple(sorted(txs, key=Transaction.sort_key)[:limit])


def propose_block(parent: Block, txs: Iterable[Transaction], keypair: VrfKeyPair,
                  epoch: Epoch, now: int, *, genesis: GenesisParams, active_n: int,
                  randlen: int = RANDLEN,
                  block_tx_limit: int = DEFAULT_BLOCK_TX_LIMIT) -> Optional[Block]:
    """Build a block if ``keypair`` is selected for ``epoch``, else ``None``.

    ``active_n`` is the proposer's own registry count at epoch start.
    """
    if epoch.index <= parent.epoch_index:
        raise StaleEpochError(
            f"epoch {epoch.index} does not follow parent epoch {parent.epoch_index}")
    out = vrf_eval(keypair.secret_key, epoch_message(epoch.x), randlen)
    threshold = selection_threshold(consensus_probability(active_n, genesis.omega), randlen)
    if out.value_r > threshold:
        return None
    params = RegularParams(epoch.x, epoch.pi, epoch.index, out.value_r, out.proof_pi)
    return _seal(now, parent.hash, select_transactions(txs, block_tx_limit),
                 parent.height + 1, keypair.public_key, params.encode())


EpochOracle = Union[tuple[int, int], Callable[[int], Optional[int]]]


@lru_cache(maxsize=1 << 16)
def _vdf_ok(params: VdfParams, x_prev: int, y: int, pi: int) -> bool:
    return vdf_verify(params, x_prev, y, pi)


def _intrinsic(block: Block, cache: Optional[dict], randlen: int) -> tuple[bool, bool, bool]:
    """Checks that depend only on the block: hash, merkle root, VRF proof."""
    h = block.header
    computed = h.compute_hash()
    if cache is not None:
        hit = cache.get(computed)
        if hit is not None and hit[0] is block:
            return hit[1]
    ok_hash = computed == h.block_hash
    # ids are recomputed too: the root only commits to ids, not to bodies
    ok_merkle = (merkle_root(block.transactions) == h.merkle_root
                 and all(tx.id == transaction_id(tx.payload, tx.timestamp)
                         for tx in block.transactions))
    p = block.decoded_params
    ok_vrf = isinstance(p, RegularParams) and vrf_verify(
        h.public_key, epoch_message(p.epoch_x),
        VrfOutput(p.vrf_r, p.vrf_pi, randlen))
    result = (ok_hash, ok_merkle, ok_vrf)
    if cache is not None:
        cache[computed] = (block, result)
    return result


def validate_block(block: Block, parent: Block, registry: Registry, genesis: GenesisParams,
                   epoch_oracle: EpochOracle, now: int, *,
                   randlen: int = RANDLEN,
                   clock_tolerance: int = DEFAULT_CLOCK_TOLERANCE_MS,
                   cache: Optional[dict] = None) -> Verdict:
    """Run every validity rule in order and report the first failure.

    ``epoch_oracle`` is either the expected ``(index, x_prev)`` pair or a
    callable mapping an epoch index to its input ``x_prev`` (``None`` when
    the validator does not know that epoch).  ``cache`` memoises the
    block-intrinsic checks across validators.
    """
    try:
        return _validate(block, parent, registry, genesis, epoch_oracle, now,
                         randlen, clock_tolerance, cache)
    except (DecodeError, VdfDomainError, ValueError, TypeError, AttributeError,
            OverflowError, IndexError):
        return reject(MALFORMED)


def _validate(block, parent, registry, genesis, epoch_oracle, now, randlen, clock_tolerance,
              cache):
    h = block.header
    params = block.decoded_params
    if not isinstance(params, RegularParams):
        return reject(MALFORMED)
    ok_hash, ok_merkle, ok_vrf = _intrinsic(block, cache, randlen)
    if not ok_hash:
        return reject(BAD_HASH)
    if h.prev_block_hash != parent.hash:
        return reject(BAD_PARENT)
    if h.height != parent.height + 1:
        return reject(BAD_HEIGHT)
    if not ok_merkle:
        return reject(BAD_MERKLE)

    if params.epoch_index <= parent.epoch_index:
        return reject(STALE_EPOCH)
    if callable(epoch_oracle):
        x_prev = epoch_oracle(params.epoch_index)
        if x_prev is None:
            return reject(STALE_EPOCH)
    else:
        index, x_prev = epoch_oracle
        if params.epoch_index != index:
            return reject(STALE_EPOCH)
    if not _vdf_ok(genesis.vdf_params, x_prev, params.epoch_x, params.epoch_pi):
        return reject(BAD_VDF)

    if not ok_vrf:
        return reject(BAD_VRF)
    n_local = registry.active_count(now)
    if params.vrf_r > tolerated_threshold(n_local, genesis.omega, randlen):
        return reject(NOT_SELECTED)
    if not registry.is_active(h.public_key, now):
        return reject(EXPIRED_IDENTITY)
    if h.timestamp < parent.timestamp:
        return reject(TIMESTAMP_BEFORE_PARENT)
    if h.timestamp > now + clock_tolerance:
        return reject(FUTURE_TIMESTAMP)
    return ACCEPT


# -- trace form -----------------------------------------------------------------

def block_to_json(block: Block, include_txs: bool = False) -> dict:
    h = block.header
    p = block.decoded_params
    out = {
        "block_hash": h.block_hash.hex(),
        "prev_block_hash": h.prev_block_hash.hex(),
        "height": h.height,
        "timestamp": h.timestamp,
        "merkle_root": h.merkle_root.hex(),
        "public_key": h.public_key.hex(),
        "tx_count": block.tx_count,
    }
    if isinstance(p, RegularParams):
        out["params"] = {"epoch_x": format(p.epoch_x, "x"), "epoch_pi": format(p.epoch_pi, "x"),
                         "epoch_index": p.epoch_index, "vrf_r": format(p.vrf_r, "x"),
                         "vrf_pi": p.vrf_pi.hex()}
    else:
        out["params"] = {k: format(getattr(p, k), "x") for k in (
            "modulus_N", "proof_prime_l", "time_T", "heartbeat_t", "t_max", "x0", "omega")}
    if include_txs:
        out["transactions"] = [{"id": t.id.hex(), "payload": t.payload.hex(),
                                "timestamp": t.timestamp} for t in block.transactions]
    return out
