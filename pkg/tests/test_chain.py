import hashlib
import random
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from oracles import merkle_oracle
from povf import chain
from povf.chain import (
    Block,
    BlockHeader,
    ChainError,
    DecodeError,
    Epoch,
    GenesisParams,
    RegularParams,
    StaleEpochError,
    Transaction,
    block_to_json,
    build_genesis,
    decode_params,
    merkle_root,
    propose_block,
    validate_block,
)
from povf.heartbeat import Registry, registration_seed
from povf.vdf import vdf_eval, vdf_setup
from povf.vrf import vrf_keygen

VP = vdf_setup(64, 60, 8, b"chain-tests")
X0 = 123456789
GP = GenesisParams(VP.modulus_N, VP.proof_prime_l, VP.time_T, VP.heartbeat_t, 4800, X0, 5)
GENESIS = build_genesis(GP, 0)
E1 = vdf_eval(VP, X0)
EPOCH1 = Epoch(1, X0, E1.output_y, E1.proof_pi)
KP = vrf_keygen(b"proposer", 512)
OTHER = vrf_keygen(b"other", 512)


def registry(*keys, now=0):
    r = Registry(VP, GP.t_max)
    for kp in keys:
        assert r.register(kp.public_key, now, registration_seed(kp.public_key, now), now)
    return r


def txs(n, start=0):
    return [Transaction.create(b"tx%d" % i, start + i) for i in range(n)]


def honest_block(n_tx=3, ts=1000):
    b = propose_block(GENESIS, txs(n_tx), KP, EPOCH1, ts, genesis=GP, active_n=1)
    assert b is not None
    return b


def reseal(block, **changes):
    h = block.header
    txs_ = changes.pop("transactions", block.transactions)
    draft = replace(h, block_hash=b"", **changes)
    return Block(replace(draft, block_hash=draft.compute_hash()), tuple(txs_))


def check(block, parent=GENESIS, reg=None, oracle=(1, X0), now=1000, **kw):
    return validate_block(block, parent, reg or registry(KP), GP, oracle, now, **kw)


# -- merkle -------------------------------------------------------------------

def test_merkle_empty():
    assert merkle_root([]).hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def test_merkle_single_and_pair():
    a = Transaction.create(b"a", 1)
    b = Transaction.create(b"b", 2)
    assert merkle_root([a]) == a.id
    assert merkle_root([a, b]).hex() == \
        "d15a9f1b1272a75007974731c3b42c16ee26ff6b3b8d3662c2705788dfe238cc"


@given(st.lists(st.binary(min_size=1, max_size=8), max_size=40))
def test_merkle_matches_oracle(payloads):
    tx = [Transaction.create(p, i) for i, p in enumerate(payloads)]
    assert merkle_root(tx) == merkle_oracle([t.id for t in tx])


def test_transaction_id():
    t = Transaction.create(b"pay", 7)
    assert t.id == hashlib.sha256(b"pay" + (7).to_bytes(8, "big", signed=True)).digest()


# -- genesis ------------------------------------------------------------------

def test_genesis_shape():
    assert GENESIS.height == 0 and GENESIS.parent_hash == bytes(32)
    assert GENESIS.transactions == () and GENESIS.decoded_params == GP
    assert build_genesis(GP, 0).hash == GENESIS.hash
    assert build_genesis(GP, 1).hash != GENESIS.hash


def test_genesis_rejects_bad_params():
    with pytest.raises(ChainError):
        replace(GP, omega=0)
    with pytest.raises(ChainError):
        replace(GP, x0=1)
    with pytest.raises(ChainError):
        build_genesis(RegularParams(1, 1, 1, 1, b""), 0)


def test_params_roundtrip():
    assert decode_params(GP.encode()) == GP
    rp = RegularParams(5, 6, 7, 8, b"\x01\x02")
    assert decode_params(rp.encode()) == rp
    for bad in (b"", b"X", GP.encode()[:-1], rp.encode() + b"\x00"):
        with pytest.raises(DecodeError):
            decode_params(bad)


# -- proposal -----------------------------------------------------------------

def test_propose_hundred_txs():
    pool = txs(100)
    b = propose_block(GENESIS, pool, KP, EPOCH1, 1000, genesis=GP, active_n=1)
    assert b.height == 1 and b.parent_hash == GENESIS.hash
    assert b.tx_count == 100 and b.header.merkle_root == merkle_root(b.transactions)
    assert b.header.block_hash == b.header.compute_hash()
    p = b.decoded_params
    assert (p.epoch_x, p.epoch_pi, p.epoch_index) == (E1.output_y, E1.proof_pi, 1)


def test_propose_not_selected():
    # with omega=5 among 10**6 identities almost every key misses
    misses = sum(propose_block(GENESIS, [], vrf_keygen(bytes([i]), 512), EPOCH1, 0, genesis=GP,
                               active_n=10**6) is None for i in range(20))
    assert misses == 20


def test_propose_tx_limit_earliest_first():
    pool = txs(50)
    random.Random(1).shuffle(pool)
    b = propose_block(GENESIS, pool, KP, EPOCH1, 1000, genesis=GP, active_n=1, block_tx_limit=10)
    assert [t.timestamp for t in b.transactions] == list(range(10))


def test_propose_stale_epoch():
    b = honest_block()
    with pytest.raises(StaleEpochError):
        propose_block(b, [], KP, EPOCH1, 2000, genesis=GP, active_n=1)


def test_encode_roundtrip():
    b = honest_block(5)
    again = Block.decode(b.encode())
    assert again == b and again.hash == b.hash and again.epoch_index == 1
    with pytest.raises(DecodeError):
        Block.decode(b.encode()[:-3])


def test_json_form():
    j = block_to_json(honest_block(2), include_txs=True)
    assert j["height"] == 1 and j["tx_count"] == 2 and j["params"]["epoch_index"] == 1
    assert all(isinstance(j[k], str) for k in ("block_hash", "public_key", "merkle_root"))


# -- validation ---------------------------------------------------------------

def test_honest_block_valid():
    assert check(honest_block())


def test_expired_proposer():
    reg = registry(KP, now=0)
    v = check(honest_block(ts=GP.t_max + 10), reg=reg, now=GP.t_max + 10)
    assert v.reason == chain.EXPIRED_IDENTITY


def test_flipped_vrf_proof_bit():
    b = honest_block()
    p = b.decoded_params
    proof = bytearray(p.vrf_pi)
    proof[10] ^= 0x04
    bad = reseal(b, params=replace(p, vrf_pi=bytes(proof)).encode())
    assert check(bad).reason == chain.BAD_VRF


def test_each_reason():
    b = honest_block()
    p = b.decoded_params
    cases = {
        chain.BAD_HASH: Block(replace(b.header, block_hash=bytes(32)), b.transactions),
        chain.BAD_PARENT: reseal(b, prev_block_hash=bytes(32)),
        chain.BAD_HEIGHT: reseal(b, height=2),
        chain.BAD_MERKLE: reseal(b, transactions=b.transactions[:-1]),
        chain.BAD_VDF: reseal(b, params=replace(p, epoch_pi=p.epoch_pi ^ 1).encode()),
        chain.TIMESTAMP_BEFORE_PARENT: reseal(b, timestamp=-5),
        chain.FUTURE_TIMESTAMP: reseal(b, timestamp=1000 + 1001),
        chain.MALFORMED: reseal(b, params=b"junk"),
    }
    for reason, blk in cases.items():
        assert check(blk).reason == reason, reason
    assert check(b, oracle=(2, X0)).reason == chain.STALE_EPOCH
    assert check(b, oracle=lambda e: None).reason == chain.STALE_EPOCH
    assert check(b, oracle=lambda e: X0)
    assert check(reseal(b, params=GP.encode())).reason == chain.MALFORMED


def test_not_selected_by_validator_view():
    # proposer believed it was alone (p = 1); the validator sees 61 identities
    from povf.selection import tolerated_threshold
    from povf.vrf import vrf_eval
    from povf.chain import epoch_message
    limit = tolerated_threshold(61, GP.omega, 256)
    kp = next(k for k in (vrf_keygen(b"ns%d" % i, 512) for i in range(50))
              if vrf_eval(k.secret_key, epoch_message(EPOCH1.x)).value_r > limit)
    b = propose_block(GENESIS, [], kp, EPOCH1, 1000, genesis=GP, active_n=1)
    keys = [vrf_keygen(b"v%d" % i, 512) for i in range(60)]
    assert check(b, reg=registry(kp, *keys)).reason == chain.NOT_SELECTED
    assert check(b, reg=registry(kp))


def test_unregistered_proposer():
    assert check(honest_block(), reg=registry(OTHER)).reason == chain.EXPIRED_IDENTITY


def test_future_timestamp_tolerance():
    b = reseal(honest_block(), timestamp=2000)
    assert check(b, now=1000, clock_tolerance=1000)
    assert check(b, now=999, clock_tolerance=1000).reason == chain.FUTURE_TIMESTAMP


def test_tx_perturbation_changes_root_and_hash():
    b = honest_block(4)
    t = b.transactions[1]
    changed = list(b.transactions)
    changed[1] = Transaction.create(t.payload + b"!", t.timestamp)
    assert merkle_root(changed) != b.header.merkle_root
    assert reseal(b, merkle_root=merkle_root(changed), transactions=changed).hash != b.hash
    assert check(Block(b.header, tuple(changed))).reason == chain.BAD_MERKLE


def test_cache_does_not_leak_between_distinct_blocks():
    cache = {}
    b = honest_block()
    assert check(b, cache=cache)
    forged = Block(b.header, b.transactions[:-1])  # same header hash, other body
    assert check(forged, cache=cache).reason == chain.BAD_MERKLE


@given(st.binary(max_size=300))
def test_decode_random_bytes_never_crashes_unexpectedly(data):
    try:
        Block.decode(data)
    except DecodeError:
        pass


@given(st.integers(-2**40, 2**40), st.binary(max_size=40), st.binary(max_size=40),
       st.integers(-5, 5), st.binary(max_size=70), st.binary(max_size=120),
       st.lists(st.binary(max_size=5), max_size=3))
def test_validation_total(ts, prev, root, height, key, params, payloads):
    header = BlockHeader(ts, prev, b"", root, height, key, params)
    header = replace(header, block_hash=header.compute_hash())
    block = Block(header, tuple(Transaction.create(p, 0) for p in payloads))
    v = validate_block(block, GENESIS, registry(KP), GP, (1, X0), 1000)
    assert not v.valid and v.reason


def test_validation_total_on_mutated_honest_block():
    raw = bytearray(honest_block(3).encode())
    rng = random.Random(2)
    for _ in range(300):
        mutated = bytearray(raw)
        mutated[rng.randrange(len(mutated))] ^= 1 << rng.randrange(8)
        try:
            blk = Block.decode(bytes(mutated))
        except DecodeError:
            continue
        v = check(blk)
        assert v.valid in (True, False)
        if blk.encode() != bytes(raw):
            assert not v.valid


def test_tx_body_must_match_its_id():
    b = honest_block(3)
    t = b.transactions[0]
    forged = list(b.transactions)
    forged[0] = Transaction(t.id, t.payload, t.timestamp + 1)
    assert check(Block(b.header, tuple(forged))).reason == chain.BAD_MERKLE
