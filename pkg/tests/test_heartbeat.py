import hashlib

import pytest
from hypothesis import given, strategies as st

from povf import heartbeat as hb
from povf.heartbeat import Registry, registration_seed
from povf.vdf import VdfParams, seed_to_group, vdf_eval, vdf_setup

PARAMS = vdf_setup(64, 50, 16, b"heartbeat-tests")
T_MAX = 4800


def pk(i: int) -> bytes:
    return bytes([i + 1]) * 64


def reg(registry, i, now, st=None):
    st = now if st is None else st
    return registry.register(pk(i), st, registration_seed(pk(i), st), now)


def beat(registry, i, now, x=None):
    x = registry.expected_input(pk(i)) if x is None else x
    out = vdf_eval(PARAMS, x, PARAMS.heartbeat_t)
    return registry.process_heartbeat(pk(i), out.output_y, out.proof_pi, now), out


def test_registration_seed_frozen():
    assert registration_seed(b"\x01" * 64, 1000) == int(
        "413e078f2aa97d6ed3d6c3d000ed16662ee4d2c5f2ef47949705a90175a7e75f", 16)


def test_registration_seed_is_sha256():
    key = b"\x07" * 33
    expect = hashlib.sha256(key + (-5).to_bytes(8, "big", signed=True)).digest()
    assert registration_seed(key, -5) == int.from_bytes(expect, "big")


def test_honest_registration():
    r = Registry(PARAMS, T_MAX)
    assert reg(r, 0, 1000)
    e = r.entries[pk(0)]
    assert (e.last_update, e.chain_length) == (1000, 0)
    assert e.latest_x == seed_to_group(e.seed_x_prime, PARAMS.modulus_N)
    assert r.is_active(pk(0), 1000) and r.active_count(1000) == 1


def test_hash_mismatch():
    r = Registry(PARAMS, T_MAX)
    good = registration_seed(pk(0), 1000)
    raw = bytearray(good.to_bytes(32, "big"))
    raw[5] ^= 0x01
    v = r.register(pk(0), 1000, int.from_bytes(raw, "big"), 1000)
    assert not v and v.reason == hb.HASH_MISMATCH


def test_duplicate_seed_after_timeout():
    r = Registry(PARAMS, T_MAX)
    assert reg(r, 0, 1000)
    v = r.register(pk(0), 1000, registration_seed(pk(0), 1000), 1000 + T_MAX + 1)
    assert v.reason == hb.DUPLICATE_SEED


def test_stale_timestamp_window():
    r = Registry(PARAMS, T_MAX, registration_window=2000)
    assert reg(r, 0, 5000, st=3000)
    assert reg(r, 1, 5000, st=2999).reason == hb.STALE_TIMESTAMP
    assert reg(r, 2, 5000, st=7001).reason == hb.STALE_TIMESTAMP


def test_already_registered_while_active():
    r = Registry(PARAMS, T_MAX)
    assert reg(r, 0, 1000)
    assert reg(r, 0, 1500).reason == hb.ALREADY_REGISTERED
    # after expiry a fresh st is allowed
    assert reg(r, 0, 1000 + T_MAX + 1)


def test_example_two_nodes_one_misses_deadline():
    r = Registry(PARAMS, T_MAX)
    assert reg(r, 0, 0) and reg(r, 1, 0)
    ok, _ = beat(r, 0, 4000)
    assert ok and r.entries[pk(0)].last_update == 4000
    late, _ = beat(r, 1, T_MAX + 1)
    assert late.reason == hb.EXPIRED_IDENTITY
    assert r.is_active(pk(0), T_MAX + 1) and not r.is_active(pk(1), T_MAX + 1)


def test_chain_advances_and_replay_rejected():
    r = Registry(PARAMS, T_MAX)
    assert reg(r, 0, 0)
    first_input = r.expected_input(pk(0))
    ok, out1 = beat(r, 0, 1000)
    assert ok and r.entries[pk(0)].latest_x == out1.output_y
    ok, out2 = beat(r, 0, 2000)
    assert ok and r.entries[pk(0)].chain_length == 2
    # replaying the first element no longer matches the chain position
    v = r.process_heartbeat(pk(0), out1.output_y, out1.proof_pi, 3000)
    assert v.reason == hb.BAD_PROOF
    # a heartbeat computed from the old input is also stale
    stale = vdf_eval(PARAMS, first_input, PARAMS.heartbeat_t)
    assert r.process_heartbeat(pk(0), stale.output_y, stale.proof_pi, 3000).reason == hb.BAD_PROOF


def test_unknown_identity():
    r = Registry(PARAMS, T_MAX)
    assert r.process_heartbeat(pk(9), 5, 5, 0).reason == hb.UNKNOWN_IDENTITY


def test_bad_proof():
    r = Registry(PARAMS, T_MAX)
    reg(r, 0, 0)
    out = vdf_eval(PARAMS, r.expected_input(pk(0)), PARAMS.heartbeat_t)
    assert r.process_heartbeat(pk(0), out.output_y, out.proof_pi ^ 1, 10).reason == hb.BAD_PROOF


def test_boundary_inclusive():
    r = Registry(PARAMS, T_MAX)
    reg(r, 0, 0)
    assert r.is_active(pk(0), T_MAX)
    assert not r.is_active(pk(0), T_MAX + 1)
    assert beat(r, 0, T_MAX)[0]


def test_active_count_mixed():
    r = Registry(PARAMS, T_MAX)
    assert r.active_count(0) == 0
    for i in range(5):
        reg(r, i, 0)
    for i in range(3):
        beat(r, i, 3000)
    assert r.active_count(T_MAX + 100) == 3
    assert sorted(r.active_keys(T_MAX + 100)) == sorted(pk(i) for i in range(3))


def test_out_of_order_now_keeps_latest_update():
    r = Registry(PARAMS, T_MAX)
    reg(r, 0, 1000)
    beat(r, 0, 3000)
    beat(r, 0, 2500)
    assert r.entries[pk(0)].last_update == 3000


def test_module_wrappers():
    r = Registry(PARAMS, T_MAX)
    assert hb.register(r, pk(0), 0, registration_seed(pk(0), 0), 0)
    x = r.expected_input(pk(0))
    out = vdf_eval(PARAMS, x, PARAMS.heartbeat_t)
    assert hb.process_heartbeat(r, pk(0), out.output_y, out.proof_pi, 10)
    assert hb.is_active(r, pk(0), 10) and hb.active_count(r, 10) == 1


def test_copy_is_independent():
    r = Registry(PARAMS, T_MAX)
    reg(r, 0, 0)
    c = r.copy()
    reg(c, 1, 0)
    beat(c, 0, 100)
    assert len(r) == 1 and r.entries[pk(0)].chain_length == 0


def test_liveness_thousand_rounds():
    # heartbeat every 4000 ms, delivery delay up to 700 ms, t_max 4800
    r = Registry(PARAMS, T_MAX, verify=lambda *a: True)
    reg(r, 0, 0)
    for k in range(1, 1001):
        now = 4000 * k + (k * 7919) % 700
        assert r.process_heartbeat(pk(0), 2, 1, now), k
        assert r.active_count(now) == 1


ops = st.lists(st.tuples(st.sampled_from(["reg", "beat", "count"]), st.integers(0, 5),
                         st.integers(0, 20_000)), max_size=60)


@given(ops)
def test_active_count_matches_scan(seq):
    r = Registry(PARAMS, 3000, registration_window=10**9, verify=lambda *a: True)
    st_counter = 0
    for op, i, now in seq:
        if op == "reg":
            st_counter += 1
            r.register(pk(i), st_counter, registration_seed(pk(i), st_counter), now)
        elif op == "beat":
            r.process_heartbeat(pk(i), 2, 1, now)
        naive = sum(1 for e in r.entries.values() if now - e.last_update <= 3000)
        assert r.active_count(now) == naive


def test_rejects_non_integer_inputs():
    r = Registry(PARAMS, T_MAX)
    assert not r.register("pk", 0, 0, 0)
    assert not r.register(pk(0), 0.0, registration_seed(pk(0), 0), 0)


def test_negative_t_max():
    with pytest.raises(ValueError):
        Registry(VdfParams(101, 41, 10, 1), -1)
