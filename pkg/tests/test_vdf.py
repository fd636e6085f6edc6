import os
import random
import subprocess
import sys

import gmpy2
import pytest
from hypothesis import given, strategies as st

from oracles import squaring_oracle
from povf import vdf
from povf.vdf import VdfDomainError, VdfParams, vdf_eval, vdf_setup, vdf_verify

# (N, l, x, T) -> (y, pi) computed with the repeated-squaring oracle
FROZEN = [
    ((101, 41, 2, 10), (5, 5)),
    ((101, 41, 3, 1), (9, 1)),
    ((999985999949, 65537, 12345, 100), (896867017789, 812118431117)),
    ((4951760154835678088235319297, 1000000007, 987654321, 1000),
     (2704138558136393099045622570, 4601019245106743981423842779)),
    ((14242602412649880363, 2147483647, 7, 4096), (5634089214922699717, 11184349972757774350)),
]


@pytest.mark.parametrize("args,expected", FROZEN)
def test_frozen_values(kernel, args, expected):
    n, l, x, t = args
    out = vdf_eval(VdfParams(n, l, t, 1), x, kernel=kernel)
    assert (out.output_y, out.proof_pi) == expected
    assert vdf_verify(VdfParams(n, l, t, 1), x, *expected)


def test_worked_example_is_fast():
    import time
    params = VdfParams(101, 41, 10, 1)
    t0 = time.perf_counter()
    out = vdf_eval(params, 2)
    ok = vdf_verify(params, 2, out.output_y, out.proof_pi)
    assert time.perf_counter() - t0 < 1e-3
    assert (out.output_y, out.proof_pi, ok) == (5, 5, True)


def test_worked_example_rejects_neighbours():
    params = VdfParams(101, 41, 10, 1)
    assert not vdf_verify(params, 2, 5, 6)
    assert not vdf_verify(params, 2, 6, 5)
    assert not vdf_verify(params, 3, 5, 5)
    assert not vdf_verify(params, 2, 5, 5, rounds=11)


def _semiprime(rng, bits):
    half = bits // 2
    while True:
        p = int(gmpy2.next_prime(rng.getrandbits(half) | (1 << (half - 1))))
        q = int(gmpy2.next_prime(rng.getrandbits(bits - half) | (1 << (bits - half - 1))))
        if p != q:
            return p * q


@st.composite
def instances(draw, max_bits=64, max_t=2000):
    seed = draw(st.integers(0, 2**32))
    rng = random.Random(seed)
    bits = draw(st.integers(16, max_bits))
    n = _semiprime(rng, bits)
    l = int(gmpy2.next_prime(draw(st.integers(2, 2**20))))
    x = draw(st.integers(2, n - 1))
    t = draw(st.integers(1, max_t))
    return n, l, x, t


@given(instances())
def test_matches_oracle(kernel, inst):
    n, l, x, t = inst
    if gmpy2.gcd(x, n) != 1 or gmpy2.gcd(l, n) != 1:
        return
    out = vdf_eval(VdfParams(n, l, t, 1), x, kernel=kernel)
    assert (out.output_y, out.proof_pi) == squaring_oracle(n, l, x, t)
    assert vdf_verify(VdfParams(n, l, t, 1), x, out.output_y, out.proof_pi)


@pytest.mark.parametrize("n", [2**64 - 59, (2**64 - 59) * 3, 2**63 + 29, (2**127 - 1) * 5])
def test_kernels_agree_around_word_size(n):
    kernels = vdf.available_backends()
    params = VdfParams(n, 1000003, 700, 1)
    outs = {name: vdf_eval(params, 12345678901, kernel=k) for name, k in kernels.items()}
    ref = squaring_oracle(n, 1000003, 12345678901, 700)
    for out in outs.values():
        assert (out.output_y, out.proof_pi) == ref


def test_chunked_eval_equals_one_shot(small_params):
    out = vdf_eval(small_params, 99, rounds=vdf.CANCEL_CHECK_ROUNDS * 3 + 17)
    ref = squaring_oracle(small_params.modulus_N, small_params.proof_prime_l, 99,
                          vdf.CANCEL_CHECK_ROUNDS * 3 + 17)
    assert (out.output_y, out.proof_pi) == ref


def test_cancellation_reports_progress(small_params):
    class Token:
        calls = 0

        def is_set(self):
            self.calls += 1
            return self.calls >= 2

    with pytest.raises(vdf.VdfCancelled) as info:
        vdf_eval(small_params, 5, rounds=vdf.CANCEL_CHECK_ROUNDS * 10, cancel=Token())
    assert info.value.rounds_completed == 2 * vdf.CANCEL_CHECK_ROUNDS


def test_setup_deterministic_and_well_formed():
    a = vdf_setup(128, 100, 10, b"seed")
    b = vdf_setup(128, 100, 10, b"seed")
    c = vdf_setup(128, 100, 10, b"other")
    assert a == b and a != c
    assert a.modulus_N.bit_length() == 128
    assert gmpy2.is_prime(a.proof_prime_l)
    assert not gmpy2.is_prime(a.modulus_N)
    assert gmpy2.gcd(a.proof_prime_l, a.modulus_N) == 1


@pytest.mark.parametrize("bits,seed", [(4, b"x"), (64, b"")])
def test_setup_rejects_bad_arguments(bits, seed):
    with pytest.raises(VdfDomainError):
        vdf_setup(bits, 10, 10, seed)


@pytest.mark.parametrize("x", [0, 1, 101, 202, -3])
def test_eval_rejects_out_of_domain(x):
    with pytest.raises(VdfDomainError):
        vdf_eval(VdfParams(101, 41, 10, 1), x)


def test_eval_rejects_non_unit():
    with pytest.raises(VdfDomainError):
        vdf_eval(VdfParams(15, 7, 10, 1), 5)


@pytest.mark.parametrize("args", [(3, 41, 1, 1), (101, 40, 1, 1), (101, 41, 0, 1), (101, 41, 1, 0)])
def test_params_validated(args):
    with pytest.raises(VdfDomainError):
        VdfParams(*args)


@given(st.one_of(st.none(), st.integers(-2**70, 2**70), st.floats(), st.text(), st.binary()),
       st.one_of(st.integers(-5, 2**70), st.booleans()),
       st.one_of(st.integers(-5, 2**70), st.just(5.0)),
       st.one_of(st.integers(-5, 50), st.none(), st.just("3")))
def test_verify_is_total(x, y, pi, rounds):
    assert vdf_verify(VdfParams(101, 41, 10, 1), x, y, pi, rounds) in (True, False)


@given(instances(max_t=300), st.integers(0, 2), st.integers(0, 63))
def test_single_bit_flip_rejected(inst, which, bit):
    n, l, x, t = inst
    if gmpy2.gcd(x, n) != 1:
        return
    p = VdfParams(n, l, t, 1)
    out = vdf_eval(p, x)
    vals = [x, out.output_y, out.proof_pi]
    vals[which] ^= 1 << (bit % n.bit_length())
    if vals[which] == [x, out.output_y, out.proof_pi][which]:
        return
    # a flipped value may land on another valid triple only by a true collision
    if which == 0 and 1 < vals[0] < n and gmpy2.gcd(vals[0], n) == 1:
        if squaring_oracle(n, l, vals[0], t) == (out.output_y, out.proof_pi):
            return
    assert not vdf_verify(p, *vals)


def test_pure_python_selected_by_environment():
    env = dict(os.environ, POVF_PURE_PYTHON="1")
    code = "from povf import vdf; print(vdf.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


def test_default_backend_is_compiled_when_built():
    if "compiled" not in vdf.available_backends():
        pytest.skip("extension not built")
    assert vdf.BACKEND == "compiled"
