"""Wesolowski-style verifiable delay function over ``Z_N^*``.

Evaluation runs ``T`` sequential squarings and accumulates the proof
``pi = x^floor(2^T / l)`` on the fly, so no second pass is needed.
Verification checks ``y == pi^l * x^(2^T mod l) (mod N)``, which costs
two short exponentiations regardless of ``T``.

The squaring loop runs in a compiled kernel (``povf._vdfcore``, GMP) when it
is importable and falls back to ``povf._vdfpure`` otherwise.  Set
``POVF_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import hashlib
import math
import os
import random
from dataclasses import dataclass
from types import ModuleType
from typing import Optional, Protocol

import gmpy2

from povf import _vdfpure

__all__ = [
    "BACKEND",
    "CANCEL_CHECK_ROUNDS",
    "VdfCancelled",
    "VdfDomainError",
    "VdfOutput",
    "VdfParams",
    "VdfSetupError",
    "available_backends",
    "seed_to_group",
    "vdf_eval",
    "vdf_setup",
    "vdf_verify",
]

CANCEL_CHECK_ROUNDS = 1 << 10
_SETUP_RETRIES = 10_000


def _load_kernel() -> ModuleType:
    if os.environ.get("POVF_PURE_PYTHON"):
        return _vdfpure
    try:
        from povf import _vdfcore
    except ImportError:
        return _vdfpure
    return _vdfcore


_kernel = _load_kernel()
BACKEND: str = _kernel.NAME


def available_backends() -> dict[str, ModuleType]:
    """Kernels importable in this environment, keyed by name."""
    found = {"python": _vdfpure}
    try:
        from povf import _vdfcore
    except ImportError:
        pass
    else:
        found["compiled"] = _vdfcore
    return found


class VdfDomainError(ValueError):
    """Input outside the group or otherwise unusable."""


class VdfSetupError(RuntimeError):
    """Prime generation did not converge."""


class VdfCancelled(Exception):
    """Raised when a cancellation token fires during evaluation."""

    def __init__(self, rounds_completed: int):
        super().__init__(f"cancelled after {rounds_completed} rounds")
        self.rounds_completed = rounds_completed


class CancelToken(Protocol):
    def is_set(self) -> bool: ...


@dataclass(frozen=True)
class VdfParams:
    """Public parameters: modulus, proof prime and the two round counts."""

    modulus_N: int
    proof_prime_l: int
    time_T: int
    heartbeat_t: int

    def __post_init__(self):
        if self.modulus_N <= 3:
            raise VdfDomainError(f"modulus must exceed 3, got {self.modulus_N}")
        if self.proof_prime_l < 2 or not gmpy2.is_prime(self.proof_prime_l):
            raise VdfDomainError(f"proof_prime_l={self.proof_prime_l} is not prime")
        if self.time_T < 1 or self.heartbeat_t < 1:
            raise VdfDomainError("time_T and heartbeat_t must be >= 1")


@dataclass(frozen=True)
class VdfOutput:
    input_x: int
    output_y: int
    proof_pi: int
    rounds: int


def _seeded_rng(rng_seed: bytes) -> random.Random:
    return random.Random(int.from_bytes(hashlib.sha256(rng_seed).digest(), "big"))


def _random_prime(rng: random.Random, bits: int) -> int:
    lo = 1 << (bits - 1)
    while True:
        p = int(gmpy2.next_prime(rng.getrandbits(bits) | lo))
        if p.bit_length() == bits:
            return p


def vdf_setup(security_bits: int, time_T: int, heartbeat_t: int,
              rng_seed: bytes) -> VdfParams:
    """Generate an RSA-style modulus and a fixed proof prime.

    The factorisation is dropped as soon as ``N`` is formed.  Output is a
    pure function of the arguments.
    """
    if security_bits < 8:
        raise VdfDomainError("security_bits must be >= 8")
    if not rng_seed:
        raise VdfDomainError("rng_seed must be non-empty")
    rng = _seeded_rng(rng_seed)
    half = security_bits // 2
    modulus = None
    for _ in range(_SETUP_RETRIES):
        p = _random_prime(rng, half)
        q = _random_prime(rng, security_bits - half)
        if p != q and (p * q).bit_length() == security_bits:
            modulus = p * q
            break
    if modulus is None:
        raise VdfSetupError(f"no {security_bits}-bit semiprime after {_SETUP_RETRIES} tries")
    del p, q
    lbits = min(security_bits, 128)
    for _ in range(_SETUP_RETRIES):
        l = _random_prime(rng, lbits)
        if math.gcd(l, modulus) == 1:
            return VdfParams(modulus, l, time_T, heartbeat_t)
    raise VdfSetupError(f"no {lbits}-bit proof prime coprime to N")


def seed_to_group(value: int, modulus: int) -> int:
    """Map an arbitrary non-negative integer (e.g. a digest) into ``(1, N)``."""
    x = value % modulus
    return x if x > 1 else x + 2


def vdf_eval(params: VdfParams, x: int, rounds: Optional[int] = None,
             cancel: Optional[CancelToken] = None, *,
             kernel: Optional[ModuleType] = None) -> VdfOutput:
    """Evaluate ``rounds`` sequential squarings of ``x`` with an inline proof.

    ``rounds`` defaults to ``params.time_T``.  ``cancel`` is polled every
    ``CANCEL_CHECK_ROUNDS`` rounds; when set, :class:`VdfCancelled` carries
    the number of rounds already done.
    """
    if rounds is None:
        rounds = params.time_T
    n = params.modulus_N
    if not isinstance(x, int) or not 1 < x < n:
        raise VdfDomainError(f"input must lie in (1, N), got {x!r}")
    if math.gcd(x, n) != 1:
        raise VdfDomainError("input shares a factor with the modulus")
    if rounds < 1:
        raise VdfDomainError(f"rounds must be >= 1, got {rounds}")
    state = (kernel or _kernel).new_state(n, params.proof_prime_l, x)
    done = 0
    while done < rounds:
        step = min(CANCEL_CHECK_ROUNDS, rounds - done)
        state.advance(step)
        done += step
        if done < rounds and cancel is not None and cancel.is_set():
            raise VdfCancelled(done)
    y, pi = state.output()
    return VdfOutput(x, y, pi, rounds)


def vdf_verify(params: VdfParams, x_prev: int, y: int, pi: int,
               rounds: Optional[int] = None) -> bool:
    """Check a claimed output; malformed input yields ``False``, never raises."""
    if rounds is None:
        rounds = params.time_T
    n = params.modulus_N
    l = params.proof_prime_l
    for v in (x_prev, y, pi):
        if type(v) is not int or not 1 <= v < n:
            return False
    if type(rounds) is not int or rounds < 1:
        return False
    r = pow(2, rounds, l)
    return pow(pi, l, n) * pow(x_prev, r, n) % n == y
