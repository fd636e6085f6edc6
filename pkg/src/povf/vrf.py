"""Verifiable random function built from a unique signature.

The proof is an RSASSA-PKCS1-v1_5 signature over the message.  For a
correctly generated key the signature is the only value in ``[0, n)`` that
verifies, so every ``(pk, message)`` pair has exactly one valid proof; the
pseudorandom value is the SHA-256 digest of that proof.

Keys are derived deterministically from a seed: two primes are drawn from a
seeded stream, so the same seed always yields the same keypair.  Public keys
are the raw big-endian modulus (exponent fixed at 65537); secret keys are the
two primes concatenated.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import padding, rsa

RANDLEN = 256
PUBLIC_EXPONENT = 65537
DEFAULT_KEY_BITS = 1024
_DOMAIN = b"povf-vrf/v1|"


class VrfError(ValueError):
    pass


@dataclass(frozen=True)
class VrfKeyPair:
    public_key: bytes
    secret_key: bytes

    def __repr__(self) -> str:
        return f"VrfKeyPair(public_key={self.public_key[:8].hex()}...)"


@dataclass(frozen=True)
class VrfOutput:
    value_r: int
    proof_pi: bytes
    randlen: int = RANDLEN


def _prime(rng: random.Random, bits: int) -> int:
    while True:
        # top two bits set so the product has exactly 2*bits bits
        p = int(gmpy2.next_prime(rng.getrandbits(bits) | (3 << (bits - 2))))
        if p.bit_length() == bits and (p - 1) % PUBLIC_EXPONENT != 0:
            return p


def vrf_keygen(seed: bytes, bits: int = DEFAULT_KEY_BITS) -> VrfKeyPair:
    """Deterministic keypair for ``seed``; ``bits`` is the modulus size."""
    if not seed:
        raise VrfError("seed must be non-empty")
    if bits < 512 or bits % 16:
        raise VrfError("key size must be a multiple of 16 and at least 512 bits")
    rng = random.Random(int.from_bytes(hashlib.sha256(b"keygen|" + seed).digest(), "big"))
    half = bits // 2
    p = _prime(rng, half)
    q = _prime(rng, half)
    while q == p:
        q = _prime(rng, half)
    n = p * q
    width = half // 8
    return VrfKeyPair(n.to_bytes(bits // 8, "big"),
                      p.to_bytes(width, "big") + q.to_bytes(width, "big"))


@lru_cache(maxsize=4096)
def _private_key(secret_key: bytes) -> rsa.RSAPrivateKey:
    if not secret_key or len(secret_key) % 2:
        raise VrfError("malformed secret key")
    half = len(secret_key) // 2
    p = int.from_bytes(secret_key[:half], "big")
    q = int.from_bytes(secret_key[half:], "big")
    e = PUBLIC_EXPONENT
    try:
        d = pow(e, -1, (p - 1) * (q - 1))
        numbers = rsa.RSAPrivateNumbers(
            p, q, d, d % (p - 1), d % (q - 1), pow(q, -1, p),
            rsa.RSAPublicNumbers(e, p * q))
        return numbers.private_key()
    except ValueError as exc:
        raise VrfError(f"malformed secret key: {exc}") from None


@lru_cache(maxsize=8192)
def _public_key(public_key: bytes) -> rsa.RSAPublicKey:
    n = int.from_bytes(public_key, "big")
    return rsa.RSAPublicNumbers(PUBLIC_EXPONENT, n).public_key()


def public_key_of(secret_key: bytes) -> bytes:
    """Recover the public key bytes from a secret key."""
    half = len(secret_key) // 2
    n = int.from_bytes(secret_key[:half], "big") * int.from_bytes(secret_key[half:], "big")
    return n.to_bytes(2 * half, "big")


def _value(proof: bytes, randlen: int) -> int:
    digest = int.from_bytes(hashlib.sha256(proof).digest(), "big")
    return digest >> (256 - randlen)


def vrf_eval(secret_key: bytes, message: bytes, randlen: int = RANDLEN) -> VrfOutput:
    if not 1 <= randlen <= 256:
        raise VrfError("randlen must be in [1, 256]")
    key = _private_key(secret_key)
    proof = key.sign(_DOMAIN + message, padding.PKCS1v15(), hashes.SHA256())
    return VrfOutput(_value(proof, randlen), proof, randlen)


def vrf_verify(public_key: bytes, message: bytes, output: VrfOutput) -> bool:
    """Total: anything malformed is simply rejected."""
    try:
        proof = output.proof_pi
        randlen = output.randlen
        if type(randlen) is not int or not 1 <= randlen <= 256:
            return False
        if not isinstance(proof, bytes) or len(proof) != len(public_key):
            return False
        if len(public_key) * 8 < 512 or public_key[0] == 0:
            return False
        if output.value_r != _value(proof, randlen):
            return False
        _public_key(bytes(public_key)).verify(
            proof, _DOMAIN + bytes(message), padding.PKCS1v15(), hashes.SHA256())
        return True
    except (InvalidSignature, ValueError, TypeError, AttributeError, OverflowError):
        return False
