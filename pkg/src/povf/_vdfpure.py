"""Pure-Python sequential squaring kernel.

Mirrors ``povf._vdfcore`` exactly; it is selected when the compiled
extension is unavailable or ``POVF_PURE_PYTHON`` is set.
"""

from __future__ import annotations

NAME = "python"


class SquaringState:
    """Running state of one evaluation: ``(x, pi, r)`` after some rounds.

    Each round doubles the exponent remainder ``r`` modulo ``l``; the carry
    bit decides whether the proof accumulator picks up a factor of the
    input.  After ``T`` rounds ``x = x0^(2^T)`` and ``pi = x0^floor(2^T/l)``.
    """

    __slots__ = ("modulus", "prime", "base", "x", "pi", "r", "rounds")

    def __init__(self, modulus: int, prime: int, base: int):
        self.modulus = modulus
        self.prime = prime
        self.base = base
        self.x = base
        self.pi = 1
        self.r = 1
        self.rounds = 0

    def advance(self, k: int) -> None:
        n = self.modulus
        l = self.prime
        base = self.base
        x, pi, r = self.x, self.pi, self.r
        for _ in range(k):
            r <<= 1
            if r >= l:
                r -= l
                pi = pi * pi % n * base % n
            else:
                pi = pi * pi % n
            x = x * x % n
        self.x, self.pi, self.r = x, pi, r
        self.rounds += k

    def output(self) -> tuple[int, int]:
        return self.x, self.pi


def new_state(modulus: int, prime: int, base: int) -> SquaringState:
    return SquaringState(modulus, prime, base)
