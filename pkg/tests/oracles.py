"""Slow, obviously-correct reference implementations used only by tests."""

from __future__ import annotations

import hashlib
import math
from fractions import Fraction


def squaring_oracle(n: int, l: int, x: int, t: int) -> tuple[int, int]:
    """``(x^(2^t) mod n, x^floor(2^t / l) mod n)`` by the definitions."""
    y = x
    for _ in range(t):
        y = y * y % n
    return y, pow(x, (1 << t) // l, n)


def gini_pairwise(counts) -> Fraction:
    n = len(counts)
    num = sum(abs(a - b) for a in counts for b in counts)
    den = 2 * n * sum(counts)
    return Fraction(num, den)


def std_pop(counts) -> float:
    n = len(counts)
    mean = sum(counts) / n
    return math.sqrt(sum((c - mean) ** 2 for c in counts) / n)


def merkle_oracle(ids: list[bytes]) -> bytes:
    if not ids:
        return hashlib.sha256(b"").digest()
    level = list(ids)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), 2):
            if i + 1 < len(level):
                nxt.append(hashlib.sha256(level[i] + level[i + 1]).digest())
            else:
                nxt.append(level[i])
        level = nxt
    return level[0]


def ntp_oracle(t1, t2, t3, t4) -> Fraction:
    return Fraction((t2 - t1) + (t3 - t4), 2)
