"""Throughput and decentralisation measures over block traces.

Inputs are integers, so TPS and Gini are returned as exact
:class:`~fractions.Fraction` values; callers convert at the edge with
:func:`to_decimal`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Protocol, Sequence


class UndefinedMetricError(ValueError):
    pass


class BlockLike(Protocol):
    height: int
    timestamp: int
    tx_count: int


def average_tps(blocks: Sequence[BlockLike]) -> Fraction:
    """Transactions after the first block divided by the elapsed seconds.

    The first block only anchors the window; its own transactions were
    processed before the window starts.
    """
    if len(blocks) < 2:
        raise UndefinedMetricError("average TPS needs at least two blocks")
    elapsed_ms = blocks[-1].timestamp - blocks[0].timestamp
    if elapsed_ms <= 0:
        raise UndefinedMetricError("zero elapsed time")
    total = sum(b.tx_count for b in blocks[1:])
    return Fraction(total * 1000, elapsed_ms)


def instantaneous_tps(block_a: BlockLike, block_b: BlockLike) -> Fraction:
    if block_b.height != block_a.height + 1:
        raise ValueError("blocks are not adjacent")
    gap = block_b.timestamp - block_a.timestamp
    if gap <= 0:
        raise ValueError("timestamps must be strictly increasing")
    return Fraction(block_b.tx_count * 1000, gap)


def block_counts(proposers: Iterable[bytes | str]) -> list[int]:
    """Per-proposer block counts, in first-seen order."""
    counts: dict = {}
    for p in proposers:
        counts[p] = counts.get(p, 0) + 1
    return list(counts.values())


def std_dev(counts: Sequence[int]) -> float:
    """Population standard deviation (divisor ``n``)."""
    n = len(counts)
    if n == 0:
        raise ValueError("empty count set")
    mean = Fraction(sum(counts), n)
    var = sum((Fraction(b) - mean) ** 2 for b in counts) / n
    return math.sqrt(var)


def gini(counts: Sequence[int]) -> Fraction:
    """Mean absolute difference over twice the mean, in O(n log n).

    Uses ``sum_i (2i - n - 1) b_(i) / (n * sum b)`` over the sorted counts,
    which equals the pairwise double sum divided by ``2 n sum b``.
    """
    n = len(counts)
    total = sum(counts)
    if n == 0 or total <= 0:
        raise ValueError("gini needs a positive total")
    if any(b < 0 for b in counts):
        raise ValueError("counts must be non-negative")
    acc = sum((2 * i - n - 1) * b for i, b in enumerate(sorted(counts), start=1))
    return Fraction(acc, n * total)


def to_decimal(value: Fraction | float | int, digits: int = 12) -> float:
    """Round to ``digits`` significant figures for reporting."""
    v = float(value)
    if v == 0 or not math.isfinite(v):
        return v
    return float(f"{v:.{digits}g}")
