"""Per-epoch consensus-node selection.

All threshold arithmetic is exact: probabilities are handled as
:class:`fractions.Fraction` and the comparison against a VRF value is done
on integers, so every validator reaches the same verdict.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Union

Probability = Union[Fraction, float, int]


@dataclass(frozen=True)
class SelectionParams:
    omega: int
    randlen: int = 256

    def __post_init__(self):
        if self.omega < 1:
            raise ValueError("omega must be >= 1")
        if self.randlen < 1:
            raise ValueError("randlen must be >= 1")


def consensus_probability(active_n: int, omega: int) -> Fraction:
    """``min(omega / n, 1)``; an empty network gets probability one."""
    if active_n <= omega:
        return Fraction(1)
    return Fraction(omega, active_n)


def _as_fraction(p: Probability) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, (int, Rational)):
        return Fraction(p)
    return Fraction(float(p))  # exact dyadic value of the float


def selection_threshold(p_prime: Probability, randlen: int) -> int:
    """Largest VRF value still selected: ``floor(p' * 2^randlen)``."""
    p = _as_fraction(p_prime)
    if not 0 <= p <= 1:
        raise ValueError(f"probability out of range: {p_prime}")
    return (p.numerator << randlen) // p.denominator


def is_selected(vrf_value: int, randlen: int, p_prime: Probability) -> bool:
    if not 0 <= vrf_value < (1 << randlen):
        raise ValueError("vrf_value outside [0, 2^randlen)")
    return vrf_value <= selection_threshold(p_prime, randlen)


def churn_tolerance(n_local: int) -> int:
    """How far a proposer's registry count may trail the validator's."""
    return max(2, n_local // 20)


@lru_cache(maxsize=65536)
def tolerated_threshold(n_local: int, omega: int, randlen: int) -> int:
    """Most permissive threshold a validator with ``n_local`` active
    identities accepts.  A proposer whose view was up to
    :func:`churn_tolerance` identities smaller is still honoured."""
    n_floor = max(n_local - churn_tolerance(n_local), 0)
    return selection_threshold(consensus_probability(n_floor, omega), randlen)
