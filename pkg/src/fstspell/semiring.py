"""Semirings over negative-log costs.

Weights are non-negative floats interpreted as costs in negative-log space;
``math.inf`` is the additive zero (an impossible path).  Both semirings share
multiplication (cost addition) and differ only in how parallel paths combine:
the tropical semiring keeps the cheapest path, the log semiring accumulates
total probability mass.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

ZERO = math.inf
ONE = 0.0


def tropical_plus(a: float, b: float) -> float:
    return a if a <= b else b


def log_plus(a: float, b: float) -> float:
    """-ln(e^-a + e^-b), stable for any spread between a and b."""
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if a > b:
        a, b = b, a
    return a - math.log1p(math.exp(a - b))


def times(a: float, b: float) -> float:
    return a + b


@dataclass(frozen=True)
class Semiring:
    name: str
    plus: Callable[[float, float], float] = field(compare=False)

    def sum(self, weights) -> float:
        total = ZERO
        for w in weights:
            total = self.plus(total, w)
        return total

    def __repr__(self) -> str:
        return f"Semiring({self.name})"


TROPICAL = Semiring("tropical", tropical_plus)
LOG = Semiring("log", log_plus)


def weight_plus(a: float, b: float, semiring: Semiring) -> float:
    """Combine two parallel-path costs under the given semiring."""
    return semiring.plus(a, b)
