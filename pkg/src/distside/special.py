"""Digamma and log-gamma for real arguments.

Both use upward recurrence to x >= 10 followed by the asymptotic series in
Bernoulli numbers; accuracy is close to double precision for x > 0.
"""

from __future__ import annotations

import math

EULER_GAMMA = 0.57721566490153286060651209008240243
_SHIFT = 10.0
# B_2, B_4, ..., B_14
_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)


def digamma(x: float) -> float:
    x = float(x)
    if math.isnan(x):
        return math.nan
    if x <= 0:
        if x == math.floor(x):
            return math.nan  # poles at non-positive integers
        # reflection: psi(1 - x) - psi(x) = pi cot(pi x)
        return digamma(1.0 - x) - math.pi / math.tan(math.pi * x)
    acc = 0.0
    while x < _SHIFT:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for k, b in enumerate(_BERNOULLI, start=1):
        series += b / (2 * k) * power
        power *= inv2
    return acc + math.log(x) - 0.5 / x - series


def lgamma(x: float) -> float:
    """ln |Gamma(x)| for x > 0."""
    x = float(x)
    if not x > 0:
        raise ValueError("lgamma is implemented for x > 0 only")
    acc = 0.0
    while x < _SHIFT:
        acc -= math.log(x)
        x += 1.0
    series = 0.0
    inv = 1.0 / x
    power = inv
    for k, b in enumerate(_BERNOULLI, start=1):
        series += b / (2 * k * (2 * k - 1)) * power
        power *= inv * inv
    return acc + (x - 0.5) * math.log(x) - x + 0.5 * math.log(2 * math.pi) + series
