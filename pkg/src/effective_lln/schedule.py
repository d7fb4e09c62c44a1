"""Exact threshold schedules ceil(n^t) for rational t."""
from __future__ import annotations

from fractions import Fraction

from .core import to_fraction


def iroot(x: int, b: int) -> int:
    """floor(x ** (1/b)) for integers x >= 0, b >= 1."""
    if x < 0 or b < 1:
        raise ValueError("iroot needs x >= 0 and b >= 1")
    if x < 2 or b == 1:
        return x
    r = 1 << -(-x.bit_length() // b)  # 2^ceil(bits/b) >= true root
    while True:
        nxt = ((b - 1) * r + x // r ** (b - 1)) // b
        if nxt >= r:
            break
        r = nxt
    while r ** b > x:
        r -= 1
    while (r + 1) ** b <= x:
        r += 1
    return r


def ceil_power(n: int, t) -> int:
    """ceil(n^t) exactly, for integer n >= 1 and rational t >= 0."""
    t = to_fraction(t)
    if n < 1:
        raise ValueError("n must be positive")
    if t < 0:
        raise ValueError("exponent must be nonnegative")
    x = n ** t.numerator
    r = iroot(x, t.denominator)
    return r if r ** t.denominator == x else r + 1


def f_threshold(n: int, eps) -> int:
    """ceil(n^(2+eps)), the effectivized schedule."""
    eps = to_fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    return ceil_power(n, 2 + eps)


def power_at_least(g: int, eps: Fraction, bound: Fraction) -> bool:
    """Exact test of g^eps >= bound for rational eps > 0 and bound."""
    if bound <= 0:
        return True
    p, q = eps.numerator, eps.denominator
    return Fraction(g) ** p >= bound ** q


def smallest_power_at_least(eps, bound) -> int:
    """Smallest integer g >= 1 with g^eps >= bound."""
    eps, bound = to_fraction(eps), to_fraction(bound)
    if power_at_least(1, eps, bound):
        return 1
    guess = max(1, int(float(bound) ** (1 / float(eps))) - 2)
    while power_at_least(guess, eps, bound) and guess > 1:
        guess = max(1, guess // 2)
    while not power_at_least(guess, eps, bound):
        guess += 1
    return guess
