"""Binomial proportion summaries for ensemble experiments."""
from __future__ import annotations

from typing import NamedTuple

from scipy.stats import binomtest, norm


class RateEstimate(NamedTuple):
    passes: int
    trials: int
    rate: float
    wilson_lo: float
    wilson_hi: float

    def contains(self, x: float) -> bool:
        return self.wilson_lo <= x <= self.wilson_hi


def wilson(passes: int, trials: int, z: float | None = None, confidence: float = 0.95) -> RateEstimate:
    """Pass rate with its Wilson score interval; ``z`` overrides ``confidence``."""
    if trials < 0 or not 0 <= passes <= max(trials, 0):
        raise ValueError(f"need 0 <= passes <= trials, got {passes}/{trials}")
    if trials == 0:
        return RateEstimate(0, 0, float("nan"), 0.0, 1.0)
    if z is not None:
        confidence = 2 * norm.cdf(z) - 1
    ci = binomtest(passes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return RateEstimate(passes, trials, passes / trials, float(ci.low), float(ci.high))
