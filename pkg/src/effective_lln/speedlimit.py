"""Checkpoint scans, Monte Carlo checkpoint pass rates, and adversarial checkpoint-passing sequences."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Sequence

import numpy as np

from .bounds import PreconditionError
from .core import (FiniteProbabilitySpace, Interval, RealRandomVariable, SequencePrefix, rv_mean, rv_variance,
                   sign_of)
from .devtests import (CapExceeded, CheckpointReport, CheckpointSpec, checkpoint_membership,
                       rv_checkpoint_membership)
from .seqio import map_trials, sample_indices, trial_key
from .stats import RateEstimate, wilson

MC_CAP = 4**10
ADVERSARIAL_STREAM = 0xAD


def _symbol_probability(P: FiniteProbabilitySpace, a) -> tuple[int, Fraction]:
    if P.mode != "exact":
        raise PreconditionError("checkpoint experiments need exact probabilities")
    i = P.index(a)
    p = P.probs[i]
    if not 0 < p < 1:
        raise PreconditionError(f"P({P.names[i]}) must lie strictly between 0 and 1")
    return i, p


def checkpoint_scan(s: SequencePrefix, P: FiniteProbabilitySpace, a, n_lo: int = 1,
                    n_hi: int | None = None) -> CheckpointReport:
    """|N_a(prefix of length 4^k) - 4^k P(a)| <= 2^k at every checkpoint the prefix reaches."""
    i, p = _symbol_probability(P, a)
    return checkpoint_membership(s, CheckpointSpec(i, p, n_lo, n_hi))


def _require_positive_variance(P: FiniteProbabilitySpace, X: RealRandomVariable):
    v = rv_variance(P, X)
    if (sign_of(v, P.precision_bits) if isinstance(v, Interval) else (v > 0) - (v < 0)) <= 0:
        raise PreconditionError("V(X) must be positive")


def rv_checkpoint_scan(s: SequencePrefix, P: FiniteProbabilitySpace, X: RealRandomVariable, n_lo: int = 1,
                       n_hi: int | None = None) -> CheckpointReport:
    """Checkpoints on partial sums of X against the strict band 2^(k+1)."""
    _require_positive_variance(P, X)
    return rv_checkpoint_membership(s, P, X, n_lo=n_lo, n_hi=n_hi, budget=P.precision_bits)


# --------------------------------------------------------------------------
# adversarial generation


def adversarial_generate(P: FiniteProbabilitySpace, a, depth: int, seed: int) -> SequencePrefix:
    """A prefix of length 4^depth that passes every checkpoint k <= depth.

    Greedy steering: after i symbols the count c of ``a`` keeps
    |c - i P(a)| <= w_i with w_i = max(1, isqrt(i)/2).  When both choices
    stay inside, the seed decides (``a`` with probability P(a)); otherwise
    the choice that stays inside is forced, and one always does.  Symbols
    other than ``a`` are drawn in proportion to their probabilities.  Since
    w_{4^k} <= 2^k every checkpoint passes.

    This is one family of sequences satisfying the checkpoint condition up
    to the requested depth; a finite prefix says nothing about checkpoints
    beyond it.
    """
    ai, p = _symbol_probability(P, a)
    if depth < 0:
        raise PreconditionError("depth must be nonnegative")
    length = 4**depth
    rng = np.random.Generator(np.random.Philox(key=trial_key(seed, 0, ADVERSARIAL_STREAM)))
    coin = rng.random(length) < float(p)
    others = [i for i, q in enumerate(P.probs) if i != ai and q > 0]
    weights = np.array([float(P.probs[i]) for i in others])
    fill = np.array(others)[rng.choice(len(others), size=length, p=weights / weights.sum())]
    u, v = p.numerator, p.denominator
    out = np.empty(length, dtype=np.int64)
    c = 0
    for i in range(1, length + 1):
        # |c' - i p| <= w  <=>  |v c' - u i| <= v w, with w = max(2, isqrt(i)) / 2
        vw2 = v * max(2, math.isqrt(i))
        up_ok = abs(2 * (v * (c + 1) - u * i)) <= vw2
        stay_ok = abs(2 * (v * c - u * i)) <= vw2
        if not (up_ok or stay_ok):
            raise AssertionError(f"steering infeasible at position {i}")
        take = up_ok and (coin[i - 1] or not stay_ok)
        if take:
            out[i - 1] = ai
            c += 1
        else:
            out[i - 1] = fill[i - 1]
    s = SequencePrefix.from_array(P.names, out)
    report = checkpoint_scan(s, P, ai, 1, depth) if depth >= 1 else None
    if report is not None and not report.all_passed:
        raise AssertionError(f"adversarial output fails checkpoint {report.first_failure}")
    return s


# --------------------------------------------------------------------------
# Monte Carlo


def first_failure(arr: np.ndarray, coef: Sequence[Fraction], center: Fraction, n1: int, n: int,
                  offset: int, strict: bool) -> int:
    """Smallest k in [n1, n] whose checkpoint fails, or n + 1."""
    E = math.lcm(*(Fraction(x).denominator for x in (*coef, center)))
    e = [int(x * E) for x in coef]
    m = int(center * E)
    for k in range(n1, n + 1):
        L = 4**k
        counts = np.bincount(arr[:L], minlength=len(e)).tolist()
        dev = abs(sum(c * x for c, x in zip(counts, e)) - L * m)
        band = 2 ** (k + offset) * E
        if (dev >= band) if strict else (dev > band):
            return k
    return n + 1


def _checkpoint_trial(i: int, probs, coef, center, n1, n, offset, strict, seed, stream) -> int:
    arr = sample_indices(probs, 4**n, seed, trial=i, stream=stream)
    return first_failure(arr, coef, center, n1, n, offset, strict)


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Pass counts of the checkpoints n1..n over seeded trials, with a 95% Wilson interval."""

    estimate: RateEstimate
    params: dict

    @property
    def rate(self) -> float:
        return self.estimate.rate

    def to_row(self) -> dict:
        return {**self.params, **self.estimate._asdict()}


def checkpoint_failures(probs, coef, center, n1: int, n: int, trials: int, seed: int, offset: int = 0,
                        strict: bool = False, workers: int = 1, stream: int = 0, cap: int = MC_CAP) -> list[int]:
    """First failing checkpoint (n + 1 when none fails) for every trial."""
    if not 1 <= n1 <= n:
        raise PreconditionError("need 1 <= n1 <= n")
    if 4**n > cap:
        raise CapExceeded(f"4^{n} exceeds the sampling cap {cap}")
    if trials < 1:
        raise PreconditionError("trials must be positive")
    fn = partial(_checkpoint_trial, probs=tuple(probs), coef=tuple(coef), center=center, n1=n1, n=n,
                 offset=offset, strict=strict, seed=seed, stream=stream)
    return map_trials(fn, trials, workers)


def montecarlo_pass_rate(P: FiniteProbabilitySpace, a, n1: int, n: int, trials: int, seed: int,
                         workers: int = 1, stream: int = 0, cap: int = MC_CAP) -> MonteCarloEstimate:
    """Fraction of sampled prefixes of length 4^n with |N_a(4^k) - 4^k P(a)| <= 2^k for all n1 <= k <= n."""
    ai, p = _symbol_probability(P, a)
    coef = [Fraction(int(i == ai)) for i in range(len(P))]
    fails = checkpoint_failures(P.probs, coef, p, n1, n, trials, seed, 0, False, workers, stream, cap)
    passes = sum(f > n for f in fails)
    params = {"symbol": P.names[ai], "p": str(p), "n1": n1, "n": n, "seed": seed}
    return MonteCarloEstimate(wilson(passes, trials), params)


def rv_montecarlo_pass_rate(P: FiniteProbabilitySpace, X: RealRandomVariable, n1: int, n: int, trials: int,
                            seed: int, workers: int = 1, stream: int = 0, cap: int = MC_CAP) -> MonteCarloEstimate:
    """Same with partial sums of X and the strict band |S_{4^k} - 4^k E(X)| < 2^(k+1)."""
    if P.mode != "exact" or not X.exact:
        raise PreconditionError("rational X and exact P required")
    _require_positive_variance(P, X)
    mu = rv_mean(P, X)
    fails = checkpoint_failures(P.probs, X.values, mu, n1, n, trials, seed, 1, True, workers, stream, cap)
    passes = sum(f > n for f in fails)
    params = {"X": ",".join(str(x) for x in X.values), "n1": n1, "n": n, "seed": seed}
    return MonteCarloEstimate(wilson(passes, trials), params)
