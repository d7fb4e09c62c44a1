"""Witness scans for the effectivized law of large numbers and the t = 2 dichotomy.

A scan looks at every n in a range and every k from the schedule threshold
up to the prefix length, and asks whether a deviation statistic is below 1/n.
All statistics here are linear in the symbol counts:

    dev(k) = |sum_a (N_a(k) - k P(a)) c_a| / k

with c the indicator of one symbol (frequency scans), the values of a random
variable, or -log2 P(a) (the AEP).  With P(a) = c_a'/D the comparison
dev(k) >= 1/n becomes the integer test n |T(k)| >= k D E, so for each k there
is a smallest violating n, nmin(k) = ceil(k D E / |T(k)|).  A suffix minimum
of nmin answers "is n violated somewhere beyond f(n)" in O(1) per n.
Irrational coefficients go through a float filter with a rigorous error
margin and are resolved exactly with interval arithmetic when the filter
cannot decide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial, reduce
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .core import (ComputableReal, FiniteProbabilitySpace, Interval, RealRandomVariable, SequencePrefix,
                   SymbolError, UndecidedComparison, iv_enclosure, iv_from_fraction, iv_precision,
                   to_fraction, word_measure)
from .devtests import lln_window_certificate, checkpoint_joint_probability, CheckpointSpec
from .schedule import ceil_power, f_threshold
from .seqio import map_trials, sample_indices
from .stats import wilson

__all__ = [
    "Verdict", "WitnessReport", "f_threshold", "lln_witness_scan", "rate_scan", "rv_witness_scan",
    "aep_scan", "aep_identity_check", "dichotomy_experiment",
]

INT64_SAFE = 1 << 62
NEVER = np.iinfo(np.int64).max


@dataclass(frozen=True)
class Verdict:
    """Outcome for one n: holds (so far), violated at (k, symbol), or undetermined."""

    n: int
    status: str
    threshold: int
    k: int | None = None
    symbol: str | None = None

    def to_dict(self) -> dict:
        return {"n": self.n, "status": self.status, "threshold": self.threshold, "k": self.k, "symbol": self.symbol}


@dataclass(frozen=True)
class WitnessReport:
    """Three-valued verdicts for every n in ``n_range``.

    ``candidate_M`` is the smallest M such that no n >= M in the range is
    violated by the prefix; the true threshold may be larger.
    """

    schedule: str
    parameter: Fraction
    n_range: tuple
    length: int
    verdicts: tuple

    @property
    def candidate_M(self) -> int:
        bad = [v.n for v in self.verdicts if v.status == "violated"]
        return max(bad) + 1 if bad else self.n_range[0]

    def by_n(self, n: int) -> Verdict:
        return self.verdicts[n - self.n_range[0]]

    def count(self, status: str) -> int:
        return sum(v.status == status for v in self.verdicts)

    @property
    def all_hold(self) -> bool:
        return all(v.status != "violated" for v in self.verdicts)

    def key(self) -> tuple:
        return tuple((v.n, v.status, v.k) for v in self.verdicts)

    def to_rows(self) -> list[dict]:
        base = {"schedule": self.schedule, "parameter": str(self.parameter), "length": self.length,
                "candidate_M": self.candidate_M}
        return [{**base, **v.to_dict()} for v in self.verdicts]


# --------------------------------------------------------------------------
# scan engine


def _common_denominator(values) -> int:
    return reduce(math.lcm, (Fraction(v).denominator for v in values), 1)


def _cumulative(arr: np.ndarray, A: int) -> np.ndarray:
    """(L+1, A) running symbol counts."""
    cum = np.zeros((arr.size + 1, A), dtype=np.int64)
    for a in range(A):
        np.cumsum(arr == a, out=cum[1:, a])
    return cum


class _Linear:
    """T(k) = sum_a N_a(k) e_a - k m with integer e = E*coef, m = E*center; violation iff n|T| >= kE."""

    def __init__(self, coef: Sequence[Fraction], center: Fraction):
        self.E = _common_denominator([*coef, center])
        self.e = [int(x * self.E) for x in coef]
        self.m = int(center * self.E)

    def nmin(self, cum: np.ndarray) -> np.ndarray:
        L = cum.shape[0] - 1
        k = np.arange(L + 1, dtype=np.int64)
        worst = L * (sum(abs(x) for x in self.e) + abs(self.m))
        if worst < INT64_SAFE and L * self.E < INT64_SAFE:
            T = cum @ np.array(self.e, dtype=np.int64) - k * self.m
            absT = np.abs(T)
            scale = k * self.E
            out = np.full(L + 1, NEVER, dtype=np.int64)
            nz = absT > 0
            out[nz] = -((-scale[nz]) // absT[nz])
            return out
        out = np.full(L + 1, NEVER, dtype=np.int64)
        e = [int(x) for x in self.e]
        for kk in range(1, L + 1):
            T = abs(sum(int(cum[kk, a]) * e[a] for a in range(len(e))) - kk * self.m)
            if T:
                out[kk] = min(-((-kk * self.E) // T), NEVER)
        return out


def _verdicts_from_nmin(nmin: np.ndarray, which: np.ndarray | None, labels, schedule, n_lo, n_hi) -> list[Verdict]:
    L = nmin.size - 1
    suffix = np.minimum.accumulate(nmin[::-1])[::-1]
    out = []
    for n in range(n_lo, n_hi + 1):
        f = schedule(n)
        if f > L:
            out.append(Verdict(n, "undetermined", f))
        elif suffix[f] <= n:
            k = f + int(np.argmax(nmin[f:] <= n))
            sym = labels[int(which[k])] if which is not None else labels[0]
            out.append(Verdict(n, "violated", f, k, sym))
        else:
            out.append(Verdict(n, "holds", f))
    return out


def _centered(probs, coef) -> tuple:
    return coef, sum((p * x for p, x in zip(probs, coef)), Fraction(0))


def _exact_scan(cum, stats, labels, schedule, n_lo, n_hi) -> list[Verdict]:
    """``stats`` is a list of (coefficients, center) pairs; the worst one decides."""
    stack = np.stack([_Linear(c, m).nmin(cum) for c, m in stats])
    which = np.argmin(stack, axis=0) if len(stats) > 1 else None
    return _verdicts_from_nmin(stack.min(axis=0), which, labels, schedule, n_lo, n_hi)


def _real_scan(cum, probs, coef: Sequence[ComputableReal | Fraction], label, schedule, n_lo, n_hi,
               bits: int, inf_from: int | None = None, inf_label: str | None = None) -> list[Verdict]:
    """Scan with irrational coefficients: float filter, then exact interval resolution."""
    L = cum.shape[0] - 1
    D = _common_denominator(probs)
    c = np.array([int(p * D) for p in probs], dtype=np.int64)
    k = np.arange(L + 1, dtype=np.int64)
    Y = cum * D - np.outer(k, c)
    w = np.array([float(x.approx(80)) if isinstance(x, ComputableReal) else float(x) for x in coef])
    T = Y @ w
    err = (np.abs(Y) @ np.abs(w)) * (len(w) + 2) * 2.0**-52
    absT = np.abs(T)
    scale = k.astype(np.float64) * D

    def exact_violation(kk: int, n: int) -> bool:
        for b in (bits, 2 * bits):
            total = Interval.point(0)
            for a, x in enumerate(coef):
                y = int(Y[kk, a])
                if y:
                    total = total + y * (x.enclosure(b) if isinstance(x, ComputableReal) else Interval.point(x))
            lhs = n * total.abs()
            if lhs.lo >= kk * D:
                return True
            if lhs.hi < kk * D:
                return False
        raise UndecidedComparison(f"deviation at k={kk}, n={n} undecided at {2 * bits} bits")

    out = []
    for n in range(n_lo, n_hi + 1):
        f = schedule(n)
        if f > L:
            out.append(Verdict(n, "undetermined", f))
            continue
        stop = L if inf_from is None else min(L, inf_from - 1)
        witness = None
        if f <= stop:
            maybe = np.flatnonzero(n * (absT[f: stop + 1] + err[f: stop + 1]) >= scale[f: stop + 1]) + f
            for kk in maybe:
                kk = int(kk)
                if n * (absT[kk] - err[kk]) >= scale[kk] or exact_violation(kk, n):
                    witness = (kk, label)
                    break
        if witness is None and inf_from is not None and inf_from <= L:
            witness = (max(f, inf_from), inf_label)
        if witness is None:
            out.append(Verdict(n, "holds", f))
        else:
            out.append(Verdict(n, "violated", f, witness[0], witness[1]))
    return out


def _require_exact(P: FiniteProbabilitySpace, s: SequencePrefix):
    if P.mode != "exact":
        raise ValueError("scans need an exact probability space")
    if s.names != P.names:
        raise SymbolError("sequence alphabet differs from the probability space")


def rate_scan(s: SequencePrefix, P: FiniteProbabilitySpace, schedule: Callable[[int], int], n_lo: int, n_hi: int,
              name: str, parameter) -> WitnessReport:
    """Frequency scan for every symbol with an arbitrary threshold schedule."""
    _require_exact(P, s)
    A = len(P)
    cum = s.cumulative_counts()
    coefs = [[Fraction(int(a == b)) for b in range(A)] for a in range(A)]
    verdicts = _exact_scan(cum, [_centered(P.probs, c) for c in coefs], P.names, schedule, n_lo, n_hi)
    return WitnessReport(name, to_fraction(parameter), (n_lo, n_hi), len(s), tuple(verdicts))


def lln_witness_scan(s: SequencePrefix, P: FiniteProbabilitySpace, eps, n_max: int, n_min: int = 1) -> WitnessReport:
    """max_a |N_a(k)/k - P(a)| < 1/n for k in [ceil(n^(2+eps)), len(s)], each n in [n_min, n_max]."""
    eps = to_fraction(eps)
    return rate_scan(s, P, partial(f_threshold, eps=eps), n_min, n_max, "eps", eps)


def rv_witness_scan(s: SequencePrefix, P: FiniteProbabilitySpace, X: RealRandomVariable, eps, n_max: int,
                    n_min: int = 1, precision_bits: int | None = None) -> WitnessReport:
    """|(1/k) sum_{i<=k} X(alpha(i)) - E(X)| < 1/n on the same schedule."""
    _require_exact(P, s)
    if len(X.values) != len(P):
        raise SymbolError("random variable and alphabet sizes differ")
    eps = to_fraction(eps)
    schedule = partial(f_threshold, eps=eps)
    cum = s.cumulative_counts()
    if X.exact:
        verdicts = _exact_scan(cum, [_centered(P.probs, X.values)], ["X"], schedule, n_min, n_max)
    else:
        bits = precision_bits or P.precision_bits
        verdicts = _real_scan(cum, P.probs, X.values, "X", schedule, n_min, n_max, bits)
    return WitnessReport("eps", eps, (n_min, n_max), len(s), tuple(verdicts))


# --------------------------------------------------------------------------
# AEP


def _neg_log2(p: Fraction) -> Fraction | ComputableReal:
    num, den = p.numerator, p.denominator
    if num & (num - 1) == 0 and den & (den - 1) == 0:
        return Fraction(den.bit_length() - num.bit_length())
    return ComputableReal.from_mpmath(lambda ivc: -ivc.log(iv_from_fraction(p)) / ivc.log(2), label=f"-log2({p})")


class AEPScan(NamedTuple):
    report: WitnessReport
    first_zero_position: int | None

    @property
    def positivity_ok(self) -> bool:
        return self.first_zero_position is None


def aep_scan(s: SequencePrefix, P: FiniteProbabilitySpace, eps, n_max: int, n_min: int = 1,
             precision_bits: int | None = None) -> AEPScan:
    """Positivity of every prefix measure, then |-log2 P(prefix_k)/k - H(P)| < 1/n on the schedule.

    The statistic equals sum_a (N_a(k)/k - P(a)) (-log2 P(a)).  A symbol of
    probability zero makes every later prefix measure 0, which is reported
    as the positivity failure and as a violation for every n reaching it.
    """
    _require_exact(P, s)
    eps = to_fraction(eps)
    schedule = partial(f_threshold, eps=eps)
    zero = [a for a, p in enumerate(P.probs) if p == 0]
    first_zero = None
    if zero:
        hits = np.flatnonzero(np.isin(s.array, zero))
        if hits.size:
            first_zero = int(hits[0]) + 1
    coef = [_neg_log2(p) if p > 0 else Fraction(0) for p in P.probs]
    cum = s.cumulative_counts()
    bits = precision_bits or P.precision_bits
    if all(isinstance(x, Fraction) for x in coef) and first_zero is None:
        verdicts = _exact_scan(cum, [_centered(P.probs, coef)], ["aep"], schedule, n_min, n_max)
    else:
        inf_label = P.names[int(s.array[first_zero - 1])] if first_zero else None
        verdicts = _real_scan(cum, P.probs, coef, "aep", schedule, n_min, n_max, bits, first_zero, inf_label)
    return AEPScan(WitnessReport("eps", eps, (n_min, n_max), len(s), tuple(verdicts)), first_zero)


def _factor(n: int) -> dict[int, int]:
    out, p = {}, 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def aep_identity_check(P: FiniteProbabilitySpace, s: SequencePrefix, samples: int = 12) -> bool:
    """-log2 P(prefix_k) equals the running sum of -log2 P(alpha(i)), exactly.

    Both sides are tracked as prime-exponent vectors, which makes the log
    identity an integer identity.  The running sum over positions is
    compared with the count-based vector at every k; the product it encodes
    is compared with word_measure at ``samples`` prefix lengths.
    """
    _require_exact(P, s)
    arr = s.array.astype(np.int64)
    zero = [a for a, p in enumerate(P.probs) if p == 0]
    L = len(s)
    if zero:
        hits = np.flatnonzero(np.isin(arr, zero))
        if hits.size:
            L = int(hits[0])
    factors = [(_factor(p.numerator), _factor(p.denominator)) if p > 0 else ({}, {}) for p in P.probs]
    primes = sorted({q for num, den in factors for q in (*num, *den)})
    V = np.zeros((len(P), len(primes)), dtype=np.int64)
    for a, (num, den) in enumerate(factors):
        for j, q in enumerate(primes):
            V[a, j] = num.get(q, 0) - den.get(q, 0)
    running = np.zeros((L + 1, len(primes)), dtype=np.int64)
    np.cumsum(V[arr[:L]], axis=0, out=running[1:])
    if not np.array_equal(running, s.cumulative_counts()[: L + 1] @ V):
        return False
    ks = sorted({int(x) for x in np.linspace(0, L, samples)} | {L})
    for k in ks:
        expected = Fraction(1)
        for j, q in enumerate(primes):
            expected *= Fraction(q) ** int(running[k, j])
        if word_measure(P, s.prefix(k)) != expected:
            return False
    return True


# --------------------------------------------------------------------------
# dichotomy experiment


DICHOTOMY_COLUMNS = ("schema", "kind", "t", "n_lo", "n_hi", "symbol", "length", "trials", "seed",
                     "passes", "rate", "wilson_lo", "wilson_hi", "oracle_lo", "oracle_hi")
DICHOTOMY_SCHEMA = "dichotomy/1"


def _dichotomy_trial(i: int, probs, a: int, t_grid, length: int, seed: int, window, cp_window, stream: int):
    arr = sample_indices(probs, length, seed, trial=i, stream=stream)
    A = len(probs)
    cum = _cumulative(arr, A)
    coefs = [[Fraction(int(x == b)) for b in range(A)] for x in range(A)]
    nmin = np.stack([_Linear(*_centered(probs, c)).nmin(cum) for c in coefs]).min(axis=0)
    suffix = np.minimum.accumulate(nmin[::-1])[::-1]
    passes = []
    for t in t_grid:
        ok = True
        for n in range(window[0], window[1] + 1):
            f = ceil_power(n, t)
            if f <= length and suffix[f] <= n:
                ok = False
                break
        passes.append(ok)
    p = probs[a]
    cp = True
    for k in range(cp_window[0], cp_window[1] + 1):
        L = 4**k
        if L > length:
            cp = None
            break
        if abs(int(cum[L, a]) - L * p) > 2**k:
            cp = False
            break
    return tuple(passes), cp


def dichotomy_experiment(P: FiniteProbabilitySpace, a, t_grid, trials: int, length: int, seed: int,
                         window=(4, 10), checkpoint_window=(1, 5), workers: int = 1, stream: int = 0) -> list[dict]:
    """Pass rates of the rate condition for each t, plus the embedded checkpoint subfamily.

    Condition rows: fraction of sampled prefixes with max_a |N_a(k)/k - P(a)| < 1/n
    for all n in ``window`` and k in [ceil(n^t), length].  For binary P the
    row carries an exact enclosure of the true pass probability.
    Checkpoint row: fraction with |N_a(4^k) - 4^k P(a)| <= 2^k for k in
    ``checkpoint_window``, with the DP value as oracle.
    """
    if P.mode != "exact":
        raise ValueError("the dichotomy experiment needs exact P")
    ai = P.index(a)
    p = P.probs[ai]
    if not 0 < p < 1:
        raise ValueError("P(a) must lie strictly between 0 and 1")
    t_grid = [to_fraction(t) for t in t_grid]
    if trials <= 0:
        return []
    fn = partial(_dichotomy_trial, probs=P.probs, a=ai, t_grid=tuple(t_grid), length=length, seed=seed,
                 window=tuple(window), cp_window=tuple(checkpoint_window), stream=stream)
    results = map_trials(fn, trials, workers)
    rows = []
    common = {"schema": DICHOTOMY_SCHEMA, "symbol": P.names[ai], "length": length, "trials": trials, "seed": seed}
    for j, t in enumerate(t_grid):
        passes = sum(r[0][j] for r in results)
        est = wilson(passes, trials)
        lo = hi = ""
        if len(P) == 2:
            cert = lln_window_certificate(p, t, window[0], window[1], length)
            lo, hi = max(0.0, 1 - cert.value), 1 - cert.params["lower"]
        rows.append({**common, "kind": "condition", "t": str(t), "n_lo": window[0], "n_hi": window[1],
                     "passes": passes, "rate": est.rate, "wilson_lo": est.wilson_lo, "wilson_hi": est.wilson_hi,
                     "oracle_lo": lo, "oracle_hi": hi})
    decided = [r[1] for r in results if r[1] is not None]
    if decided:
        passes = sum(decided)
        est = wilson(passes, len(decided))
        n1, n2 = checkpoint_window
        dp = checkpoint_joint_probability(CheckpointSpec(ai, p, n1, n2), exact=True).value
        rows.append({**common, "kind": "checkpoint", "t": "2", "n_lo": n1, "n_hi": n2, "trials": len(decided),
                     "passes": passes, "rate": est.rate, "wilson_lo": est.wilson_lo, "wilson_hi": est.wilson_hi,
                     "oracle_lo": float(dp), "oracle_hi": float(dp)})
    return rows
