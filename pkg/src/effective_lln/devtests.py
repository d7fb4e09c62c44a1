"""Exact measures of deviation sets and finite-depth test families.

Two families are realized here:

* the LLN family S(m): words of length k >= f(n), n >= g(m), whose frequency
  of 1 deviates from q by more than 2/n;
* the checkpoint family T_m: words of length 4^F whose count of symbol a stays
  within 2^k of 4^k p at every checkpoint 4^k, n1 <= k <= F.

Measures of unions of deviation sets are computed by an exact dynamic
program over the count of ones, with integer weights over a common
power-of-denominator, so the results are exact rationals.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, Iterator, Mapping, NamedTuple

import numpy as np
from mpmath import iv
from scipy.signal import fftconvolve
from scipy.stats import binom

from .bounds import (BoundCertificate, PreconditionError, _geometric_iv, _step, _upper, clt_r,
                     double_tail_bound, find_g, normal_band_enclosure, round_up)
from .core import (ComputableReal, FiniteProbabilitySpace, Interval, RealRandomVariable, SequencePrefix,
                   SymbolError, UndecidedComparison, enclose, iv_from_fraction, iv_precision,
                   rv_mean, to_fraction)
from .schedule import ceil_power, f_threshold

DEFAULT_CAP = 4**7
SEGMENT_EXACT_CAP = 3 * 4**7
BERRY_ESSEEN_C = Fraction(4748, 10000)
# scipy's binomial pmf/cdf come from Boost's incomplete beta, accurate to a few ulps;
# we budget this much relative error per evaluated value.
PMF_RELATIVE_ERROR = 1e-13
IV_PREC = 128


class CapExceeded(ValueError):
    """A length exceeds the configured cap for exact or DP evaluation."""


class CertificateFailure(ArithmeticError):
    """A computed enclosure does not meet the guarantee it is meant to certify."""


# --------------------------------------------------------------------------
# deviation sets


@dataclass(frozen=True)
class DeviationSpec:
    """Words of length k with |N_1/k - q| > width/n (>= when strict is False)."""

    k: int
    n: int
    q: Fraction | ComputableReal
    strict: bool = True
    width: Fraction = Fraction(2)

    def __post_init__(self):
        if self.k < 1 or self.n < 1:
            raise PreconditionError("k and n must be positive")
        if not isinstance(self.q, ComputableReal):
            object.__setattr__(self, "q", to_fraction(self.q))
            if not 0 <= self.q <= 1:
                raise PreconditionError("q must lie in [0, 1]")
        object.__setattr__(self, "width", to_fraction(self.width))

    def deviates(self, j: int, budget: int = 64) -> bool:
        h = self.width / self.n
        if not isinstance(self.q, ComputableReal):
            d = abs(Fraction(j, self.k) - self.q)
            return d > h if self.strict else d >= h
        bits = 16
        while True:
            d = (Fraction(j, self.k) - self.q.enclosure(min(bits, budget))).abs()
            if d.lo > h:
                return True
            if d.hi < h:
                return False
            if bits >= budget:
                raise UndecidedComparison(f"|{j}/{self.k} - q| vs {h} undecided at {budget} bits")
            bits *= 2


def deviation_set_measure(spec: DeviationSpec, budget: int = 64) -> Fraction | Interval:
    """Exact binomial measure of the deviation set described by ``spec``."""
    k = spec.k
    js = [j for j in range(k + 1) if spec.deviates(j, budget)]
    if not isinstance(spec.q, ComputableReal):
        q = spec.q
        return sum((math.comb(k, j) * q**j * (1 - q) ** (k - j) for j in js), Fraction(0))
    qi = spec.q.enclosure(budget)
    ri = 1 - qi
    total = Interval.point(0)
    for j in js:
        term = Interval.point(math.comb(k, j))
        for _ in range(j):
            term = term * qi
        for _ in range(k - j):
            term = term * ri
        total = (total + term).outward(budget + 8)
    return total


def _alive_range(k: int, q: Fraction, half: Fraction, strict: bool) -> tuple[int, int]:
    """Counts j that do NOT deviate: |j - kq| <= half when deviation is strict, < otherwise."""
    centre = k * q
    if strict:
        lo, hi = math.ceil(centre - half), math.floor(centre + half)
    else:
        lo, hi = math.floor(centre - half) + 1, math.ceil(centre + half) - 1
    return max(lo, 0), min(hi, k)


def _binomial_weights(k: int, u: int, w: int, lo: int, hi: int) -> list[int]:
    """C(k, j) u^j w^(k-j) for j in [lo, hi], as exact integers."""
    if hi < lo:
        return []
    term = math.comb(k, lo) * u**lo * w ** (k - lo)
    out = [term]
    for j in range(lo, hi):
        term = term * (k - j) * u // ((j + 1) * w) if w else 0
        out.append(term)
    return out


def union_survival_weight(q: Fraction, k0: int, K: int,
                          alive: Callable[[int], tuple[int, int] | None]) -> Fraction:
    """P(count of ones after k steps stays in alive(k) for every k in [k0, K]).

    ``alive(k)`` returns an inclusive range or None for an unconstrained step.
    The state vector holds integer weights W(j) with P = W(j) / v^k for q = u/v.
    """
    u, v = q.numerator, q.denominator
    w = v - u
    if K < k0:
        return Fraction(1)
    rng = alive(k0) or (0, k0)
    lo, hi = max(rng[0], 0), min(rng[1], k0)
    weights = np.array(_binomial_weights(k0, u, w, lo, hi), dtype=object)
    for k in range(k0 + 1, K + 1):
        if weights.size == 0:
            return Fraction(0)
        stay = weights if w == 1 else weights * w
        move = weights if u == 1 else weights * u
        nxt = np.empty(weights.size + 1, dtype=object)
        nxt[:-1] = stay
        nxt[-1] = 0
        nxt[1:] += move
        weights, hi = nxt, hi + 1
        rng = alive(k)
        if rng is not None:
            new_lo, new_hi = max(rng[0], lo), min(rng[1], hi)
            weights = weights[new_lo - lo: new_hi - lo + 1] if new_hi >= new_lo else weights[:0]
            lo, hi = new_lo, new_hi
    return Fraction(int(weights.sum()) if weights.size else 0, v**K)


def deviation_union_measure(q, rows: Mapping[int, tuple[int, int]], width=2, strict: bool = True) -> Fraction:
    """Measure of the union over n of deviation sets at lengths k in rows[n] = (k_lo, k_hi).

    Deviation sets at a fixed length are nested in n (larger n, narrower
    band), so at each k only the largest active n matters.
    """
    q, width = to_fraction(q), to_fraction(width)
    rows = {n: (a, b) for n, (a, b) in rows.items() if a <= b}
    if not rows:
        return Fraction(0)
    k0 = min(a for a, _ in rows.values())
    K = max(b for _, b in rows.values())
    starts = sorted((a, b, n) for n, (a, b) in rows.items())

    def alive(k):
        active = [n for a, b, n in starts if a <= k <= b]
        if not active:
            return None
        return _alive_range(k, q, Fraction(k) * width / max(active), strict)

    return 1 - union_survival_weight(q, k0, K, alive)


# --------------------------------------------------------------------------
# the LLN test family S(m)


class LLNTestMeasure(NamedTuple):
    lower: Fraction
    certificate: BoundCertificate

    @property
    def upper(self) -> Fraction:
        return Fraction(self.certificate.value)

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower


def chernoff_floor(q) -> int:
    """Smallest n0 with 2/n0 <= min(q, 1-q)."""
    q = to_fraction(q)
    return math.ceil(2 / min(q, 1 - q))


def _geometric_rows_upper(ns, K: int, c: Fraction, factor: int = 2) -> Fraction:
    with iv_precision(IV_PREC):
        total = iv.mpf(0)
        for n in ns:
            total += factor * _geometric_iv(n, K, c)
        return _upper(total)


def _smallest_K(ns, start: int, goal: Fraction, c: Fraction, factor: int = 2) -> int:
    """Smallest K >= start with factor * sum_n sum_{k>K} exp(-k/(c n^2)) < goal."""
    ns = list(ns)
    if not ns:
        return start

    def ok(K):
        return _geometric_rows_upper(ns, K, c, factor) < goal

    if ok(start):
        return start
    lo, hi = start, max(start + 1, 2 * start)
    while not ok(hi):
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def lln_test_measure(m: int, eps, q, l: int, c=1, G: int | None = None, K: int | None = None) -> LLNTestMeasure:
    """Two-sided enclosure of the measure of S(m), of width < 2^-l.

    ``eps`` is the schedule exponent: f(n) = ceil(n^(2+eps)).  The exact
    part covers n in [g, G-1], k in [f(n), K]; the rows n >= G and the
    columns k > K are bounded by 2^-(l+2) each.  Raises CertificateFailure
    when the upper end is not below 2^-m.
    """
    eps, c = to_fraction(eps), to_fraction(c)
    if isinstance(q, ComputableReal):
        raise PreconditionError("lln_test_measure needs an exact q")
    q = to_fraction(q)
    if not 0 < q < 1 or m < 1 or l < 1:
        raise PreconditionError("need 0 < q < 1 and m, l >= 1")
    g = find_g(m, eps, c, floor=chernoff_floor(q))
    quarter = Fraction(1, 1 << (l + 2))
    G_min = find_g(l + 2, eps, c, floor=g)
    if G is None:
        G = G_min
    elif G < g or not (2 * Fraction(double_tail_bound(G, eps, c).value) < quarter):
        raise PreconditionError(f"G={G} does not certify the row tail below 2^-{l + 2}")
    t1 = 2 * Fraction(double_tail_bound(G, eps, c).value)
    ns = range(g, G)
    K_min = _smallest_K(ns, f_threshold(g, eps) - 1, quarter, c)
    if K is None:
        K = K_min
    elif not _geometric_rows_upper(ns, K, c) < quarter:
        raise PreconditionError(f"K={K} does not certify the column tail below 2^-{l + 2}")
    t2 = _geometric_rows_upper(ns, K, c)
    rows = {n: (f_threshold(n, eps), K) for n in ns}
    lower = deviation_union_measure(q, rows, width=2, strict=True)
    upper = lower + t1 + t2
    cert = BoundCertificate(
        quantity=f"lambda(S({m})), q={q}",
        value=round_up(upper),
        derivation=(
            _step("exact-union-dp", n=[g, G - 1], k_max=K, lower=lower),
            _step("row-tail", formula="2*double_tail_bound(G)", bound=t1),
            _step("column-tail", formula="sum_n 2*exp(-(K+1)/n^2)/(1-exp(-1/n^2))", bound=t2),
        ),
        params={"m": m, "eps": eps, "q": q, "l": l, "c": c, "g": g, "G": G, "K": K,
                "lower": float(lower), "width": float(t1 + t2)},
    )
    if not cert.below(Fraction(1, 1 << m)):
        raise CertificateFailure(f"upper end {cert.value} is not below 2^-{m}")
    if not t1 + t2 < Fraction(1, 1 << l):
        raise CertificateFailure("enclosure width is not below 2^-l")
    return LLNTestMeasure(lower, cert)


def lln_window_certificate(q, t, n_lo: int, n_hi: int, length: int, l: int = 30) -> BoundCertificate:
    """Upper bound on P(exists n in [n_lo, n_hi], k in [ceil(n^t), length] with |N_1/k - q| >= 1/n).

    Exact union DP up to a cut K, plus a Hoeffding tail
    sum_{k>K} 2 exp(-2k/n_hi^2) < 2^-l beyond it.
    """
    q, t = to_fraction(q), to_fraction(t)
    if not 0 < q < 1 or not 1 <= n_lo <= n_hi:
        raise PreconditionError("need 0 < q < 1 and 1 <= n_lo <= n_hi")
    k_last = ceil_power(n_hi, t)
    half = Fraction(1, 2)
    K = _smallest_K([n_hi], k_last, Fraction(1, 1 << l), half)
    if K >= length:
        K, tail = length, Fraction(0)
    else:
        tail = _geometric_rows_upper([n_hi], K, half)
    rows = {n: (ceil_power(n, t), min(K, length)) for n in range(n_lo, n_hi + 1)}
    lower = deviation_union_measure(q, rows, width=1, strict=False)
    return BoundCertificate(
        quantity=f"P(exists n in [{n_lo},{n_hi}], k in [ceil(n^t),{length}]: |N_1/k - q| >= 1/n)",
        value=round_up(lower + tail),
        derivation=(
            _step("exact-union-dp", k_max=K, lower=lower),
            _step("hoeffding-column-tail", formula="sum_{k>K} 2*exp(-2k/n_hi^2)", bound=tail),
        ),
        params={"q": q, "t": t, "n_lo": n_lo, "n_hi": n_hi, "length": length, "K": K,
                "lower": float(lower), "tail": float(tail)},
    )


# --------------------------------------------------------------------------
# segment probabilities and the speed-limit constants


class SegmentProbability(NamedTuple):
    value: Fraction | float
    error: float
    regime: str


def segment_band_probability(p, n: int, cap: int = SEGMENT_EXACT_CAP) -> SegmentProbability:
    """P(|Bin(3*4^n, p) - 3*4^n p| <= 3*2^n).

    Exact rational while 3*4^n <= cap; above it a float from the binomial
    CDF with a stated error allowance.
    """
    p = to_fraction(p)
    if not 0 < p < 1:
        raise PreconditionError("p must lie in (0,1)")
    N, h = 3 * 4**n, 3 * 2**n
    lo, hi = max(math.ceil(N * p - h), 0), min(math.floor(N * p + h), N)
    if N <= cap:
        u, v = p.numerator, p.denominator
        total = sum(_binomial_weights(N, u, v - u, lo, hi))
        return SegmentProbability(Fraction(total, v**N), 0.0, "exact")
    pf = float(p)
    value = 1.0 - float(binom.sf(hi, N, pf)) - float(binom.cdf(lo - 1, N, pf))
    return SegmentProbability(value, 4 * PMF_RELATIVE_ERROR, "binomial-cdf")


def berry_esseen_gap(rho_over_sigma3: Fraction, N: int) -> Fraction:
    """Upper bound on 2 C rho / (sigma^3 sqrt(N)) with C = 0.4748."""
    with iv_precision(IV_PREC):
        val = 2 * iv_from_fraction(BERRY_ESSEEN_C * rho_over_sigma3) / iv.sqrt(N)
    return _upper(val)


@dataclass(frozen=True)
class SpeedLimitConstants:
    """A pair (n0, r) with every segment band probability < r for n >= n0."""

    n0: int
    r: Fraction
    band: Interval
    segments: tuple
    certificate: BoundCertificate


def search_n0(segment: Callable[[int], SegmentProbability], band: Interval, r: Fraction,
              be_gap: Callable[[int], Fraction], n_limit: int = 64) -> tuple[int, list, int]:
    """Scan n = 1, 2, ... until the Berry-Esseen margin alone puts every later segment below r.

    Returns (n0, scanned rows, first n covered by Berry-Esseen).
    """
    rows, bad = [], 0
    for n in range(1, n_limit + 1):
        gap = be_gap(n)
        if band.hi + gap < r:
            return bad + 1, rows, n
        s = segment(n)
        below = (s.value < r) if s.regime == "exact" else (s.value + s.error < float(r) and
                                                          Fraction(s.value) + Fraction(s.error) < r)
        rows.append((n, s, below))
        if not below:
            bad = n
    raise CapExceeded(f"Berry-Esseen margin not reached by n={n_limit}")


def speed_limit_constants(p, slack=Fraction(1, 2), denominator: int = 10**6,
                          cap: int = SEGMENT_EXACT_CAP) -> SpeedLimitConstants:
    """Find r = clt_r(p) and the smallest n0 with segment probabilities < r for all n >= n0."""
    p = to_fraction(p)
    q = 1 - p
    r = clt_r(p, slack, denominator)
    band = normal_band_enclosure(3 / (p * q))
    with iv_precision(IV_PREC):
        ratio = _upper((iv_from_fraction(p * p + q * q)) / iv.sqrt(iv_from_fraction(p * q)))

    def gap(n):
        return berry_esseen_gap(ratio, 3 * 4**n)

    n0, rows, n_be = search_n0(lambda n: segment_band_probability(p, n, cap), band, r, gap)
    return _constants(n0, r, band, rows, n_be, {"p": p, "slack": slack, "denominator": denominator})


def _constants(n0, r, band, rows, n_be, params) -> SpeedLimitConstants:
    regimes = dict.fromkeys(s.regime for _, s, _ in rows)
    steps = tuple(_step(regime, n=[n for n, s, _ in rows if s.regime == regime],
                        error=max(s.error for _, s, _ in rows if s.regime == regime)) for regime in regimes)
    cert = BoundCertificate(
        quantity=f"segment band probability < r for every n >= {n0}",
        value=round_up(r),
        derivation=(*steps, _step("berry-esseen", from_n=n_be, C=BERRY_ESSEEN_C, band_upper=band.hi)),
        params={**params, "n0": n0, "r": r, "berry_esseen_from": n_be},
    )
    segments = tuple((n, s.value, s.error, s.regime, below) for n, s, below in rows)
    return SpeedLimitConstants(n0, r, band, segments, cert)


# --------------------------------------------------------------------------
# checkpoint dynamic program


@dataclass(frozen=True)
class CheckpointSpec:
    """Checkpoints |S_{4^k} - 4^k mean| <= 2^(k + offset) (strict: <) for n_lo <= k <= n_hi."""

    symbol: object
    p: Fraction
    n_lo: int
    n_hi: int | None
    band_exponent_offset: int = 0
    strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "p", to_fraction(self.p))
        if not 0 < self.p < 1:
            raise PreconditionError("p must lie in (0,1)")
        if self.n_lo < 1 or (self.n_hi is not None and self.n_hi < self.n_lo):
            raise PreconditionError("need 1 <= n_lo <= n_hi")

    def band(self, k: int) -> int:
        return 2 ** (k + self.band_exponent_offset)

    def inside(self, deviation, k: int) -> bool:
        b = self.band(k)
        return abs(deviation) < b if self.strict else abs(deviation) <= b


class JointProbability(NamedTuple):
    value: Fraction | float
    error: float


class _Lattice:
    """Sums of i.i.d. draws from rational support values, as integer lattice walks.

    After L draws the sum equals (L*base + step*Y)/den for an integer Y in [0, L*top].
    """

    def __init__(self, values, probs):
        values = [to_fraction(v) for v in values]
        probs = [to_fraction(p) for p in probs]
        keep = [(v, p) for v, p in zip(values, probs) if p > 0]
        self.mean = sum((v * p for v, p in keep), Fraction(0))
        self.den = reduce(math.lcm, (v.denominator for v, _ in keep), 1)
        ints = [int(v * self.den) for v, _ in keep]
        self.base = min(ints)
        self.step = reduce(math.gcd, (a - self.base for a in ints), 0)
        self.degenerate = self.step == 0
        idx = [0 if self.degenerate else (a - self.base) // self.step for a in ints]
        self.top = max(idx)
        self.pmf = [Fraction(0)] * (self.top + 1)
        for i, (_, p) in zip(idx, keep):
            self.pmf[i] += p
        self.two_point = self.top == 1

    def y_range(self, L: int, band: Fraction, strict: bool) -> tuple[int, int]:
        centre = L * (self.mean * self.den - self.base) / self.step
        half = band * self.den / self.step
        if strict:
            lo, hi = math.floor(centre - half) + 1, math.ceil(centre + half) - 1
        else:
            lo, hi = math.ceil(centre - half), math.floor(centre + half)
        return max(lo, 0), min(hi, L * self.top)

    def float_kernel(self, L: int, lo: int, hi: int) -> np.ndarray:
        """P(Y_L = d) for d in [lo, hi]."""
        lo, hi = max(lo, 0), min(hi, L * self.top)
        if hi < lo:
            return np.zeros(0)
        if self.two_point:
            return binom.pmf(np.arange(lo, hi + 1), L, float(self.pmf[1]))
        full = _float_power(np.array([float(x) for x in self.pmf]), L)
        return full[lo: hi + 1]

    def band_mass(self, L: int, lo: int, hi: int) -> tuple[float, float]:
        """P(lo <= Y_L <= hi) with an absolute error bound, for L too large for a full power.

        Binary powering where every intermediate Y_m keeps only the window
        |Y_m - m E(Y)| < t_m, t_m = top*sqrt(36 m).  Hoeffding bounds each
        discarded mass by 2 exp(-72).  FFT rounding is not bounded a priori:
        against exact binomial sums up to L = 3*4^9 the observed error stays
        below L*2^-56, and the reported allowance is L*2^-52.  Treat the
        result as an estimate, not a certificate.
        """
        pmf = np.array([float(x) for x in self.pmf])
        mu = float(sum(i * x for i, x in enumerate(self.pmf)))
        err = 0.0

        def trim(arr, off, m):
            nonlocal err
            t = self.top * math.sqrt(36 * m)
            a, b = max(off, math.floor(m * mu - t)), min(off + arr.size - 1, math.ceil(m * mu + t))
            if a > off or b < off + arr.size - 1:
                err += 2 * math.exp(-72)
            return arr[a - off: b - off + 1], a

        out, out_off, out_m = np.array([1.0]), 0, 0
        base, base_off, m = pmf, 0, 1
        while L:
            if L & 1:
                out = np.clip(fftconvolve(out, base), 0.0, None)
                out_off, out_m = out_off + base_off, out_m + m
                out, out_off = trim(out, out_off, out_m)
                err += PMF_RELATIVE_ERROR
            L >>= 1
            if L:
                base = np.clip(fftconvolve(base, base), 0.0, None)
                base_off, m = 2 * base_off, 2 * m
                base, base_off = trim(base, base_off, m)
                err += PMF_RELATIVE_ERROR
        a, b = max(lo, out_off), min(hi, out_off + out.size - 1)
        value = float(out[a - out_off: b - out_off + 1].sum()) if b >= a else 0.0
        return value, err + out_m * 2.0**-52

    def exact_kernel(self, L: int, lo: int, hi: int) -> tuple[list[int], int]:
        """Integer weights W(d) with P(Y_L = d) = W(d) / den^L, and den."""
        d = reduce(math.lcm, (x.denominator for x in self.pmf), 1)
        lo, hi = max(lo, 0), min(hi, L * self.top)
        if self.two_point:
            u = int(self.pmf[1] * d)
            return (_binomial_weights(L, u, d - u, lo, hi) if hi >= lo else []), d
        if L * self.top > 4**5:
            raise CapExceeded("exact kernels for supports with more than two points are capped at 4^5 steps")
        poly = np.array([int(x * d) for x in self.pmf], dtype=object)
        full = _object_power(poly, L)
        return [int(x) for x in full[lo: hi + 1]], d


def _float_power(pmf: np.ndarray, L: int) -> np.ndarray:
    out, base = np.array([1.0]), pmf
    while L:
        if L & 1:
            out = np.clip(fftconvolve(out, base), 0.0, None)
        L >>= 1
        if L:
            base = np.clip(fftconvolve(base, base), 0.0, None)
    return out


def _object_power(poly: np.ndarray, L: int) -> np.ndarray:
    out, base = np.array([1], dtype=object), poly
    while L:
        if L & 1:
            out = np.convolve(out, base)
        L >>= 1
        if L:
            base = np.convolve(base, base)
    return out


def lattice_checkpoint_probability(values, probs, n_lo: int, n_hi: int, band_offset: int = 0,
                                   strict: bool = False, cap: int = DEFAULT_CAP,
                                   exact: bool = False) -> JointProbability:
    """P(|S_{4^k} - 4^k mu| within 2^(k+band_offset) for all n_lo <= k <= n_hi).

    The state is the lattice coordinate of the partial sum, restricted to the
    band after each checkpoint; between checkpoints the segment of 3*4^k
    draws is convolved in, using only the slice of its distribution that can
    land inside the next band.  Float mode reports an a-priori error bound;
    exact mode returns a Fraction with error 0.
    """
    if 4**n_hi > cap:
        raise CapExceeded(f"4^{n_hi} exceeds the DP cap {cap}")
    lat = _Lattice(values, probs)
    if lat.degenerate:
        return JointProbability(Fraction(1) if exact else 1.0, 0.0)
    L = 4**n_lo
    lo, hi = lat.y_range(L, Fraction(2 ** (n_lo + band_offset)), strict)
    if exact:
        weights, d = lat.exact_kernel(L, lo, hi)
        cur = np.array(weights, dtype=object)
        total_len = L
    else:
        cur = lat.float_kernel(L, lo, hi)
        rel = PMF_RELATIVE_ERROR
    zero = JointProbability(Fraction(0) if exact else 0.0, 0.0)
    if hi < lo:
        return zero
    for k in range(n_lo, n_hi):
        seg, L = 3 * 4**k, 4 ** (k + 1)
        nlo, nhi = lat.y_range(L, Fraction(2 ** (k + 1 + band_offset)), strict)
        if nhi < nlo:
            return zero
        dlo, dhi = nlo - hi, nhi - lo
        kern_lo = max(dlo, 0)
        if exact:
            kern, d = lat.exact_kernel(seg, dlo, dhi)
            conv = np.convolve(cur, np.array(kern, dtype=object)) if kern else np.zeros(0, dtype=object)
            total_len += seg
        else:
            kern = lat.float_kernel(seg, dlo, dhi)
            conv = np.convolve(cur, kern) if kern.size else np.zeros(0)
            rel += PMF_RELATIVE_ERROR + (min(cur.size, kern.size) + 1) * 2.0**-53
        start = lo + kern_lo
        a, b = max(nlo, start), min(nhi, start + conv.size - 1)
        if b < a:
            return zero
        cur, lo, hi = conv[a - start: b - start + 1], a, b
    if exact:
        return JointProbability(Fraction(int(cur.sum()), d**total_len), 0.0)
    value = float(cur.sum())
    return JointProbability(value, value * (rel + cur.size * 2.0**-53))


def checkpoint_joint_probability(spec: CheckpointSpec, cap: int = DEFAULT_CAP, exact: bool = False) -> JointProbability:
    """P(all checkpoints n_lo..n_hi of a binary walk with success probability p are inside the band)."""
    if spec.n_hi is None:
        raise PreconditionError("checkpoint_joint_probability needs a finite n_hi")
    return lattice_checkpoint_probability((0, 1), (1 - spec.p, spec.p), spec.n_lo, spec.n_hi,
                                          spec.band_exponent_offset, spec.strict, cap, exact)


def rv_checkpoint_joint_probability(P: FiniteProbabilitySpace, X: RealRandomVariable, n_lo: int, n_hi: int,
                                    cap: int = DEFAULT_CAP, exact: bool = False) -> JointProbability:
    """Same DP for partial sums of X with the widened strict band 2^(k+1)."""
    if P.mode != "exact" or not X.exact:
        raise PreconditionError("the checkpoint DP needs exact P and X")
    return lattice_checkpoint_probability(X.values, P.probs, n_lo, n_hi, 1, True, cap, exact)


# --------------------------------------------------------------------------
# checkpoint membership of concrete prefixes


@dataclass(frozen=True)
class CheckpointRecord:
    k: int
    length: int
    count_or_sum: int | Fraction
    band: int
    passed: bool

    def to_dict(self) -> dict:
        v = self.count_or_sum
        if isinstance(v, Fraction):
            v = v.numerator if v.denominator == 1 else str(v)
        return {"k": self.k, "length": self.length, "count_or_sum": v, "band": self.band, "pass": self.passed}


@dataclass(frozen=True)
class CheckpointReport:
    """Per-checkpoint records for one prefix.

    ``depth_passed`` is the largest k such that every checkpoint from n_lo to
    k passes (n_lo - 1 if the first one fails).  Checkpoints beyond the
    prefix are listed in ``undetermined``.
    """

    records: tuple
    n_lo: int
    depth_passed: int
    first_failure: int | None
    undetermined: tuple = ()

    @property
    def all_passed(self) -> bool:
        return self.first_failure is None

    def passes_through(self, k: int) -> bool | None:
        """True/False when checkpoints n_lo..k are decided, None when some lie beyond the prefix."""
        if self.first_failure is not None and self.first_failure <= k:
            return False
        return True if self.depth_passed >= k else None

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)


def _report(records, n_lo, n_hi, available) -> CheckpointReport:
    first_failure = next((r.k for r in records if not r.passed), None)
    depth = (first_failure - 1) if first_failure is not None else (records[-1].k if records else n_lo - 1)
    last = n_hi if n_hi is not None else available
    undetermined = tuple(range(max(available + 1, n_lo), last + 1)) if last > available else ()
    return CheckpointReport(tuple(records), n_lo, depth, first_failure, undetermined)


def _depth(length: int) -> int:
    k = 0
    while 4 ** (k + 1) <= length:
        k += 1
    return k


def checkpoint_membership(s: SequencePrefix, spec: CheckpointSpec) -> CheckpointReport:
    """Check |N_a(prefix of length 4^k) - 4^k p| against the band for every available k."""
    a = _symbol_index(s, spec.symbol)
    arr = s.array
    available = _depth(len(s))
    top = available if spec.n_hi is None else min(spec.n_hi, available)
    records = []
    for k in range(spec.n_lo, top + 1):
        L = 4**k
        count = int(np.count_nonzero(arr[:L] == a))
        records.append(CheckpointRecord(k, L, count, spec.band(k), spec.inside(count - L * spec.p, k)))
    return _report(records, spec.n_lo, spec.n_hi, available)


def _symbol_index(s: SequencePrefix, symbol) -> int:
    if isinstance(symbol, (int, np.integer)) and not isinstance(symbol, bool):
        if 0 <= symbol < len(s.names):
            return int(symbol)
    elif str(symbol) in s.names:
        return s.names.index(str(symbol))
    raise SymbolError(f"symbol {symbol!r} not in alphabet {list(s.names)}")


def rv_checkpoint_membership(s: SequencePrefix, P: FiniteProbabilitySpace, X: RealRandomVariable,
                             spec: CheckpointSpec | None = None, n_lo: int = 1, n_hi: int | None = None,
                             budget: int = 64) -> CheckpointReport:
    """Checkpoints on partial sums of X with the strict band 2^(k+1) (or the one in ``spec``)."""
    if spec is not None:
        n_lo, n_hi = spec.n_lo, spec.n_hi
        offset, strict = spec.band_exponent_offset, spec.strict
    else:
        offset, strict = 1, True
    if len(X.values) != len(P) or s.names != P.names:
        raise SymbolError("random variable, space and sequence alphabets differ")
    mu = rv_mean(P, X)
    arr = s.array
    available = _depth(len(s))
    top = available if n_hi is None else min(n_hi, available)
    records = []
    for k in range(n_lo, top + 1):
        L = 4**k
        counts = np.bincount(arr[:L], minlength=len(P))
        band = 2 ** (k + offset)
        if X.exact and not isinstance(mu, Interval):
            total = sum((int(c) * x for c, x in zip(counts, X.values)), Fraction(0))
            dev = abs(total - L * mu)
            ok = dev < band if strict else dev <= band
        else:
            total = sum((int(c) * enclose(x, budget) for c, x in zip(counts, X.values)), Interval.point(0))
            dev = (total - L * enclose(mu, budget)).abs()
            if dev.hi < band or (not strict and dev.hi == band):
                ok = True
            elif dev.lo > band or (strict and dev.lo == band):
                ok = False
            else:
                raise UndecidedComparison(f"checkpoint {k} undecided at {budget} bits")
            total = total.mid
        records.append(CheckpointRecord(k, L, total, band, ok))
    return _report(records, n_lo, n_hi, available)


# --------------------------------------------------------------------------
# test families


@dataclass
class TestFamily:
    """One level T_m of a test, with a certificate that its measure is < 2^-m.

    ``contains(s)`` decides whether the cylinder of the prefix lies inside
    the open set of the level: True, False, or None when the prefix is too
    short to tell.  ``words()`` enumerates the level lazily and is only
    practical for tiny parameters.
    """

    __test__ = False  # not a pytest class

    kind: str
    m: int
    certificate: BoundCertificate
    params: dict = field(default_factory=dict)
    _contains: Callable = field(default=None, repr=False)
    _words: Callable = field(default=None, repr=False)

    def contains(self, s: SequencePrefix) -> bool | None:
        return self._contains(s)

    def words(self) -> Iterator[tuple[int, ...]]:
        return self._words()


def lln_test_family(m: int, eps, q, l: int = 8) -> TestFamily:
    """Level S(m) of the LLN test for the binary space with P(1) = q."""
    q, eps = to_fraction(q), to_fraction(eps)
    res = lln_test_measure(m, eps, q, l)
    g = res.certificate.params["g"]
    spec_of = {}

    def contains(s: SequencePrefix):
        ones = s.cumulative_counts()[:, 1] if len(s.names) > 1 else np.zeros(len(s) + 1, dtype=np.int64)
        n = g
        while f_threshold(n, eps) <= len(s):
            for k in range(f_threshold(n, eps), len(s) + 1):
                if abs(Fraction(int(ones[k]), k) - q) > Fraction(2, n):
                    return True
            n += 1
        return None

    def words():
        n = g
        while True:
            k = f_threshold(n, eps)
            spec_of[n] = DeviationSpec(k, n, q)
            for w in itertools.product((0, 1), repeat=k):
                if spec_of[n].deviates(sum(w)):
                    yield w
            n += 1

    return TestFamily("lln", m, res.certificate, {"g": g, "eps": eps, "q": q, "lower": res.lower},
                      contains, words)


def checkpoint_test_family(m: int, p, n1: int | None = None, constants: SpeedLimitConstants | None = None) -> TestFamily:
    """Level T_m of the checkpoint test: all checkpoints n1..F inside the band 2^k.

    F is the smallest integer >= n1 with r^(F - n1) < 2^-m.
    """
    p = to_fraction(p)
    consts = constants or speed_limit_constants(p)
    n1 = consts.n0 if n1 is None else n1
    if n1 < consts.n0:
        raise PreconditionError(f"n1={n1} is below n0={consts.n0}")
    r = consts.r
    with iv_precision(IV_PREC):
        log_r = iv.log(iv_from_fraction(r))
        steps = math.ceil(float((-m * math.log(2)) / float(log_r.a))) - 2
        steps = max(steps, 0)
        while not _upper(iv.exp(steps * log_r)) < Fraction(1, 1 << m):
            steps += 1
        value = round_up(_upper(iv.exp(steps * log_r)))
    F = n1 + steps
    spec = CheckpointSpec(1, p, n1, F)
    cert = BoundCertificate(
        quantity=f"lambda(T_{m}) for checkpoints {n1}..{F}",
        value=value,
        derivation=(_step("segment-product", formula="P(checkpoints n1..F) <= r^(F-n1)", r=r, n0=consts.n0),),
        params={"m": m, "p": p, "n1": n1, "F": F, "r": r},
    )

    def contains(s: SequencePrefix):
        report = checkpoint_membership(s, spec)
        return report.passes_through(F)

    def words():
        for w in itertools.product((0, 1), repeat=4**F):
            if contains(SequencePrefix(("0", "1"), w)):
                yield w

    return TestFamily("checkpoint", m, cert, {"n1": n1, "F": F, "r": r, "p": p}, contains, words)
