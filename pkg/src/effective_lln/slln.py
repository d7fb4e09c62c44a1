"""Bounded discrete i.i.d. sums: Hoeffding-certified effectivization and the checkpoint experiment."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Iterator

import numpy as np
from mpmath import iv
from scipy.stats import binom

from .bounds import (BoundCertificate, PreconditionError, _step, _upper, clt_r_general, double_tail_bound,
                     find_g, normal_band_enclosure, round_up)
from .core import (FiniteProbabilitySpace, RealRandomVariable, SequencePrefix, iv_from_fraction, iv_precision,
                   to_fraction)
from .devtests import (IV_PREC, PMF_RELATIVE_ERROR, SEGMENT_EXACT_CAP, CapExceeded, DEFAULT_CAP,
                       SegmentProbability, SpeedLimitConstants, _Lattice, _constants, berry_esseen_gap,
                       lattice_checkpoint_probability, search_n0)
from .lln import WitnessReport, _Linear, _verdicts_from_nmin
from .schedule import f_threshold
from .seqio import sample_indices
from .speedlimit import MC_CAP, checkpoint_failures
from .stats import wilson


@dataclass(frozen=True)
class BoundedDiscreteRV:
    """Finite rational support with probabilities and an envelope [a, b] containing it."""

    support: tuple
    probs: tuple
    envelope: tuple

    def __post_init__(self):
        support = tuple(to_fraction(x) for x in self.support)
        probs = tuple(to_fraction(p) for p in self.probs)
        if not support or len(support) != len(probs):
            raise PreconditionError("support and probs must be nonempty and of equal length")
        if len(set(support)) != len(support):
            raise PreconditionError("support values must be distinct")
        if any(p < 0 for p in probs) or sum(probs) != 1:
            raise PreconditionError("probabilities must be nonnegative and sum to 1")
        if self.envelope is None:
            lo, hi = min(support), max(support)
            envelope = (lo, hi) if lo < hi else (lo, lo + 1)
        else:
            envelope = tuple(to_fraction(x) for x in self.envelope)
        a, b = envelope
        if not a < b:
            raise PreconditionError("envelope needs a < b")
        if any(not a <= x <= b for x in support):
            raise PreconditionError("support must lie inside the envelope")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "envelope", envelope)

    @classmethod
    def of(cls, support, probs, envelope=None) -> "BoundedDiscreteRV":
        return cls(tuple(support), tuple(probs), envelope)

    @classmethod
    def from_json(cls, data: dict) -> "BoundedDiscreteRV":
        try:
            return cls.of(data["support"], data["probs"], data.get("envelope"))
        except KeyError as exc:
            raise PreconditionError(f"rv spec is missing {exc.args[0]!r}") from None

    @classmethod
    def load(cls, path) -> "BoundedDiscreteRV":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        return {"support": [str(x) for x in self.support], "probs": [str(p) for p in self.probs],
                "envelope": [str(x) for x in self.envelope]}

    @property
    def mean(self) -> Fraction:
        return sum((p * x for p, x in zip(self.probs, self.support)), Fraction(0))

    @property
    def variance(self) -> Fraction:
        mu = self.mean
        return sum((p * (x - mu) ** 2 for p, x in zip(self.probs, self.support)), Fraction(0))

    @property
    def third_abs_moment(self) -> Fraction:
        mu = self.mean
        return sum((p * abs(x - mu) ** 3 for p, x in zip(self.probs, self.support)), Fraction(0))

    def space(self) -> FiniteProbabilitySpace:
        return FiniteProbabilitySpace([str(x) for x in self.support], self.probs)

    def variable(self) -> RealRandomVariable:
        return RealRandomVariable(self.support, self.envelope)


@dataclass(frozen=True)
class SampleRun:
    """n draws of an rv, stored as support indices; S_k is available exactly for every k <= n."""

    rv: BoundedDiscreteRV
    seed: int
    indices: np.ndarray

    @property
    def n(self) -> int:
        return int(self.indices.size)

    def values(self) -> list[Fraction]:
        return [self.rv.support[i] for i in self.indices.tolist()]

    def partial_sum(self, k: int) -> Fraction:
        counts = np.bincount(self.indices[:k], minlength=len(self.rv.support)).tolist()
        return sum((c * x for c, x in zip(counts, self.rv.support)), Fraction(0))

    def partial_sums(self) -> Iterator[Fraction]:
        """S_0, S_1, ..., S_n, streamed."""
        total = Fraction(0)
        yield total
        for i in self.indices.tolist():
            total += self.rv.support[i]
            yield total

    def prefix(self) -> SequencePrefix:
        return SequencePrefix.from_array([str(x) for x in self.rv.support], self.indices)


def sample_iid(rv: BoundedDiscreteRV, n: int, seed: int, trial: int = 0, stream: int = 0) -> SampleRun:
    """n i.i.d. draws by exact-threshold inversion; the same sampler as sequence generation."""
    if n < 0:
        raise PreconditionError("n must be nonnegative")
    return SampleRun(rv, seed, sample_indices(rv.probs, n, seed, trial, stream))


# --------------------------------------------------------------------------
# effectivization


def hoeffding_constant(rv_or_envelope) -> Fraction:
    """c = (b - a)^2 / 2, so that the Hoeffding bound reads 2 exp(-k / (c n^2))."""
    a, b = rv_or_envelope.envelope if isinstance(rv_or_envelope, BoundedDiscreteRV) else rv_or_envelope
    return (to_fraction(b) - to_fraction(a)) ** 2 / 2


def effectivization_certificate(rv, eps, delta, cap: int = 10**7) -> tuple[int, BoundCertificate]:
    """Smallest m with 2 * double_tail_bound(m, eps, c) < delta, c = (b - a)^2 / 2.

    The certificate bounds the probability that |S_k/k - mu| >= 1/n for some
    n >= m and k >= ceil(n^(2+eps)).  It is valid for every [a, b]-bounded
    i.i.d. sequence, discrete or not.
    """
    eps, delta = to_fraction(eps), to_fraction(delta)
    if eps <= 0 or delta <= 0:
        raise PreconditionError("eps and delta must be positive")
    c = hoeffding_constant(rv)
    m = find_g(0, eps, c, cap=cap, target=delta / 2)
    inner = double_tail_bound(m, eps, c)
    value = round_up(2 * Fraction(inner.value))
    cert = BoundCertificate(
        quantity=f"P(exists n >= {m}, k >= ceil(n^(2+eps)): |S_k/k - mu| >= 1/n)",
        value=value,
        derivation=(_step("hoeffding", formula="P(|S_k/k - mu| >= 1/n) <= 2 exp(-2k/((b-a)^2 n^2))", c=c),
                    _step("union-bound", over="n >= m, k >= ceil(n^(2+eps))"),
                    *inner.derivation),
        params={"m": m, "eps": eps, "delta": delta, "c": c, "double_tail": inner.value},
    )
    if not cert.below(delta):
        raise ArithmeticError("certificate does not reach delta after outward rounding")
    return m, cert


def direct_double_sum(eps, c, g: int, n_window: int = 50, k_window: int = 10**5) -> float:
    """Lower bound on sum_{n=g}^{g+n_window-1} sum_{k=f(n)}^{f(n)+k_window-1} exp(-k/(c n^2)).

    Terms are summed one by one in floats.  A term with exponent x carries a
    relative error below (|x| + 2) 2^-52 from rounding the exponent and exp,
    so each term is shrunk by that much before the correctly rounded sum.
    """
    eps, c = to_fraction(eps), float(to_fraction(c))
    parts = []
    for n in range(g, g + n_window):
        k = np.arange(f_threshold(n, eps), f_threshold(n, eps) + k_window, dtype=np.float64)
        x = k / (c * n * n)
        parts.append(np.exp(-x) * (1 - (x + 2) * 2.0**-52))
    return math.fsum(np.concatenate(parts)) * (1 - 2.0**-52)


def as_convergence_scan(run: SampleRun, mu, eps, n_max: int, n_min: int = 1) -> WitnessReport:
    """|S_k/k - mu| < 1/n for k in [ceil(n^(2+eps)), run.n], for each n in [n_min, n_max]."""
    mu, eps = to_fraction(mu), to_fraction(eps)
    A = len(run.rv.support)
    cum = np.zeros((run.n + 1, A), dtype=np.int64)
    for a in range(A):
        np.cumsum(run.indices == a, out=cum[1:, a])
    nmin = _Linear(run.rv.support, mu).nmin(cum)
    verdicts = _verdicts_from_nmin(nmin, None, ["S"], lambda n: f_threshold(n, eps), n_min, n_max)
    return WitnessReport("eps", eps, (n_min, n_max), run.n, tuple(verdicts))


# --------------------------------------------------------------------------
# checkpoint experiment


CONVOLUTION_LIMIT = 3 * 4**12


def segment_probability(rv: BoundedDiscreteRV, n: int, cap: int = SEGMENT_EXACT_CAP,
                        limit: int = CONVOLUTION_LIMIT) -> SegmentProbability:
    """P(|S_N - N mu| <= 3 * 2^n) for N = 3 * 4^n, by support convolution.

    Exact while the lattice kernel is within the exact caps; a truncated
    float convolution estimate up to ``limit`` steps; CapExceeded beyond.
    """
    lat = _Lattice(rv.support, rv.probs)
    N, h = 3 * 4**n, Fraction(3 * 2**n)
    lo, hi = lat.y_range(N, h, False)
    if hi < lo:
        return SegmentProbability(Fraction(0), 0.0, "exact")
    if N <= cap:
        try:
            weights, d = lat.exact_kernel(N, lo, hi)
            return SegmentProbability(Fraction(sum(weights), d**N), 0.0, "exact")
        except CapExceeded:
            pass
    if lat.two_point:
        pf = float(lat.pmf[1])
        value = 1.0 - float(binom.sf(hi, N, pf)) - float(binom.cdf(lo - 1, N, pf))
        return SegmentProbability(value, 4 * PMF_RELATIVE_ERROR, "binomial-cdf")
    if N > limit:
        raise CapExceeded(f"segment of {N} steps exceeds the convolution limit {limit}")
    value, error = lat.band_mass(N, lo, hi)
    return SegmentProbability(value, error, "convolution-estimate")


def slln_constants(rv: BoundedDiscreteRV, slack=Fraction(1, 2), denominator: int = 10**6,
                   cap: int = SEGMENT_EXACT_CAP) -> SpeedLimitConstants:
    """r from the normal band sqrt(3/v) and the smallest n0 with segment probabilities < r beyond it."""
    v = rv.variance
    if v <= 0:
        raise PreconditionError("V[X_1] must be positive")
    r = clt_r_general(v, 0, slack, denominator)
    band = normal_band_enclosure(3 / v)
    with iv_precision(IV_PREC):
        vv = iv_from_fraction(v)
        ratio = _upper(iv_from_fraction(rv.third_abs_moment) / (vv * iv.sqrt(vv)))

    def gap(n):
        return berry_esseen_gap(ratio, 3 * 4**n)

    def segment(n):
        try:
            return segment_probability(rv, n, cap)
        except CapExceeded:
            return SegmentProbability(float(band.hi), 0.0, "normal-approximation")

    n0, rows, n_be = search_n0(segment, band, r, gap)
    return _constants(n0, r, band, rows, n_be, {"variance": v, "slack": slack, "denominator": denominator})


SLLN_COLUMNS = ("schema", "n1", "n", "trials", "seed", "passes", "rate", "wilson_lo", "wilson_hi",
                "dp", "dp_error", "ceiling", "n0", "r")


def slln_checkpoint_experiment(rv: BoundedDiscreteRV, n1: int, n: int, trials: int, seed: int, workers: int = 1,
                               stream: int = 0, cap: int = MC_CAP, dp_cap: int = DEFAULT_CAP,
                               constants: SpeedLimitConstants | None = None) -> list[dict]:
    """Estimates of P(|S_{4^k} - 4^k mu| <= 2^k for n1 <= k <= n') for every n' in [n1, n].

    Each row carries the support-convolution DP value when 4^n' <= dp_cap and
    the ceiling r^(n' - n1), which bounds the probability when n1 >= n0.
    """
    if rv.variance <= 0:
        raise PreconditionError("V[X_1] must be positive")
    consts = constants or slln_constants(rv)
    fails = checkpoint_failures(rv.probs, rv.support, rv.mean, n1, n, trials, seed, 0, False, workers, stream, cap)
    rows = []
    for top in range(n1, n + 1):
        est = wilson(sum(f > top for f in fails), trials)
        dp = dp_err = ""
        if 4**top <= dp_cap:
            jp = lattice_checkpoint_probability(rv.support, rv.probs, n1, top, 0, False, dp_cap)
            dp, dp_err = jp.value, jp.error
        rows.append({"schema": "slln-checkpoint/1", "n1": n1, "n": top, "trials": trials, "seed": seed,
                     "passes": est.passes, "rate": est.rate, "wilson_lo": est.wilson_lo, "wilson_hi": est.wilson_hi,
                     "dp": dp, "dp_error": dp_err, "ceiling": float(consts.r) ** (top - n1), "n0": consts.n0,
                     "r": str(consts.r)})
    return rows
