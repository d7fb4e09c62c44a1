"""Certified tail bounds.

Every transcendental value that ends up in a ``BoundCertificate`` is computed
in ``mpmath.iv`` interval arithmetic; the certificate stores the upper endpoint
rounded up to the next double.  Two-sided quantities (normal band, geometric
tail) are reported as enclosures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import mpmath
from mpmath import iv

from .core import Interval, iv_enclosure, iv_precision, iv_from_fraction, mpf_to_fraction, to_fraction
from .schedule import f_threshold, power_at_least, smallest_power_at_least

IV_PREC = 128


class PreconditionError(ValueError):
    """Parameters fall outside the range where the bound is valid."""


class ConvergenceError(ArithmeticError):
    """An iteration cap was hit before reaching the requested tolerance."""


def round_up(x) -> float:
    """Smallest double >= x (x a Fraction or int)."""
    x = Fraction(x)
    try:
        f = float(x)
    except OverflowError:
        return math.inf
    if Fraction(f) < x:
        f = math.nextafter(f, math.inf)
    return f


def round_down(x) -> float:
    x = Fraction(x)
    f = float(x)
    if Fraction(f) > x:
        f = math.nextafter(f, -math.inf)
    return f


def _upper(value) -> Fraction:
    return iv_enclosure(value)[1]


def _jsonable(v):
    if isinstance(v, Fraction):
        if max(v.numerator.bit_length(), v.denominator.bit_length()) > 128:
            return float(v)
        return str(v) if v.denominator != 1 else v.numerator
    if isinstance(v, Interval):
        return [str(v.lo), str(v.hi)]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


@dataclass(frozen=True)
class BoundCertificate:
    """An upper bound together with the inequality chain that justifies it."""

    quantity: str
    value: float
    derivation: tuple = ()
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "value": self.value,
            "derivation": [dict(step) for step in self.derivation],
            "params": _jsonable(self.params),
        }

    def below(self, target) -> bool:
        """Exact test value < target."""
        return Fraction(self.value) < to_fraction(target)


def _step(rule: str, **detail) -> dict:
    return {"rule": rule, **{k: _jsonable(v) for k, v in detail.items()}}


def chernoff_tail(q, eps, n: int) -> BoundCertificate:
    """2 exp(-eps^2 n / 2) for the binary deviation event |N_1/n - q| > eps."""
    q, eps = to_fraction(q), to_fraction(eps)
    if not 0 < q < 1:
        raise PreconditionError(f"q={q} must lie in (0,1)")
    if not 0 < eps <= min(q, 1 - q):
        raise PreconditionError(f"need 0 < eps <= min(q, 1-q); got eps={eps}, q={q}")
    if n < 0:
        raise PreconditionError("n must be nonnegative")
    with iv_precision(IV_PREC):
        val = 2 * iv.exp(-iv_from_fraction(eps * eps * n / 2))
    return BoundCertificate(
        quantity=f"P(|N_1/n - q| > eps), n={n}",
        value=round_up(_upper(val)),
        derivation=(_step("chernoff", formula="2*exp(-eps^2*n/2)"),),
        params={"q": q, "eps": eps, "n": n},
    )


def hoeffding_tail(a, b, eps, n: int) -> BoundCertificate:
    """2 exp(-2 eps^2 n / (b-a)^2) for |S_n/n - mu| >= eps with a <= X <= b."""
    a, b, eps = to_fraction(a), to_fraction(b), to_fraction(eps)
    if a >= b:
        raise PreconditionError(f"need a < b; got a={a}, b={b}")
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    if n < 0:
        raise PreconditionError("n must be nonnegative")
    expo = 2 * eps * eps * n / (b - a) ** 2
    if expo == 0:
        value = 2.0
    else:
        with iv_precision(IV_PREC):
            value = round_up(_upper(2 * iv.exp(-iv_from_fraction(expo))))
    return BoundCertificate(
        quantity=f"P(|S_n/n - mu| >= eps), n={n}",
        value=value,
        derivation=(_step("hoeffding", formula="2*exp(-2*eps^2*n/(b-a)^2)"),),
        params={"a": a, "b": b, "eps": eps, "n": n},
    )


class GeometricTail(NamedTuple):
    exact: float
    majorant: float


def _geometric_iv(n: int, L: int, c: Fraction):
    x = iv_from_fraction(Fraction(1) / (c * n * n))
    return iv.exp(-(L + 1) * x) / -iv.expm1(-x)


def geometric_tail(n: int, L: int, c=1) -> GeometricTail:
    """Sum over k > L of exp(-k/(c n^2)) in closed form, and its majorant.

    The majorant c n^2 exp(-L/(c n^2)) follows from e^x - 1 >= x.
    """
    c = to_fraction(c)
    if n < 1 or L < 0 or c <= 0:
        raise PreconditionError("need n >= 1, L >= 0, c > 0")
    with iv_precision(IV_PREC):
        exact = Interval(*iv_enclosure(_geometric_iv(n, L, c)))
        cn2 = c * n * n
        major = iv_from_fraction(cn2) * iv.exp(-iv_from_fraction(Fraction(L) / cn2))
    return GeometricTail(float(exact.mid), round_up(_upper(major)))


def _upper_gamma_mpf(x, y, abs_tol, rel_tol, max_iter):
    """Series below y = x + 1, modified Lentz continued fraction above."""
    if y == 0:
        return mpmath.gamma(x), 0
    log_pref = -y + x * mpmath.log(y)
    pref = mpmath.exp(log_pref)
    if y < x + 1:
        term = 1 / x
        total = term
        for i in range(1, max_iter + 1):
            term *= y / (x + i)
            total += term
            ratio = y / (x + i + 1)
            remainder = pref * term * ratio / (1 - ratio)
            value = mpmath.gamma(x) - pref * total
            if remainder <= max(abs_tol, rel_tol * abs(value)):
                return value, i
        raise ConvergenceError(f"series for Gamma({x}, {y}) did not converge in {max_iter} terms")
    tiny = mpmath.mpf(2) ** (-2 * mpmath.mp.prec)
    b = y + 1 - x
    c = 1 / tiny
    d = 1 / b
    h = d
    for i in range(1, max_iter + 1):
        an = -i * (i - x)
        b += 2
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1 / d
        delta = d * c
        h *= delta
        err = abs(delta - 1) * abs(pref * h)
        if err <= max(abs_tol, rel_tol * abs(pref * h)):
            return pref * h, i
    raise ConvergenceError(f"continued fraction for Gamma({x}, {y}) did not converge in {max_iter} terms")


def upper_incomplete_gamma(x, y, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Gamma(x, y) = integral from y to infinity of t^(x-1) e^-t dt, to absolute tol.

    Regime switch at y = x + 1: below it the power series for the lower
    function is subtracted from Gamma(x); at or above it a continued fraction
    is used.  Working precision grows with log2(Gamma(x)/tol).
    """
    x, y = mpmath.mpf(x), mpmath.mpf(y)
    if x <= 0:
        raise PreconditionError("x must be positive")
    if y < 0:
        raise PreconditionError("y must be nonnegative")
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    scale = max(1.0, float(mpmath.log(mpmath.gamma(x), 2)))
    bits = int(64 + scale + max(0.0, -math.log2(tol)))
    with mpmath.workprec(bits):
        value, _ = _upper_gamma_mpf(x, y, mpmath.mpf(tol) / 4, 0, max_iter)
    return float(value)


def _gamma_upper_bound(x: Fraction, y_lo: Fraction) -> Fraction:
    """Rational upper bound on Gamma(x, y) for every y >= y_lo.

    Evaluated at relative accuracy 2^-100 and then inflated by 2^-60.
    """
    with mpmath.workprec(200):
        xm = mpmath.mpf(x.numerator) / x.denominator
        ym = mpmath.mpf(y_lo.numerator) / y_lo.denominator
        value, _ = _upper_gamma_mpf(xm, ym, 0, mpmath.mpf(2) ** -100, 1_000_000)
        return mpf_to_fraction(value) * (1 + Fraction(1, 1 << 60))


def _check_double_tail(g: int, eps: Fraction, c: Fraction):
    if g < 1:
        raise PreconditionError("g must be positive")
    if eps <= 0 or c <= 0:
        raise PreconditionError("eps and c must be positive")
    if not power_at_least(g, eps, 2 * c / eps):
        raise PreconditionError(f"monotonicity threshold g^eps >= 2c/eps fails for g={g}, eps={eps}, c={c}")


def double_tail_bound(g: int, eps, c=1, head: int = 16) -> BoundCertificate:
    """Upper bound on sum_{n >= g} sum_{k >= ceil(n^(2+eps))} exp(-k/(c n^2)).

    Rows n = g .. g+head are summed in closed form.  For n > N = g+head the
    row is at most c e^{1/(cN^2)} n^2 exp(-n^eps/c); that profile decreases
    once n^eps >= 2c/eps, so the rest is at most the integral from N, which
    equals c^{3/eps}/eps * Gamma(3/eps, N^eps/c).  The bound is strictly
    decreasing in g.
    """
    eps, c = to_fraction(eps), to_fraction(c)
    _check_double_tail(g, eps, c)
    N = g + head
    with iv_precision(IV_PREC):
        rows = iv.mpf(0)
        for n in range(g, N + 1):
            rows += _geometric_iv(n, f_threshold(n, eps) - 1, c)
        log_c = iv.log(iv_from_fraction(c))
        y = iv.exp(iv_from_fraction(eps) * iv.log(N)) / iv_from_fraction(c)
        y_lo = iv_enclosure(y)[0]
        gamma = iv_from_fraction(_gamma_upper_bound(3 / eps, y_lo))
        tail = (iv_from_fraction(c) * iv.exp(iv_from_fraction(Fraction(1) / (c * N * N)))
                * iv.exp(iv_from_fraction(3 / eps) * log_c) / iv_from_fraction(eps) * gamma)
        total = rows + tail
    rows_hi, tail_hi = _upper(rows), _upper(tail)
    return BoundCertificate(
        quantity=f"sum_{{n>={g}}} sum_{{k>=ceil(n^(2+eps))}} exp(-k/(c n^2))",
        value=round_up(_upper(total)),
        derivation=(
            _step("geometric-closed-form", rows=[g, N], formula="exp(-f(n)/(cn^2))/(1-exp(-1/(cn^2)))"),
            _step("row-majorant", formula="c*exp(1/(cN^2))*n^2*exp(-n^eps/c)"),
            _step("integral-comparison", threshold="n^eps >= 2c/eps"),
            _step("incomplete-gamma", formula="c^(3/eps)/eps*Gamma(3/eps, N^eps/c)", x=3 / eps, y_lower=y_lo),
        ),
        params={"g": g, "eps": eps, "c": c, "head": head, "rows_upper": float(rows_hi),
                "tail_upper": float(tail_hi)},
    )


def monotonicity_threshold(eps, c=1) -> int:
    """Smallest g with g^eps >= 2c/eps."""
    eps, c = to_fraction(eps), to_fraction(c)
    return smallest_power_at_least(eps, 2 * c / eps)


def find_g(m: int, eps, c=1, floor: int = 1, cap: int = 10**7, target=None) -> int:
    """Smallest g >= max(floor, threshold) whose double-tail certificate is < 2^-(m+1).

    ``target`` overrides 2^-(m+1).  The certificate is decreasing in g, so
    galloping followed by bisection returns the same g as a linear scan.
    """
    if m < 1 and target is None:
        raise PreconditionError("m must be positive")
    eps, c = to_fraction(eps), to_fraction(c)
    goal = Fraction(1, 1 << (m + 1)) if target is None else to_fraction(target)
    lo = max(floor, monotonicity_threshold(eps, c), 1)

    def ok(g):
        return double_tail_bound(g, eps, c).below(goal)

    if ok(lo):
        return lo
    step, hi = 1, lo + 1
    while not ok(hi):
        lo = hi
        step *= 2
        hi = lo + step
        if hi > cap:
            raise ConvergenceError(f"no g below cap {cap} reaches {goal}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def normal_band_enclosure(l_squared) -> Interval:
    """Enclosure of P(|Z| <= l) for standard normal Z, given l^2 exactly.

    erf is evaluated by mpmath at 200 bits and widened by 2^-150 on each
    side (mpmath's interval context does not converge for erf).
    """
    l_squared = to_fraction(l_squared)
    if l_squared < 0:
        raise PreconditionError("band half-width must be real")
    if l_squared == 0:
        return Interval.point(0)
    with mpmath.workprec(200):
        arg = mpmath.sqrt(mpmath.mpf(l_squared.numerator) / (2 * l_squared.denominator))
        mid = mpf_to_fraction(mpmath.erf(arg))
    margin = Fraction(1, 1 << 150)
    return Interval(max(Fraction(0), mid - margin), min(Fraction(1), mid + margin))


def normal_band(l, tol: float = 1e-15) -> float:
    """Integral of the standard normal density over [-l, l]."""
    if l == math.inf:
        return 1.0
    lf = to_fraction(l)
    if lf < 0:
        raise PreconditionError("l must be nonnegative")
    box = normal_band_enclosure(lf * lf)
    if float(box.width) > tol:
        raise ConvergenceError("normal band enclosure wider than tol")
    return float(box.mid)


def _r_above(band: Interval, slack, denominator: int) -> Fraction:
    slack = to_fraction(slack)
    if not 0 <= slack < 1:
        raise PreconditionError("slack must lie in [0, 1)")
    while True:
        aim = band.hi + slack * (1 - band.hi)
        r = Fraction(math.ceil(aim * denominator), denominator)
        if r == aim:
            r += Fraction(1, denominator)
        if band.hi < r < 1:
            return r
        denominator *= 10


def clt_r(p, slack=Fraction(1, 2), denominator: int = 10**6) -> Fraction:
    """Rational r strictly between P(|Z| <= sqrt(3/(pq))) and 1.

    r is the point a fraction ``slack`` of the way from the band integral to
    1, rounded up to a multiple of 1/denominator.  slack=0 gives the smallest
    such rational above the integral.
    """
    p = to_fraction(p)
    if not 0 < p < 1:
        raise PreconditionError("p must lie in (0,1)")
    return _r_above(normal_band_enclosure(3 / (p * (1 - p))), slack, denominator)


def clt_r_general(v, band_offset: int = 1, slack=Fraction(1, 2), denominator: int = 10**6) -> Fraction:
    """Same as clt_r for a variance v with band 2^(k + band_offset) at 4^k.

    The segment band then has half-width 2^band_offset * sqrt(3/v) in
    standard units.
    """
    v = to_fraction(v)
    if v <= 0:
        raise PreconditionError("variance must be positive")
    return _r_above(normal_band_enclosure(4**band_offset * 3 / v), slack, denominator)
