"""Finite probability spaces, words, cylinder measures and symbol reductions.

Probabilities are exact ``Fraction`` values by default.  Interval mode keeps a
``ComputableReal`` per symbol and answers every question with an ``Interval``
whose endpoints are exact rationals; a comparison that cannot be settled
within the precision budget raises ``UndecidedComparison``.
"""
from __future__ import annotations

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Sequence

import numpy as np
from mpmath import iv
from mpmath.libmp import to_rational

DEFAULT_PRECISION_BITS = 64


class SymbolError(ValueError):
    """A symbol is not part of the declared alphabet."""


class UndecidedComparison(ArithmeticError):
    """A comparison stayed ambiguous after refining to the precision budget."""


def to_fraction(x) -> Fraction:
    """Parse ints, Fractions, "num/den" strings and decimal strings exactly.

    Floats are accepted through their decimal repr, so 0.1 means 1/10.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot read {x!r} as an exact rational")


def mpf_to_fraction(raw) -> Fraction:
    """Exact value of an mpmath number (or raw mpf tuple)."""
    if hasattr(raw, "_mpf_"):
        raw = raw._mpf_
    p, q = to_rational(raw)
    return Fraction(int(p), int(q))


def iv_enclosure(value) -> tuple[Fraction, Fraction]:
    """Endpoints of an ``mpmath.iv`` interval as exact Fractions."""
    lo, hi = value._mpi_
    return mpf_to_fraction(lo), mpf_to_fraction(hi)


@contextmanager
def iv_precision(bits: int):
    """Temporarily set the working precision of ``mpmath.iv``."""
    saved = iv.prec
    iv.prec = bits
    try:
        yield
    finally:
        iv.prec = saved


def iv_from_fraction(q: Fraction):
    q = Fraction(q)
    return iv.mpf(q.numerator) / iv.mpf(q.denominator)


def _dyadic_floor(x: Fraction, bits: int) -> Fraction:
    scale = 1 << bits
    return Fraction(math.floor(x * scale), scale)


def _dyadic_ceil(x: Fraction, bits: int) -> Fraction:
    scale = 1 << bits
    return Fraction(math.ceil(x * scale), scale)


@dataclass(frozen=True)
class Interval:
    """Closed interval with exact rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", to_fraction(self.lo))
        object.__setattr__(self, "hi", to_fraction(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x) -> "Interval":
        x = to_fraction(x)
        return cls(x, x)

    @staticmethod
    def coerce(x) -> "Interval":
        return x if isinstance(x, Interval) else Interval.point(x)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def __contains__(self, x) -> bool:
        return self.lo <= to_fraction(x) <= self.hi

    def __float__(self) -> float:
        return float(self.mid)

    def __add__(self, other):
        o = Interval.coerce(other)
        return Interval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-Interval.coerce(other))

    def __rsub__(self, other):
        return Interval.coerce(other) - self

    def __mul__(self, other):
        o = Interval.coerce(other)
        ends = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(min(ends), max(ends))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Interval.coerce(other)
        if o.lo <= 0 <= o.hi:
            raise ZeroDivisionError("divisor interval contains 0")
        return self * Interval(1 / o.hi, 1 / o.lo)

    def square(self) -> "Interval":
        if self.lo >= 0:
            return Interval(self.lo**2, self.hi**2)
        if self.hi <= 0:
            return Interval(self.hi**2, self.lo**2)
        return Interval(0, max(self.lo**2, self.hi**2))

    def abs(self) -> "Interval":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(0, max(-self.lo, self.hi))

    def sign(self) -> int:
        """-1, 0 or 1; raises UndecidedComparison when 0 is strictly inside."""
        if self.lo > 0:
            return 1
        if self.hi < 0:
            return -1
        if self.lo == self.hi == 0:
            return 0
        raise UndecidedComparison(f"sign of [{float(self.lo)}, {float(self.hi)}] is undecided")

    def outward(self, bits: int) -> "Interval":
        """Round endpoints outward to multiples of 2^-bits to keep denominators small."""
        return Interval(_dyadic_floor(self.lo, bits), _dyadic_ceil(self.hi, bits))

    def __str__(self):
        if self.is_point:
            return str(self.lo)
        return f"[{float(self.lo)!r}, {float(self.hi)!r}]"


class ComputableReal:
    """A real given by rational approximations: |x - approx(k)| <= 2^-k.

    ``exact`` is set when the value is known to be a specific rational, which
    lets zero tests succeed without refinement.
    """

    def __init__(self, approx: Callable[[int], Fraction], exact: Fraction | None = None, label: str = ""):
        self._approx = approx
        self._cache: dict[int, Fraction] = {}
        self.exact = None if exact is None else to_fraction(exact)
        self.label = label

    @classmethod
    def from_rational(cls, q) -> "ComputableReal":
        q = to_fraction(q)
        return cls(lambda k: q, exact=q, label=str(q))

    @classmethod
    def from_mpmath(cls, expr: Callable, label: str = "") -> "ComputableReal":
        """Wrap an expression evaluated in ``mpmath.iv`` interval arithmetic.

        ``expr`` receives the ``iv`` context and returns an interval; precision
        is raised until the enclosure is narrower than 2^-k.
        """

        def approx(k: int) -> Fraction:
            prec = k + 20
            for _ in range(16):
                with iv_precision(prec):
                    lo, hi = iv_enclosure(expr(iv))
                if hi - lo <= Fraction(1, 1 << k):
                    return (lo + hi) / 2
                prec *= 2
            raise UndecidedComparison(f"could not approximate {label or expr} to 2^-{k}")

        return cls(approx, label=label)

    def approx(self, k: int) -> Fraction:
        if self.exact is not None:
            return self.exact
        if k not in self._cache:
            self._cache[k] = to_fraction(self._approx(k))
        return self._cache[k]

    def enclosure(self, k: int) -> Interval:
        if self.exact is not None:
            return Interval.point(self.exact)
        a = self.approx(k)
        eps = Fraction(1, 1 << k)
        return Interval(a - eps, a + eps)

    def sign(self, budget: int) -> int:
        """Refine by doubling precision up to ``budget`` bits until the sign is clear."""
        if self.exact is not None:
            return (self.exact > 0) - (self.exact < 0)
        k = 8
        while True:
            box = self.enclosure(min(k, budget))
            if box.lo > 0:
                return 1
            if box.hi < 0:
                return -1
            if k >= budget:
                raise UndecidedComparison(
                    f"sign of {self.label or 'computable real'} undecided at {budget} bits"
                )
            k *= 2

    def __repr__(self):
        return f"ComputableReal({self.label or '...'})"


def enclose(x, bits: int) -> Interval:
    """Interval for a Fraction, Interval or ComputableReal at ``bits`` of precision."""
    if isinstance(x, Interval):
        return x
    if isinstance(x, ComputableReal):
        return x.enclosure(bits)
    return Interval.point(x)


def sign_of(x, budget: int) -> int:
    if isinstance(x, ComputableReal):
        return x.sign(budget)
    if isinstance(x, Interval):
        return x.sign()
    x = to_fraction(x)
    return (x > 0) - (x < 0)


class FiniteProbabilitySpace:
    """Alphabet of named symbols with one probability per symbol.

    Symbols are referenced internally by their index; ``names`` holds the
    user-facing identifiers (strings).
    """

    def __init__(self, symbols: Sequence, probs: Sequence, mode: str | None = None,
                 precision_bits: int = DEFAULT_PRECISION_BITS):
        names = tuple(str(s) for s in symbols)
        if not names:
            raise ValueError("alphabet must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError(f"symbols must be distinct: {names}")
        if len(probs) != len(names):
            raise ValueError(f"{len(names)} symbols but {len(probs)} probabilities")
        if mode is None:
            mode = "interval" if any(isinstance(p, ComputableReal) for p in probs) else "exact"
        if mode not in ("exact", "interval"):
            raise ValueError(f"mode must be 'exact' or 'interval', not {mode!r}")
        self.names = names
        self.mode = mode
        self.precision_bits = precision_bits
        self._index = {name: i for i, name in enumerate(names)}
        if mode == "exact":
            self.probs = tuple(to_fraction(p) for p in probs)
            if any(p < 0 for p in self.probs):
                raise ValueError(f"negative probability in {self.probs}")
            if sum(self.probs) != 1:
                raise ValueError(f"probabilities sum to {sum(self.probs)}, not 1")
        else:
            self.probs = tuple(p if isinstance(p, ComputableReal) else ComputableReal.from_rational(p)
                               for p in probs)
            boxes = [p.enclosure(precision_bits) for p in self.probs]
            if any(b.hi < 0 for b in boxes):
                raise ValueError("a probability is certainly negative")
            total = sum(boxes, Interval.point(0))
            if 1 not in total:
                raise ValueError(f"probability enclosure {total} excludes 1")

    @classmethod
    def binary(cls, q, names=("0", "1")) -> "FiniteProbabilitySpace":
        """Two-point space with P(names[1]) = q."""
        q = q if isinstance(q, ComputableReal) else to_fraction(q)
        if isinstance(q, ComputableReal):
            other = ComputableReal(lambda k: 1 - q.approx(k), label=f"1-{q.label}")
            return cls(names, (other, q), mode="interval")
        return cls(names, (1 - q, q))

    @classmethod
    def uniform(cls, n: int) -> "FiniteProbabilitySpace":
        return cls([str(i) for i in range(n)], [Fraction(1, n)] * n)

    @classmethod
    def from_manifest(cls, data: dict) -> "FiniteProbabilitySpace":
        try:
            symbols = data["symbols"]
            probs = [to_fraction(p) for p in data["probs"]]
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"malformed alphabet manifest: {exc}") from exc
        return cls(symbols, probs)

    @classmethod
    def load(cls, path) -> "FiniteProbabilitySpace":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"malformed alphabet manifest {path}: {exc}") from exc
        return cls.from_manifest(data)

    def to_manifest(self) -> dict:
        if self.mode != "exact":
            raise ValueError("only exact spaces serialize to a manifest")
        return {"symbols": list(self.names), "probs": [str(p) for p in self.probs]}

    def __len__(self):
        return len(self.names)

    def __repr__(self):
        pairs = ", ".join(f"{n}:{p}" for n, p in zip(self.names, self.probs))
        return f"FiniteProbabilitySpace({pairs}; {self.mode})"

    def __eq__(self, other):
        return (isinstance(other, FiniteProbabilitySpace) and self.mode == other.mode == "exact"
                and self.names == other.names and self.probs == other.probs)

    def __hash__(self):
        return hash((self.names, self.probs)) if self.mode == "exact" else id(self)

    def index(self, symbol) -> int:
        """Index of a symbol name; ints are taken as indices directly."""
        if isinstance(symbol, (int, np.integer)) and not isinstance(symbol, bool):
            if 0 <= symbol < len(self.names):
                return int(symbol)
            raise SymbolError(f"symbol index {symbol} outside alphabet of size {len(self.names)}")
        try:
            return self._index[str(symbol)]
        except KeyError:
            raise SymbolError(f"symbol {symbol!r} not in alphabet {list(self.names)}") from None

    def prob(self, symbol):
        """Exact Fraction in exact mode; Interval at ``precision_bits`` otherwise."""
        p = self.probs[self.index(symbol)]
        return p if self.mode == "exact" else p.enclosure(self.precision_bits)

    def encode(self, word) -> tuple[int, ...]:
        """Turn a string of one-char names, or an iterable of names, into indices."""
        if isinstance(word, tuple) and all(isinstance(x, int) for x in word):
            for x in word:
                self.index(x)
            return word
        if isinstance(word, SequencePrefix):
            return word.word
        return tuple(self.index(ch) for ch in word)

    def decode(self, word: Iterable[int]) -> list[str]:
        return [self.names[i] for i in word]

    def support(self) -> tuple[int, ...]:
        """Indices with positive probability."""
        return tuple(i for i, p in enumerate(self.probs) if sign_of(p, self.precision_bits) > 0)

    def cumulative_thresholds(self) -> list[Fraction]:
        if self.mode != "exact":
            raise ValueError("sampling thresholds need exact probabilities")
        out, acc = [], Fraction(0)
        for p in self.probs:
            acc += p
            out.append(acc)
        return out


class SequencePrefix:
    """Append-only finite word with per-symbol occurrence counters.

    ``cumulative_counts()`` returns a (length+1, |alphabet|) array whose row k
    holds the counts of the first k symbols; it is rebuilt lazily.
    """

    def __init__(self, names: Sequence[str], symbols: Iterable[int] = ()):
        self.names = tuple(str(n) for n in names)
        self._buf = np.zeros(16, dtype=np.uint16 if len(self.names) > 255 else np.uint8)
        self._n = 0
        self._counts = [0] * len(self.names)
        self._cum = None
        self.extend(symbols)

    @classmethod
    def from_array(cls, names: Sequence[str], arr: np.ndarray) -> "SequencePrefix":
        s = cls(names)
        arr = np.asarray(arr)
        if arr.size and (arr.min() < 0 or arr.max() >= len(s.names)):
            raise SymbolError("symbol index outside alphabet")
        s._buf = arr.astype(s._buf.dtype, copy=True)
        s._n = int(arr.size)
        s._counts = np.bincount(s._buf[: s._n], minlength=len(s.names)).tolist()
        return s

    @classmethod
    def from_names(cls, space: FiniteProbabilitySpace, word) -> "SequencePrefix":
        return cls(space.names, space.encode(word))

    def _grow(self, need: int):
        if need > self._buf.size:
            size = max(need, 2 * self._buf.size)
            buf = np.zeros(size, dtype=self._buf.dtype)
            buf[: self._n] = self._buf[: self._n]
            self._buf = buf

    def append(self, symbol: int):
        if not 0 <= symbol < len(self.names):
            raise SymbolError(f"symbol index {symbol} outside alphabet of size {len(self.names)}")
        self._grow(self._n + 1)
        self._buf[self._n] = symbol
        self._n += 1
        self._counts[symbol] += 1
        self._cum = None

    def extend(self, symbols: Iterable[int]):
        arr = np.fromiter((int(x) for x in symbols), dtype=np.int64)
        if arr.size == 0:
            return
        if arr.min() < 0 or arr.max() >= len(self.names):
            raise SymbolError("symbol index outside alphabet")
        self._grow(self._n + arr.size)
        self._buf[self._n: self._n + arr.size] = arr
        self._n += arr.size
        for i, c in enumerate(np.bincount(arr, minlength=len(self.names))):
            self._counts[i] += int(c)
        self._cum = None

    def __len__(self):
        return self._n

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the stored symbol indices."""
        view = self._buf[: self._n]
        view.flags.writeable = False
        return view

    @property
    def word(self) -> tuple[int, ...]:
        return tuple(int(x) for x in self._buf[: self._n])

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(self._counts)

    def count(self, symbol: int) -> int:
        if not 0 <= symbol < len(self.names):
            raise SymbolError(f"symbol index {symbol} outside alphabet of size {len(self.names)}")
        return self._counts[symbol]

    def cumulative_counts(self) -> np.ndarray:
        if self._cum is None:
            cum = np.zeros((self._n + 1, len(self.names)), dtype=np.int64)
            onehot = np.zeros((self._n, len(self.names)), dtype=np.int64)
            onehot[np.arange(self._n), self._buf[: self._n]] = 1
            np.cumsum(onehot, axis=0, out=cum[1:])
            self._cum = cum
        return self._cum

    def prefix(self, n: int) -> "SequencePrefix":
        return SequencePrefix.from_array(self.names, self._buf[: min(n, self._n)])

    def text(self) -> str:
        return "".join(self.names[i] for i in self.word)

    def __eq__(self, other):
        return (isinstance(other, SequencePrefix) and self.names == other.names
                and np.array_equal(self.array, other.array))

    def __repr__(self):
        head = "".join(self.names[i] for i in self._buf[: min(self._n, 24)])
        return f"SequencePrefix(len={self._n}, {head}{'...' if self._n > 24 else ''})"


@dataclass(frozen=True)
class PrefixFreeFamily:
    """A finite set of words none of which is a proper prefix of another."""

    words: frozenset

    def __post_init__(self):
        for w in self.words:
            for j in range(len(w)):
                if w[:j] in self.words:
                    raise ValueError(f"{w!r} extends {w[:j]!r}")

    def __iter__(self):
        return iter(self.words)

    def __len__(self):
        return len(self.words)

    def __contains__(self, w):
        return w in self.words

    def covers(self, w) -> bool:
        """True when some member is a prefix of ``w``."""
        return any(w[:j] in self.words for j in range(len(w) + 1))


@dataclass(frozen=True)
class RealRandomVariable:
    """Per-symbol real values with a declared envelope |X(a)| <= L."""

    values: tuple
    envelope: Fraction

    def __post_init__(self):
        vals = tuple(v if isinstance(v, ComputableReal) else to_fraction(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        env = to_fraction(self.envelope)
        object.__setattr__(self, "envelope", env)
        for v in vals:
            box = enclose(v, DEFAULT_PRECISION_BITS)
            if box.lo < -env or box.hi > env:
                raise ValueError(f"value {v} exceeds envelope {env}")

    @classmethod
    def of(cls, values) -> "RealRandomVariable":
        vals = [to_fraction(v) for v in values]
        return cls(tuple(vals), max((abs(v) for v in vals), default=Fraction(0)))

    @classmethod
    def indicator(cls, space: FiniteProbabilitySpace, symbol) -> "RealRandomVariable":
        a = space.index(symbol)
        return cls.of([1 if i == a else 0 for i in range(len(space))])

    @property
    def exact(self) -> bool:
        return not any(isinstance(v, ComputableReal) for v in self.values)


def _check_rv(P: FiniteProbabilitySpace, X: RealRandomVariable):
    if len(X.values) != len(P):
        raise SymbolError(f"random variable has {len(X.values)} values for an alphabet of {len(P)}")


def word_measure(P: FiniteProbabilitySpace, w) -> Fraction | Interval:
    """Cylinder measure of ``w``: the product of its symbol probabilities."""
    idx = P.encode(w)
    if P.mode == "exact":
        out = Fraction(1)
        counts = np.bincount(np.asarray(idx, dtype=np.int64), minlength=len(P)) if idx else [0] * len(P)
        for p, c in zip(P.probs, counts):
            if c:
                out *= p ** int(c)
        return out
    bits = P.precision_bits + 16
    out = Interval.point(1)
    for i in idx:
        out = (out * P.probs[i].enclosure(bits)).outward(bits)
    return out


def prefix_free_reduce(S: Iterable) -> PrefixFreeFamily:
    """Minimal elements of S under the prefix order.

    The generated open set is unchanged.  Cost is linear in the total length.
    """
    words = {tuple(w) if not isinstance(w, (tuple, str)) else w for w in S}
    keep = frozenset(w for w in words if not any(w[:j] in words for j in range(len(w))))
    return PrefixFreeFamily(keep)


def family_measure(P: FiniteProbabilitySpace, S: Iterable) -> Fraction | Interval:
    """Measure of the open set generated by S (prefix-free reduction, then sum)."""
    reduced = prefix_free_reduce(P.encode(w) for w in S)
    zero = Fraction(0) if P.mode == "exact" else Interval.point(0)
    return sum((word_measure(P, w) for w in reduced), zero)


def count_occurrences(s: SequencePrefix, a) -> int:
    if isinstance(a, str):
        try:
            a = s.names.index(a)
        except ValueError:
            raise SymbolError(f"symbol {a!r} not in alphabet {list(s.names)}") from None
    return s.count(a)


def _neg_plog2_enclosure(p: Interval, prec: int) -> tuple[Fraction, Fraction]:
    if p.hi <= 0:
        return Fraction(0), Fraction(0)
    with iv_precision(prec):
        if p.lo <= 0:
            # -x log x increases on [0, 1/e], so [0, h(hi)] encloses the range
            if p.hi > Fraction(1, 3):
                raise UndecidedComparison("probability enclosure too wide for entropy")
            x = iv_from_fraction(p.hi)
            return Fraction(0), iv_enclosure(-x * iv.log(x) / iv.log(2))[1]
        x = iv.mpf([iv_from_fraction(p.lo).a, iv_from_fraction(p.hi).b])
        return iv_enclosure(-x * iv.log(x) / iv.log(2))


def _exact_neg_plog2(p: Fraction) -> Fraction | None:
    """-p log2 p when it is rational, i.e. p = 0 or p a power of two."""
    if p == 0 or p == 1:
        return Fraction(0)
    num, den = p.numerator, p.denominator
    if num & (num - 1) == 0 and den & (den - 1) == 0:
        return -p * (num.bit_length() - den.bit_length())
    return None


def shannon_entropy(P: FiniteProbabilitySpace, precision_bits: int | None = None) -> Interval:
    """H(P) in bits as an enclosure of width at most 2^-precision_bits.

    Terms with P(a) a power of two are exact, so e.g. the uniform binary space
    returns the point interval [1, 1].  Zero-probability symbols contribute 0.
    """
    bits = P.precision_bits if precision_bits is None else precision_bits
    if P.mode == "exact":
        boxes = [Interval.point(p) for p in P.probs]
    else:
        boxes = []
        for p in P.probs:
            if p.exact is not None:
                boxes.append(Interval.point(p.exact))
            elif p.sign(bits + 8) > 0:
                boxes.append(p.enclosure(bits + 8))
            else:
                raise ValueError("negative probability")
    exact_part = Fraction(0)
    pending = []
    for box in boxes:
        term = _exact_neg_plog2(box.lo) if box.is_point else None
        if term is not None:
            exact_part += term
        else:
            pending.append(box)
    if not pending:
        return Interval.point(exact_part)
    prec = bits + 30
    for _ in range(12):
        lo = hi = exact_part
        for box in pending:
            a, b = _neg_plog2_enclosure(box, prec)
            lo, hi = lo + a, hi + b
        if hi - lo <= Fraction(1, 1 << bits):
            return Interval(lo, hi)
        prec *= 2
        if P.mode != "exact":
            pending = [p.enclosure(prec) for p in P.probs if p.exact is None]
    raise UndecidedComparison(f"entropy enclosure did not reach 2^-{bits}")


def _rv_terms(P: FiniteProbabilitySpace, X: RealRandomVariable):
    _check_rv(P, X)
    if P.mode == "exact" and X.exact:
        return [(x, p) for x, p in zip(X.values, P.probs)], True
    bits = P.precision_bits
    return [(enclose(x, bits), enclose(p, bits)) for x, p in zip(X.values, P.probs)], False


def rv_mean(P: FiniteProbabilitySpace, X: RealRandomVariable) -> Fraction | Interval:
    terms, exact = _rv_terms(P, X)
    zero = Fraction(0) if exact else Interval.point(0)
    return sum((x * p for x, p in terms), zero)


def rv_variance(P: FiniteProbabilitySpace, X: RealRandomVariable) -> Fraction | Interval:
    """V(X) = sum over symbols of (X(a) - E(X))^2 P(a)."""
    terms, exact = _rv_terms(P, X)
    mu = rv_mean(P, X)
    if exact:
        return sum(((x - mu) ** 2 * p for x, p in terms), Fraction(0))
    out = sum(((x - mu).square() * p for x, p in terms), Interval.point(0))
    return Interval(max(out.lo, Fraction(0)), out.hi)


def contract(P: FiniteProbabilitySpace, s: SequencePrefix, a, b) -> tuple[FiniteProbabilitySpace, SequencePrefix]:
    """Merge symbol ``b`` into ``a``: Q(a) = P(a) + P(b), every b in s becomes a."""
    ia, ib = P.index(a), P.index(b)
    if ia == ib:
        raise ValueError("contraction needs two distinct symbols")
    if s.names != P.names:
        raise SymbolError("sequence alphabet differs from the probability space")
    keep = [i for i in range(len(P)) if i != ib]
    if P.mode == "exact":
        probs = [P.probs[i] + (P.probs[ib] if i == ia else 0) for i in keep]
    else:
        pa, pb = P.probs[ia], P.probs[ib]
        merged = ComputableReal(lambda k: pa.approx(k + 1) + pb.approx(k + 1), label=f"{pa.label}+{pb.label}")
        probs = [merged if i == ia else P.probs[i] for i in keep]
    Q = FiniteProbabilitySpace([P.names[i] for i in keep], probs, mode=P.mode,
                               precision_bits=P.precision_bits)
    remap = np.zeros(len(P), dtype=np.int64)
    for new, old in enumerate(keep):
        remap[old] = new
    remap[ib] = remap[ia]
    t = SequencePrefix.from_array(Q.names, remap[s.array.astype(np.int64)])
    return Q, t


def project_binary(P: FiniteProbabilitySpace, s: SequencePrefix, a) -> tuple[FiniteProbabilitySpace, SequencePrefix]:
    """Contract every symbol other than ``a`` into one, then relabel to {0, 1} with 1 = a."""
    ia = P.index(a)
    if len(P) == 1:
        raise ValueError("binary projection needs at least two symbols")
    rest = [n for i, n in enumerate(P.names) if i != ia]
    Q, t = P, s
    for name in rest[1:]:
        Q, t = contract(Q, t, rest[0], name)
    one = Q.index(P.names[ia])
    relabel = np.array([1 if i == one else 0 for i in range(2)], dtype=np.int64)
    probs = [Q.probs[1 - one], Q.probs[one]]
    B = FiniteProbabilitySpace(("0", "1"), probs, mode=Q.mode, precision_bits=Q.precision_bits)
    return B, SequencePrefix.from_array(B.names, relabel[t.array.astype(np.int64)])


def support_violations(P: FiniteProbabilitySpace, s: SequencePrefix) -> list[tuple[int, str]]:
    """Every 1-based position holding a zero-probability symbol."""
    if s.names != P.names:
        raise SymbolError("sequence alphabet differs from the probability space")
    zero = [i for i, p in enumerate(P.probs) if sign_of(p, P.precision_bits) == 0]
    if not zero:
        return []
    arr = s.array
    hits = np.flatnonzero(np.isin(arr, zero))
    return [(int(i) + 1, P.names[int(arr[i])]) for i in hits]
