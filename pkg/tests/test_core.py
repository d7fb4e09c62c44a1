import itertools
import json
import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from effective_lln.core import (ComputableReal, FiniteProbabilitySpace, Interval, RealRandomVariable, SequencePrefix,
                                SymbolError, UndecidedComparison, contract, count_occurrences, family_measure,
                                prefix_free_reduce, project_binary, rv_mean, rv_variance, shannon_entropy,
                                support_violations, to_fraction, word_measure)

F = Fraction


# --------------------------------------------------------------------------
# strategies


@st.composite
def spaces(draw, min_size=1, max_size=4):
    n = draw(st.integers(min_size, max_size))
    weights = draw(st.lists(st.integers(0, 12), min_size=n, max_size=n).filter(lambda w: sum(w) > 0))
    total = sum(weights)
    return FiniteProbabilitySpace([chr(97 + i) for i in range(n)], [F(w, total) for w in weights])


def words_over(P, max_len=6):
    return st.lists(st.sampled_from(P.names), max_size=max_len).map(tuple)


# --------------------------------------------------------------------------
# rationals and intervals


def test_to_fraction_forms():
    assert to_fraction("3/8") == F(3, 8)
    assert to_fraction(0.1) == F(1, 10)
    assert to_fraction(7) == 7
    with pytest.raises(TypeError):
        to_fraction(None)


def test_interval_arithmetic():
    a, b = Interval(1, 2), Interval(-3, F(1, 2))
    assert a + b == Interval(-2, F(5, 2))
    assert a * b == Interval(-6, 1)
    assert (a - a) == Interval(-1, 1)
    assert b.abs() == Interval(0, 3)
    assert b.square() == Interval(0, 9)
    assert Interval(2, 3).sign() == 1
    with pytest.raises(ValueError):
        Interval(2, 1)


def test_computable_real_sign_escalation():
    sqrt2 = ComputableReal.from_mpmath(lambda c: c.sqrt(2), "sqrt2")
    box = sqrt2.enclosure(60)
    assert box.lo < F(14142135623730951, 10**16) < box.hi + F(1, 10**15)
    assert sqrt2.sign(64) == 1
    tiny = ComputableReal(lambda k: F(0))
    with pytest.raises(UndecidedComparison):
        tiny.sign(32)


# --------------------------------------------------------------------------
# spaces and words


def test_space_validation():
    with pytest.raises(ValueError):
        FiniteProbabilitySpace([], [])
    with pytest.raises(ValueError):
        FiniteProbabilitySpace(["a", "a"], [F(1, 2), F(1, 2)])
    with pytest.raises(ValueError):
        FiniteProbabilitySpace(["a", "b"], [F(1, 2), F(1, 3)])
    with pytest.raises(ValueError):
        FiniteProbabilitySpace(["a", "b"], [F(3, 2), F(-1, 2)])


def test_manifest_round_trip(tmp_path, three):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(three.to_manifest()))
    assert FiniteProbabilitySpace.load(path) == three
    path.write_text('{"symbols": ["a"]}')
    with pytest.raises(ValueError, match="malformed"):
        FiniteProbabilitySpace.load(path)


def test_interval_mode_space():
    third = ComputableReal.from_mpmath(lambda c: c.mpf(1) / 3, "1/3")
    P = FiniteProbabilitySpace.binary(third)
    assert P.mode == "interval"
    m = word_measure(P, "11")
    assert F(1, 9) in m and m.width < F(1, 2**60)


def test_word_measure_examples(fair, quarter):
    assert word_measure(fair, "0101") == F(1, 16)
    assert word_measure(fair, "") == 1
    assert word_measure(quarter, "ab") == F(3, 16)
    with pytest.raises(SymbolError):
        word_measure(fair, "012")


def test_family_measure_examples(fair, quarter):
    assert family_measure(fair, {"0", "1"}) == 1
    assert family_measure(fair, {"0", "01"}) == F(1, 2)
    assert family_measure(quarter, {"a", "ba"}) == F(7, 16)
    assert family_measure(fair, set()) == 0


def test_prefix_free_reduce_examples():
    assert set(prefix_free_reduce({"0", "01", "1"})) == {"0", "1"}
    assert len(prefix_free_reduce(set())) == 0
    assert set(prefix_free_reduce({"01", "0110", "10"})) == {"01", "10"}


def test_count_occurrences_examples(fair, three):
    assert count_occurrences(SequencePrefix.from_names(fair, "0110"), "1") == 2
    assert count_occurrences(SequencePrefix(fair.names), "0") == 0
    assert count_occurrences(SequencePrefix.from_names(three, "aab"), "c") == 0
    with pytest.raises(SymbolError):
        count_occurrences(SequencePrefix.from_names(three, "aab"), "z")


def test_sequence_prefix_counters_incremental(three):
    s = SequencePrefix(three.names)
    for sym in [0, 1, 1, 2, 0, 1]:
        s.append(sym)
    assert s.counts == (2, 3, 1)
    assert s.cumulative_counts()[4].tolist() == [1, 2, 1]
    assert s.prefix(3).text() == "abb"


def test_entropy_examples(fair, quarter):
    assert shannon_entropy(fair) == Interval.point(1)
    assert shannon_entropy(FiniteProbabilitySpace(["a", "b"], [1, 0])) == Interval.point(0)
    H = shannon_entropy(quarter, 60)
    with mpmath.workdps(40):
        oracle = -(mpmath.mpf(1) / 4) * mpmath.log(mpmath.mpf(1) / 4, 2) - (mpmath.mpf(3) / 4) * mpmath.log(
            mpmath.mpf(3) / 4, 2)
    assert abs(float(H.mid) - 0.8112781245) < 1e-10
    assert H.lo <= F(str(mpmath.nstr(oracle, 30))) + F(1, 10**25)
    assert H.hi >= F(str(mpmath.nstr(oracle, 30))) - F(1, 10**25)
    assert H.width <= F(1, 2**60)


def test_rv_moments_examples(fair, quarter):
    X = RealRandomVariable.of([0, 1])
    assert (rv_mean(fair, X), rv_variance(fair, X)) == (F(1, 2), F(1, 4))
    assert (rv_mean(quarter, X), rv_variance(quarter, X)) == (F(3, 4), F(3, 16))
    c = RealRandomVariable.of([5, 5])
    assert (rv_mean(quarter, c), rv_variance(quarter, c)) == (5, 0)


def test_contract_examples(three):
    s = SequencePrefix.from_names(three, "abc")
    Q, t = contract(three, s, "a", "b")
    assert Q.names == ("a", "c") and Q.probs == (F(5, 6), F(1, 6))
    assert t.text() == "aac"
    with pytest.raises(ValueError):
        contract(three, s, "a", "a")
    B, u = project_binary(three, SequencePrefix.from_names(three, "abcab"), "a")
    assert B.probs[1] == F(1, 2) and u.text() == "10010"


def test_support_violations_examples():
    P = FiniteProbabilitySpace(["a", "b"], [1, 0])
    assert support_violations(P, SequencePrefix.from_names(P, "aba")) == [(2, "b")]
    assert support_violations(P, SequencePrefix.from_names(P, "aaa")) == []


# --------------------------------------------------------------------------
# properties


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_family_measure_invariant_under_reduction(data):
    P = data.draw(spaces())
    S = data.draw(st.sets(words_over(P, 5), max_size=8))
    assert family_measure(P, S) == sum((word_measure(P, w) for w in prefix_free_reduce(S)), F(0))
    reduced = prefix_free_reduce(S)
    depth = max((len(w) for w in S), default=0)
    for w in itertools.product(P.names, repeat=min(depth, 3)):
        hit = any(w[:j] in S for j in range(len(w) + 1))
        assert hit == reduced.covers(w)


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_word_measure_multiplicative(data):
    P = data.draw(spaces())
    u, v = data.draw(words_over(P)), data.draw(words_over(P))
    assert word_measure(P, u + v) == word_measure(P, u) * word_measure(P, v)


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_cylinders_of_one_length_partition(data):
    P = data.draw(spaces(max_size=3))
    k = data.draw(st.integers(0, 4))
    assert sum(word_measure(P, w) for w in itertools.product(P.names, repeat=k)) == 1


@settings(max_examples=40, deadline=None)
@given(P=spaces(min_size=2))
def test_entropy_between_zero_and_log_size(P):
    H = shannon_entropy(P, 40)
    assert H.lo >= -F(1, 2**40)
    assert H.hi <= F(math.log2(len(P))) + F(1, 2**30)
    uniform = FiniteProbabilitySpace(P.names, [F(1, len(P))] * len(P))
    assert abs(float(shannon_entropy(uniform, 40).mid) - math.log2(len(P))) < 1e-9


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_variance_zero_iff_constant_on_support(data):
    P = data.draw(spaces())
    X = RealRandomVariable.of(data.draw(st.lists(st.integers(-3, 3), min_size=len(P), max_size=len(P))))
    v = rv_variance(P, X)
    assert v >= 0
    support_values = {x for x, p in zip(X.values, P.probs) if p > 0}
    assert (v == 0) == (len(support_values) == 1)


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_contract_preserves_counts(data):
    P = data.draw(spaces(min_size=2))
    a, b = data.draw(st.lists(st.sampled_from(P.names), min_size=2, max_size=2, unique=True))
    s = SequencePrefix.from_names(P, data.draw(words_over(P, 30)))
    Q, t = contract(P, s, a, b)
    assert len(t) == len(s)
    assert count_occurrences(t, a) == count_occurrences(s, a) + count_occurrences(s, b)
    assert Q.prob(a) == P.prob(a) + P.prob(b)
    X = data.draw(st.lists(st.integers(-2, 2), min_size=len(P), max_size=len(P)))
    # a frequency sum that does not distinguish a from b survives the merge
    X[P.index(b)] = X[P.index(a)]
    total_s = sum(X[i] for i in s.word)
    Xq = [X[P.index(name)] for name in Q.names]
    assert sum(Xq[i] for i in t.word) == total_s
