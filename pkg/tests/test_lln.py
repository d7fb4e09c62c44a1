from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from effective_lln.core import ComputableReal, FiniteProbabilitySpace, RealRandomVariable, SequencePrefix, project_binary
from effective_lln.lln import aep_identity_check, aep_scan, dichotomy_experiment, lln_witness_scan, rv_witness_scan
from effective_lln.schedule import f_threshold
from effective_lln.seqio import sample_sequence

F = Fraction


def naive_scan(word, probs, coefs, eps, n_lo, n_hi):
    """Rescan every (n, k) from scratch with Fractions: (n, status, k)."""
    L = len(word)
    sums = [F(0)] * len(coefs)
    running = [[F(0)] * len(coefs)]
    for sym in word:
        sums = [s + c[sym] for s, c in zip(sums, coefs)]
        running.append(sums)
    means = [sum((p * x for p, x in zip(probs, c)), F(0)) for c in coefs]
    out = []
    for n in range(n_lo, n_hi + 1):
        f = f_threshold(n, eps)
        if f > L:
            out.append((n, "undetermined", None))
            continue
        hit = next((k for k in range(f, L + 1)
                    if any(abs(running[k][j] / k - means[j]) >= F(1, n) for j in range(len(coefs)))), None)
        out.append((n, "violated", hit) if hit else (n, "holds", None))
    return tuple(out)


@st.composite
def instances(draw):
    A = draw(st.integers(2, 4))
    weights = draw(st.lists(st.integers(1, 8), min_size=A, max_size=A))
    P = FiniteProbabilitySpace([chr(97 + i) for i in range(A)], [F(w, sum(weights)) for w in weights])
    word = draw(st.lists(st.integers(0, A - 1), min_size=0, max_size=300))
    eps = draw(st.sampled_from([F(1, 2), F(1), F(2)]))
    return P, SequencePrefix(P.names, word), eps


def test_constant_sequence_violates(fair):
    s = SequencePrefix(fair.names, [1] * 200)
    report = lln_witness_scan(s, fair, 1, 6)
    assert [v.status for v in report.verdicts] == ["holds"] + ["violated"] * 4 + ["undetermined"]
    assert report.by_n(2).k == 8 and report.candidate_M == 6


def test_alternating_sequence_holds(fair):
    s = SequencePrefix(fair.names, [0, 1] * 500)
    report = lln_witness_scan(s, fair, 1, 9, n_min=2)
    # |N_1(k)/k - 1/2| <= 1/(2k) < 1/n whenever k > n/2
    assert report.count("holds") == 8 and report.all_hold
    X = RealRandomVariable.of([-1, 1])
    assert rv_witness_scan(s, fair, X, 1, 9, n_min=2).all_hold


def test_report_rows(fair):
    report = lln_witness_scan(SequencePrefix(fair.names, [1] * 20), fair, 1, 3)
    rows = report.to_rows()
    assert rows[1]["status"] == "violated" and rows[1]["symbol"] in fair.names
    assert rows[-1]["status"] == "undetermined"


@settings(max_examples=80, deadline=None)
@given(inst=instances())
def test_frequency_scan_matches_naive(inst):
    P, s, eps = inst
    coefs = [[F(int(a == b)) for b in range(len(P))] for a in range(len(P))]
    assert lln_witness_scan(s, P, eps, 8).key() == naive_scan(s.word, P.probs, coefs, eps, 1, 8)


@settings(max_examples=80, deadline=None)
@given(inst=instances(), data=st.data())
def test_rv_scan_matches_naive(inst, data):
    P, s, eps = inst
    X = data.draw(st.lists(st.fractions(-3, 3, max_denominator=4), min_size=len(P), max_size=len(P)))
    report = rv_witness_scan(s, P, RealRandomVariable.of(X), eps, 8)
    assert report.key() == naive_scan(s.word, P.probs, [X], eps, 1, 8)


@settings(max_examples=40, deadline=None)
@given(inst=instances())
def test_indicator_rv_equals_binary_projection(inst):
    P, s, eps = inst
    a = P.names[0]
    X = RealRandomVariable.of([int(name == a) for name in P.names])
    B, t = project_binary(P, s, a)
    assert rv_witness_scan(s, P, X, eps, 8).key() == lln_witness_scan(t, B, eps, 8).key()


def test_irrational_rv_scan_agrees_with_mpmath(fair):
    root = ComputableReal.from_mpmath(lambda c: c.sqrt(2), "sqrt2")
    sqrt2 = RealRandomVariable((F(0), root), F(2))
    s = sample_sequence(fair, 3000, 5)
    report = rv_witness_scan(s, fair, sqrt2, 1, 12)
    ones = np.cumsum(s.array == 1)
    with mpmath.workdps(40):
        r2 = mpmath.sqrt(2)
        for v in report.verdicts:
            if v.status == "undetermined":
                continue
            hits = [k for k in range(v.threshold, len(s) + 1)
                    if abs(r2 * int(ones[k - 1]) / k - r2 / 2) >= mpmath.mpf(1) / v.n]
            assert (v.status == "violated") == bool(hits)
            if hits:
                assert v.k == hits[0]


def test_aep_dyadic_is_exact(quarter):
    s = sample_sequence(quarter, 5000, 11)
    res = aep_scan(s, quarter, 1, 8, n_min=3)
    assert res.positivity_ok
    assert res.report.count("undetermined") == 0
    assert aep_identity_check(quarter, s)


def test_aep_zero_probability_symbol():
    P = FiniteProbabilitySpace(["a", "b", "c"], [F(1, 2), F(1, 2), 0])
    s = SequencePrefix.from_names(P, "ab" * 10 + "c" + "ab" * 10)
    res = aep_scan(s, P, 1, 4)
    assert res.first_zero_position == 21 and not res.positivity_ok
    assert res.report.by_n(2).status == "violated"
    assert res.report.by_n(2).k == 21 and res.report.by_n(2).symbol == "c"
    assert aep_identity_check(P, s)


def test_aep_irrational_entropy(three):
    s = sample_sequence(three, 4000, 3)
    res = aep_scan(s, three, 1, 10, n_min=2)
    assert res.positivity_ok
    assert aep_identity_check(three, s, samples=5)


def test_dichotomy_rows_small(fair):
    rows = dichotomy_experiment(fair, "1", [2, 3], 6, 2000, 9, window=(2, 4), checkpoint_window=(1, 3))
    assert [r["kind"] for r in rows] == ["condition", "condition", "checkpoint"]
    for r in rows:
        assert r["wilson_lo"] <= r["rate"] <= r["wilson_hi"]
    assert rows[0]["oracle_lo"] <= rows[0]["oracle_hi"]
    assert dichotomy_experiment(fair, "1", [2], 0, 100, 1) == []
    with pytest.raises(ValueError):
        dichotomy_experiment(FiniteProbabilitySpace(["a", "b"], [1, 0]), "a", [2], 3, 100, 1)
