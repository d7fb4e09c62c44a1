import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from effective_lln.bounds import PreconditionError, double_tail_bound
from effective_lln.core import FiniteProbabilitySpace
from effective_lln.devtests import speed_limit_constants
from effective_lln.seqio import sample_sequence
from effective_lln.slln import (BoundedDiscreteRV, as_convergence_scan, direct_double_sum,
                                effectivization_certificate, hoeffding_constant, sample_iid, segment_probability,
                                slln_checkpoint_experiment, slln_constants)

F = Fraction
COIN = BoundedDiscreteRV.of([0, 1], [F(1, 2), F(1, 2)])
TRI = BoundedDiscreteRV.of([0, F(1, 2), 1], [F(1, 4), F(1, 2), F(1, 4)])


def test_rv_validation_and_moments(tmp_path):
    assert (TRI.mean, TRI.variance, TRI.third_abs_moment) == (F(1, 2), F(1, 8), F(1, 16))
    assert BoundedDiscreteRV.of([3], [1]).envelope == (3, 4)
    with pytest.raises(PreconditionError):
        BoundedDiscreteRV.of([0, 1], [F(1, 2), F(1, 3)])
    with pytest.raises(PreconditionError):
        BoundedDiscreteRV.of([0, 2], [F(1, 2), F(1, 2)], envelope=(0, 1))
    path = tmp_path / "rv.json"
    path.write_text(json.dumps(TRI.to_json()))
    assert BoundedDiscreteRV.load(path) == TRI
    with pytest.raises(PreconditionError, match="probs"):
        BoundedDiscreteRV.from_json({"support": [0, 1]})


def test_sample_run_partial_sums():
    run = sample_iid(TRI, 500, seed=1)
    sums = list(run.partial_sums())
    assert len(sums) == 501 and sums[0] == 0
    assert sums[137] == run.partial_sum(137) == sum(run.values()[:137], F(0))
    assert run.prefix().names == ("0", "1/2", "1")


def test_sampler_shared_with_sequence_generation(fair):
    run = sample_iid(COIN, 1000, seed=42, trial=3)
    assert run.indices.tolist() == sample_sequence(fair, 1000, 42, trial=3).array.tolist()


def test_sample_distribution_chi_square():
    run = sample_iid(TRI, 200000, seed=9)
    counts = np.bincount(run.indices, minlength=3)
    expected = [200000 * float(p) for p in TRI.probs]
    assert stats.chisquare(counts, expected).pvalue > 1e-6


def test_effectivization_examples():
    assert hoeffding_constant(COIN) == F(1, 2)
    assert hoeffding_constant((-1, 3)) == 8
    m, cert = effectivization_certificate(COIN, 1, F(1, 8))
    assert m == 3
    assert cert.value < 1 / 8
    assert cert.value >= 2 * direct_double_sum(1, F(1, 2), m)
    ms = [effectivization_certificate(COIN, 1, d)[0] for d in (F(1, 2), F(1, 8), F(1, 100), F(1, 10**6))]
    assert ms == sorted(ms) and ms == [1, 3, 4, 10]


@settings(max_examples=15, deadline=None)
@given(eps=st.sampled_from([F(1, 2), F(1), F(2)]), k=st.integers(1, 20))
def test_effectivization_minimal(eps, k):
    delta = F(1, 2**k)
    m, cert = effectivization_certificate(COIN, eps, delta)
    assert cert.below(delta)
    c = hoeffding_constant(COIN)
    if m > 1 and m - 1 >= cert.params.get("floor", 0):
        try:
            prev = double_tail_bound(m - 1, eps, c)
        except PreconditionError:
            return
        assert not 2 * F(prev.value) < delta


def test_as_convergence_scan_matches_frequency(fair):
    from effective_lln.lln import lln_witness_scan
    run = sample_iid(COIN, 5000, seed=6)
    a = as_convergence_scan(run, F(1, 2), 1, 15)
    b = lln_witness_scan(sample_sequence(fair, 5000, 6), fair, 1, 15)
    assert a.key() == b.key()


def test_segment_probability_regimes():
    seg = segment_probability(COIN, 2)
    assert seg.regime == "exact" and float(seg.value) == pytest.approx(0.99977776, abs=1e-8)
    assert segment_probability(COIN, 9).regime == "binomial-cdf"
    tri = segment_probability(TRI, 6)
    assert tri.regime == "convolution-estimate" and 0 < tri.value <= 1


def test_slln_constants_coin_matches_binary():
    a, b = slln_constants(COIN), speed_limit_constants(F(1, 2))
    assert (a.n0, a.r) == (b.n0, b.r) == (3, F(499867, 500000))


def test_slln_constants_tri():
    c = slln_constants(TRI)
    assert (c.n0, c.r) == (3, F(2499999, 2500000))
    rules = [s["rule"] for s in c.certificate.derivation]
    assert rules[0] == "exact" and rules[-1] == "berry-esseen"


def test_checkpoint_experiment_rows():
    rows = slln_checkpoint_experiment(TRI, 1, 3, 400, seed=5)
    assert [r["n"] for r in rows] == [1, 2, 3]
    rates = [r["rate"] for r in rows]
    assert rates == sorted(rates, reverse=True)
    for r in rows:
        assert abs(r["rate"] - r["dp"]) < 0.05
    assert rows[0]["dp"] == pytest.approx(1.0) and rows[1]["dp"] == pytest.approx(0.997898, abs=1e-6)
    with pytest.raises(PreconditionError):
        slln_checkpoint_experiment(BoundedDiscreteRV.of([2], [1]), 1, 2, 10, seed=1)
