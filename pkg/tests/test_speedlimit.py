from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from effective_lln.bounds import PreconditionError
from effective_lln.core import FiniteProbabilitySpace, RealRandomVariable, SequencePrefix
from effective_lln.devtests import CapExceeded, CheckpointSpec, checkpoint_joint_probability
from effective_lln.speedlimit import (adversarial_generate, checkpoint_failures, checkpoint_scan, first_failure,
                                      montecarlo_pass_rate, rv_checkpoint_scan, rv_montecarlo_pass_rate)

F = Fraction


def test_checkpoint_scan_examples(fair):
    s = SequencePrefix(fair.names, [0, 1] * 32)
    report = checkpoint_scan(s, fair, "1")
    assert report.all_passed and report.depth_passed == 3
    s = SequencePrefix(fair.names, [1] * 4)
    report = checkpoint_scan(s, fair, "1", 1, 2)
    # |4 - 2| <= 2: the first checkpoint cannot fail for a fair coin
    assert report.all_passed and report.undetermined == (2,)
    assert report.passes_through(2) is None
    report = checkpoint_scan(SequencePrefix(fair.names, [1] * 16), fair, "1")
    assert report.first_failure == 2 and report.passes_through(2) is False


def test_checkpoint_scan_preconditions():
    P = FiniteProbabilitySpace(["a", "b"], [1, 0])
    with pytest.raises(PreconditionError):
        checkpoint_scan(SequencePrefix.from_names(P, "aaaa"), P, "a")
    with pytest.raises(PreconditionError):
        rv_checkpoint_scan(SequencePrefix.from_names(P, "aaaa"), P, RealRandomVariable.of([1, 2]))


def test_first_failure_integer_arithmetic():
    arr = np.array([1, 1, 1, 0] + [1] * 12, dtype=np.uint8)
    coef = [F(0), F(1)]
    assert first_failure(arr, coef, F(1, 2), 1, 2, 0, False) == 2
    assert first_failure(arr, coef, F(1, 2), 1, 1, 0, False) == 2
    # S_4 - 2 = 1 < 2^(1+1) under the strict widened band
    assert first_failure(arr, coef, F(1, 2), 1, 1, 1, True) == 2


@pytest.mark.parametrize("P_probs,a,depth", [((F(1, 2), F(1, 2)), "b", 4), ((F(1, 3), F(2, 3)), "a", 4),
                                             ((F(1, 6), F(1, 2), F(1, 3)), "c", 3)])
def test_adversarial_passes_every_checkpoint(P_probs, a, depth):
    P = FiniteProbabilitySpace([chr(97 + i) for i in range(len(P_probs))], P_probs)
    s = adversarial_generate(P, a, depth, seed=4)
    assert len(s) == 4**depth
    assert checkpoint_scan(s, P, a).all_passed
    assert adversarial_generate(P, a, depth, seed=4).word == s.word
    assert adversarial_generate(P, a, depth, seed=5).word != s.word


@settings(max_examples=25, deadline=None)
@given(num=st.integers(1, 11), seed=st.integers(0, 2**32), depth=st.integers(0, 4))
def test_adversarial_property(num, seed, depth):
    P = FiniteProbabilitySpace.binary(F(num, 12))
    s = adversarial_generate(P, "1", depth, seed)
    assert checkpoint_scan(s, P, "1").all_passed


def test_montecarlo_agrees_with_dp(fair):
    est = montecarlo_pass_rate(fair, "1", 1, 2, 20000, seed=3)
    dp = float(checkpoint_joint_probability(CheckpointSpec(1, F(1, 2), 1, 2)).value)
    lo, hi = est.estimate.wilson_lo, est.estimate.wilson_hi
    width = hi - lo
    assert lo - width <= dp <= hi + width
    assert est.to_row()["passes"] == est.estimate.passes


def test_montecarlo_reproducible_and_worker_independent(fair):
    a = checkpoint_failures((F(1, 2), F(1, 2)), (0, 1), F(1, 2), 1, 3, 40, seed=8)
    b = checkpoint_failures((F(1, 2), F(1, 2)), (0, 1), F(1, 2), 1, 3, 40, seed=8, workers=2)
    assert a == b


def test_montecarlo_cap_and_args(fair):
    with pytest.raises(CapExceeded):
        montecarlo_pass_rate(fair, "1", 1, 12, 10, seed=1)
    with pytest.raises(PreconditionError):
        montecarlo_pass_rate(fair, "1", 3, 2, 10, seed=1)


def test_rv_montecarlo_small(fair):
    est = rv_montecarlo_pass_rate(fair, RealRandomVariable.of([-1, 1]), 1, 2, 4000, seed=2)
    # [DERIVED] exact DP value of the strict widened band for X = +-1
    from effective_lln.devtests import rv_checkpoint_joint_probability
    dp = float(rv_checkpoint_joint_probability(fair, RealRandomVariable.of([-1, 1]), 1, 2, exact=True).value)
    assert est.estimate.wilson_lo - 0.02 <= dp <= est.estimate.wilson_hi + 0.02
