"""Exact and certified computations around the effectivized law of large numbers.

Finite probability spaces and cylinder measures, concentration certificates,
deviation-set tests, witness scans on sequence prefixes, checkpoint
(speed-limit) experiments, and bounded i.i.d. sums.
"""
from .bounds import (BoundCertificate, ConvergenceError, PreconditionError, chernoff_tail, clt_r, clt_r_general,
                     double_tail_bound, find_g, geometric_tail, hoeffding_tail, normal_band, upper_incomplete_gamma)
from .core import (ComputableReal, FiniteProbabilitySpace, Interval, PrefixFreeFamily, RealRandomVariable,
                   SequencePrefix, SymbolError, UndecidedComparison, contract, count_occurrences, family_measure,
                   prefix_free_reduce, project_binary, rv_mean, rv_variance, shannon_entropy, support_violations,
                   word_measure)
from .devtests import (CapExceeded, CertificateFailure, CheckpointReport, CheckpointSpec, DeviationSpec,
                       checkpoint_joint_probability, checkpoint_membership, checkpoint_test_family,
                       deviation_set_measure, lln_test_family, lln_test_measure, rv_checkpoint_joint_probability,
                       rv_checkpoint_membership, segment_band_probability, speed_limit_constants)
from .lln import (WitnessReport, aep_identity_check, aep_scan, dichotomy_experiment, lln_witness_scan,
                  rv_witness_scan)
from .schedule import f_threshold
from .seqio import read_sequence, sample_sequence, write_sequence
from .slln import (BoundedDiscreteRV, SampleRun, as_convergence_scan, effectivization_certificate, sample_iid,
                   slln_checkpoint_experiment)
from .speedlimit import (adversarial_generate, checkpoint_scan, montecarlo_pass_rate, rv_checkpoint_scan,
                         rv_montecarlo_pass_rate)
from .stats import wilson

__version__ = "0.1.0"
