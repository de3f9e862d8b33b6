"""Adaptive sensing for structured support recovery.

Noiseless query strategies for several support classes are lifted to the
Gaussian channel with sequential likelihood ratio tests; a uniform-precision
maximum-likelihood baseline, closed-form magnitude bounds and a reproducible
Monte Carlo harness sit alongside.
"""
from .bounds import (BoundQuery, BoundResult, compute_bound, fano_error_lower_bound,
                     necessary_mu_adaptive, necessary_mu_nonadaptive, scaling_table,
                     star_packing_bound, sufficient_mu)
from .classes import (ClassSpec, SInterval, SSet, SStar, Submatrix, UnionIntervals, UnionStars,
                      cardinality, corner_members, enumerate_class, greedy_star_packing,
                      parse_class, sample_member)
from .driver import (CappedStructuredDelta, RunResult, StructuredDelta, UnstructuredEpsilon,
                     adaptive_trial, allocate_error_probs, default_rule, run_adaptive)
from .errors import (CapabilityRefusal, DomainError, SupportError, TrackerConflict,
                     UnsupportedBound)
from .harness import (ExperimentConfig, Summary, phase_sweep, read_summaries, run_trials,
                      slrt_calibration, threshold_at, write_summaries)
from .nonadaptive import NonAdaptiveDesign, ml_estimate, run_nonadaptive
from .signal import BudgetLedger, NormalStream, Observation, SignalInstance, hamming, measure
from .slrt import SlrtConfig, boundaries, expected_precision_bounds, run_slrt
from .strategies import make_strategy
from .tracking import ConsistencyTracker, make_tracker

__version__ = "0.1.0"
