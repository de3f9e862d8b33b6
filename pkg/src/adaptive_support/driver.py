"""Noisy support recovery by lifting a noiseless strategy with SLRTs.

Every query the strategy proposes is answered by a sequential likelihood
ratio test run at that coordinate; the test decision is fed back as if it
were the noiseless label.  Error targets per test follow an
:class:`AllocationRule` that depends only on the test index and phase.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

from .classes import ClassSpec, SSet, SStar, Submatrix, UnionStars
from .errors import DomainError
from .signal import BudgetLedger, NormalStream, SignalInstance, hamming
from .slrt import DEFAULT_ETA, SlrtConfig, _boundaries, _walk_stream, gamma_from_eta
from .strategies import REFINE, SEARCH, Strategy, j_cap_for, make_strategy

__all__ = [
    "UnstructuredEpsilon", "StructuredDelta", "CappedStructuredDelta", "AllocationRule",
    "RunResult", "allocate_error_probs", "clamp_count", "default_rule", "run_adaptive",
    "adaptive_trial",
]

HAMMING = "hamming"
PROB_ERROR = "prob_error"


@dataclass(frozen=True)
class UnstructuredEpsilon:
    """``alpha = eps/(2n)``, ``beta = eps/(2s)`` for every test."""

    epsilon: float
    n: int
    s: int


@dataclass(frozen=True)
class StructuredDelta:
    """``alpha = delta/(4n)``; ``beta = delta/(2 l)`` in search, ``delta/(4|S|)`` in refinement."""

    delta: float
    n: int
    l_total: int
    s_eff: int

    @property
    def delta_used(self) -> Fraction:
        return Fraction(self.delta)


@dataclass(frozen=True)
class CappedStructuredDelta(StructuredDelta):
    """Same as :class:`StructuredDelta` with delta halved (pairs with a search cap)."""

    @property
    def delta_used(self) -> Fraction:
        return Fraction(self.delta) / 2


AllocationRule = Union[UnstructuredEpsilon, StructuredDelta, CappedStructuredDelta]


class _Clamps:
    count = 0


def clamp_count() -> int:
    """Number of error probabilities clamped to 1/2 so far in this process."""
    return _Clamps.count


def _clamp(p: Fraction) -> float:
    if 0 < p <= Fraction(1, 2):
        return float(p)
    if p <= 0:
        raise DomainError(f"allocation produced a non-positive probability {float(p)}")
    _Clamps.count += 1
    warnings.warn(f"error probability {float(p):.4g} clamped to 1/2", RuntimeWarning, stacklevel=3)
    return 0.5


def _check_rule(rule):
    target = rule.epsilon if isinstance(rule, UnstructuredEpsilon) else rule.delta
    if not target > 0:
        raise DomainError(f"error target must be positive, got {target}")


def allocate_error_probs(rule: AllocationRule, t: int, phase: str) -> tuple:
    """Per-test targets ``(alpha_t, beta_t)``, evaluated in exact rationals.

    ``t`` is accepted for the interface but no rule here depends on it.
    """
    _check_rule(rule)
    if isinstance(rule, UnstructuredEpsilon):
        eps = Fraction(rule.epsilon)
        return _clamp(eps / (2 * rule.n)), _clamp(eps / (2 * rule.s))
    if phase not in (SEARCH, REFINE):
        raise DomainError(f"unknown phase {phase!r}")
    d = rule.delta_used
    alpha = d / (4 * rule.n)
    beta = d / (2 * rule.l_total) if phase == SEARCH else d / (4 * rule.s_eff)
    return _clamp(alpha), _clamp(beta)


def default_rule(spec: ClassSpec, target: float, metric: str = PROB_ERROR) -> AllocationRule:
    """The allocation used by the matching sufficiency result.

    For the Hamming metric on structured classes the error probability is
    set to ``target / s_eff``.  For s-sets the target is used as the Hamming
    level directly (it also bounds the probability of error).
    """
    if metric not in (HAMMING, PROB_ERROR):
        raise DomainError(f"unknown metric {metric!r}")
    if isinstance(spec, SSet):
        return UnstructuredEpsilon(target, spec.n, spec.s)
    delta = target / spec.s_eff if metric == HAMMING else target
    cls = CappedStructuredDelta if isinstance(spec, (SStar, UnionStars, Submatrix)) else StructuredDelta
    return cls(delta, spec.n, spec.l_total, spec.s_eff)


@dataclass
class RunResult:
    estimate: tuple
    hamming: int
    total_precision: float
    tests_run: int
    truncated: bool
    per_phase: dict = field(default_factory=dict)
    verdict: str = "unique"
    samples: int = 0
    trace: Optional[list] = None

    @property
    def exact(self) -> bool:
        return self.hamming == 0


def _probs_table(rule):
    # the rules only depend on the phase, so evaluate them once per run
    return {ph: (a, b, *_boundaries(a, b))
            for ph in (SEARCH, REFINE)
            for a, b in [allocate_error_probs(rule, 1, ph)]}


def run_adaptive(spec: ClassSpec, strategy: Strategy, rule: AllocationRule,
                 signal: SignalInstance, gamma_rule: Union[float, Callable] = DEFAULT_ETA,
                 rng=None, ledger: Optional[BudgetLedger] = None,
                 oracle: Optional[Callable[[int], int]] = None) -> RunResult:
    """Run one trial of the lifted procedure and account for every observation.

    ``gamma_rule`` is either ``eta`` (giving ``Gamma = eta/mu**2``) or a
    callable ``mu -> Gamma``.  ``oracle`` replaces each SLRT by a label
    function (a test hook; no precision is spent).  The ledger's hard cap,
    when set, aborts the trial: ``truncated`` is flagged and the estimate is
    taken from the verdict reached so far.
    """
    if signal.n != spec.n:
        raise DomainError(f"signal has n={signal.n} but the class has n={spec.n}")
    if strategy.spec != spec:
        raise DomainError("strategy was built for a different class")
    mu = signal.mu
    gamma = gamma_rule(mu) if callable(gamma_rule) else gamma_from_eta(mu, gamma_rule)
    if ledger is None:
        ledger = BudgetLedger.with_cap(float(spec.n), None)
    if oracle is None:
        if rng is None:
            raise DomainError("run_adaptive needs a NormalStream (or an oracle)")
        stream = rng if isinstance(rng, NormalStream) else NormalStream(rng)
    table = _probs_table(rule)
    per_phase = {SEARCH: 0.0, REFINE: 0.0}
    tests = {SEARCH: 0, REFINE: 0}
    truncated = False
    samples = 0
    t = 0
    members = signal._members
    big = 2 ** 62
    while True:
        q = strategy.next_query()
        if q is None:
            break
        t += 1
        phase = strategy.phase
        if oracle is not None:
            label = int(oracle(q))
        else:
            max_k = big
            if ledger.cap is not None:
                max_k = int(math.floor(ledger.remaining_cap() / gamma))
                if max_k < 1:
                    truncated = True
                    break
            _, _, lo, hi = table[phase]
            x = mu if q in members else 0.0
            z, k, status = _walk_stream(stream, x, gamma, mu, lo, hi, max_k)
            spent = k * gamma
            ledger = ledger.add(spent, k)
            per_phase[phase] += spent
            samples += k
            if status == 2:
                truncated = True
                break
            label = status
        tests[phase] += 1
        strategy.feed(q, label)
    verdict = strategy.verdict
    estimate = tuple(verdict.support) if verdict.is_unique else ()
    kind = "unique" if verdict.is_unique else ("none" if verdict.is_none else "many")
    if strategy.gave_up and kind == "many":
        kind = "gave_up"
    return RunResult(
        estimate=estimate,
        hamming=hamming(estimate, signal.support),
        total_precision=ledger.total,
        tests_run=t - int(truncated),
        truncated=truncated,
        per_phase={"search": per_phase[SEARCH], "refine": per_phase[REFINE],
                   "search_tests": tests[SEARCH], "refine_tests": tests[REFINE]},
        verdict=kind,
        samples=samples,
    )


def adaptive_trial(spec: ClassSpec, support, mu: float, rule: AllocationRule, *,
                   eta: float = DEFAULT_ETA, m: Optional[float] = None,
                   c_cap: Optional[float] = 10.0, strategy_rng=None, noise=None,
                   j_cap: Optional[int] = None, keep_trace: bool = False) -> RunResult:
    """Build signal, strategy and ledger for one trial and run it.

    The search cap defaults to the one matching ``rule`` for capped classes.
    """
    m = float(spec.n if m is None else m)
    signal = SignalInstance.from_support(spec.n, mu, support)
    if j_cap is None and isinstance(rule, StructuredDelta):
        j_cap = j_cap_for(spec, rule.delta)
    strategy = make_strategy(spec, rng=strategy_rng, j_cap=j_cap)
    ledger = BudgetLedger.with_cap(m, c_cap)
    result = run_adaptive(spec, strategy, rule, signal, eta, noise, ledger)
    if keep_trace:
        result.trace = list(strategy.trace)
    return result
