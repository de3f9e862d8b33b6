"""Sequential likelihood ratio test between ``x_i = 0`` and ``x_i = mu``.

Each observation at precision ``gamma`` contributes the log-likelihood ratio
``gamma*mu*y - gamma*mu**2/2``.  The running sum is compared with the Wald
boundaries ``l = ln(beta/(1-alpha))`` and ``u = ln((1-beta)/alpha)``; the test
stops the first time the sum is ``<= l`` (decide 0) or ``>= u`` (decide 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numba
import numpy as np
from scipy.special import ndtr

from .errors import DomainError
from .signal import BudgetLedger, NormalStream, SignalInstance

__all__ = [
    "SlrtConfig",
    "SlrtOutcome",
    "PrecisionBounds",
    "boundaries",
    "llr_increment",
    "gamma_from_eta",
    "run_slrt",
    "run_slrt_reference",
    "simulate_slrt_batch",
    "expected_precision_bounds",
    "increment_law",
    "truncated_moments",
]

DEFAULT_ETA = 0.01

# walk status codes returned by the compiled kernel
_LOWER, _UPPER, _TRUNCATED, _EXHAUSTED = 0, 1, 2, 3


def _check_prob(name, p):
    if not 0.0 < p < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {p}")


@lru_cache(maxsize=4096)
def _boundaries(alpha: float, beta: float):
    return math.log(beta / (1.0 - alpha)), math.log((1.0 - beta) / alpha)


def boundaries(alpha: float, beta: float) -> tuple:
    """Wald boundaries ``(l, u)``.

    ``alpha + beta = 1`` gives the degenerate pair ``l = u = 0``, under which a
    test stops after its first observation.
    """
    _check_prob("alpha", alpha)
    _check_prob("beta", beta)
    if alpha + beta > 1.0:
        raise DomainError(f"alpha + beta must not exceed 1, got {alpha + beta}")
    return _boundaries(float(alpha), float(beta))


def llr_increment(y: float, mu: float, gamma: float) -> float:
    return gamma * mu * y - gamma * mu ** 2 / 2


def gamma_from_eta(mu: float, eta: float = DEFAULT_ETA) -> float:
    """Per-observation precision ``eta / mu**2``.

    Each increment then has mean ``-/+ eta/2`` and variance ``eta``.
    """
    if not mu > 0 or not eta > 0:
        raise DomainError("mu and eta must be positive")
    return eta / mu ** 2


@dataclass(frozen=True)
class SlrtConfig:
    alpha: float
    beta: float
    mu: float
    gamma: float

    def __post_init__(self):
        if not (0 < self.alpha <= 0.5 and 0 < self.beta <= 0.5):
            raise DomainError("alpha and beta must lie in (0, 1/2]")
        if not self.mu > 0 or not self.gamma > 0:
            raise DomainError("mu and gamma must be positive")

    @property
    def l(self) -> float:
        return _boundaries(self.alpha, self.beta)[0]

    @property
    def u(self) -> float:
        return _boundaries(self.alpha, self.beta)[1]


@dataclass(frozen=True)
class SlrtOutcome:
    decision: int
    samples: int
    llr_final: float
    precision_spent: float
    truncated: bool = False
    ledger: Optional[BudgetLedger] = None


@numba.njit(cache=True)
def _walk(buf, pos, z, k, x, inv_sqrt_g, gmu, half, lo, hi, max_k):
    n = buf.shape[0]
    while pos < n:
        y = x + inv_sqrt_g * buf[pos]
        pos += 1
        z += gmu * y - half
        k += 1
        if z <= lo:
            return z, k, pos, 0
        if z >= hi:
            return z, k, pos, 1
        if k >= max_k:
            return z, k, pos, 2
    return z, k, pos, 3


def _walk_stream(stream: NormalStream, x, gamma, mu, lo, hi, max_k):
    """Run one test on ``stream``; returns ``(z, samples, status)``."""
    inv_sqrt_g = gamma ** -0.5
    gmu = gamma * mu
    half = gamma * mu ** 2 / 2
    z = 0.0
    k = 0
    while True:
        if stream.pos >= stream.buf.shape[0]:
            stream.refill()
        z, k, stream.pos, status = _walk(stream.buf, stream.pos, z, k, x, inv_sqrt_g,
                                         gmu, half, lo, hi, max_k)
        if status != _EXHAUSTED:
            return z, k, status


def _as_stream(rng) -> NormalStream:
    if isinstance(rng, NormalStream):
        return rng
    if isinstance(rng, np.random.Generator):
        raise DomainError("run_slrt needs a NormalStream; wrap the Generator with NormalStream(rng)")
    return NormalStream(rng)


def _max_samples(ledger: Optional[BudgetLedger], gamma: float) -> int:
    if ledger is None or ledger.cap is None:
        return np.iinfo(np.int64).max
    return int(math.floor(ledger.remaining_cap() / gamma))


def run_slrt(signal: SignalInstance, index: int, config: SlrtConfig,
             ledger: Optional[BudgetLedger], rng) -> SlrtOutcome:
    """Test coordinate ``index`` until the log-likelihood ratio exits ``(l, u)``.

    Every observation is charged to ``ledger`` (the updated ledger is returned
    on the outcome).  If the ledger's hard cap would be crossed the test stops
    early, ``truncated`` is set and the decision follows the sign of the sum.
    """
    stream = _as_stream(rng)
    x = signal.mean(index)
    max_k = _max_samples(ledger, config.gamma)
    if max_k < 1:
        return SlrtOutcome(0, 0, 0.0, 0.0, True, ledger)
    z, k, status = _walk_stream(stream, x, config.gamma, config.mu, config.l, config.u, max_k)
    truncated = status == _TRUNCATED
    decision = int(z > 0) if truncated else status
    spent = k * config.gamma
    if ledger is not None:
        ledger = ledger.add(spent, k)
    return SlrtOutcome(decision, k, z, spent, truncated, ledger)


def run_slrt_reference(signal: SignalInstance, index: int, config: SlrtConfig, rng,
                       max_samples: int = 10 ** 9) -> SlrtOutcome:
    """Plain-Python SLRT built from :func:`measure` and :func:`llr_increment`.

    Slow; kept as an independent check on the compiled walk.
    """
    from .signal import measure

    l, u = config.l, config.u
    z = 0.0
    k = 0
    while k < max_samples:
        obs = measure(signal, index, config.gamma, rng)
        z += llr_increment(obs.value, config.mu, config.gamma)
        k += 1
        if z <= l:
            return SlrtOutcome(0, k, z, k * config.gamma)
        if z >= u:
            return SlrtOutcome(1, k, z, k * config.gamma)
    return SlrtOutcome(int(z > 0), k, z, k * config.gamma, True)


def simulate_slrt_batch(config: SlrtConfig, null: bool, trials: int, rng):
    """Run ``trials`` independent tests under H0 (``null``) or H1.

    Returns arrays ``(decisions, samples, llr_final)``.
    """
    stream = _as_stream(rng)
    x = 0.0 if null else config.mu
    decisions = np.empty(trials, dtype=np.int64)
    samples = np.empty(trials, dtype=np.int64)
    llr = np.empty(trials)
    big = np.iinfo(np.int64).max
    l, u = config.l, config.u
    for t in range(trials):
        z, k, status = _walk_stream(stream, x, config.gamma, config.mu, l, u, big)
        decisions[t] = status
        samples[t] = k
        llr[t] = z
    return decisions, samples, llr


@dataclass(frozen=True)
class PrecisionBounds:
    lower_h0: float
    lower_h1: float
    upper_h0: float
    upper_h1: float


def expected_precision_bounds(alpha: float, beta: float, mu: float) -> PrecisionBounds:
    """Limits of ``gamma * E(N)`` as ``gamma -> 0`` (lower) and their upper bounds."""
    if not (0 < alpha <= 0.5 and 0 < beta <= 0.5):
        raise DomainError("alpha and beta must lie in (0, 1/2]")
    if not mu > 0:
        raise DomainError("mu must be positive")
    c = 2.0 / mu ** 2
    lower_h0 = c * (alpha * math.log(alpha / (1 - beta))
                    + (1 - alpha) * math.log((1 - alpha) / beta))
    lower_h1 = c * ((1 - beta) * math.log((1 - beta) / alpha)
                    + beta * math.log(beta / (1 - alpha)))
    return PrecisionBounds(lower_h0, lower_h1, c * math.log(1 / beta), c * math.log(1 / alpha))


def increment_law(mu: float, gamma: float, null: bool = True) -> tuple:
    """Mean and standard deviation of one log-likelihood increment."""
    eta = gamma * mu ** 2
    return (-eta / 2 if null else eta / 2), math.sqrt(eta)


def truncated_moments(mean: float, sd: float) -> dict:
    """Conditional moments of ``Z ~ N(mean, sd**2)`` on either side of zero.

    Keys: ``mean_below`` = E(Z | Z <= 0), ``exp_below`` = E(e^Z | Z <= 0) and
    ``exp_above`` = E(e^Z | Z >= 0).
    """
    a = -mean / sd
    p_below = ndtr(a)
    p_above = ndtr(-a)
    phi = math.exp(-a * a / 2) / math.sqrt(2 * math.pi)
    mgf = math.exp(mean + sd * sd / 2)
    return {
        "mean_below": mean - sd * phi / p_below,
        "exp_below": mgf * ndtr(a - sd) / p_below,
        "exp_above": mgf * ndtr(sd - a) / p_above,
    }
