"""Signal model: ground truth, the Gaussian measurement channel and budget accounting.

An observation of coordinate ``i`` at precision ``gamma`` is
``y = x_i + gamma**-0.5 * w`` with ``w`` standard normal and ``x_i`` equal to
``mu`` on the support and 0 elsewhere.  Coordinates are 1-based throughout the
public API.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import DomainError

__all__ = [
    "SignalInstance",
    "Observation",
    "BudgetLedger",
    "NormalStream",
    "measure",
    "hamming",
    "record",
    "trial_seed_sequences",
]


@dataclass(frozen=True)
class SignalInstance:
    """Hidden ground truth: dimension ``n``, magnitude ``mu`` and support."""

    n: int
    mu: float
    support: tuple

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        if self.n < 1:
            raise DomainError(f"n must be positive, got {self.n}")
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if any(b <= a for a, b in zip(support, support[1:])):
            raise DomainError("support indices must be strictly increasing")
        if support and (support[0] < 1 or support[-1] > self.n):
            raise DomainError(f"support must lie in [1, {self.n}]")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "_members", frozenset(support))

    @classmethod
    def from_support(cls, n: int, mu: float, support: Iterable[int]) -> "SignalInstance":
        return cls(n, float(mu), tuple(sorted(set(int(i) for i in support))))

    def contains(self, index: int) -> bool:
        return index in self._members

    def mean(self, index: int) -> float:
        if not 1 <= index <= self.n:
            raise DomainError(f"index {index} outside [1, {self.n}]")
        return self.mu if index in self._members else 0.0

    def vector(self) -> np.ndarray:
        """Dense signal as a length-n array (0-based positions)."""
        x = np.zeros(self.n)
        if self.support:
            x[np.asarray(self.support) - 1] = self.mu
        return x


@dataclass(frozen=True)
class Observation:
    index: int
    precision: float
    value: float

    def __post_init__(self):
        if not self.precision > 0:
            raise DomainError(f"precision must be positive, got {self.precision}")


class BudgetLedger:
    """Running total of precision spent, with Neumaier-compensated summation.

    Instances are immutable; :meth:`add` and :func:`record` return a new ledger.
    ``cap`` is an optional hard ceiling on ``spent`` (``None`` disables it).
    """

    __slots__ = ("budget_m", "spent", "count", "cap", "_comp")

    def __init__(self, budget_m: float, spent: float = 0.0, count: int = 0,
                 cap: Optional[float] = None, _comp: float = 0.0):
        if not budget_m > 0:
            raise DomainError(f"budget must be positive, got {budget_m}")
        self.budget_m = float(budget_m)
        self.spent = float(spent)
        self.count = int(count)
        self.cap = cap
        self._comp = float(_comp)

    @classmethod
    def with_cap(cls, budget_m: float, c_cap: Optional[float] = 10.0) -> "BudgetLedger":
        return cls(budget_m, cap=None if c_cap is None else c_cap * budget_m)

    @property
    def total(self) -> float:
        """Compensated total of recorded precisions."""
        return self.spent + self._comp

    def remaining_cap(self) -> float:
        if self.cap is None:
            return float("inf")
        return self.cap - self.total

    def add(self, precision: float, count: int = 1) -> "BudgetLedger":
        # Neumaier's variant of Kahan summation
        s = self.spent
        t = s + precision
        if abs(s) >= abs(precision):
            comp = self._comp + ((s - t) + precision)
        else:
            comp = self._comp + ((precision - t) + s)
        return BudgetLedger(self.budget_m, t, self.count + count, self.cap, comp)

    def __repr__(self):
        return (f"BudgetLedger(budget_m={self.budget_m}, spent={self.total!r}, "
                f"count={self.count}, cap={self.cap})")

    def __eq__(self, other):
        if not isinstance(other, BudgetLedger):
            return NotImplemented
        return (self.budget_m, self.total, self.count, self.cap) == (
            other.budget_m, other.total, other.count, other.cap)


def record(ledger: BudgetLedger, obs: Observation) -> BudgetLedger:
    """Return ``ledger`` with ``obs.precision`` added to the spent total."""
    return ledger.add(obs.precision)


class NormalStream:
    """Buffered standard normal draws from a numpy Generator.

    Draws come out in exactly the order ``rng.standard_normal()`` would produce
    them, so a stream and a bare Generator seeded alike are interchangeable.
    The buffer lets compiled kernels consume many draws per call.
    """

    def __init__(self, seed=None, block: int = 4096):
        if isinstance(seed, np.random.Generator):
            self.rng = seed
        else:
            self.rng = np.random.Generator(np.random.PCG64(seed))
        self.block = int(block)
        self.buf = np.empty(0)
        self.pos = 0

    def refill(self):
        self.buf = self.rng.standard_normal(self.block)
        self.pos = 0

    def standard_normal(self) -> float:
        if self.pos >= self.buf.shape[0]:
            self.refill()
        w = self.buf[self.pos]
        self.pos += 1
        return float(w)

    def take(self, size: int) -> np.ndarray:
        """The next ``size`` draws as an array, in stream order."""
        out = np.empty(size)
        filled = 0
        while filled < size:
            if self.pos >= self.buf.shape[0]:
                self.refill()
            step = min(size - filled, self.buf.shape[0] - self.pos)
            out[filled:filled + step] = self.buf[self.pos:self.pos + step]
            self.pos += step
            filled += step
        return out


def measure(signal: SignalInstance, index: int, gamma: float, rng) -> Observation:
    """One noisy observation of coordinate ``index`` at precision ``gamma``.

    ``rng`` is a numpy Generator or a :class:`NormalStream`.  The ledger is not
    touched; charging the precision is the caller's job.
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    mean = signal.mean(index)
    return Observation(index, gamma, mean + gamma ** -0.5 * rng.standard_normal())


def hamming(a: Iterable[int], b: Iterable[int]) -> int:
    """Size of the symmetric difference of two index sets."""
    return len(set(a) ^ set(b))


def trial_seed_sequences(base_seed: int, trial_index: int, streams: int = 3):
    """Independent child seeds for one trial.

    The parent is ``SeedSequence([base_seed, trial_index])``, so each trial's
    randomness depends only on its own index and not on scheduling.
    """
    parent = np.random.SeedSequence([int(base_seed), int(trial_index)])
    return parent.spawn(streams)
