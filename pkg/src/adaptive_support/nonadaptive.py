"""Non-adaptive comparator: uniform precision ``m/n`` per coordinate plus ML.

With equal precisions the Gaussian log-likelihood of a candidate support
``S'`` is, up to terms that do not depend on ``S'``, proportional to
``sum_{i in S'} y_i`` (all candidates in a class share one cardinality), so
the ML estimate is the class member with the largest coordinate sum.  Ties
go to the lexicographically smallest sorted member.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numba
import numpy as np

from .classes import (DEFAULT_CAP, ClassSpec, SInterval, SSet, SStar, Submatrix, UnionIntervals,
                      UnionStars, cardinality, enumerate_class, incident_edges)
from .driver import RunResult
from .errors import CapabilityRefusal, DomainError
from .signal import NormalStream, SignalInstance, hamming

__all__ = ["NonAdaptiveDesign", "ml_estimate", "run_nonadaptive", "design_objective"]


@dataclass(frozen=True)
class NonAdaptiveDesign:
    """One observation per coordinate, each at precision ``m/n``."""

    n: int
    m: float

    def __post_init__(self):
        if self.n < 1 or not self.m > 0:
            raise DomainError("need n >= 1 and m > 0")

    @property
    def per_coordinate(self) -> Fraction:
        return Fraction(self.m) / self.n

    @property
    def per_coordinate_precision(self) -> float:
        return float(self.per_coordinate)

    def total(self) -> Fraction:
        return self.per_coordinate * self.n


def _top_s(y: np.ndarray, s: int) -> tuple:
    order = np.argsort(-y, kind="stable")  # equal values keep index order
    return tuple(sorted(int(i) + 1 for i in order[:s]))


def _best_window(y: np.ndarray, s: int) -> tuple:
    w = np.lib.stride_tricks.sliding_window_view(y, s).sum(axis=1)
    i = int(np.argmax(w))  # first maximum = leftmost start
    return tuple(range(i + 1, i + s + 1))


@numba.njit(cache=True)
def _windows_dp(w, s, k):
    # F[j, i]: best total of j disjoint windows whose starts are >= i (0-based)
    starts = w.shape[0]
    n = starts + s - 1
    F = np.full((k + 1, n + s + 1), -np.inf)
    for i in range(n + s + 1):
        F[0, i] = 0.0
    for j in range(1, k + 1):
        for i in range(starts - 1, -1, -1):
            take = w[i] + F[j - 1, i + s]
            skip = F[j, i + 1]
            F[j, i] = take if take >= skip else skip
    out = np.empty(k, dtype=np.int64)
    i = 0
    for j in range(k, 0, -1):
        # earliest start that still attains the optimum gives the smallest member
        while w[i] + F[j - 1, i + s] != F[j, i]:
            i += 1
        out[k - j] = i
        i += s
    return out


def _best_windows(y: np.ndarray, s: int, k: int) -> tuple:
    w = np.lib.stride_tricks.sliding_window_view(y, s).sum(axis=1)
    starts = _windows_dp(w, s, k)
    return tuple(int(a) + 1 + d for a in starts for d in range(s))


@lru_cache(maxsize=16)
def _incidence(p: int) -> np.ndarray:
    inc = incident_edges(p)
    return np.array([inc[v] for v in range(1, p + 1)], dtype=np.int64)


def _best_star(y: np.ndarray, p: int, s: int) -> tuple:
    inc = _incidence(p)  # row v-1: edge ids at vertex v, increasing
    vals = y[inc - 1]
    order = np.argsort(-vals, axis=1, kind="stable")[:, :s]
    best, best_sum = None, -np.inf
    for v in range(p):
        chosen = tuple(sorted(int(e) for e in inc[v, order[v]]))
        total = float(y[np.asarray(chosen) - 1].sum())
        if total > best_sum or (total == best_sum and chosen < best):
            best, best_sum = chosen, total
    return best


@lru_cache(maxsize=8)
def _member_matrix(spec: ClassSpec, cap: int) -> np.ndarray:
    return np.asarray(enumerate_class(spec, cap), dtype=np.int64) - 1


def _brute_force(y: np.ndarray, spec: ClassSpec, cap: int) -> tuple:
    size = cardinality(spec)
    if size > cap:
        raise CapabilityRefusal(
            f"exact ML for {spec.text()} needs {size} candidates, above the cap {cap}", size)
    members = _member_matrix(spec, cap)
    sums = y[members].sum(axis=1)
    return tuple(int(i) + 1 for i in members[int(np.argmax(sums))])


def ml_estimate(spec: ClassSpec, y, cap: int = DEFAULT_CAP) -> tuple:
    """Class member maximizing the sum of observations (1-based coordinates).

    Exact algorithms for s-sets, intervals, unions of intervals and stars;
    brute force over the enumerated class otherwise, refusing above ``cap``.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (spec.n,):
        raise DomainError(f"need one observation per coordinate ({spec.n}), got {y.shape}")
    if isinstance(spec, SSet):
        return _top_s(y, spec.s)
    if isinstance(spec, SInterval):
        return _best_window(y, spec.s)
    if isinstance(spec, UnionIntervals):
        return _best_windows(y, spec.s, spec.k)
    if isinstance(spec, SStar):
        return _best_star(y, spec.p, spec.s)
    if isinstance(spec, (UnionStars, Submatrix)):
        return _brute_force(y, spec, cap)
    raise DomainError(f"unknown class {spec!r}")


def run_nonadaptive(spec: ClassSpec, signal: SignalInstance, m: float, rng,
                    cap: int = DEFAULT_CAP) -> RunResult:
    """Observe every coordinate once at precision ``m/n``; estimate by ML.

    ``rng`` is a numpy Generator or :class:`NormalStream`; ``n`` standard
    normals are consumed in coordinate order.
    """
    if signal.n != spec.n:
        raise DomainError(f"signal has n={signal.n} but the class has n={spec.n}")
    design = NonAdaptiveDesign(spec.n, m)
    w = rng.take(spec.n) if isinstance(rng, NormalStream) else rng.standard_normal(spec.n)
    y = signal.vector() + w / np.sqrt(design.per_coordinate_precision)
    estimate = ml_estimate(spec, y, cap)
    return RunResult(
        estimate=estimate,
        hamming=hamming(estimate, signal.support),
        total_precision=float(design.total()),
        tests_run=spec.n,
        truncated=False,
        per_phase={"design": float(design.total())},
        verdict="ml",
        samples=spec.n,
    )


def design_objective(members, b) -> float:
    """``min_S sum_{S' != S} sum_{i in S xor S'} b_i`` for a precision vector ``b``.

    ``members`` are 1-based supports; ``b`` has one entry per coordinate.
    """
    b = np.asarray(b, dtype=float)
    sets = [frozenset(S) for S in members]
    best = np.inf
    for S in sets:
        total = 0.0
        for T in sets:
            if T is not S:
                total += sum(b[i - 1] for i in S ^ T)
        best = min(best, total)
    return float(best)
