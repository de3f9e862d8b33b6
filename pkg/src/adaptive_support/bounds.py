"""Closed-form signal-magnitude thresholds.

Three families are provided: sufficient conditions for the adaptive procedure
in :mod:`adaptive_support.driver`, necessary conditions for any non-adaptive
design, and necessary conditions for any adaptive design.  Each result
carries the addends under the square root, so ``mu_squared`` is their exact
floating-point sum and ``mu_threshold = sqrt(mu_squared)``.

Formula identifiers have the form ``<class>.<direction>[.<metric>]``; a
``+empty`` suffix on the class marks results for the class with the empty
set added.  All logarithms are natural.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

from .classes import (ClassSpec, SInterval, SSet, SStar, Submatrix, UnionIntervals, UnionStars,
                      divisor_pairs, greedy_star_packing)
from .errors import DomainError, UnsupportedBound

__all__ = [
    "SUFFICIENT", "NONADAPTIVE", "ADAPTIVE", "HAMMING", "PROB_ERROR",
    "BoundQuery", "BoundResult", "sufficient_mu", "necessary_mu_nonadaptive",
    "necessary_mu_adaptive", "compute_bound", "fano_error_lower_bound", "star_packing_bound",
    "log_binomial", "scaling_table", "TRANSPARENCY",
]

SUFFICIENT = "sufficient"
NONADAPTIVE = "nonadaptive"
ADAPTIVE = "adaptive"
HAMMING = "hamming"
PROB_ERROR = "prob_error"

# (1 - 2 eps) ln(|C| - 1) must reach this for the non-adaptive bound's simple form
TRANSPARENCY = 1 + math.sqrt(2)


@dataclass(frozen=True)
class BoundQuery:
    spec: ClassSpec
    m: float
    target: float
    metric: str = PROB_ERROR
    direction: str = SUFFICIENT
    include_empty_set: bool = False
    greedy_packing: bool = False

    def __post_init__(self):
        if not self.m > 0:
            raise DomainError(f"budget m must be positive, got {self.m}")
        if not self.target > 0:
            raise DomainError(f"target must be positive, got {self.target}")
        if self.metric not in (HAMMING, PROB_ERROR):
            raise DomainError(f"unknown metric {self.metric!r}")
        if self.direction not in (SUFFICIENT, NONADAPTIVE, ADAPTIVE):
            raise DomainError(f"unknown direction {self.direction!r}")


@dataclass(frozen=True)
class BoundResult:
    formula_id: str
    terms: tuple  # ((name, value), ...)
    notes: tuple = field(default=())

    @property
    def mu_squared(self) -> float:
        return math.fsum(v for _, v in self.terms)

    @property
    def mu_threshold(self) -> float:
        return math.sqrt(self.mu_squared)

    def as_dict(self) -> dict:
        return {"formula_id": self.formula_id, "mu_threshold": self.mu_threshold,
                "mu_squared": self.mu_squared, "terms": dict(self.terms),
                "notes": list(self.notes)}


def _result(formula_id, terms, notes=()):
    return BoundResult(formula_id, tuple((k, float(v)) for k, v in terms), tuple(notes))


def _vacuous(formula_id, bracket, notes=()):
    # a necessary condition whose right-hand side is not positive says nothing
    note = f"right-hand side {bracket:.6g} <= 0; threshold is 0"
    return _result(formula_id, [("vacuous", 0.0)], (*notes, note))


def log_binomial(n: int, k: int) -> float:
    if not 0 <= k <= n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _log_minus_one(log_c: float) -> float:
    """``ln(C - 1)`` from ``ln C`` without forming ``C``."""
    if log_c <= 0:
        return -math.inf
    if log_c > 40:
        return log_c + math.log1p(-math.exp(-log_c))
    return math.log(math.expm1(log_c))


def star_packing_bound(p: int, s: int, greedy: bool = False) -> float:
    """Lower bound on the number of edge-disjoint s-stars in K_p.

    Either the closed form ``p (p - 1 - s) / (2 s)`` or, with ``greedy``, the
    size of the constructive greedy packing.
    """
    if greedy:
        return float(len(greedy_star_packing(p, s)))
    return p * (p - 1 - s) / (2 * s)


# ----------------------------------------------------------------- sufficient

def _delta_for(q: BoundQuery) -> tuple:
    if q.metric == HAMMING:
        return q.target / q.spec.s_eff, (f"delta = eps/{q.spec.s_eff} for the Hamming target",)
    return q.target, ()


def sufficient_mu(q: BoundQuery) -> BoundResult:
    """Magnitude at which the adaptive procedure meets the target within budget ``m``."""
    if q.direction != SUFFICIENT:
        raise DomainError("sufficient_mu needs direction='sufficient'")
    spec, m = q.spec, q.m
    n = spec.n
    if isinstance(spec, SSet):
        eps, s = q.target, spec.s
        notes = () if q.metric == HAMMING else ("probability of error bounded via E|S^ - S|",)
        return _result("sset.sufficient", [
            ("2n/m ln(2s/eps)", 2 * n / m * math.log(2 * s / eps)),
            ("2s/m ln(2n/eps)", 2 * s / m * math.log(2 * n / eps)),
        ], notes)
    delta, notes = _delta_for(q)
    s = spec.s
    if isinstance(spec, SInterval):
        return _result("interval.sufficient", [
            ("2n/(sm) ln(2/delta)", 2 * n / (s * m) * math.log(2 / delta)),
            ("2s/m ln(4n/delta)", 2 * s / m * math.log(4 * n / delta)),
        ], notes)
    if isinstance(spec, UnionIntervals):
        k = spec.k
        return _result("uintervals.sufficient", [
            ("2n/(sm) ln(2k/delta)", 2 * n / (s * m) * math.log(2 * k / delta)),
            ("2ks/m ln(4n/delta)", 2 * k * s / m * math.log(4 * n / delta)),
        ], notes)
    if isinstance(spec, SStar):
        return _result("star.sufficient", [
            ("2n/(sm) ln(4/delta)^2", 2 * n / (s * m) * math.log(4 / delta) ** 2),
            ("2s/m ln(8n/delta)", 2 * s / m * math.log(8 * n / delta)),
            ("sqrt(32n)/m ln(8s/delta)", math.sqrt(32 * n) / m * math.log(8 * s / delta)),
        ], notes)
    if isinstance(spec, UnionStars):
        k = spec.k
        if delta * k > 0.5:
            warnings.warn(f"delta*k = {delta * k:.3g} > 0.5: the (1 + delta k) factor dominates",
                          RuntimeWarning, stacklevel=2)
            notes = (*notes, "delta*k > 0.5")
        return _result("ustars.sufficient", [
            ("2n(1+delta k)/(sm) ln(4k/delta)^2",
             2 * n * (1 + delta * k) / (s * m) * math.log(4 * k / delta) ** 2),
            ("2ks/m ln(8n/delta)", 2 * k * s / m * math.log(8 * n / delta)),
            ("k sqrt(32n)/m ln(8ks/delta)",
             k * math.sqrt(32 * n) / m * math.log(8 * k * s / delta)),
        ], notes)
    if isinstance(spec, Submatrix):
        return _result("submat.sufficient", [
            ("2n/(sm) ln(4/delta)^2", 2 * n / (s * m) * math.log(4 / delta) ** 2),
            ("2s/m ln(8n/delta)", 2 * s / m * math.log(8 * n / delta)),
            ("2(n1+n2)/m ln(8s/delta)",
             2 * (spec.n1 + spec.n2) / m * math.log(8 * s / delta)),
        ], notes)
    raise UnsupportedBound(f"no sufficient bound for {spec.kind}")


# -------------------------------------------------------------- non-adaptive

def _symmetric_subclass(spec: ClassSpec) -> tuple:
    """``(ln |C_used|, |S|, description)`` for the symmetric subclass used."""
    if isinstance(spec, SSet):
        return log_binomial(spec.n, spec.s), spec.s, "all s-sets"
    if isinstance(spec, SInterval):
        return math.log(spec.n // spec.s), spec.s, f"{spec.n // spec.s} disjoint aligned intervals"
    if isinstance(spec, UnionIntervals):
        return (log_binomial(spec.n // spec.s, spec.k), spec.k * spec.s,
                "unions of k aligned intervals")
    if isinstance(spec, (SStar, UnionStars)):
        k = getattr(spec, "k", 1)
        if k * (spec.s + 1) > spec.p:
            raise UnsupportedBound("needs k(s+1) <= p", "ustars.nonadaptive")
        return (log_binomial(spec.p, k * (spec.s + 1)), k * spec.s,
                "vertex-disjoint stars, counted by C(p, k(s+1))")
    if isinstance(spec, Submatrix):
        r = math.isqrt(spec.s)
        if r * r != spec.s or r > min(spec.n1, spec.n2):
            raise UnsupportedBound(f"the square-submatrix subclass needs s a perfect square "
                                   f"with sqrt(s) <= min(n1, n2); got s={spec.s}",
                                   "submat.nonadaptive")
        return (log_binomial(spec.n1, r) + log_binomial(spec.n2, r), spec.s,
                f"{r}x{r} submatrices")
    raise UnsupportedBound(f"no non-adaptive bound for {spec.kind}")


def necessary_mu_nonadaptive(q: BoundQuery) -> BoundResult:
    """Below this magnitude no non-adaptive design reaches error probability ``target``.

    The simple form needs ``(1 - 2 eps) ln(|C| - 1) >= 1 + sqrt 2``.  Between 1
    and that value the same threshold is still implied by the underlying
    Fano-type inequality, so it is returned with a warning; below 1 the
    query is refused.  ``eps >= 1/2`` gives 0.
    """
    if q.direction != NONADAPTIVE:
        raise DomainError("necessary_mu_nonadaptive needs direction='nonadaptive'")
    spec, m, eps = q.spec, q.m, q.target
    fid = f"{spec.kind}.nonadaptive"
    log_c, size, used = _symmetric_subclass(spec)
    notes = [f"subclass: {used}"]
    if q.metric == HAMMING:
        notes.append("Hamming target bounds the probability of error")
    if eps >= 0.5:
        return _vacuous(fid, 1 - 2 * eps, notes)
    log_m = _log_minus_one(log_c)
    if not log_m > 0:
        raise UnsupportedBound(f"subclass too small (|C| = {math.exp(log_c):.3g})", fid)
    c = (1 - 2 * eps) * log_m
    if c < 1:
        raise UnsupportedBound(
            f"(1-2eps) ln(|C|-1) = {c:.4g} < 1; the class is too small for this target", fid)
    if c < TRANSPARENCY:
        warnings.warn(f"(1-2eps) ln(|C|-1) = {c:.4g} is below 1+sqrt(2); the threshold "
                      "still holds because it is at least 1", RuntimeWarning, stacklevel=2)
        notes.append("transparency condition relaxed (value >= 1)")
    n = spec.n
    return _result(fid, [("(1-2eps) n ln(|C|-1)/(2|S|m)", c * n / (2 * size * m))], notes)


# ------------------------------------------------------------------ adaptive

def _bracket(fid, coef, parts, notes=()):
    total = math.fsum(v for _, v in parts)
    if not total > 0 or not coef > 0:
        return _vacuous(fid, coef * total, notes)
    return _result(fid, [(f"{coef:.6g} * {name}", coef * v) for name, v in parts], notes)


def _one_minus_eps(fid, eps, scale, label, notes=()):
    f = max(0.0, 1 - eps)
    if f == 0:
        return _vacuous(fid, 0.0, notes)
    return _result(fid, [(f"(1-eps)^2 {label}", f * f * scale)], notes)


def _coverable(spec: Submatrix) -> bool:
    return any(spec.n1 % a == 0 and spec.n2 % b == 0
               for a, b in divisor_pairs(spec.s, spec.n1, spec.n2))


def necessary_mu_adaptive(q: BoundQuery) -> BoundResult:
    """Below this magnitude no adaptive design reaches the target.

    For classes whose probability-of-error result does not involve the empty
    set, a Hamming query without ``include_empty_set`` falls back on that
    result, since ``P(S^ != S) <= E|S^ - S|``.
    """
    if q.direction != ADAPTIVE:
        raise DomainError("necessary_mu_adaptive needs direction='adaptive'")
    spec, m, eps = q.spec, q.m, q.target
    n = spec.n
    ham = q.metric == HAMMING
    via = ("Hamming target bounds the probability of error",) if ham else ()
    if isinstance(spec, SSet):
        if not ham:
            raise UnsupportedBound("only a Hamming-metric bound exists for s-sets",
                                   "sset.adaptive.hamming")
        s = spec.s
        if s >= n:
            raise UnsupportedBound("needs s < n", "sset.adaptive.hamming")
        return _bracket("sset.adaptive.hamming", 2 * (n - s) / m, [
            ("ln s", math.log(s)),
            ("ln((n-s)/(n+1))", math.log((n - s) / (n + 1))),
            ("ln(1/(2eps))", math.log(1 / (2 * eps))),
        ])
    if isinstance(spec, (SInterval, Submatrix)):
        kind = spec.kind
        s = spec.s
        if isinstance(spec, Submatrix) and not _coverable(spec):
            raise UnsupportedBound("needs the matrix to be tiled by disjoint s-submatrices",
                                   "submat.adaptive.prob")
        if q.include_empty_set:
            fid = f"{kind}+empty.adaptive." + ("hamming" if ham else "prob")
            if ham:
                if s >= n:
                    raise UnsupportedBound("needs s < n", fid)
                return _bracket(fid, 2 * (n - s) / (s * m), [
                    ("ln((n-s)/(n+s))", math.log((n - s) / (n + s))),
                    ("ln(s/(8eps))", math.log(s / (8 * eps))),
                ])
            return _bracket(fid, 2 * n / (s * m), [("ln(1/(2eps))", math.log(1 / (2 * eps)))])
        return _one_minus_eps(f"{kind}.adaptive.prob", eps, n / (2 * s * m), "n/(2sm)", via)
    if isinstance(spec, UnionIntervals):
        if not ham:
            raise UnsupportedBound("only a Hamming-metric bound exists for unions of intervals",
                                   "uintervals.adaptive.hamming")
        s, k = spec.s, spec.k
        if n <= s * k:
            raise UnsupportedBound("needs ks < n", "uintervals.adaptive.hamming")
        return _bracket("uintervals.adaptive.hamming", 2 * (n - s * k) / (s * m), [
            ("ln k", math.log(k)),
            ("ln((n-sk)/(n+s))", math.log((n - s * k) / (n + s))),
            ("ln(s/(8eps))", math.log(s / (8 * eps))),
        ])
    if isinstance(spec, (SStar, UnionStars)):
        big_n = star_packing_bound(spec.p, spec.s, q.greedy_packing)
        label = "greedy N(p,s)" if q.greedy_packing else "N(p,s) >= p(p-1-s)/(2s)"
        notes = (f"{label} = {big_n:.6g}",)
        single = isinstance(spec, SStar)
        if single and not (ham and q.include_empty_set):
            return _one_minus_eps("star.adaptive.prob", eps, big_n / (2 * m), "N(p,s)/(2m)",
                                  notes + via)
        if not ham:
            raise UnsupportedBound("only a Hamming-metric bound exists for unions of stars",
                                   "ustars.adaptive.hamming")
        k, s = getattr(spec, "k", 1), spec.s
        fid = "star+empty.adaptive.hamming" if single else "ustars.adaptive.hamming"
        if big_n <= k:
            return _vacuous(fid, big_n - k, notes)
        return _bracket(fid, 2 * (big_n - k) / m, [
            ("ln k", math.log(k)),
            ("ln((N-k)/(N+1))", math.log((big_n - k) / (big_n + 1))),
            ("ln(s/(8eps))", math.log(s / (8 * eps))),
        ], notes)
    raise UnsupportedBound(f"no adaptive bound for {spec.kind}")


def compute_bound(q: BoundQuery) -> BoundResult:
    return {SUFFICIENT: sufficient_mu, NONADAPTIVE: necessary_mu_nonadaptive,
            ADAPTIVE: necessary_mu_adaptive}[q.direction](q)


# ------------------------------------------------------------- Fano / table

def fano_error_lower_bound(M: float, a: float, tau: Optional[float] = None) -> float:
    """Lower bound on the worst-case error among ``M + 1`` hypotheses.

    ``a`` bounds the average KL divergence to the reference hypothesis.  The
    default ``tau = 1/M`` makes the leading factor 1/2 (so ``M = 1`` needs an
    explicit ``tau``).  Non-integer ``M`` is accepted and plugged in as is.
    Negative values are clamped to 0.
    """
    if not M >= 1:
        raise DomainError(f"M must be at least 1, got {M}")
    if not a >= 0:
        raise DomainError(f"a must be nonnegative, got {a}")
    if tau is None:
        tau = 1.0 / M
    if not 0 < tau < 1:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    if math.isinf(a):
        return 0.0
    lead = tau * M / (1 + tau * M)
    return max(0.0, lead * (1 + (a + math.sqrt(a / 2)) / math.log(tau)))


_TABLE = {
    # class -> (non-adaptive necessary, adaptive necessary, adaptive sufficient)
    "sset": ("sqrt(log n)", "sqrt(n/m log s)", "sqrt(n/m log s)"),
    "uintervals": ("sqrt(n/(s m) log(n/(k s)))", "sqrt(n/(s m) log(k s))",
                   "sqrt(n/(s m) log(k s))"),
    "ustars": ("sqrt(n/m log(sqrt(n)/(k s)))", "sqrt(n/(s m) log(k s))",
               "sqrt(n/(s m) log^2(k s))"),
    "submat": ("sqrt(n/(sqrt(s) m) log(n/s))", "sqrt(n/(s m) log s)",
               "sqrt(n/(s m) log^2 s)"),
}


def _sqrt_or_nan(x):
    return math.sqrt(x) if x >= 0 else math.nan


def _table_values(row, n, m, s, k):
    L = math.log
    if row == "sset":
        return (_sqrt_or_nan(L(n)), _sqrt_or_nan(n / m * L(s)), _sqrt_or_nan(n / m * L(s)))
    if row == "uintervals":
        return (_sqrt_or_nan(n / (s * m) * L(n / (k * s))), _sqrt_or_nan(n / (s * m) * L(k * s)),
                _sqrt_or_nan(n / (s * m) * L(k * s)))
    if row == "ustars":
        return (_sqrt_or_nan(n / m * L(math.sqrt(n) / (k * s))),
                _sqrt_or_nan(n / (s * m) * L(k * s)),
                _sqrt_or_nan(n / (s * m) * L(k * s) ** 2))
    return (_sqrt_or_nan(n / (math.sqrt(s) * m) * L(n / s)), _sqrt_or_nan(n / (s * m) * L(s)),
            _sqrt_or_nan(n / (s * m) * L(s) ** 2))


def scaling_table(specs, m: Optional[float] = None) -> list:
    """Order-of-magnitude scaling laws per class, constants set to 1.

    Single intervals and single stars use the union rows with ``k = 1``.
    ``m`` defaults to ``n`` per class.  Values are ``nan`` where a logarithm
    turns negative (outside the sparse regime the laws describe).
    """
    rows = []
    for spec in specs:
        kind = spec.kind
        row = {"sset": "sset", "interval": "uintervals", "uintervals": "uintervals",
               "star": "ustars", "ustars": "ustars", "submat": "submat"}[kind]
        n, s, k = spec.n, spec.s, getattr(spec, "k", 1)
        mm = float(n if m is None else m)
        vals = _table_values(row, n, mm, s, k)
        exprs = _TABLE[row]
        rows.append({
            "class": spec.text(), "n": n, "m": mm, "s": s, "k": k,
            "nonadaptive_necessary": exprs[0], "nonadaptive_value": vals[0],
            "adaptive_necessary": exprs[1], "adaptive_necessary_value": vals[1],
            "adaptive_sufficient": exprs[2], "adaptive_sufficient_value": vals[2],
            "note": "order-only, constants omitted (c = 1); omega_n terms not evaluated",
        })
    return rows
