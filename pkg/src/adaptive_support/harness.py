"""Monte Carlo orchestration: batches of trials, mu sweeps and SLRT calibration.

Every trial derives its randomness from ``(base_seed, trial_index)`` alone
(three child streams: support choice, strategy draws, measurement noise), so
results do not depend on the number of worker processes or on scheduling,
and the same trial index sees the same support and noise at every mu.
"""
from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .bounds import HAMMING, PROB_ERROR, BoundQuery, sufficient_mu
from .classes import ClassSpec, SSet, corner_members, make_spec, sample_member
from .driver import CappedStructuredDelta, adaptive_trial, default_rule
from .errors import DomainError
from .nonadaptive import run_nonadaptive
from .signal import NormalStream, SignalInstance, trial_seed_sequences
from .slrt import (DEFAULT_ETA, SlrtConfig, expected_precision_bounds, increment_law,
                   simulate_slrt_batch, truncated_moments)

__all__ = [
    "ADAPTIVE", "NONADAPTIVE", "UNIFORM", "FIXED", "CORNERS", "CSV_COLUMNS",
    "ExperimentConfig", "Summary", "run_trials", "phase_sweep", "threshold_at",
    "matched_target", "slrt_calibration", "wilson_interval", "summarize",
    "write_summaries", "read_summaries", "default_workers", "hamming_bracket",
]

ADAPTIVE = "adaptive"
NONADAPTIVE = "nonadaptive"
UNIFORM = "uniform"
FIXED = "fixed"
CORNERS = "corners"
Z95 = 1.959963984540054

CSV_COLUMNS = ("class", "n", "s", "k", "p", "n1", "n2", "procedure", "mu", "m", "target",
               "trials", "mean_hamming", "hamming_ci", "err_prob", "err_ci", "mean_precision",
               "prec_ci", "trunc_rate", "seed", "wall_ms")


@dataclass(frozen=True)
class ExperimentConfig:
    spec: ClassSpec
    procedure: str = ADAPTIVE
    mu: Optional[float] = None
    mu_grid: Optional[tuple] = None
    m: Optional[float] = None
    target: float = 0.1
    metric: Optional[str] = None
    eta: float = DEFAULT_ETA
    trials: int = 100
    base_seed: int = 0
    support_selection: str = UNIFORM
    supports: tuple = ()
    c_cap: Optional[float] = 10.0
    budget_matched: bool = False

    def __post_init__(self):
        if self.procedure not in (ADAPTIVE, NONADAPTIVE):
            raise DomainError(f"procedure must be adaptive or nonadaptive, got {self.procedure!r}")
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if self.mu_grid is not None:
            grid = tuple(float(x) for x in self.mu_grid)
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise DomainError("mu_grid must be strictly increasing")
            if any(not x > 0 for x in grid):
                raise DomainError("mu_grid values must be positive")
            object.__setattr__(self, "mu_grid", grid)
        if self.mu is not None and not self.mu > 0:
            raise DomainError("mu must be positive")
        if self.support_selection not in (UNIFORM, FIXED, CORNERS):
            raise DomainError(f"unknown support selection {self.support_selection!r}")
        if self.support_selection == FIXED and not self.supports:
            raise DomainError("support_selection 'fixed' needs a list of supports")
        object.__setattr__(self, "supports", tuple(tuple(int(i) for i in S) for S in self.supports))
        if self.metric is None:
            object.__setattr__(self, "metric", HAMMING if isinstance(self.spec, SSet) else PROB_ERROR)
        if self.metric not in (HAMMING, PROB_ERROR):
            raise DomainError(f"unknown metric {self.metric!r}")
        if not self.target > 0 or not self.eta > 0:
            raise DomainError("target and eta must be positive")
        if self.m is not None and not self.m > 0:
            raise DomainError("m must be positive")

    @property
    def budget(self) -> float:
        return float(self.spec.n if self.m is None else self.m)


@dataclass(frozen=True)
class Summary:
    spec: ClassSpec
    procedure: str
    mu: float
    m: float
    target: float
    trials: int
    mean_hamming: float
    hamming_ci: float
    err_prob: float
    err_ci: float
    mean_precision: float
    prec_ci: float
    trunc_rate: float
    seed: int
    wall_ms: float = 0.0
    err_low: float = 0.0
    err_high: float = 0.0
    max_hamming: int = 0
    size_mismatch: int = 0
    empty_estimates: int = 0
    verdicts: dict = field(default_factory=dict, compare=False)

    def row(self) -> dict:
        params = self.spec.params()
        out = {"class": self.spec.kind}
        for key in ("n", "s", "k", "p", "n1", "n2"):
            out[key] = params.get(key, "")
        out["n"] = self.spec.n
        out.update(procedure=self.procedure, mu=self.mu, m=self.m, target=self.target,
                   trials=self.trials, mean_hamming=self.mean_hamming, hamming_ci=self.hamming_ci,
                   err_prob=self.err_prob, err_ci=self.err_ci, mean_precision=self.mean_precision,
                   prec_ci=self.prec_ci, trunc_rate=self.trunc_rate, seed=self.seed,
                   wall_ms=self.wall_ms)
        return out


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple:
    """``(low, high, half_width)`` of the Wilson score interval."""
    if trials < 1:
        raise DomainError("need at least one trial")
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return center - half, center + half, half


def _normal_ci(x: np.ndarray) -> float:
    if x.size < 2:
        return 0.0
    return float(Z95 * np.std(x, ddof=1) / math.sqrt(x.size))


def default_workers() -> int:
    cap = os.environ.get("ASL_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise DomainError(f"ASL_THREADS must be an integer, got {cap!r}") from None
    return n


# ------------------------------------------------------------------ trials

def _support_for(config: ExperimentConfig, trial: int, rng) -> tuple:
    if config.support_selection == FIXED:
        return config.supports[trial % len(config.supports)]
    if config.support_selection == CORNERS:
        corners = corner_members(config.spec)
        return corners[trial % len(corners)]
    return sample_member(config.spec, rng)


def _one_trial(config: ExperimentConfig, mu: float, target: float, trial: int) -> tuple:
    ss_support, ss_strategy, ss_noise = trial_seed_sequences(config.base_seed, trial, 3)
    support = _support_for(config, trial, np.random.default_rng(ss_support))
    noise = NormalStream(np.random.default_rng(ss_noise))
    spec = config.spec
    if config.procedure == NONADAPTIVE:
        res = run_nonadaptive(spec, SignalInstance.from_support(spec.n, mu, support),
                              config.budget, noise)
    else:
        rule = default_rule(spec, target, config.metric)
        res = adaptive_trial(spec, support, mu, rule, eta=config.eta, m=config.budget,
                             c_cap=config.c_cap, strategy_rng=np.random.default_rng(ss_strategy),
                             noise=noise)
    return (res.hamming, res.total_precision, res.truncated,
            len(res.estimate) != len(support), len(res.estimate) == 0, res.verdict)


def _chunk(args):
    config, mu, target, trials = args
    return [_one_trial(config, mu, target, t) for t in trials]


def summarize(config: ExperimentConfig, mu: float, target: float, outcomes: Sequence,
              wall_ms: float = 0.0) -> Summary:
    ham = np.array([o[0] for o in outcomes], dtype=float)
    prec = np.array([o[1] for o in outcomes], dtype=float)
    T = len(outcomes)
    errors = int(np.count_nonzero(ham))
    lo, hi, half = wilson_interval(errors, T)
    verdicts = {}
    for o in outcomes:
        verdicts[o[5]] = verdicts.get(o[5], 0) + 1
    return Summary(
        spec=config.spec, procedure=config.procedure, mu=float(mu), m=config.budget,
        target=float(target), trials=T, mean_hamming=float(ham.mean()),
        hamming_ci=_normal_ci(ham), err_prob=errors / T, err_ci=half,
        mean_precision=math.fsum(prec) / T, prec_ci=_normal_ci(prec),
        trunc_rate=sum(o[2] for o in outcomes) / T, seed=config.base_seed, wall_ms=wall_ms,
        err_low=lo, err_high=hi, max_hamming=int(ham.max()),
        size_mismatch=sum(o[3] for o in outcomes), empty_estimates=sum(o[4] for o in outcomes),
        verdicts=verdicts,
    )


def _run_outcomes(config, mu, target, workers):
    trials = list(range(config.trials))
    if workers <= 1 or config.trials < 2:
        return _chunk((config, mu, target, trials))
    size = max(1, math.ceil(len(trials) / (4 * workers)))
    chunks = [(config, mu, target, trials[i:i + size]) for i in range(0, len(trials), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_chunk, chunks))  # map keeps submission order
    return [o for part in parts for o in part]


def run_trials(config: ExperimentConfig, mu: Optional[float] = None,
               target: Optional[float] = None, workers: Optional[int] = None,
               timing: bool = False) -> Summary:
    """Run ``config.trials`` independent trials at one magnitude and summarize.

    Output is identical for any ``workers``; ``wall_ms`` is recorded only with
    ``timing`` so that repeated runs produce identical summaries.
    """
    mu = config.mu if mu is None else mu
    if mu is None:
        raise DomainError("no mu given")
    target = config.target if target is None else target
    workers = default_workers() if workers is None else max(1, int(workers))
    t0 = time.perf_counter()
    outcomes = _run_outcomes(config, mu, target, workers)
    wall = (time.perf_counter() - t0) * 1000 if timing else 0.0
    return summarize(config, mu, target, outcomes, round(wall, 3))


# ------------------------------------------------------------------- sweeps

def _target_range(config: ExperimentConfig) -> tuple:
    # beyond the upper end some per-test error probability would exceed 1/2
    spec = config.spec
    if isinstance(spec, SSet):
        return 1e-12, float(spec.s)
    rule = default_rule(spec, 1.0, PROB_ERROR)
    hi = float(spec.l_total * (2 if isinstance(rule, CappedStructuredDelta) else 1))
    if config.metric == HAMMING:
        hi *= spec.s_eff
    return 1e-12, hi


def matched_target(config: ExperimentConfig, mu: float) -> float:
    """Error target whose sufficient magnitude equals ``mu`` at budget ``m``.

    Clamped to the range where every per-test probability stays at most 1/2;
    at the top of the range the procedure may exceed its budget.
    """
    lo, hi = _target_range(config)

    def gap(log_t):
        q = BoundQuery(config.spec, config.budget, math.exp(log_t), config.metric)
        return sufficient_mu(q).mu_threshold - mu

    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        g_lo, g_hi = gap(math.log(lo)), gap(math.log(hi))
        if g_lo <= 0:
            return lo
        if g_hi >= 0:
            return hi
        return math.exp(brentq(gap, math.log(lo), math.log(hi), xtol=1e-12))


def phase_sweep(config: ExperimentConfig, workers: Optional[int] = None,
                timing: bool = False) -> list:
    """One :class:`Summary` per grid magnitude, in grid order.

    With ``budget_matched`` the adaptive target at each mu is
    :func:`matched_target`; otherwise ``config.target`` is used throughout.
    """
    grid = config.mu_grid
    if grid is None or len(grid) < 3:
        raise DomainError("a sweep needs a mu_grid with at least 3 points")
    rows = []
    for mu in grid:
        target = config.target
        if config.budget_matched and config.procedure == ADAPTIVE:
            target = matched_target(config, mu)
        rows.append(run_trials(config, mu, target, workers, timing))
    return rows


def threshold_at(rows: Sequence[Summary], level: float) -> Optional[float]:
    """Smallest grid magnitude whose error probability is at most ``level``."""
    for row in sorted(rows, key=lambda r: r.mu):
        if row.err_prob <= level:
            return row.mu
    return None


def hamming_bracket(summary: Summary) -> dict:
    """Check ``err_prob <= mean_hamming <= 2 |S| err_prob`` on a summary.

    The right inequality presumes ``|S^| = |S|``; it is only judged when no
    trial produced an estimate of a different size.
    """
    s_eff = summary.spec.s_eff
    left = summary.err_prob <= summary.mean_hamming + 1e-12
    applicable = summary.size_mismatch == 0
    right = summary.mean_hamming <= 2 * s_eff * summary.err_prob + summary.hamming_ci + 1e-12
    return {"left": left, "right_applicable": applicable, "right": right if applicable else None}


# -------------------------------------------------------------- calibration

def slrt_calibration(mu: float, alpha: float, beta: float, gamma_grid: Sequence[float],
                     trials: int, seed: int = 0) -> list:
    """Empirical error rates and precision of the SLRT along a decreasing Gamma grid.

    Each row carries the limiting values and upper bounds on ``Gamma E(N)``
    plus the three conditional sandwiches on the final log-likelihood ratio
    under H0 (lower/upper bound, observed mean, its standard error).
    """
    grid = [float(g) for g in gamma_grid]
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise DomainError("gamma_grid must be strictly decreasing")
    if trials < 2:
        raise DomainError("need at least 2 trials per hypothesis")
    bounds = expected_precision_bounds(alpha, beta, mu)
    rows = []
    for j, gamma in enumerate(grid):
        cfg = SlrtConfig(alpha, beta, mu, gamma)
        s0, s1 = np.random.SeedSequence([int(seed), j]).spawn(2)
        d0, n0, z0 = simulate_slrt_batch(cfg, True, trials, NormalStream(np.random.default_rng(s0)))
        d1, n1, _ = simulate_slrt_batch(cfg, False, trials, NormalStream(np.random.default_rng(s1)))
        m0, sd0 = increment_law(mu, gamma, True)
        tm = truncated_moments(m0, sd0)
        l, u = cfg.l, cfg.u
        low, high = z0[d0 == 0], z0[d0 == 1]

        def stat(x):
            if x.size == 0:
                return math.nan, math.nan
            return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0

        llr_low, llr_low_se = stat(low)
        exp_low, exp_low_se = stat(np.exp(low))
        exp_high, exp_high_se = stat(np.exp(high))
        prec0 = gamma * n0.astype(float)
        prec1 = gamma * n1.astype(float)
        rows.append({
            "gamma": gamma, "trials": trials,
            "alpha_hat": float(d0.mean()), "beta_hat": float(1 - d1.mean()),
            "prec_h0": float(prec0.mean()), "prec_h0_se": float(prec0.std(ddof=1) / math.sqrt(trials)),
            "prec_h1": float(prec1.mean()), "prec_h1_se": float(prec1.std(ddof=1) / math.sqrt(trials)),
            "lower_h0": bounds.lower_h0, "lower_h1": bounds.lower_h1,
            "upper_h0": bounds.upper_h0, "upper_h1": bounds.upper_h1,
            "wald_llr_mean": float(z0.mean()),
            "wald_llr_se": float(z0.std(ddof=1) / math.sqrt(trials)),
            "wald_predicted": float(n0.mean() * m0),
            "wald_predicted_se": float(n0.std(ddof=1) / math.sqrt(trials) * abs(m0)),
            "llr_low_mean": llr_low, "llr_low_se": llr_low_se,
            "llr_low_bounds": (l + tm["mean_below"], l),
            "exp_low_mean": exp_low, "exp_low_se": exp_low_se,
            "exp_low_bounds": (math.exp(l) * tm["exp_below"], math.exp(l)),
            "exp_high_mean": exp_high, "exp_high_se": exp_high_se,
            "exp_high_bounds": (math.exp(u), math.exp(u) * tm["exp_above"]),
        })
    return rows


CALIBRATION_COLUMNS = ("gamma", "trials", "alpha_hat", "beta_hat", "prec_h0", "prec_h0_se",
                       "prec_h1", "prec_h1_se", "lower_h0", "lower_h1", "upper_h0", "upper_h1")


def write_calibration(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CALIBRATION_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CALIBRATION_COLUMNS])


# ---------------------------------------------------------------------- CSV

def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_summaries(summaries: Sequence[Summary], fh) -> None:
    """Write summaries as CSV with a header and the documented column order."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in summaries:
        row = s.row()
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


_INT_COLS = {"n", "s", "k", "p", "n1", "n2", "trials", "seed"}
_SPEC_KEYS = {"sset": ("n", "s"), "interval": ("n", "s"), "uintervals": ("n", "s", "k"),
              "star": ("p", "s"), "ustars": ("p", "s", "k"), "submat": ("n1", "n2", "s")}


def read_summaries(fh) -> list:
    """Parse CSV written by :func:`write_summaries` back into summaries."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise DomainError(f"unexpected CSV header {header!r}")
    out = []
    for rec in reader:
        row = dict(zip(CSV_COLUMNS, rec))
        kind = row["class"]
        if kind not in _SPEC_KEYS:
            raise DomainError(f"unknown class {kind!r} in CSV")
        spec = make_spec(kind, **{k: int(row[k]) for k in _SPEC_KEYS[kind]})
        val = {c: (int(row[c]) if c in _INT_COLS else float(row[c]))
               for c in CSV_COLUMNS if c not in ("class", "procedure", "n", "s", "k", "p", "n1", "n2")}
        out.append(Summary(spec=spec, procedure=row["procedure"], **val))
    return out


def summaries_to_csv(summaries: Sequence[Summary]) -> str:
    buf = io.StringIO()
    write_summaries(summaries, buf)
    return buf.getvalue()
