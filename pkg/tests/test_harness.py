import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from adaptive_support.bounds import BoundQuery, sufficient_mu
from adaptive_support.classes import SInterval, SSet, SStar, UnionStars, corner_members, parse_class
from adaptive_support.errors import CapabilityRefusal, DomainError
from adaptive_support.harness import (ADAPTIVE, CORNERS, CSV_COLUMNS, FIXED, NONADAPTIVE,
                                      ExperimentConfig, Summary, hamming_bracket, matched_target,
                                      phase_sweep, read_summaries, run_trials, slrt_calibration,
                                      summaries_to_csv, threshold_at, wilson_interval,
                                      write_summaries)


def small(**kw):
    base = dict(spec=SInterval(64, 4), procedure=ADAPTIVE, mu=1.5, trials=20, base_seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(trials=0), dict(procedure="both"), dict(mu_grid=(1.0, 1.0, 2.0)),
        dict(mu_grid=(2.0, 1.0, 3.0)), dict(mu=-1.0), dict(support_selection="worst"),
        dict(support_selection=FIXED), dict(metric="l1"), dict(target=0.0), dict(m=0.0),
    ])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            small(**kw)

    def test_default_metric(self):
        assert small(spec=SSet(10, 2)).metric == "hamming"
        assert small().metric == "prob_error"

    def test_budget_defaults_to_n(self):
        assert small().budget == 64.0 and small(m=10).budget == 10.0


class TestWilson:
    @given(st.integers(1, 2000).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
    def test_against_closed_form(self, args):
        k, n = args
        z = 1.959963984540054
        p = k / n
        center = (p + z * z / (2 * n)) / (1 + z * z / n)
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
        lo, hi, h = wilson_interval(k, n)
        assert (lo, hi, h) == pytest.approx((center - half, center + half, half), abs=1e-12)
        assert 0 <= lo + 1e-12 and hi <= 1 + 1e-12 and lo - 1e-12 <= p <= hi + 1e-12

    def test_known_value(self):
        # 10 successes in 100: Wilson 95% interval (0.0552, 0.1744)
        lo, hi, _ = wilson_interval(10, 100)
        assert (lo, hi) == pytest.approx((0.0552, 0.1744), abs=1e-4)


class TestRunTrials:
    def test_single_trial_reproducible(self):
        cfg = small(trials=1)
        a, b = run_trials(cfg, workers=1), run_trials(cfg, workers=1)
        assert summaries_to_csv([a]) == summaries_to_csv([b])
        assert a.hamming_ci == 0.0 and a.prec_ci == 0.0 and a.trials == 1

    @pytest.mark.parametrize("procedure", [ADAPTIVE, NONADAPTIVE])
    def test_worker_invariance(self, procedure):
        cfg = small(procedure=procedure, trials=24)
        one = run_trials(cfg, workers=1)
        two = run_trials(cfg, workers=3)
        assert summaries_to_csv([one]) == summaries_to_csv([two])
        assert one.verdicts == two.verdicts

    def test_seed_matters(self):
        a = run_trials(small(trials=30, mu=0.8), workers=1)
        b = run_trials(small(trials=30, mu=0.8, base_seed=2), workers=1)
        assert (a.mean_precision, a.mean_hamming) != (b.mean_precision, b.mean_hamming)

    def test_timing_only_on_request(self):
        assert run_trials(small(trials=2), workers=1).wall_ms == 0.0
        assert run_trials(small(trials=2), workers=1, timing=True).wall_ms > 0.0

    def test_fixed_supports(self):
        cfg = small(support_selection=FIXED, supports=((5, 6, 7, 8),), trials=10, mu=50.0)
        s = run_trials(cfg, workers=1)
        assert s.trials == 10 and s.err_prob <= 0.3

    def test_corners(self):
        cfg = small(spec=SStar(8, 3), support_selection=CORNERS, trials=6)
        assert run_trials(cfg, workers=1).trials == 6
        assert len(corner_members(SStar(8, 3))) == 2

    def test_refusal_propagates(self):
        cfg = small(spec=UnionStars(40, 4, 3), procedure=NONADAPTIVE, trials=1)
        with pytest.raises(CapabilityRefusal):
            run_trials(cfg, workers=1)

    def test_needs_mu(self):
        with pytest.raises(DomainError):
            run_trials(small(mu=None), workers=1)

    def test_statistics(self):
        s = run_trials(small(trials=40, mu=0.7), workers=1)
        assert 0 <= s.err_prob <= 1 and s.err_low <= s.err_prob <= s.err_high
        assert s.err_prob <= s.mean_hamming + 1e-12
        assert sum(s.verdicts.values()) == 40

    def test_failure_side_sset(self):
        # far below threshold even the most lenient allocation leaves errors
        spec = SSet(10_000, 10)
        cfg = ExperimentConfig(spec, ADAPTIVE, mu=2.0, trials=40, base_seed=5, budget_matched=True)
        s = run_trials(cfg, target=matched_target(cfg, 2.0), workers=1)
        assert s.mean_hamming >= 1


class TestSsetErrorStructure:
    """A wrong label on an s-set scan swaps one coordinate for another."""

    def test_errors_cost_two(self):
        mu = math.sqrt(4 * math.log(200))
        cfg = ExperimentConfig(SSet(1000, 10), ADAPTIVE, mu=mu, target=0.1, trials=400, base_seed=9)
        s = run_trials(cfg)
        assert s.size_mismatch == 0
        assert s.max_hamming % 2 == 0
        assert s.mean_hamming >= 2 * s.err_prob - 1e-12
        # the per-label union bound controls P(error), not the Hamming distance
        assert s.err_prob <= 0.1 + 2 * s.err_ci


class TestBracket:
    def test_on_summary(self):
        s = run_trials(small(trials=60, mu=0.6, target=0.5), workers=1)
        b = hamming_bracket(s)
        assert b["left"]
        if b["right_applicable"]:
            assert b["right"]

    def test_handles_mismatch(self):
        s = run_trials(small(trials=60, mu=0.6, target=0.9), workers=1)
        b = hamming_bracket(s)
        assert b["right_applicable"] == (s.size_mismatch == 0)


class TestMatchedTarget:
    @pytest.mark.parametrize("spec", [SSet(1000, 10), SInterval(1024, 16), SStar(64, 8)])
    def test_solves_equation(self, spec):
        cfg = ExperimentConfig(spec)
        mu = 1.2 * sufficient_mu(BoundQuery(spec, spec.n, 0.1, cfg.metric)).mu_threshold
        t = matched_target(cfg, mu)
        assert t < 0.1
        assert sufficient_mu(BoundQuery(spec, spec.n, t, cfg.metric)).mu_threshold == pytest.approx(mu, rel=1e-8)

    def test_clamped_high(self):
        cfg = ExperimentConfig(SSet(1000, 10))
        assert matched_target(cfg, 0.1) == 10.0


class TestSweep:
    def test_requires_grid(self):
        with pytest.raises(DomainError):
            phase_sweep(small(mu_grid=(1.0, 2.0)))

    def test_rows_in_order(self):
        rows = phase_sweep(small(mu_grid=(0.5, 1.0, 2.0), trials=10), workers=1)
        assert [r.mu for r in rows] == [0.5, 1.0, 2.0]

    def test_threshold_at(self):
        def row(mu, err):
            return Summary(SSet(10, 2), ADAPTIVE, mu, 10.0, 0.1, 10, 0, 0, err, 0, 0, 0, 0, 0)
        rows = [row(3.0, 0.1), row(1.0, 0.9), row(2.0, 0.5)]
        assert threshold_at(rows, 0.5) == 2.0
        assert threshold_at(rows, 0.05) is None


class TestSsetSweep:
    def test_adaptive_threshold(self, sset_sweep):
        t = threshold_at(sset_sweep[ADAPTIVE], 0.5)
        assert t is not None and 2.0 <= t <= 3.5

    def test_nonadaptive_threshold(self, sset_sweep):
        t = threshold_at(sset_sweep[NONADAPTIVE], 0.5)
        assert t is None or t >= 3.5

    @pytest.mark.parametrize("proc", [ADAPTIVE, NONADAPTIVE])
    def test_monotone(self, sset_sweep, proc):
        rows = sset_sweep[proc]
        for a, b in zip(rows, rows[1:]):
            assert b.err_prob <= a.err_prob + 2 * max(a.err_ci, b.err_ci)

    def test_bracket_on_every_row(self, sset_sweep):
        for rows in sset_sweep.values():
            for s in rows:
                b = hamming_bracket(s)
                assert b["left"]
                if b["right_applicable"]:
                    assert b["right"]


class TestCalibration:
    @pytest.fixture(scope="class")
    @staticmethod
    def table():
        return slrt_calibration(1.0, 0.05, 0.05, [0.1, 0.01, 0.001], 10_000, seed=0)

    def test_limit_at_last_point(self, table):
        assert abs(table[-1]["prec_h0"] / 5.2999 - 1) <= 0.05

    def test_alpha_at_last_point(self, table):
        assert 0.03 <= table[-1]["alpha_hat"] <= 0.07

    def test_upper_bound_everywhere(self, table):
        for row in table:
            assert row["prec_h0"] <= 5.9915 * 1.05

    def test_sandwiches(self, table):
        for row in table:
            for key in ("llr_low", "exp_low", "exp_high"):
                lo, hi = row[f"{key}_bounds"]
                mean, se = row[f"{key}_mean"], row[f"{key}_se"]
                assert lo - 3 * se <= mean <= hi + 3 * se, (row["gamma"], key)
            diff = abs(row["wald_llr_mean"] - row["wald_predicted"])
            assert diff <= 3 * math.hypot(row["wald_llr_se"], row["wald_predicted_se"])

    def test_grid_must_decrease(self):
        with pytest.raises(DomainError):
            slrt_calibration(1.0, 0.05, 0.05, [0.01, 0.1], 10)


class TestCsv:
    def test_header_and_round_trip(self):
        rows = [run_trials(small(trials=5), workers=1),
                run_trials(small(spec=SSet(30, 3), procedure=NONADAPTIVE, trials=5), workers=1),
                run_trials(small(spec=parse_class("ustars:p=10,s=3,k=2"), trials=3), workers=1),
                run_trials(small(spec=parse_class("submat:n1=4,n2=6,s=4"), trials=3), workers=1)]
        text = summaries_to_csv(rows)
        assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
        back = read_summaries(io.StringIO(text))
        assert summaries_to_csv(back) == text

    def test_empty_params(self):
        text = summaries_to_csv([run_trials(small(trials=2), workers=1)])
        fields = text.splitlines()[1].split(",")
        row = dict(zip(CSV_COLUMNS, fields))
        assert row["class"] == "interval" and row["k"] == "" and row["p"] == ""

    def test_bad_header(self):
        with pytest.raises(DomainError):
            read_summaries(io.StringIO("a,b\n1,2\n"))
