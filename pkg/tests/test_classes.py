import itertools
import math
import zlib
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptive_support.classes import (SInterval, SSet, SStar, Submatrix, UnionIntervals, UnionStars,
                                      cardinality, cell_index, cell_position, check_symmetric,
                                      corner_members, edge_index, edge_vertices,
                                      enumerate_class, greedy_star_packing, incident_edges,
                                      make_spec, parse_class, sample_member)
from adaptive_support.errors import CapabilityRefusal, DomainError, TrackerConflict
from adaptive_support.tracking import make_tracker
from oracles import ORACLE_SPECS, MemberMatrix, random_label_sequence, verdicts_along


class TestSpecs:
    @pytest.mark.parametrize("text", [
        "sset:n=100,s=5", "interval:n=1024,s=16", "uintervals:n=64,s=4,k=3",
        "star:p=10,s=3", "ustars:p=64,s=8,k=3", "submat:n1=32,n2=32,s=16",
    ])
    def test_round_trip(self, text):
        assert parse_class(text).text() == text

    @pytest.mark.parametrize("text", [
        "sset:n=5,s=6", "sset:n=5,s=0", "interval:n=3,s=4", "uintervals:n=8,s=3,k=3",
        "star:p=5,s=1", "star:p=5,s=5", "ustars:p=20,s=3,k=3", "ustars:p=7,s=3,k=2",
        "submat:n1=2,n2=2,s=5", "submat:n1=2,n2=2,s=7", "submat:n1=3,n2=3,s=0",
        "sset:n=5", "sset:n=5,s=2,k=1", "blob:n=4,s=2", "sset n=4", "sset:n=x,s=2",
    ])
    def test_invalid(self, text):
        with pytest.raises(DomainError):
            parse_class(text)

    def test_derived_sizes(self):
        assert SStar(6, 2).n == 15
        assert Submatrix(4, 5, 6).n == 20
        u = UnionStars(64, 8, 3)
        assert (u.n, u.s_eff, u.l_total) == (2016, 24, 3)
        assert UnionIntervals(64, 4, 3).s_eff == 12

    def test_make_spec(self):
        assert make_spec("interval", n=10, s=3) == SInterval(10, 3)


class TestEdgeIndexing:
    def test_row_major_order(self):
        p = 5
        pairs = [(u, v) for u in range(1, p + 1) for v in range(u + 1, p + 1)]
        assert [edge_index(u, v, p) for u, v in pairs] == list(range(1, 11))
        assert [edge_vertices(i, p) for i in range(1, 11)] == pairs

    @given(st.integers(2, 30).flatmap(lambda p: st.tuples(st.just(p), st.integers(1, p),
                                                           st.integers(1, p))))
    def test_bijection(self, args):
        p, u, v = args
        if u == v:
            with pytest.raises(DomainError):
                edge_index(u, v, p)
        else:
            assert edge_vertices(edge_index(u, v, p), p) == (min(u, v), max(u, v))

    def test_incident(self):
        inc = incident_edges(4)
        assert inc[1] == (1, 2, 3) and inc[4] == (3, 5, 6)

    def test_cells(self):
        assert cell_index(2, 3, 4) == 7 and cell_position(7, 4) == (2, 3)


class TestEnumeration:
    def test_interval(self):
        assert enumerate_class(SInterval(5, 2)) == [(1, 2), (2, 3), (3, 4), (4, 5)]

    def test_sset(self):
        assert len(enumerate_class(SSet(4, 2))) == 6

    def test_star_p4(self):
        members = enumerate_class(SStar(4, 2))
        assert len(members) == 12
        # independent count: edge pairs that share a vertex
        pairs = list(itertools.combinations(range(1, 7), 2))
        shared = [pr for pr in pairs if set(edge_vertices(pr[0], 4)) & set(edge_vertices(pr[1], 4))]
        assert sorted(shared) == members

    @pytest.mark.parametrize("p,s", [(p, s) for p in range(3, 9) for s in range(2, p)])
    def test_star_cardinality(self, p, s):
        assert len(enumerate_class(SStar(p, s))) == p * math.comb(p - 1, s)

    @pytest.mark.parametrize("text", ORACLE_SPECS)
    def test_canonical_and_cardinality(self, text):
        spec = parse_class(text)
        members = enumerate_class(spec)
        assert members == sorted(set(members))
        assert all(len(m) == spec.size and m == tuple(sorted(m)) for m in members)
        assert cardinality(spec) == len(members)

    def test_union_intervals_matches_filter(self):
        spec = UnionIntervals(10, 2, 3)
        blocks = [tuple(range(a, a + 2)) for a in range(1, 10)]
        brute = set()
        for combo in itertools.combinations(blocks, 3):
            cells = [i for b in combo for i in b]
            if len(set(cells)) == 6:
                brute.add(tuple(sorted(cells)))
        assert enumerate_class(spec) == sorted(brute)

    def test_submatrix_all_factorizations(self):
        members = enumerate_class(Submatrix(3, 3, 2))
        assert len(members) == 3 * 3 + 3 * 3  # 1x2 and 2x1

    def test_cap_refusal(self):
        with pytest.raises(CapabilityRefusal) as exc:
            enumerate_class(SSet(40, 20))
        assert exc.value.cardinality == math.comb(40, 20)


class TestSymmetry:
    def test_sset(self):
        for n in range(1, 11):
            for s in range(1, n + 1):
                assert check_symmetric(SSet(n, s))

    def test_interval_full_class(self):
        assert not check_symmetric(SInterval(4, 2))

    def test_disjoint_list(self):
        assert check_symmetric([{1, 2}, {3, 4}], n=4)

    def test_unequal_sizes(self):
        with pytest.raises(CapabilityRefusal):
            check_symmetric([{1}, {1, 2}], n=2)


class TestStarPacking:
    def _check(self, p, s, stars):
        seen = set()
        for st_ in stars:
            edges = st_.edges(p)
            assert len(edges) == s and st_.center not in st_.leaves
            assert not seen & set(edges)
            seen |= set(edges)

    @pytest.mark.parametrize("p,s,minimum", [(6, 2, 5), (5, 2, 3)])
    def test_examples(self, p, s, minimum):
        stars = greedy_star_packing(p, s)
        self._check(p, s, stars)
        assert len(stars) >= minimum

    def test_full_degree(self):
        assert len(greedy_star_packing(5, 4)) >= 1

    def test_bound_everywhere(self):
        for p in range(3, 13):
            for s in range(2, p):
                stars = greedy_star_packing(p, s)
                self._check(p, s, stars)
                assert len(stars) >= math.ceil(p * (p - 1 - s) / (2 * s))

    def test_invalid(self):
        with pytest.raises(DomainError):
            greedy_star_packing(5, 1)


class TestSampling:
    @pytest.mark.parametrize("text", ["sset:n=6,s=2", "interval:n=7,s=3", "uintervals:n=8,s=2,k=2",
                                      "star:p=5,s=2", "ustars:p=8,s=3,k=2", "submat:n1=3,n2=4,s=2"])
    def test_members_valid(self, text):
        spec = parse_class(text)
        rng = np.random.default_rng(0)
        members = set(enumerate_class(spec))
        for _ in range(200):
            assert sample_member(spec, rng) in members

    @pytest.mark.parametrize("text", ["uintervals:n=8,s=2,k=2", "star:p=5,s=2", "submat:n1=3,n2=4,s=2",
                                      "ustars:p=6,s=2,k=1"])
    def test_uniform(self, text):
        from scipy.stats import chisquare

        spec = parse_class(text)
        members = enumerate_class(spec)
        rng = np.random.default_rng(1)
        draws = 200 * len(members)
        counts = Counter(sample_member(spec, rng) for _ in range(draws))
        obs = [counts[m] for m in members]
        assert chisquare(obs).pvalue > 1e-4

    def test_union_stars_uniform(self):
        # 28000 members; compare marginal multiplicity of each edge instead
        spec = UnionStars(8, 3, 2)
        members = np.array(enumerate_class(spec))
        expected = np.bincount(members.ravel(), minlength=spec.n + 1)[1:] / len(members)
        rng = np.random.default_rng(2)
        draws = np.array([sample_member(spec, rng) for _ in range(6000)])
        got = np.bincount(draws.ravel(), minlength=spec.n + 1)[1:] / len(draws)
        assert np.max(np.abs(got - expected)) < 0.03

    @pytest.mark.parametrize("text", ORACLE_SPECS)
    def test_corners_are_members(self, text):
        spec = parse_class(text)
        members = set(enumerate_class(spec))
        corners = corner_members(spec)
        assert corners and all(c in members for c in corners)

    def test_corner_examples(self):
        assert corner_members(SInterval(10, 3)) == [(1, 2, 3), (8, 9, 10)]
        assert corner_members(SStar(5, 2))[0] == (1, 2)


class TestTrackerExamples:
    def test_interval(self):
        t = make_tracker(SInterval(6, 2))
        assert t.update(3, 1).is_many
        v = t.update(2, 0)
        assert v.is_unique and v.support == (3, 4)
        t2 = make_tracker(SInterval(6, 2))
        t2.update(3, 1)
        t2.update(2, 0)
        assert t2.update(4, 0).is_none

    def test_interval_alternative_none(self):
        t = make_tracker(SInterval(6, 2))
        t.update(3, 1)
        t.update(2, 1)
        assert t.update(4, 1).is_none

    def test_sset(self):
        t = make_tracker(SSet(5, 2))
        for i, y in [(1, 0), (2, 1), (3, 0)]:
            assert t.update(i, y).is_many
        v = t.update(4, 0)
        assert v.is_unique and v.support == (2, 5)

    @pytest.mark.parametrize("text", ORACLE_SPECS)
    def test_empty_is_many(self, text):
        assert make_tracker(parse_class(text)).verdict.is_many

    def test_singleton_class(self):
        v = make_tracker(SSet(3, 3)).verdict
        assert v.is_unique and v.support == (1, 2, 3)

    def test_relabel(self):
        t = make_tracker(SSet(5, 2))
        t.update(1, 1)
        assert t.update(1, 1).is_many
        with pytest.raises(TrackerConflict):
            t.update(1, 0)

    @pytest.mark.parametrize("args", [(0, 1), (6, 1), (1, 2)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            make_tracker(SSet(5, 2)).update(*args)


@pytest.mark.parametrize("text", ORACLE_SPECS)
def test_tracker_matches_enumeration(text):
    spec = parse_class(text)
    mm = MemberMatrix(spec)
    rng = np.random.default_rng(zlib.crc32(text.encode()))
    for rep in range(200):
        mode = rep % 3
        truth = mm.members[int(rng.integers(len(mm.members)))] if mode else None
        seq = random_label_sequence(spec, rng, truth=truth, flip=0.05 if mode == 2 else 0.0)
        tracker = make_tracker(spec)
        for (i, y), (kind, support) in zip(seq, verdicts_along(mm, seq)):
            v = tracker.update(i, y)
            assert v.kind == kind, (text, seq)
            if kind == "unique":
                assert v.support == support
