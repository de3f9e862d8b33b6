"""Incremental consistency tracking: the stopping rule of the query procedures.

A tracker holds binary labels for queried coordinates and reports whether
the class members agreeing with every label number zero (``none``), exactly
one (``unique``) or more (``many``).  Each class has its own update rule; the
brute-force check against :func:`enumerate_class` lives in the test suite.

Once a verdict is ``unique`` or ``none`` further labels can only keep it or
turn ``unique`` into ``none``, so only the ``many`` state needs class logic.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .classes import (ClassSpec, SInterval, SSet, SStar, Submatrix, UnionIntervals,
                      UnionStars, cell_index, divisor_pairs, edge_table, incident_edges)
from .errors import DomainError, TrackerConflict

__all__ = ["Verdict", "MANY", "NONE", "unique", "ConsistencyTracker", "make_tracker"]


@dataclass(frozen=True)
class Verdict:
    kind: str
    support: Optional[tuple] = None

    @property
    def is_many(self):
        return self.kind == "many"

    @property
    def is_unique(self):
        return self.kind == "unique"

    @property
    def is_none(self):
        return self.kind == "none"

    def __repr__(self):
        if self.kind == "unique":
            return f"Unique({set(self.support) if self.support else '{}'})"
        return self.kind.capitalize()


MANY = Verdict("many")
NONE = Verdict("none")


def unique(support) -> Verdict:
    return Verdict("unique", tuple(sorted(support)))


class ConsistencyTracker:
    """Labels seen so far and the current verdict.

    Subclasses implement :meth:`_initial` and :meth:`_recompute`, the latter
    called only while the verdict is ``many``.
    """

    def __init__(self, spec: ClassSpec):
        self.spec = spec
        self.n = spec.n
        self.labels = {}
        self.verdict = self._initial()

    def _initial(self) -> Verdict:
        return MANY

    def _record(self, index: int, label: int):
        """Update class-specific bookkeeping for a new label."""

    def _recompute(self, index: int, label: int) -> Verdict:
        raise NotImplementedError

    def update(self, index: int, label: int) -> Verdict:
        if not 1 <= index <= self.n:
            raise DomainError(f"index {index} outside [1, {self.n}]")
        if label not in (0, 1):
            raise DomainError(f"labels are 0 or 1, got {label!r}")
        old = self.labels.get(index)
        if old is not None:
            if old != label:
                raise TrackerConflict(f"coordinate {index} relabeled {old} -> {label}")
            return self.verdict
        self.labels[index] = label
        self._record(index, label)
        v = self.verdict
        if v.is_unique:
            if (index in v.support) != bool(label):
                self.verdict = NONE
        elif v.is_many:
            self.verdict = self._recompute(index, label)
        return self.verdict

    def unlabeled(self):
        return [i for i in range(1, self.n + 1) if i not in self.labels]


# ---------------------------------------------------------------------------
# s-sets: count positives and negatives

class SetTracker(ConsistencyTracker):
    def _initial(self):
        self.pos = 0
        self.neg = 0
        return self._verdict()

    def _record(self, index, label):
        if label:
            self.pos += 1
        else:
            self.neg += 1

    def _verdict(self):
        need = self.spec.s - self.pos
        free = self.n - self.pos - self.neg
        if need < 0 or need > free:
            return NONE
        if need == 0:
            return unique(i for i, y in self.labels.items() if y)
        if need == free:
            return unique(i for i in range(1, self.n + 1) if self.labels.get(i, 1))
        return MANY

    def _recompute(self, index, label):
        return self._verdict()


# ---------------------------------------------------------------------------
# intervals: feasible window of start offsets

class IntervalTracker(ConsistencyTracker):
    def _initial(self):
        n, s = self.n, self.spec.s
        self.last = n - s + 1
        self.allowed = np.ones(self.last + 1, dtype=bool)
        self.allowed[0] = False
        self.n_allowed = self.last
        self.pos_min = None
        self.pos_max = None
        return self._verdict()

    def _record(self, index, label):
        s = self.spec.s
        if label:
            self.pos_min = index if self.pos_min is None else min(self.pos_min, index)
            self.pos_max = index if self.pos_max is None else max(self.pos_max, index)
        else:
            lo, hi = max(1, index - s + 1), min(self.last, index)
            if lo <= hi:
                window = self.allowed[lo:hi + 1]
                self.n_allowed -= int(np.count_nonzero(window))
                window[:] = False

    def _verdict(self):
        s = self.spec.s
        if self.pos_min is None:
            count = self.n_allowed
            lo = 1
            window = self.allowed
        else:
            lo = max(1, self.pos_max - s + 1)
            hi = min(self.last, self.pos_min)
            if lo > hi:
                return NONE
            window = self.allowed[lo:hi + 1]
            count = int(np.count_nonzero(window))
        if count == 0:
            return NONE
        if count > 1:
            return MANY
        a = int(np.argmax(window)) + (0 if self.pos_min is None else lo)
        return unique(range(a, a + s))

    def _recompute(self, index, label):
        return self._verdict()


# ---------------------------------------------------------------------------
# unions of intervals: saturating count of block tilings

@numba.njit(cache=True)
def _tilings(lab, s, k):
    """Count (capped at 2) placements of k disjoint s-blocks agreeing with ``lab``.

    ``lab`` holds -1 for unlabeled, 0 or 1.  Returns ``(count, starts)``;
    ``starts`` (1-based) is filled only when the count is exactly 1.
    """
    n = lab.shape[0]
    zeros = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        zeros[i + 1] = zeros[i] + (1 if lab[i] == 0 else 0)
    f = np.zeros((n + 1, k + 1), dtype=np.int64)
    f[0, 0] = 1
    for i in range(1, n + 1):
        for j in range(k + 1):
            v = 0
            if lab[i - 1] != 1:
                v += f[i - 1, j]
            if j >= 1 and i >= s and zeros[i] - zeros[i - s] == 0:
                v += f[i - s, j - 1]
            f[i, j] = v if v < 2 else 2
    count = f[n, k]
    starts = np.zeros(k, dtype=np.int64)
    if count == 1:
        i = n
        j = k
        while i > 0:
            if j >= 1 and i >= s and zeros[i] - zeros[i - s] == 0 and f[i - s, j - 1] > 0:
                starts[j - 1] = i - s + 1
                i -= s
                j -= 1
            else:
                i -= 1
    return count, starts


class UnionIntervalsTracker(ConsistencyTracker):
    def _initial(self):
        self.lab = np.full(self.n, -1, dtype=np.int8)
        return self._verdict()

    def _record(self, index, label):
        self.lab[index - 1] = label

    def _verdict(self):
        s = self.spec.s
        count, starts = _tilings(self.lab, s, self.spec.k)
        if count == 0:
            return NONE
        if count > 1:
            return MANY
        return unique(i for a in starts for i in range(int(a), int(a) + s))

    def _recompute(self, index, label):
        return self._verdict()


# ---------------------------------------------------------------------------
# stars: per-center counting

class StarTracker(ConsistencyTracker):
    def _initial(self):
        p = self.spec.p
        self.us, self.vs = edge_table(p)
        self.pos_deg = np.zeros(p + 1, dtype=np.int64)
        self.neg_deg = np.zeros(p + 1, dtype=np.int64)
        self.positives = []
        return self._verdict()

    def _record(self, index, label):
        a, b = int(self.us[index]), int(self.vs[index])
        if label:
            self.positives.append(index)
            self.pos_deg[a] += 1
            self.pos_deg[b] += 1
        else:
            self.neg_deg[a] += 1
            self.neg_deg[b] += 1

    def _count_at(self, v):
        p, s = self.spec.p, self.spec.s
        n_pos = len(self.positives)
        if self.pos_deg[v] != n_pos:
            return 0
        free = p - 1 - n_pos - int(self.neg_deg[v])
        need = s - n_pos
        return math.comb(free, need) if 0 <= need <= free else 0

    def _verdict(self):
        p = self.spec.p
        if len(self.positives) > self.spec.s:
            return NONE
        if self.positives:
            e = self.positives[0]
            centers = (int(self.us[e]), int(self.vs[e]))
        else:
            centers = range(1, p + 1)
        total = 0
        hit = None
        for v in centers:
            c = self._count_at(v)
            if c:
                total += c
                hit = v
                if total > 1:
                    return MANY
        if total == 0:
            return NONE
        inc = incident_edges(p)[hit]
        free = [e for e in inc if e not in self.labels]
        if len(self.positives) == self.spec.s:
            return unique(self.positives)
        return unique(list(self.positives) + free)

    def _recompute(self, index, label):
        return self._verdict()


# ---------------------------------------------------------------------------
# unions of stars: witness members with an exact search fallback

class UnionStarsTracker(ConsistencyTracker):
    """Tracks two distinct consistent members while the verdict is ``many``.

    A member is stored as a decomposition ``{center: set(edges)}``.  After a
    new label the witnesses are repaired by single-edge swaps when possible;
    otherwise an exact search over center sets (branching on uncovered
    positive edges, then bipartite b-matching of edges to centers) decides
    the verdict.
    """

    def _initial(self):
        p = self.spec.p
        self.us, self.vs = edge_table(p)
        self.inc = incident_edges(p)
        self.lab = np.full(self.n + 1, -1, dtype=np.int8)
        self.pos_deg = np.zeros(p + 1, dtype=np.int64)
        self.unl_deg = np.full(p + 1, p - 1, dtype=np.int64)
        self.unl_deg[0] = 0
        self.positives = set()
        self.w1 = self.w2 = None
        return self._full()

    def _record(self, index, label):
        a, b = int(self.us[index]), int(self.vs[index])
        self.lab[index] = label
        self.unl_deg[a] -= 1
        self.unl_deg[b] -= 1
        if label:
            self.positives.add(index)
            self.pos_deg[a] += 1
            self.pos_deg[b] += 1

    # -- witnesses -------------------------------------------------------

    @staticmethod
    def _edges(w):
        return set().union(*w.values())

    def _consistent(self, w, edges, index, label):
        return (index in edges) == bool(label)

    def _repair(self, w, index, label):
        """Adjust witness ``w`` to agree with the new label, or return None."""
        edges = self._edges(w)
        if (index in edges) == bool(label):
            return w
        lab = self.lab
        if not label:
            for c, star in w.items():
                if index in star:
                    for b in self.inc[c]:
                        if lab[b] == -1 and b not in edges:
                            new = dict(w)
                            new[c] = (star - {index}) | {b}
                            return new
                    return None
        for c in (int(self.us[index]), int(self.vs[index])):
            star = w.get(c)
            if star is None:
                continue
            for a in star:
                if lab[a] == -1:
                    new = dict(w)
                    new[c] = (star - {a}) | {index}
                    return new
        return None

    def _swap(self, w):
        """A second member differing from ``w`` in one unlabeled edge."""
        edges = self._edges(w)
        lab = self.lab
        for c in sorted(w):
            star = w[c]
            movable = [a for a in sorted(star) if lab[a] == -1]
            if not movable:
                continue
            for b in self.inc[c]:
                if lab[b] == -1 and b not in edges:
                    new = dict(w)
                    new[c] = (star - {movable[0]}) | {b}
                    return new
        return None

    def _recompute(self, index, label):
        w1 = self._repair(self.w1, index, label)
        if w1 is None:
            return self._full()
        w2 = self.w2
        if w2 is not None and not self._consistent(w2, self._edges(w2), index, label):
            w2 = None
        if w2 is None or w2 == w1:
            w2 = self._swap(w1)
        if w2 is None:
            return self._full()
        self.w1, self.w2 = w1, w2
        return MANY

    def _full(self):
        self.w1 = self.w2 = None
        if len(self.positives) > self.spec.size:
            return NONE
        w1 = self._find()
        if w1 is None:
            return NONE
        edges = self._edges(w1)
        extra = sorted(edges - self.positives)
        if not extra:
            return unique(edges)
        w2 = self._swap(w1)
        if w2 is None:
            for e in extra:
                w2 = self._find(forbidden=frozenset([e]))
                if w2 is not None:
                    break
        if w2 is None:
            return unique(edges)
        self.w1, self.w2 = w1, w2
        return MANY

    # -- exact search ----------------------------------------------------

    def _available(self, e, forbidden):
        y = self.lab[e]
        return y == 1 or (y == -1 and e not in forbidden)

    def _find(self, forbidden=frozenset()):
        k = self.spec.k
        positives = sorted(self.positives)
        us, vs = self.us, self.vs
        seen = set()

        def search(centers):
            if centers in seen:
                return None
            seen.add(centers)
            for e in positives:
                a, b = int(us[e]), int(vs[e])
                if a not in centers and b not in centers:
                    if len(centers) == k:
                        return None
                    for v in sorted((a, b), key=lambda v: (-self.pos_deg[v], v)):
                        found = search(centers | {v})
                        if found is not None:
                            return found
                    return None
            if self._fill(centers, positives, forbidden, only_positives=True) is None:
                if len(centers) == k:
                    return None
                ends = {int(x) for e in positives for x in (us[e], vs[e])} - centers
                for v in sorted(ends, key=lambda v: (-self.pos_deg[v], v)):
                    found = search(centers | {v})
                    if found is not None:
                        return found
                return None
            return self._extend(centers, positives, forbidden)

        return search(frozenset())

    def _extend(self, centers, positives, forbidden):
        p, s, k = self.spec.p, self.spec.s, self.spec.k
        need = k - len(centers)
        if need == 0:
            return self._fill(centers, positives, forbidden)
        avail = {}
        for v in range(1, p + 1):
            if v in centers:
                continue
            count = int(self.pos_deg[v] + self.unl_deg[v])
            if forbidden:
                count -= sum(1 for e in forbidden if self.lab[e] == -1
                             and v in (self.us[e], self.vs[e]))
            if count >= s:
                avail[v] = count
        candidates = sorted(avail, key=lambda v: (-avail[v], v))
        for extra in itertools.combinations(candidates, need):
            found = self._fill(centers | frozenset(extra), positives, forbidden)
            if found is not None:
                return found
        return None

    def _fill(self, centers, positives, forbidden, only_positives=False):
        """Assign edges to centers so each gets exactly ``s`` (b-matching).

        Positive edges must all be assigned.  With ``only_positives`` the
        check is just that the positives fit within the capacities.
        """
        s = self.spec.s
        us, vs = self.us, self.vs
        owner = {}
        load = {c: set() for c in centers}

        def nbrs(e):
            a, b = int(us[e]), int(vs[e])
            return [c for c in (a, b) if c in load]

        def augment(e, visited):
            for c in nbrs(e):
                if c in visited:
                    continue
                visited.add(c)
                if len(load[c]) < s:
                    load[c].add(e)
                    owner[e] = c
                    return True
                for e2 in sorted(load[c]):
                    if augment(e2, visited):
                        # e2 moved elsewhere; its old slot at c goes to e
                        load[c].discard(e2)
                        load[c].add(e)
                        owner[e] = c
                        return True
            return False

        for e in positives:
            if not augment(e, set()):
                return None
        if only_positives:
            return load
        target = s * len(centers)
        filled = len(positives)
        lab = self.lab
        for c in sorted(centers):
            if filled == target:
                break
            for e in self.inc[c]:
                if filled == target:
                    break
                if lab[e] != -1 or e in owner or e in forbidden:
                    continue
                if augment(e, set()):
                    filled += 1
        if filled < target:
            return None
        return load


# ---------------------------------------------------------------------------
# submatrices: candidate row and column sets

class SubmatrixTracker(ConsistencyTracker):
    def _initial(self):
        n1, n2 = self.spec.n1, self.spec.n2
        self.neg = np.zeros((n1 + 1, n2 + 1), dtype=bool)
        self.row_pos = np.zeros(n1 + 1, dtype=np.int64)
        self.col_pos = np.zeros(n2 + 1, dtype=np.int64)
        self.pairs = divisor_pairs(self.spec.s, n1, n2)
        self.witnesses = []
        return self._full()

    def _record(self, index, label):
        n2 = self.spec.n2
        r, c = (index - 1) // n2 + 1, (index - 1) % n2 + 1
        if label:
            self.row_pos[r] += 1
            self.col_pos[c] += 1
        else:
            self.neg[r, c] = True

    def _recompute(self, index, label):
        n2 = self.spec.n2
        r, c = (index - 1) // n2 + 1, (index - 1) % n2 + 1
        keep = [w for w in self.witnesses if (r in w[0] and c in w[1]) == bool(label)]
        if len(keep) >= 2:
            self.witnesses = keep
            return MANY
        return self._full()

    def _full(self):
        n1, n2 = self.spec.n1, self.spec.n2
        rows0 = np.flatnonzero(self.row_pos) .tolist()
        cols0 = np.flatnonzero(self.col_pos).tolist()
        neg = self.neg
        if rows0 and cols0 and neg[np.ix_(rows0, cols0)].any():
            return NONE
        found = []
        for a, b in self.pairs:
            if len(rows0) > a or len(cols0) > b:
                continue
            rows_ok = np.arange(1, n1 + 1)
            cols_ok = np.arange(1, n2 + 1)
            if cols0:
                rows_ok = rows_ok[~neg[1:, cols0].any(axis=1)]
            if rows0:
                cols_ok = cols_ok[~neg[rows0, 1:].any(axis=0)]
            free_r = np.setdiff1d(rows_ok, rows0)
            free_c = np.setdiff1d(cols_ok, cols0)
            need_r, need_c = a - len(rows0), b - len(cols0)
            if need_r > free_r.size or need_c > free_c.size:
                continue
            if math.comb(free_r.size, need_r) <= math.comb(free_c.size, need_c):
                for pick in itertools.combinations(free_r.tolist(), need_r):
                    rows = rows0 + list(pick)
                    cols = free_c[~neg[np.ix_(rows, free_c)].any(axis=0)] if rows else free_c
                    for more in itertools.islice(itertools.combinations(cols.tolist(), need_c), 2):
                        found.append((frozenset(rows), frozenset(cols0 + list(more))))
                        if len(found) >= 2:
                            break
                    if len(found) >= 2:
                        break
            else:
                for pick in itertools.combinations(free_c.tolist(), need_c):
                    cols = cols0 + list(pick)
                    rows = free_r[~neg[np.ix_(free_r, cols)].any(axis=1)] if cols else free_r
                    for more in itertools.islice(itertools.combinations(rows.tolist(), need_r), 2):
                        found.append((frozenset(rows0 + list(more)), frozenset(cols)))
                        if len(found) >= 2:
                            break
                    if len(found) >= 2:
                        break
            if len(found) >= 2:
                break
        self.witnesses = found
        if not found:
            return NONE
        if len(found) >= 2:
            return MANY
        rows, cols = found[0]
        return unique(cell_index(r, c, n2) for r in rows for c in cols)


_TRACKERS = {
    SSet: SetTracker,
    SInterval: IntervalTracker,
    UnionIntervals: UnionIntervalsTracker,
    SStar: StarTracker,
    UnionStars: UnionStarsTracker,
    Submatrix: SubmatrixTracker,
}


def make_tracker(spec: ClassSpec) -> ConsistencyTracker:
    return _TRACKERS[type(spec)](spec)
