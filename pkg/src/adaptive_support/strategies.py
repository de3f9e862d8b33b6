"""Noiseless query strategies, one per support class.

A strategy proposes coordinates through :meth:`Strategy.next_query` and is
told each binary answer through :meth:`Strategy.feed`.  Stopping is decided by
the strategy's consistency tracker: queries are only proposed while the
verdict is ``many``.  No coordinate is ever proposed twice.

Randomized searches draw uniformly without replacement (Fisher-Yates over the
unqueried coordinates) from the Generator passed at construction.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .classes import (ClassSpec, SInterval, SSet, SStar, Submatrix, UnionIntervals,
                      UnionStars, cell_index, edge_table, incident_edges)
from .errors import DomainError
from .tracking import make_tracker

__all__ = [
    "SEARCH", "REFINE", "Strategy", "ScanStrategy", "IntervalStrategy", "StarStrategy",
    "UnionStarsStrategy", "SubmatrixStrategy", "make_strategy", "j_cap_for", "write_trace",
]

SEARCH = "search"
REFINE = "refine"


class _Pool:
    """Unqueried coordinates supporting O(1) uniform draws and removals."""

    def __init__(self, n: int):
        self.items = list(range(1, n + 1))
        self.where = list(range(-1, n))  # where[i] = position of coordinate i
        self.size = n

    def remove(self, i: int):
        j = self.where[i]
        if j < 0:
            return
        last = self.items[self.size - 1]
        self.items[j] = last
        self.where[last] = j
        self.items[self.size - 1] = i
        self.where[i] = -1
        self.size -= 1

    def draw(self, rng) -> int:
        i = self.items[int(rng.integers(self.size))]
        self.remove(i)
        return i


class Strategy:
    """Common machinery: tracker, trace, duplicate protection and fallback.

    The fallback scans unqueried coordinates in increasing order.  It only
    runs when a strategy's own plan is exhausted while the verdict is still
    ``many``, which cannot happen with truthful labels but keeps the lifted
    procedure total under noisy ones.
    """

    randomized = False

    def __init__(self, spec: ClassSpec, rng: Optional[np.random.Generator] = None,
                 j_cap: Optional[int] = None):
        self.spec = spec
        self.n = spec.n
        self.tracker = make_tracker(spec)
        if rng is None:
            if self.randomized:
                raise DomainError(f"{type(self).__name__} needs a random generator")
        self.rng = rng
        if j_cap is not None and j_cap < 1:
            raise DomainError(f"j_cap must be positive, got {j_cap}")
        self.j_cap = j_cap
        self.phase = SEARCH
        self.trace = []
        self.gave_up = False
        self._pending = None
        self._scan_from = 1

    @property
    def verdict(self):
        return self.tracker.verdict

    @property
    def queried(self):
        return [(q, y) for _, q, _, y in self.trace]

    def is_queried(self, i: int) -> bool:
        return i in self.tracker.labels

    def next_query(self) -> Optional[int]:
        """Next coordinate to test, or None when finished or out of options."""
        if self._pending is not None:
            return self._pending[0]
        if not self.tracker.verdict.is_many or self.gave_up:
            return None
        choice = self._plan()
        if choice is None:
            if self.gave_up:
                return None
            choice = (self._fallback(), REFINE)
        self._pending = choice
        self.phase = choice[1]
        return choice[0]

    def feed(self, index: int, label: int):
        if self._pending is None or self._pending[0] != index:
            raise DomainError(f"feed({index}) does not answer the pending query")
        phase = self._pending[1]
        self._pending = None
        label = int(label)
        self.tracker.update(index, label)
        self.trace.append((len(self.trace) + 1, index, phase, label))
        self._after(index, label, phase)

    def _plan(self):
        raise NotImplementedError

    def _after(self, index, label, phase):
        pass

    def _fallback(self) -> int:
        i = self._scan_from
        while self.is_queried(i):
            i += 1
        self._scan_from = i
        return i

    def run_noiseless(self, support) -> tuple:
        """Answer every query truthfully for ``support``; returns the verdict."""
        members = set(support)
        while True:
            q = self.next_query()
            if q is None:
                return self.verdict
            self.feed(q, int(q in members))


class ScanStrategy(Strategy):
    """Query 1, 2, 3, ... in order."""

    def _plan(self):
        return self._fallback(), SEARCH


class IntervalStrategy(Strategy):
    """Grid search with spacing s, then leftward walks from the hits.

    Serves both single intervals (``k = 1``) and unions of ``k`` intervals.
    Search stops after ``k`` grid hits.  Each hit ``h`` is refined by querying
    ``h-1, h-2, ...`` (at most ``s-1`` steps) until a 0 is seen.  If the
    verdict is still ``many`` afterwards, rightward walks follow.
    """

    def __init__(self, spec, rng=None, j_cap=None):
        super().__init__(spec, rng, j_cap)
        n, s = spec.n, spec.s
        self.k = getattr(spec, "k", 1)
        last = n - s + 1
        self.grid = list(range(1, last + 1, s))
        if self.grid[-1] != last:
            self.grid.append(last)
        self._grid_pos = 0
        self.hits = []
        self._walks = None

    def _plan(self):
        if len(self.hits) < self.k:
            while self._grid_pos < len(self.grid):
                q = self.grid[self._grid_pos]
                self._grid_pos += 1
                if not self.is_queried(q):
                    return q, SEARCH
        if self._walks is None:
            self._walks = self._walk_plan()
        for walk in self._walks:
            while walk:
                q = walk[0]
                y = self.tracker.labels.get(q)
                if y is None:
                    return q, REFINE
                if y == 0:
                    walk.clear()
                else:
                    walk.pop(0)
        return None

    def _walk_plan(self):
        s, n = self.spec.s, self.n
        left = [list(range(h - 1, max(1, h - s + 1) - 1, -1)) for h in self.hits]
        right = [list(range(h + 1, min(n, h + s - 1) + 1)) for h in self.hits]
        return left + right

    def _after(self, index, label, phase):
        if phase == SEARCH and label:
            self.hits.append(index)


class _RandomSearchMixin:
    """Uniform search without replacement, at most ``j_cap`` draws per phase."""

    randomized = True

    def _init_pool(self):
        self.pool = _Pool(self.n)
        self.search_draws = 0

    def _search(self):
        if self.pool.size == 0 or (self.j_cap is not None and self.search_draws >= self.j_cap):
            self.gave_up = True
            return None
        self.search_draws += 1
        return self.pool.draw(self.rng), SEARCH

    def _shuffled(self, coords):
        coords = [c for c in coords if not self.is_queried(c)]
        order = self.rng.permutation(len(coords))
        return [coords[int(j)] for j in order]


class StarStrategy(_RandomSearchMixin, Strategy):
    """Random search for one edge of the star, then all edges touching it."""

    def __init__(self, spec, rng=None, j_cap=None):
        super().__init__(spec, rng, j_cap)
        self._init_pool()
        self.queue = []
        self.hit = None

    def _plan(self):
        while self.queue:
            q = self.queue.pop()
            if not self.is_queried(q):
                return q, REFINE
        if self.hit is not None:
            return None
        return self._search()

    def _after(self, index, label, phase):
        self.pool.remove(index)
        if phase == SEARCH and label and self.hit is None:
            self.hit = index
            us, vs = edge_table(self.spec.p)
            inc = incident_edges(self.spec.p)
            self.queue = self._shuffled(sorted(set(inc[us[index]]) | set(inc[vs[index]])))


class UnionStarsStrategy(_RandomSearchMixin, Strategy):
    """Alternating search and refinement for unions of stars.

    After a search hit every unqueried edge at both endpoints is tested.  Then,
    while some star is only partly explored, edges are drawn uniformly from
    the candidate set: unqueried edges at an *open* vertex.  A positive edge is
    explained when one of its endpoints has all edges labeled and exactly
    ``s`` of them positive (that endpoint must be a star center because
    ``k < s``), after discounting edges already attributed to other such
    centers.  An open vertex is one with unlabeled edges that touches an
    unexplained positive edge.  When no candidates remain and the verdict is
    still ``many`` a new search phase starts, at most ``k`` in total.
    """

    def __init__(self, spec, rng=None, j_cap=None):
        super().__init__(spec, rng, j_cap)
        self._init_pool()
        p = spec.p
        self.us, self.vs = edge_table(p)
        self.inc = incident_edges(p)
        self.pos_deg = np.zeros(p + 1, dtype=np.int64)
        self.unl_deg = np.full(p + 1, p - 1, dtype=np.int64)
        self.positives = []
        self._pos_set = set()
        self.queue = []
        self.search_phases = 0
        self.in_search = False

    def explained(self) -> set:
        """Positive edges attributable to a fully labeled star center.

        A fully labeled vertex whose positive edges, minus those already
        attributed elsewhere, number exactly ``s`` claims them; repeated
        until nothing changes.
        """
        s = self.spec.s
        owner = {}
        touched = sorted({int(x) for e in self.positives for x in (self.us[e], self.vs[e])})
        centers = [v for v in touched if self.unl_deg[v] == 0 and self.pos_deg[v] >= s]
        changed = True
        while changed:
            changed = False
            for v in centers:
                mine = [e for e in self.inc[v] if e in self._pos_set and owner.get(e, v) == v]
                if len(mine) == s and any(owner.get(e) != v for e in mine):
                    for e in mine:
                        owner[e] = v
                    changed = True
        return set(owner)

    def open_vertices(self) -> list:
        done = self.explained()
        opened = set()
        for e in self.positives:
            if e not in done:
                opened.update(v for v in (int(self.us[e]), int(self.vs[e])) if self.unl_deg[v] > 0)
        return sorted(opened)

    def candidates(self) -> list:
        """Unqueried edges at open vertices (the refinement candidate set)."""
        out = set()
        for v in self.open_vertices():
            out.update(e for e in self.inc[v] if not self.is_queried(e))
        return sorted(out)

    def _draw_candidate(self, opened):
        # uniform over the union of the open vertices' unqueried edges: pick a
        # vertex proportionally to its unqueried degree, then an edge, and
        # accept an edge joining two open vertices with probability 1/2
        weights = np.array([self.unl_deg[v] for v in opened], dtype=np.int64)
        cum = np.cumsum(weights)
        members = set(opened)
        while True:
            v = opened[int(np.searchsorted(cum, self.rng.integers(cum[-1]), side="right"))]
            edges = [e for e in self.inc[v] if not self.is_queried(e)]
            e = edges[int(self.rng.integers(len(edges)))]
            other = int(self.us[e]) if int(self.us[e]) != v else int(self.vs[e])
            if other not in members or self.rng.random() < 0.5:
                return e

    def _plan(self):
        while self.queue:
            q = self.queue.pop()
            if not self.is_queried(q):
                return q, REFINE
        opened = self.open_vertices()
        if opened:
            self.in_search = False
            return self._draw_candidate(opened), REFINE
        if not self.in_search:
            if self.search_phases >= self.spec.k:
                self.gave_up = True
                return None
            self.search_phases += 1
            self.search_draws = 0
            self.in_search = True
        return self._search()

    def _after(self, index, label, phase):
        self.pool.remove(index)
        a, b = int(self.us[index]), int(self.vs[index])
        self.unl_deg[a] -= 1
        self.unl_deg[b] -= 1
        if label:
            self.positives.append(index)
            self._pos_set.add(index)
            self.pos_deg[a] += 1
            self.pos_deg[b] += 1
            if phase == SEARCH:
                self.in_search = False
                self.queue = self._shuffled(sorted(set(self.inc[a]) | set(self.inc[b])))


class SubmatrixStrategy(_RandomSearchMixin, Strategy):
    """Random search for one cell, then its full row and column."""

    def __init__(self, spec, rng=None, j_cap=None):
        super().__init__(spec, rng, j_cap)
        self._init_pool()
        self.queue = []
        self.hit = None

    def _plan(self):
        while self.queue:
            q = self.queue.pop(0)
            if not self.is_queried(q):
                return q, REFINE
        if self.hit is not None:
            return None
        return self._search()

    def _after(self, index, label, phase):
        self.pool.remove(index)
        if phase == SEARCH and label and self.hit is None:
            self.hit = index
            n1, n2 = self.spec.n1, self.spec.n2
            r, c = (index - 1) // n2 + 1, (index - 1) % n2 + 1
            row = [cell_index(r, j, n2) for j in range(1, n2 + 1)]
            col = [cell_index(i, c, n2) for i in range(1, n1 + 1)]
            self.queue = [q for q in row + col if q != index]


_STRATEGIES = {
    SSet: ScanStrategy,
    SInterval: IntervalStrategy,
    UnionIntervals: IntervalStrategy,
    SStar: StarStrategy,
    UnionStars: UnionStarsStrategy,
    Submatrix: SubmatrixStrategy,
}


def make_strategy(spec: ClassSpec, rng: Optional[np.random.Generator] = None,
                  j_cap: Optional[int] = None) -> Strategy:
    return _STRATEGIES[type(spec)](spec, rng, j_cap)


def j_cap_for(spec: ClassSpec, delta: float) -> Optional[int]:
    """Search cap ``ceil((n/s) ln(2/delta))``, with ``2k/delta`` for unions of stars.

    Classes without a capped search return None.
    """
    if isinstance(spec, (SStar, Submatrix)):
        return math.ceil(spec.n / spec.s * math.log(2 / delta))
    if isinstance(spec, UnionStars):
        return math.ceil(spec.n / spec.s * math.log(2 * spec.k / delta))
    return None


def write_trace(trace, fh):
    """Write ``(t, Q_t, phase, label)`` rows as CSV."""
    import csv

    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "query", "phase", "label"])
    w.writerows(trace)
