"""Support classes: specifications, enumeration, sampling and star packing.

Six classes are supported.  Coordinates are 1-based.  For the two star
classes coordinate ``i`` is an edge of the complete graph on ``p`` labeled
vertices, numbered in row-major pair order ``(1,2), (1,3), ..., (1,p), (2,3), ...``.
For submatrices cell ``(r, c)`` is coordinate ``(r-1)*n2 + c``.

Canonical text forms (used by the CLI)::

    sset:n=100,s=5          interval:n=1024,s=16     uintervals:n=1024,s=16,k=4
    star:p=64,s=8           ustars:p=64,s=8,k=3      submat:n1=32,n2=32,s=16
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, fields
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import CapabilityRefusal, DomainError

__all__ = [
    "ClassSpec", "SSet", "SInterval", "UnionIntervals", "SStar", "UnionStars", "Submatrix",
    "parse_class", "edge_index", "edge_vertices", "edge_table", "incident_edges",
    "cell_index", "cell_position", "cardinality", "cardinality_upper", "enumerate_class",
    "check_symmetric", "Star", "greedy_star_packing", "sample_member", "corner_members",
    "divisor_pairs", "DEFAULT_CAP",
]

DEFAULT_CAP = 10 ** 6


# ---------------------------------------------------------------------------
# specifications

@dataclass(frozen=True)
class ClassSpec:
    """Base class; use one of the six concrete variants."""

    kind = "abstract"

    # ``n`` (ambient dimension) is a field or a derived property on each variant

    @property
    def size(self) -> int:
        """Common cardinality of every member (the effective sparsity)."""
        raise NotImplementedError

    @property
    def l_total(self) -> int:
        """Number of positives the search phases are expected to produce."""
        return 1

    @property
    def s_eff(self) -> int:
        return self.size

    def params(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def text(self) -> str:
        body = ",".join(f"{k}={v}" for k, v in self.params().items())
        return f"{self.kind}:{body}"

    def __str__(self):
        return self.text()


def _need(cond, msg):
    if not cond:
        raise DomainError(msg)


@dataclass(frozen=True)
class SSet(ClassSpec):
    n: int
    s: int
    kind = "sset"

    def __post_init__(self):
        _need(1 <= self.s <= self.n, f"s-sets need 1 <= s <= n, got n={self.n}, s={self.s}")

    @property
    def size(self):
        return self.s


@dataclass(frozen=True)
class SInterval(ClassSpec):
    n: int
    s: int
    kind = "interval"

    def __post_init__(self):
        _need(1 <= self.s <= self.n, f"intervals need 1 <= s <= n, got n={self.n}, s={self.s}")

    @property
    def size(self):
        return self.s


@dataclass(frozen=True)
class UnionIntervals(ClassSpec):
    n: int
    s: int
    k: int
    kind = "uintervals"

    def __post_init__(self):
        _need(self.s >= 1 and self.k >= 1, "unions of intervals need s >= 1 and k >= 1")
        _need(self.k * self.s <= self.n, f"k*s must not exceed n, got k*s={self.k * self.s}")

    @property
    def size(self):
        return self.k * self.s

    @property
    def l_total(self):
        return self.k


@dataclass(frozen=True)
class SStar(ClassSpec):
    p: int
    s: int
    kind = "star"

    def __post_init__(self):
        _need(2 <= self.s <= self.p - 1, f"stars need 2 <= s <= p-1, got p={self.p}, s={self.s}")

    @property
    def n(self):
        return self.p * (self.p - 1) // 2

    @property
    def size(self):
        return self.s


@dataclass(frozen=True)
class UnionStars(ClassSpec):
    """Unions of ``k`` edge-disjoint ``s``-stars with distinct centers."""

    p: int
    s: int
    k: int
    kind = "ustars"

    def __post_init__(self):
        _need(self.k >= 1 and self.s >= 2, "unions of stars need k >= 1 and s >= 2")
        _need(self.k < self.s, f"unions of stars need k < s, got k={self.k}, s={self.s}")
        _need(self.k * (self.s + 1) <= self.p,
              f"unions of stars need k*(s+1) <= p, got {self.k * (self.s + 1)} > {self.p}")

    @property
    def n(self):
        return self.p * (self.p - 1) // 2

    @property
    def size(self):
        return self.k * self.s

    @property
    def l_total(self):
        return self.k


@dataclass(frozen=True)
class Submatrix(ClassSpec):
    n1: int
    n2: int
    s: int
    kind = "submat"

    def __post_init__(self):
        _need(self.n1 >= 1 and self.n2 >= 1 and self.s >= 1, "submatrices need positive sizes")
        _need(self.s <= self.n1 * self.n2, "s must not exceed n1*n2")
        _need(bool(divisor_pairs(self.s, self.n1, self.n2)),
              f"s={self.s} has no factorization a*b with a <= {self.n1}, b <= {self.n2}")

    @property
    def n(self):
        return self.n1 * self.n2

    @property
    def size(self):
        return self.s


def divisor_pairs(s: int, n1: int, n2: int) -> list:
    """Factorizations ``(a, b)`` of ``s`` with ``a <= n1`` and ``b <= n2``."""
    return [(a, s // a) for a in range(1, s + 1) if s % a == 0 and a <= n1 and s // a <= n2]


_KINDS = {
    "sset": (SSet, ("n", "s")),
    "interval": (SInterval, ("n", "s")),
    "uintervals": (UnionIntervals, ("n", "s", "k")),
    "star": (SStar, ("p", "s")),
    "ustars": (UnionStars, ("p", "s", "k")),
    "submat": (Submatrix, ("n1", "n2", "s")),
}


def make_spec(kind: str, **params) -> ClassSpec:
    if kind not in _KINDS:
        raise DomainError(f"unknown class kind {kind!r}; expected one of {sorted(_KINDS)}")
    cls, names = _KINDS[kind]
    if set(params) != set(names):
        raise DomainError(f"{kind} needs parameters {','.join(names)}, got {','.join(params) or 'none'}")
    return cls(*(int(params[k]) for k in names))


def parse_class(text: str) -> ClassSpec:
    """Parse a canonical class string such as ``ustars:p=64,s=8,k=3``."""
    kind, sep, body = text.strip().partition(":")
    if not sep:
        raise DomainError(f"class string {text!r} lacks a ':'")
    params = {}
    for item in filter(None, body.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise DomainError(f"malformed parameter {item!r} in {text!r}")
        try:
            params[key.strip()] = int(val)
        except ValueError:
            raise DomainError(f"parameter {key.strip()} must be an integer, got {val!r}") from None
    return make_spec(kind.strip().lower(), **params)


# ---------------------------------------------------------------------------
# coordinate maps

def edge_index(u: int, v: int, p: int) -> int:
    """Row-major index of edge ``{u, v}`` (vertices 1..p, result 1..p(p-1)/2)."""
    if u > v:
        u, v = v, u
    if not 1 <= u < v <= p:
        raise DomainError(f"invalid edge ({u}, {v}) for p={p}")
    return (u - 1) * (2 * p - u) // 2 + (v - u)


@lru_cache(maxsize=64)
def edge_table(p: int):
    """Arrays ``(us, vs)`` with the endpoints of edge ``i`` at position ``i``.

    Position 0 is padding so that edge ids index directly.
    """
    us, vs = [0], [0]
    for u in range(1, p + 1):
        for v in range(u + 1, p + 1):
            us.append(u)
            vs.append(v)
    us = np.asarray(us, dtype=np.int64)
    vs = np.asarray(vs, dtype=np.int64)
    us.flags.writeable = False
    vs.flags.writeable = False
    return us, vs


def edge_vertices(i: int, p: int) -> tuple:
    us, vs = edge_table(p)
    if not 1 <= i < len(us):
        raise DomainError(f"edge index {i} outside [1, {len(us) - 1}]")
    return int(us[i]), int(vs[i])


@lru_cache(maxsize=64)
def incident_edges(p: int) -> tuple:
    """``incident_edges(p)[v]`` is the sorted tuple of edges at vertex ``v``."""
    inc = [[] for _ in range(p + 1)]
    us, vs = edge_table(p)
    for e in range(1, len(us)):
        inc[us[e]].append(e)
        inc[vs[e]].append(e)
    return tuple(tuple(sorted(x)) for x in inc)


def cell_index(r: int, c: int, n2: int) -> int:
    return (r - 1) * n2 + c


def cell_position(i: int, n2: int) -> tuple:
    return (i - 1) // n2 + 1, (i - 1) % n2 + 1


# ---------------------------------------------------------------------------
# cardinality and enumeration

def cardinality(spec: ClassSpec) -> int:
    """Exact number of members.

    Unions of stars have no closed form here; their count is obtained by
    enumeration and therefore obeys :data:`DEFAULT_CAP`.
    """
    if isinstance(spec, SSet):
        return math.comb(spec.n, spec.s)
    if isinstance(spec, SInterval):
        return spec.n - spec.s + 1
    if isinstance(spec, UnionIntervals):
        return math.comb(spec.n - spec.k * spec.s + spec.k, spec.k)
    if isinstance(spec, SStar):
        return spec.p * math.comb(spec.p - 1, spec.s)
    if isinstance(spec, Submatrix):
        return sum(math.comb(spec.n1, a) * math.comb(spec.n2, b)
                   for a, b in divisor_pairs(spec.s, spec.n1, spec.n2))
    if isinstance(spec, UnionStars):
        return len(enumerate_class(spec))
    raise DomainError(f"unknown spec {spec!r}")


def cardinality_upper(spec: ClassSpec) -> int:
    """Exact cardinality where known, otherwise a cheap upper bound."""
    if isinstance(spec, UnionStars):
        return math.comb(spec.p, spec.k) * math.comb(spec.p - 1, spec.s) ** spec.k
    return cardinality(spec)


def _refuse_if_large(spec, cap):
    bound = cardinality_upper(spec)
    if bound > cap:
        word = "at most" if isinstance(spec, UnionStars) else "exactly"
        raise CapabilityRefusal(
            f"class {spec} has {word} {bound} members, above the enumeration cap {cap}",
            cardinality=bound)


def _star_members(p, s, center):
    inc = incident_edges(p)[center]
    return itertools.combinations(inc, s)


def enumerate_class(spec: ClassSpec, cap: int = DEFAULT_CAP) -> list:
    """All members as sorted tuples, in lexicographic order of those tuples."""
    _refuse_if_large(spec, cap)
    if isinstance(spec, SSet):
        return list(itertools.combinations(range(1, spec.n + 1), spec.s))
    if isinstance(spec, SInterval):
        return [tuple(range(a, a + spec.s)) for a in range(1, spec.n - spec.s + 2)]
    if isinstance(spec, UnionIntervals):
        n, s, k = spec.n, spec.s, spec.k
        out = []
        # choose k block slots among n - k*s + k positions (stars and bars)
        for slots in itertools.combinations(range(n - k * s + k), k):
            starts = [slot + j * (s - 1) + 1 for j, slot in enumerate(slots)]
            out.append(tuple(i for a in starts for i in range(a, a + s)))
        return out
    if isinstance(spec, SStar):
        members = set()
        for c in range(1, spec.p + 1):
            members.update(_star_members(spec.p, spec.s, c))
        return sorted(members)
    if isinstance(spec, UnionStars):
        members = set()
        for centers in itertools.combinations(range(1, spec.p + 1), spec.k):
            for stars in itertools.product(*(list(_star_members(spec.p, spec.s, c)) for c in centers)):
                union = set().union(*stars)
                if len(union) == spec.size:
                    members.add(tuple(sorted(union)))
        return sorted(members)
    if isinstance(spec, Submatrix):
        members = []
        for a, b in divisor_pairs(spec.s, spec.n1, spec.n2):
            for rows in itertools.combinations(range(1, spec.n1 + 1), a):
                for cols in itertools.combinations(range(1, spec.n2 + 1), b):
                    members.append(tuple(sorted(cell_index(r, c, spec.n2) for r in rows for c in cols)))
        return sorted(members)
    raise DomainError(f"unknown spec {spec!r}")


def check_symmetric(members, n: Optional[int] = None, cap: int = DEFAULT_CAP) -> bool:
    """Whether every coordinate lies in the same fraction ``s/n`` of the members.

    ``members`` is a :class:`ClassSpec` or an explicit collection of sets; for
    an explicit collection ``n`` defaults to the largest index present.
    """
    if isinstance(members, ClassSpec):
        n = members.n
        members = enumerate_class(members, cap)
    members = [frozenset(m) for m in members]
    if not members:
        raise DomainError("empty class")
    sizes = {len(m) for m in members}
    if len(sizes) != 1:
        raise CapabilityRefusal("members have unequal cardinality; symmetry is undefined")
    s = sizes.pop()
    if n is None:
        n = max(max(m) for m in members if m)
    counts = [0] * (n + 1)
    for m in members:
        for i in m:
            counts[i] += 1
    target = Fraction(s, n)
    return all(Fraction(counts[i], len(members)) == target for i in range(1, n + 1))


# ---------------------------------------------------------------------------
# star packing

class Star(NamedTuple):
    center: int
    leaves: tuple

    def edges(self, p: int) -> tuple:
        return tuple(sorted(edge_index(self.center, v, p) for v in self.leaves))


def greedy_star_packing(p: int, s: int) -> list:
    """Edge-disjoint ``s``-stars in the complete graph on ``p`` vertices.

    Greedy rule: while some vertex still has at least ``s`` unused edges, center
    a star at the least-used such vertex, taking edges toward the least-used
    neighbors.  When the loop stops every vertex has used at least ``p-1-s``
    edges, which gives at least ``p(p-1-s)/(2s)`` stars.
    """
    if not 2 <= s <= p - 1:
        raise DomainError(f"packing needs 2 <= s <= p-1, got p={p}, s={s}")
    used = np.zeros((p + 1, p + 1), dtype=bool)
    degree = np.zeros(p + 1, dtype=np.int64)
    stars = []
    while True:
        free = (p - 1) - degree[1:]
        eligible = np.flatnonzero(free >= s) + 1
        if eligible.size == 0:
            return stars
        v = int(eligible[np.argmin(degree[eligible])])
        nbrs = [w for w in range(1, p + 1) if w != v and not used[v, w]]
        nbrs.sort(key=lambda w: (degree[w], w))
        leaves = tuple(sorted(nbrs[:s]))
        for w in leaves:
            used[v, w] = used[w, v] = True
            degree[w] += 1
        degree[v] += s
        stars.append(Star(v, leaves))


# ---------------------------------------------------------------------------
# sampling

def _union_star_decompositions(p, s, k, edges: frozenset, limit=None) -> int:
    """Number of ways to split ``edges`` into k stars with distinct centers."""
    us, vs = edge_table(p)
    deg = {}
    for e in edges:
        for v in (int(us[e]), int(vs[e])):
            deg[v] = deg.get(v, 0) + 1
    heavy = sorted(v for v, d in deg.items() if d >= s)
    total = 0
    for centers in itertools.combinations(heavy, k):
        cset = set(centers)
        # every edge needs an endpoint among the centers
        options = []
        for e in sorted(edges):
            opts = [v for v in (int(us[e]), int(vs[e])) if v in cset]
            if not opts:
                break
            options.append(opts)
        else:
            for choice in itertools.product(*options):
                if all(choice.count(c) == s for c in centers):
                    total += 1
                    if limit is not None and total >= limit:
                        return total
    return total


def sample_member(spec: ClassSpec, rng: np.random.Generator) -> tuple:
    """Draw a member uniformly at random."""
    if isinstance(spec, SSet):
        return tuple(sorted(int(i) + 1 for i in rng.choice(spec.n, spec.s, replace=False)))
    if isinstance(spec, SInterval):
        a = int(rng.integers(1, spec.n - spec.s + 2))
        return tuple(range(a, a + spec.s))
    if isinstance(spec, UnionIntervals):
        n, s, k = spec.n, spec.s, spec.k
        slots = np.sort(rng.choice(n - k * s + k, k, replace=False))
        starts = [int(slot) + j * (s - 1) + 1 for j, slot in enumerate(slots)]
        return tuple(i for a in starts for i in range(a, a + s))
    if isinstance(spec, SStar):
        c = int(rng.integers(1, spec.p + 1))
        inc = incident_edges(spec.p)[c]
        pick = rng.choice(len(inc), spec.s, replace=False)
        return tuple(sorted(inc[int(j)] for j in pick))
    if isinstance(spec, UnionStars):
        # every decomposition of a member is drawn with the same probability,
        # so accepting with probability 1/(number of decompositions) is uniform
        inc = incident_edges(spec.p)
        while True:
            centers = np.sort(rng.choice(spec.p, spec.k, replace=False)) + 1
            edges = set()
            ok = True
            for c in centers:
                pick = rng.choice(spec.p - 1, spec.s, replace=False)
                star = {inc[int(c)][int(j)] for j in pick}
                if edges & star:
                    ok = False
                edges |= star
            u = rng.random()
            if not ok:
                continue
            mult = _union_star_decompositions(spec.p, spec.s, spec.k, frozenset(edges))
            if u * mult < 1.0:
                return tuple(sorted(edges))
    if isinstance(spec, Submatrix):
        pairs = divisor_pairs(spec.s, spec.n1, spec.n2)
        weights = np.array([math.comb(spec.n1, a) * math.comb(spec.n2, b) for a, b in pairs], dtype=float)
        a, b = pairs[int(rng.choice(len(pairs), p=weights / weights.sum()))]
        rows = rng.choice(spec.n1, a, replace=False) + 1
        cols = rng.choice(spec.n2, b, replace=False) + 1
        return tuple(sorted(cell_index(int(r), int(c), spec.n2) for r in rows for c in cols))
    raise DomainError(f"unknown spec {spec!r}")


def corner_members(spec: ClassSpec) -> list:
    """Boundary members: leftmost/rightmost placements, stars at vertices 1 and p."""
    if isinstance(spec, (SSet, SInterval)):
        n, s = spec.n, spec.s
        out = [tuple(range(1, s + 1)), tuple(range(n - s + 1, n + 1))]
    elif isinstance(spec, UnionIntervals):
        n, m = spec.n, spec.size
        out = [tuple(range(1, m + 1)), tuple(range(n - m + 1, n + 1))]
    elif isinstance(spec, SStar):
        inc = incident_edges(spec.p)
        out = [inc[1][:spec.s], inc[spec.p][-spec.s:]]
    elif isinstance(spec, UnionStars):
        out = [_packed_union(spec, range(1, spec.p + 1)), _packed_union(spec, range(spec.p, 0, -1))]
    elif isinstance(spec, Submatrix):
        a, b = divisor_pairs(spec.s, spec.n1, spec.n2)[0]
        top = [cell_index(r, c, spec.n2) for r in range(1, a + 1) for c in range(1, b + 1)]
        bottom = [cell_index(r, c, spec.n2) for r in range(spec.n1 - a + 1, spec.n1 + 1)
                  for c in range(spec.n2 - b + 1, spec.n2 + 1)]
        out = [tuple(sorted(top)), tuple(sorted(bottom))]
    else:
        raise DomainError(f"unknown spec {spec!r}")
    unique = []
    for m in out:
        m = tuple(sorted(m))
        if m not in unique:
            unique.append(m)
    return unique


def _packed_union(spec: UnionStars, order: Iterable[int]) -> tuple:
    """k stars centered at the first k vertices of ``order``, leaves taken in order."""
    order = list(order)
    centers = order[:spec.k]
    used = set()
    for c in centers:
        leaves = [v for v in order if v not in centers] + [v for v in centers if v != c]
        taken = 0
        for v in leaves:
            e = edge_index(c, v, spec.p)
            if e not in used:
                used.add(e)
                taken += 1
                if taken == spec.s:
                    break
    return tuple(sorted(used))
