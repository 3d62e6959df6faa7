"""Finite metric spaces with exact distances, plus the subset primitives.

Distances are stored as a read-only ``int64`` matrix of numerators over a
single common denominator.  Every comparison against a rational threshold is
turned into an integer comparison, so no floating point tolerance ever enters
a certificate.

Subsets are interned per space and keyed by a Python-int bitmask, which makes
containment, union and equality cheap and exact.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.sparse.csgraph import csgraph_from_dense, shortest_path

from .errors import (
    AsymmetryError,
    DisconnectedGraph,
    EmptySubset,
    NegativeDistance,
    SpaceMismatch,
    TriangleViolation,
    ZeroOffDiagonal,
)

Number = Union[int, Fraction]

# headroom for 2*d + 4*den style arithmetic in int64
_MAX_SCALED = 2**60
_FLOAT_EXACT = 2**53


def as_rational(value) -> Number:
    """Parse ``value`` (int, Fraction, decimal or ``p/q`` string) exactly."""
    if isinstance(value, bool):
        raise TypeError("booleans are not distances")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        # floats are taken at their shortest decimal repr, not their binary value
        value = repr(value)
    q = Fraction(value)
    return q.numerator if q.denominator == 1 else q


def format_rational(value: Number) -> str:
    q = Fraction(value)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _normalize(q: Fraction) -> Number:
    return q.numerator if q.denominator == 1 else q


def _mask_from_bool(flags: np.ndarray) -> int:
    packed = np.packbits(flags.astype(bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def _bool_from_mask(mask: int, n: int) -> np.ndarray:
    nbytes = (n + 7) // 8
    raw = np.frombuffer(mask.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little", count=n).astype(bool)


class FiniteMetricSpace:
    """Point labels plus an exact distance table.

    Not validated on construction; use :func:`validate_space` for untrusted
    input.  Generated spaces (paths, grids, shortest-path metrics) are metric
    by construction.
    """

    def __init__(
        self,
        labels: Sequence[str],
        scaled: np.ndarray,
        denominator: int = 1,
        coords: Sequence[tuple[int, ...]] | None = None,
        factors: tuple["FiniteMetricSpace", "FiniteMetricSpace"] | None = None,
        product_kind: str | None = None,
    ):
        scaled = np.array(scaled, dtype=np.int64, copy=True)
        n = len(labels)
        if scaled.shape != (n, n):
            raise ValueError(f"distance table has shape {scaled.shape}, expected {(n, n)}")
        if n and int(np.abs(scaled).max()) >= _MAX_SCALED:
            raise OverflowError("distances too large for exact int64 storage")
        scaled.setflags(write=False)
        self.labels = tuple(str(s) for s in labels)
        self.scaled = scaled
        self.denominator = int(denominator)
        self.coords = None if coords is None else tuple(tuple(int(c) for c in p) for p in coords)
        self.factors = factors
        self.product_kind = product_kind
        self._interned: dict[int, PointSubset] = {}

    @classmethod
    def from_rationals(cls, table: Sequence[Sequence], labels: Sequence[str] | None = None, **kw):
        rows = [[as_rational(v) for v in row] for row in table]
        n = len(rows)
        den = 1
        for row in rows:
            for v in row:
                den = math.lcm(den, Fraction(v).denominator)
        scaled = np.zeros((n, n), dtype=np.int64)
        for i, row in enumerate(rows):
            if len(row) != n:
                raise ValueError("distance table must be square")
            for j, v in enumerate(row):
                q = Fraction(v) * den
                if abs(q.numerator) >= _MAX_SCALED:
                    raise OverflowError("distance too large for exact int64 storage")
                scaled[i, j] = q.numerator
        if labels is None:
            labels = [str(i) for i in range(n)]
        return cls(labels, scaled, den, **kw)

    def __len__(self) -> int:
        return len(self.labels)

    def __repr__(self) -> str:
        return f"FiniteMetricSpace(n={len(self)}, denominator={self.denominator})"

    @property
    def n(self) -> int:
        return len(self.labels)

    def dist(self, p: int, q: int) -> Number:
        return self.to_rational(int(self.scaled[p, q]))

    def to_rational(self, scaled_value: int) -> Number:
        return _normalize(Fraction(int(scaled_value), self.denominator))

    def distance_table(self) -> list[list[Number]]:
        return [[self.to_rational(v) for v in row] for row in self.scaled.tolist()]

    # Thresholds: x/den <= r  <=>  x <= floor(r*den);  x/den < r  <=>  x <= ceil(r*den) - 1.
    # Clamped so they stay comparable with int64 arrays.
    def le_threshold(self, r: Number) -> int:
        t = math.floor(Fraction(r) * self.denominator)
        return max(min(t, _MAX_SCALED), -1)

    def lt_threshold(self, r: Number) -> int:
        t = math.ceil(Fraction(r) * self.denominator) - 1
        return max(min(t, _MAX_SCALED), -1)

    @cached_property
    def diameter_scaled(self) -> int:
        return int(self.scaled.max()) if self.n else 0

    @cached_property
    def coord_array(self) -> np.ndarray | None:
        if self.coords is None or len({len(p) for p in self.coords}) != 1:
            return None
        a = np.array(self.coords, dtype=np.int64)
        a.setflags(write=False)
        return a

    @property
    def diameter(self) -> Number:
        return self.to_rational(self.diameter_scaled)

    # subsets ---------------------------------------------------------------

    def subset_from_mask(self, mask: int) -> "PointSubset":
        s = self._interned.get(mask)
        if s is None:
            if mask < 0 or mask >> self.n:
                raise IndexError("subset mask refers to points outside the space")
            s = PointSubset(self, mask)
            self._interned[mask] = s
        return s

    def subset(self, members: Iterable[int] | np.ndarray) -> "PointSubset":
        if isinstance(members, np.ndarray) and members.dtype == bool:
            return self.subset_from_mask(_mask_from_bool(members))
        idx = np.asarray(list(members) if not isinstance(members, np.ndarray) else members, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise IndexError("point index out of range")
        flags = np.zeros(self.n, dtype=bool)
        flags[idx] = True
        return self.subset_from_mask(_mask_from_bool(flags))

    def full(self) -> "PointSubset":
        return self.subset_from_mask((1 << self.n) - 1)

    def point(self, p: int) -> "PointSubset":
        if not 0 <= p < self.n:
            raise IndexError(f"point {p} out of range")
        return self.subset_from_mask(1 << p)


class PointSubset:
    """An interned set of point indices of one space.

    Equal subsets of the same space are the same object, so per-subset caches
    (distance-to-set vector, diameter) are shared.
    """

    def __init__(self, space: FiniteMetricSpace, mask: int):
        self.space = space
        self.mask = mask

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PointSubset) and other.space is self.space and other.mask == self.mask
        )

    def __hash__(self) -> int:
        return hash((id(self.space), self.mask))

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __bool__(self) -> bool:
        return self.mask != 0

    def __iter__(self):
        return iter(self.indices.tolist())

    def __contains__(self, p: int) -> bool:
        return bool(self.mask >> p & 1)

    def __repr__(self) -> str:
        idx = self.indices.tolist()
        body = idx if len(idx) <= 12 else idx[:5] + ["..."] + idx[-5:]
        return f"PointSubset({body})"

    @cached_property
    def flags(self) -> np.ndarray:
        f = _bool_from_mask(self.mask, self.space.n)
        f.setflags(write=False)
        return f

    @cached_property
    def indices(self) -> np.ndarray:
        idx = np.flatnonzero(self.flags)
        idx.setflags(write=False)
        return idx

    @property
    def members(self) -> frozenset[int]:
        return frozenset(self.indices.tolist())

    @property
    def is_full(self) -> bool:
        return self.mask == (1 << self.space.n) - 1

    def issubset(self, other: "PointSubset") -> bool:
        return self.mask & ~other.mask == 0

    def intersects(self, other: "PointSubset") -> bool:
        return self.mask & other.mask != 0

    def __or__(self, other: "PointSubset") -> "PointSubset":
        _same_space(self, other)
        return self.space.subset_from_mask(self.mask | other.mask)

    def __le__(self, other: "PointSubset") -> bool:
        return self.issubset(other)

    @cached_property
    def distvec(self) -> np.ndarray:
        """Scaled distance from every point of the space to this subset."""
        if not self:
            raise EmptySubset("distance to an empty subset")
        if self.is_full:
            v = np.zeros(self.space.n, dtype=np.int64)
        else:
            v = self.space.scaled[self.indices].min(axis=0)
        v.setflags(write=False)
        return v

    @cached_property
    def diameter_scaled(self) -> int:
        if not self:
            raise EmptySubset("diameter of an empty subset")
        if self.is_full:
            return self.space.diameter_scaled
        idx = self.indices
        return int(self.space.scaled[np.ix_(idx, idx)].max())


def _same_space(a: PointSubset, b: PointSubset) -> None:
    if a.space is not b.space:
        raise SpaceMismatch("subsets belong to different spaces")


def _nonempty(*subsets: PointSubset) -> None:
    for s in subsets:
        if not s:
            raise EmptySubset("operation needs a nonempty subset")


def validate_space(raw_distance_table, labels: Sequence[str] | None = None, **kw) -> FiniteMetricSpace:
    """Build a space from a square table, checking every metric axiom.

    The triangle inequality is checked over all ordered triples; the reported
    witness is the lexicographically smallest ``(p, q, s)`` with
    ``d(p, q) > d(p, s) + d(s, q)``.
    """
    space = FiniteMetricSpace.from_rationals(raw_distance_table, labels, **kw)
    d = space.scaled
    n = space.n
    neg = np.argwhere(d < 0)
    if len(neg):
        p, q = map(int, neg[0])
        raise NegativeDistance(f"d({p},{q}) = {space.dist(p, q)} < 0", witness=(p, q))
    diag = np.flatnonzero(np.diag(d) != 0)
    if len(diag):
        p = int(diag[0])
        raise ZeroOffDiagonal(f"d({p},{p}) = {space.dist(p, p)} != 0", witness=(p, p))
    asym = np.argwhere(d != d.T)
    if len(asym):
        p, q = map(int, asym[0])
        raise AsymmetryError(f"d({p},{q}) != d({q},{p})", witness=(p, q))
    zero = np.argwhere((d == 0) & ~np.eye(n, dtype=bool))
    if len(zero):
        p, q = map(int, zero[0])
        raise ZeroOffDiagonal(f"d({p},{q}) = 0 for distinct points", witness=(p, q))
    best = None
    for s in range(n):
        bad = np.argwhere(d > d[:, s, None] + d[None, s, :])
        if len(bad):
            p, q = map(int, bad[0])
            if best is None or (p, q, s) < best:
                best = (p, q, s)
    if best is not None:
        p, q, s = best
        raise TriangleViolation(
            f"d({p},{q}) = {space.dist(p, q)} > d({p},{s}) + d({s},{q}) = "
            f"{space.dist(p, s) + space.dist(s, q)}",
            witness=best,
        )
    return space


def space_from_graph(
    edges: Iterable[tuple[int, int, object]],
    num_vertices: int,
    labels: Sequence[str] | None = None,
    **kw,
) -> FiniteMetricSpace:
    """Shortest-path metric of a weighted undirected graph.

    Parallel edges keep the lightest weight.  Weights are scaled to integers
    before running Dijkstra, so the float64 path sums are exact as long as
    they stay below 2**53 (checked).
    """
    edge_list = [(int(u), int(v), as_rational(w)) for u, v, w in edges]
    n = int(num_vertices)
    den = 1
    for u, v, w in edge_list:
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u},{v}) references a vertex outside 0..{n - 1}")
        if w <= 0:
            raise ValueError(f"edge ({u},{v}) has non-positive weight {w}")
        den = math.lcm(den, Fraction(w).denominator)
    dense = np.full((n, n), np.inf)
    for u, v, w in edge_list:
        if u == v:
            continue
        sw = int(Fraction(w) * den)
        if sw >= _FLOAT_EXACT:
            raise OverflowError("edge weight too large for exact shortest paths")
        if sw < dense[u, v]:
            dense[u, v] = dense[v, u] = sw
    if n == 0:
        raise ValueError("graph has no vertices")
    graph = csgraph_from_dense(dense, null_value=np.inf)
    apsp = shortest_path(graph, method="D", directed=False)
    unreachable = np.argwhere(~np.isfinite(apsp))
    if len(unreachable):
        p, q = map(int, unreachable[0])
        raise DisconnectedGraph(f"no path between {p} and {q}", witness=(p, q))
    if apsp.max(initial=0) >= _FLOAT_EXACT:
        raise OverflowError("shortest-path lengths exceed exact float range")
    scaled = np.rint(apsp).astype(np.int64)
    if labels is None:
        labels = [str(i) for i in range(n)]
    return FiniteMetricSpace(labels, scaled, den, **kw)


def product_space(x: FiniteMetricSpace, y: FiniteMetricSpace, kind: str = "sup") -> FiniteMetricSpace:
    """Cartesian product; the point (a, b) gets index ``a * len(y) + b``."""
    if kind not in ("sup", "l1"):
        raise ValueError(f"unknown product metric {kind!r}")
    den = math.lcm(x.denominator, y.denominator)
    dx = x.scaled * (den // x.denominator)
    dy = y.scaled * (den // y.denominator)
    nx, ny = x.n, y.n
    a = dx[:, None, :, None]
    b = dy[None, :, None, :]
    d = np.maximum(a, b) if kind == "sup" else a + b
    d = d.reshape(nx * ny, nx * ny)
    labels = [f"{lx},{ly}" for lx in x.labels for ly in y.labels]
    coords = None
    if x.coords is not None and y.coords is not None:
        coords = [cx + cy for cx in x.coords for cy in y.coords]
    return FiniteMetricSpace(labels, d, den, coords=coords, factors=(x, y), product_kind=kind)


def set_distance(a: PointSubset, b: PointSubset) -> Number:
    _same_space(a, b)
    _nonempty(a, b)
    return a.space.to_rational(int(a.distvec[b.indices].min()))


def neighborhood(v: PointSubset, r: Number) -> PointSubset:
    """All points within distance ``r`` of ``v`` (closed neighborhood)."""
    _nonempty(v)
    if v.is_full:
        return v
    space = v.space
    return space.subset(v.distvec <= space.le_threshold(r))


def diameter(u: PointSubset) -> Number:
    _nonempty(u)
    return u.space.to_rational(u.diameter_scaled)


def gaps_to(w: PointSubset, elements: Sequence[PointSubset]) -> np.ndarray:
    """Scaled ``set_distance(w, e)`` for each element, computed in one pass."""
    _nonempty(w)
    if not elements:
        return np.zeros(0, dtype=np.int64)
    sizes = [len(e.indices) for e in elements]
    if min(sizes) == 0:
        raise EmptySubset("gap to an empty element")
    concat = np.concatenate([e.indices for e in elements])
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return np.minimum.reduceat(w.distvec[concat], offsets)
