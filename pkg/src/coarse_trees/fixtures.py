"""Built-in spaces addressed by name: ``singleton``, ``path:m``, ``grid:m:d``,
``random-graph:m:p:seed``."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .metric import FiniteMetricSpace, product_space, space_from_graph


def singleton() -> FiniteMetricSpace:
    return FiniteMetricSpace(["0"], np.zeros((1, 1), dtype=np.int64), coords=[(0,)])


def path(m: int) -> FiniteMetricSpace:
    """Integers ``0..m`` with the usual distance."""
    if m < 0:
        raise ValueError("path length must be non-negative")
    t = np.arange(m + 1, dtype=np.int64)
    return FiniteMetricSpace([str(i) for i in t], np.abs(t[:, None] - t[None, :]), coords=[(int(i),) for i in t])


def grid(m: int, d: int) -> FiniteMetricSpace:
    """``d``-fold sup-metric product of ``path(m)``."""
    if d < 1:
        raise ValueError("grid dimension must be at least 1")
    base = path(m)
    space = base
    for _ in range(d - 1):
        space = product_space(space, path(m), "sup")
    return space


def random_graph(m: int, p: float | str, seed: int, max_weight: int = 10) -> FiniteMetricSpace:
    """Shortest-path metric of a seeded G(m, p) graph.

    Edge weights are uniform integers in ``1..max_weight``.  Components are
    chained together (smallest vertex of each to the next) so the result is
    always connected.
    """
    p = float(Fraction(str(p)))
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(m, 1)
    keep = rng.random(len(iu)) < p
    u, v = iu[keep], ju[keep]
    w = rng.integers(1, max_weight + 1, size=len(u))
    edges = list(zip(u.tolist(), v.tolist(), w.tolist()))
    adj = coo_matrix((np.ones(len(u)), (u, v)), shape=(m, m))
    ncomp, labels = connected_components(adj, directed=False)
    if ncomp > 1:
        heads = [int(np.flatnonzero(labels == c)[0]) for c in range(ncomp)]
        heads.sort()
        extra = rng.integers(1, max_weight + 1, size=len(heads) - 1)
        edges += [(a, b, int(x)) for a, b, x in zip(heads, heads[1:], extra.tolist())]
    return space_from_graph(edges, m)


def builtin(name: str) -> FiniteMetricSpace:
    parts = name.split(":")
    kind, args = parts[0], parts[1:]
    try:
        if kind == "singleton" and not args:
            return singleton()
        if kind == "path" and len(args) == 1:
            return path(int(args[0]))
        if kind == "grid" and len(args) == 2:
            return grid(int(args[0]), int(args[1]))
        if kind == "random-graph" and len(args) == 3:
            return random_graph(int(args[0]), args[1], int(args[2]))
    except ValueError as e:
        raise ValueError(f"bad fixture {name!r}: {e}") from e
    raise ValueError(f"unknown fixture {name!r}")
