"""Trees built from a cover tower, one per color, with unit-length path metrics."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import NotATree, VertexNotInTree
from .metric import PointSubset
from .tower import CoverTower


@dataclass(frozen=True)
class TreeVertex:
    color: int
    level: int
    element_index: int
    element: PointSubset = field(compare=False, repr=False)

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.color, self.level, self.element_index)

    def label(self) -> str:
        return f"({self.color},{self.level},{self.element_index})"


VertexRef = Union[int, TreeVertex]


@dataclass(eq=False)
class EmbeddingTree:
    color: int
    vertices: tuple[TreeVertex, ...]
    edges: frozenset[tuple[int, int]]  # vertex ids, smaller id first
    parent: tuple[Optional[int], ...]

    def __post_init__(self):
        self.index = {(v.level, v.element_index): i for i, v in enumerate(self.vertices)}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EmbeddingTree)
            and self.color == other.color
            and self.vertices == other.vertices
            and self.edges == other.edges
            and self.parent == other.parent
            and all(a.element == b.element for a, b in zip(self.vertices, other.vertices))
        )

    def __len__(self) -> int:
        return len(self.vertices)

    def vertex_id(self, v: VertexRef) -> int:
        if isinstance(v, TreeVertex):
            i = self.index.get((v.level, v.element_index))
            if v.color != self.color or i is None:
                raise VertexNotInTree(f"vertex {v.label()} is not in tree {self.color}", witness=v.key)
            return i
        if not 0 <= v < len(self.vertices):
            raise VertexNotInTree(f"vertex id {v} out of range", witness=v)
        return int(v)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.vertices]
        for a, b in sorted(self.edges):
            adj[a].append(b)
            adj[b].append(a)
        return adj

    # binary lifting over the parent map
    @cached_property
    def _lifting(self):
        n = len(self.vertices)
        up0 = np.arange(n, dtype=np.int64)
        depth = np.zeros(n, dtype=np.int64)
        root = np.arange(n, dtype=np.int64)
        # parents sit at strictly higher levels, so walk from the top down
        for i in sorted(range(n), key=lambda i: -self.vertices[i].level):
            p = self.parent[i]
            if p is not None:
                up0[i] = p
                depth[i] = depth[p] + 1
                root[i] = root[p]
        log = max(1, int(depth.max(initial=0)).bit_length())
        up = np.empty((log, n), dtype=np.int64)
        up[0] = up0
        for j in range(1, log):
            up[j] = up[j - 1][up[j - 1]]
        return up, depth, root

    def distances(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Vectorised path length between vertex ids ``a[i]`` and ``b[i]``."""
        up, depth, root = self._lifting
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if a.size and np.any(root[a] != root[b]):
            i = int(np.flatnonzero(root[a] != root[b])[0])
            raise NotATree(
                f"vertices {int(a[i])} and {int(b[i])} lie in different components",
                witness=(int(a[i]), int(b[i])),
            )
        da, db = depth[a], depth[b]
        x = np.where(da >= db, a, b)
        y = np.where(da >= db, b, a)
        diff = np.abs(da - db)
        for j in range(up.shape[0]):
            sel = (diff >> j) & 1 == 1
            x = np.where(sel, up[j][x], x)
        for j in range(up.shape[0] - 1, -1, -1):
            ux, uy = up[j][x], up[j][y]
            sel = ux != uy
            x = np.where(sel, ux, x)
            y = np.where(sel, uy, y)
        lca = np.where(x == y, x, up[0][x])
        return da + db - 2 * depth[lca]


@dataclass(eq=False)
class EmbeddingForest:
    trees: tuple[EmbeddingTree, ...]

    def __eq__(self, other) -> bool:
        return isinstance(other, EmbeddingForest) and self.trees == other.trees

    def __len__(self) -> int:
        return len(self.trees)


def build_tree(tower: CoverTower, j: int, check: bool = True) -> EmbeddingTree:
    """Vertices are all ``(U, k)`` of color ``j``.  ``(V, k)`` is joined to
    ``(U, k')`` with ``k < k'`` iff ``V`` is inside ``U`` and no level strictly
    between has a color-``j`` element containing ``V``.

    The intermediate-level scan is literal: each vertex looks upward level by
    level and links to every containing element at the first level that has
    one.
    """
    vertices = [
        TreeVertex(j, lvl.k, i, e)
        for lvl in tower.levels
        for i, e in enumerate(lvl.cover.colors[j])
    ]
    index = {(v.level, v.element_index): n for n, v in enumerate(vertices)}
    edges: set[tuple[int, int]] = set()
    parent: list[Optional[int]] = [None] * len(vertices)
    for vid, v in enumerate(vertices):
        for l in range(v.level + 1, tower.height + 1):
            hits = [i for i, u in enumerate(tower.family(l, j)) if v.element.issubset(u)]
            if hits:
                for i in hits:
                    uid = index[(l, i)]
                    edges.add((min(vid, uid), max(vid, uid)))
                parent[vid] = index[(l, hits[0])]
                break
    tree = EmbeddingTree(j, tuple(vertices), frozenset(edges), tuple(parent))
    if check:
        cert = validate_tree(tree)
        if not cert.passed:
            raise NotATree(f"color {j} graph is not a tree", witness=cert.witness)
    return tree


def build_forest(tower: CoverTower, check: bool = True) -> EmbeddingForest:
    return EmbeddingForest(tuple(build_tree(tower, j, check) for j in range(tower.num_colors)))


def tree_distance(tree: EmbeddingTree, v: VertexRef, w: VertexRef) -> int:
    a, b = tree.vertex_id(v), tree.vertex_id(w)
    return int(tree.distances(np.array([a]), np.array([b]))[0])


@dataclass
class TreeCertificate:
    color: int
    vertices: int
    edges: int
    components: int
    acyclic: bool
    connected: bool
    unique_higher_neighbor: bool
    edges_respect_containment: bool
    witness: dict | None = None

    @property
    def passed(self) -> bool:
        return self.acyclic and self.connected and self.unique_higher_neighbor and self.edges_respect_containment


def validate_tree(tree: EmbeddingTree) -> TreeCertificate:
    n = len(tree.vertices)
    witness: dict = {}
    if n:
        rows = [a for a, b in tree.edges] + [b for a, b in tree.edges]
        cols = [b for a, b in tree.edges] + [a for a, b in tree.edges]
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
        ncomp, labels = connected_components(adj, directed=False)
    else:
        ncomp, labels = 0, np.zeros(0)
    connected = ncomp <= 1
    acyclic = len(tree.edges) == n - ncomp
    if not connected:
        other = int(np.flatnonzero(labels != labels[0])[0])
        witness["disconnected"] = (tree.vertices[0].label(), tree.vertices[other].label())
    if not acyclic:
        witness["cycle_rank"] = len(tree.edges) - (n - ncomp)

    higher: Counter = Counter()
    contain_ok = True
    for a, b in sorted(tree.edges):
        va, vb = tree.vertices[a], tree.vertices[b]
        lo, hi = (a, b) if va.level < vb.level else (b, a)
        if va.level == vb.level or not tree.vertices[lo].element.issubset(tree.vertices[hi].element):
            contain_ok = False
            witness.setdefault("bad_edge", (va.label(), vb.label()))
        higher[lo] += 1
    multi = sorted(v for v, c in higher.items() if c > 1)
    if multi:
        witness["several_higher_neighbors"] = tree.vertices[multi[0]].label()
    return TreeCertificate(
        tree.color, n, len(tree.edges), ncomp, acyclic, connected, not multi, contain_ok, witness or None
    )


def validate_forest(forest: EmbeddingForest) -> list[TreeCertificate]:
    return [validate_tree(t) for t in forest.trees]


@dataclass
class DegreeProfile:
    max_degree: int
    histogram: dict[int, int]


def degree_profile(tree: EmbeddingTree) -> DegreeProfile:
    deg = Counter()
    for a, b in tree.edges:
        deg[a] += 1
        deg[b] += 1
    degrees = [deg[i] for i in range(len(tree.vertices))]
    return DegreeProfile(max(degrees, default=0), dict(sorted(Counter(degrees).items())))


def replace_tree(forest: EmbeddingForest, tree: EmbeddingTree) -> EmbeddingForest:
    trees = list(forest.trees)
    trees[tree.color] = tree
    return EmbeddingForest(tuple(trees))


def forest_from_parts(
    tower: CoverTower,
    parts: Sequence[tuple[int, Sequence[tuple[int, int]], Sequence[Optional[int]], Sequence[tuple[int, int]]]],
) -> EmbeddingForest:
    """Reassemble trees from ``(color, [(level, idx)], parent, edges)`` tuples."""
    trees = []
    for color, keys, parent, edges in parts:
        verts = tuple(TreeVertex(color, k, i, tower.family(k, color)[i]) for k, i in keys)
        trees.append(
            EmbeddingTree(
                color,
                verts,
                frozenset((min(a, b), max(a, b)) for a, b in edges),
                tuple(None if p is None else int(p) for p in parent),
            )
        )
    return EmbeddingForest(tuple(trees))
