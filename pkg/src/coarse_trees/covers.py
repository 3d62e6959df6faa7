"""Colored covers at a single scale: certificates, thickening, generators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import EmptySubset, MissingCoordinates, PreconditionViolated, SpaceMismatch
from .metric import FiniteMetricSpace, Number, PointSubset, gaps_to, neighborhood

_WITNESS_CAP = 1000


@dataclass(frozen=True)
class ColoredCover:
    """Families ``colors[0..n]`` of point subsets claimed ``scale``-disjoint.

    Empty colors are allowed; empty elements are not.
    """

    space: FiniteMetricSpace
    colors: tuple[tuple[PointSubset, ...], ...]
    scale: Number
    diameter_bound: Number

    def __post_init__(self):
        colors = tuple(tuple(c) for c in self.colors)
        for fam in colors:
            for e in fam:
                if e.space is not self.space:
                    raise SpaceMismatch("cover element from another space")
                if not e:
                    raise EmptySubset("cover elements must be nonempty")
        object.__setattr__(self, "colors", colors)

    @property
    def num_colors(self) -> int:
        return len(self.colors)

    def elements(self):
        for j, fam in enumerate(self.colors):
            for i, e in enumerate(fam):
                yield j, i, e

    def with_colors(self, colors, scale=None, diameter_bound=None) -> "ColoredCover":
        return ColoredCover(
            self.space,
            colors,
            self.scale if scale is None else scale,
            self.diameter_bound if diameter_bound is None else diameter_bound,
        )


@dataclass
class CoverCertificate:
    scale: Number
    diameter_bound: Number
    covers_space: bool
    uncovered: list[int]
    min_gap: list[Number | None]  # per color; None when the color has < 2 elements
    max_diameter: Number
    gap_violations: list[tuple[int, int, int, Number]] = field(default_factory=list)
    diameter_violations: list[tuple[int, int, Number]] = field(default_factory=list)
    num_gap_violations: int = 0

    @property
    def passed(self) -> bool:
        return self.covers_space and not self.num_gap_violations and not self.diameter_violations

    def witness(self):
        if not self.covers_space:
            return {"uncovered": self.uncovered[:10]}
        if self.gap_violations:
            j, a, b, gap = self.gap_violations[0]
            return {"color": j, "elements": (a, b), "gap": gap, "scale": self.scale}
        if self.diameter_violations:
            j, a, d = self.diameter_violations[0]
            return {"color": j, "element": a, "diameter": d, "bound": self.diameter_bound}
        return None


def check_cover(c: ColoredCover, scale: Number | None = None, diameter_bound: Number | None = None) -> CoverCertificate:
    """Certify coverage, disjointness at ``scale`` and the diameter bound.

    ``scale`` and ``diameter_bound`` default to the cover's own claims.
    Violations are collected, never raised.
    """
    space = c.space
    scale = c.scale if scale is None else scale
    bound = c.diameter_bound if diameter_bound is None else diameter_bound
    union = 0
    for _, _, e in c.elements():
        union |= e.mask
    uncovered = [] if union == (1 << space.n) - 1 else [
        p for p in range(space.n) if not union >> p & 1
    ]

    gap_thr = space.lt_threshold(scale)  # gap is a violation iff gap < scale
    min_gaps: list[Number | None] = []
    violations = []
    nviol = 0
    for j, fam in enumerate(c.colors):
        best = None
        for a in range(len(fam) - 1):
            gaps = gaps_to(fam[a], fam[a + 1 :])
            lo = int(gaps.min())
            best = lo if best is None else min(best, lo)
            for off in np.flatnonzero(gaps <= gap_thr):
                nviol += 1
                if len(violations) < _WITNESS_CAP:
                    violations.append((j, a, a + 1 + int(off), space.to_rational(int(gaps[off]))))
        min_gaps.append(None if best is None else space.to_rational(best))

    diam_thr = space.le_threshold(bound)
    max_diam = 0
    diam_viol = []
    for j, i, e in c.elements():
        d = e.diameter_scaled
        max_diam = max(max_diam, d)
        if d > diam_thr:
            diam_viol.append((j, i, space.to_rational(d)))
    return CoverCertificate(
        scale=scale,
        diameter_bound=bound,
        covers_space=not uncovered,
        uncovered=uncovered,
        min_gap=min_gaps,
        max_diameter=space.to_rational(max_diam),
        gap_violations=violations,
        diameter_violations=diam_viol,
        num_gap_violations=nviol,
    )


def lebesgue_thicken(c: ColoredCover, k: Number) -> ColoredCover:
    """Replace every element by its ``k``-neighborhood.

    An ``r + 2k``-disjoint cover with diameter bound ``D`` becomes an
    ``r``-disjoint cover with bound ``D + 2k`` and Lebesgue number ``k``.
    """
    if k < 0:
        raise ValueError("thickening radius must be non-negative")
    r = c.scale - 2 * k
    if r < 0:
        raise PreconditionViolated(f"scale {c.scale} is smaller than 2k = {2 * k}")
    cert = check_cover(c)
    if not cert.passed:
        raise PreconditionViolated("input cover fails its own certificate", witness=cert.witness())
    colors = tuple(tuple(neighborhood(e, k) for e in fam) for fam in c.colors)
    return ColoredCover(c.space, colors, r, c.diameter_bound + 2 * k)


@dataclass
class LebesgueCertificate:
    k: Number
    failing: list[int]

    @property
    def passed(self) -> bool:
        return not self.failing


def lebesgue_points(c: ColoredCover, k: Number) -> np.ndarray:
    """Boolean mask of points ``x`` whose closed ``k``-ball lies in one element."""
    space = c.space
    ok = np.zeros(space.n, dtype=bool)
    thr = space.le_threshold(k)
    for _, _, e in c.elements():
        if e.is_full:
            ok[:] = True
            break
        outside = space.subset_from_mask(((1 << space.n) - 1) & ~e.mask)
        # B_k(x) in e  <=>  x in e and every point outside e is farther than k
        ok |= e.flags & (outside.distvec > thr)
    return ok


def check_lebesgue(c: ColoredCover, k: Number) -> LebesgueCertificate:
    ok = lebesgue_points(c, k)
    return LebesgueCertificate(k, np.flatnonzero(~ok).tolist())


# generators ---------------------------------------------------------------

Generator = Callable[[FiniteMetricSpace, Number], ColoredCover]


def _interval_keys(t: np.ndarray, r: Fraction) -> tuple[np.ndarray, np.ndarray]:
    """Window index m and color c of each integer coordinate."""
    p, q = r.numerator, r.denominator
    span = int(np.abs(t).max()) if t.size else 0
    if 2 * r > span:
        # every coordinate lies in [-2r, 2r): m=0 color 0, or m=-1 color 1
        neg = t < 0
        return np.where(neg, -1, 0), neg.astype(np.int64)
    if span * q < 2**61 and 4 * p < 2**61:
        tq = t * q
        m = tq // (4 * p)
        color = ((tq - 4 * p * m) >= 2 * p).astype(np.int64)
        return m, color
    m_l, c_l = [], []
    for ti in t.tolist():
        m = (ti * q) // (4 * p)
        m_l.append(m)
        c_l.append(int(ti * q - 4 * p * m >= 2 * p))
    return np.array(m_l, dtype=object), np.array(c_l, dtype=np.int64)


def interval_cover_1d(space: FiniteMetricSpace, r: Number) -> ColoredCover:
    """Two-color cover of integer points by half-open windows.

    Color ``c`` holds the runs of points with coordinate in
    ``[4rm + 2rc, 4rm + 2rc + 2r)``; same-color windows are ``2r`` apart and
    every element has diameter below ``2r``.
    """
    coords = space.coord_array
    if coords is None or coords.shape[1] != 1:
        raise MissingCoordinates("interval cover needs one integer coordinate per point")
    r = Fraction(r)
    if r <= 0:
        raise ValueError("scale must be positive")
    t = coords[:, 0]
    m, color = _interval_keys(t, r)
    colors = []
    for c in (0, 1):
        sel = np.flatnonzero(color == c)
        if m.dtype != object:
            keys = m[sel]
            order = np.argsort(keys, kind="stable")
            sel, keys = sel[order], keys[order]
            cuts = np.flatnonzero(np.diff(keys)) + 1
            colors.append(tuple(space.subset(part) for part in np.split(sel, cuts) if len(part)))
            continue
        blocks: dict = {}
        for idx in sel.tolist():
            blocks.setdefault(m[idx], []).append(idx)
        colors.append(tuple(space.subset(blocks[key]) for key in sorted(blocks)))
    return ColoredCover(space, tuple(colors), _norm(r), _norm(2 * r))


def product_cover(cx: ColoredCover, cy: ColoredCover, product: FiniteMetricSpace) -> ColoredCover:
    """Elements ``U x U'`` with colors indexed by ``(i, i')`` in row-major order."""
    if product.factors is None or product.factors[0] is not cx.space or product.factors[1] is not cy.space:
        raise SpaceMismatch("product space was not built from the two covers' spaces")
    ny = cy.space.n
    colors = []
    for fx in cx.colors:
        for fy in cy.colors:
            colors.append(
                tuple(
                    product.subset(np.add.outer(u.indices * ny, v.indices).ravel())
                    for u in fx
                    for v in fy
                )
            )
    if product.product_kind == "sup":
        bound = max(cx.diameter_bound, cy.diameter_bound)
    else:
        bound = cx.diameter_bound + cy.diameter_bound
    return ColoredCover(product, tuple(colors), min(cx.scale, cy.scale), bound)


def interval_generator(space: FiniteMetricSpace, r: Number) -> ColoredCover:
    """Interval cover on integer spaces, tensored over product factors."""
    if space.factors is not None:
        x, y = space.factors
        return product_cover(interval_generator(x, r), interval_generator(y, r), space)
    return interval_cover_1d(space, r)


def greedy_cover(space: FiniteMetricSpace, r: Number) -> ColoredCover:
    """Single-color ``r``-disjoint partition.

    Merging points into clusters closer than ``r`` until no two clusters are
    closer than ``r`` reaches the same fixed point as taking connected
    components of the graph ``d(x, y) < r``; that is how it is computed.
    Clusters are ordered by their smallest point index.
    """
    if r <= 0:
        raise ValueError("scale must be positive")
    if Fraction(r) > Fraction(space.diameter):
        parts = [space.full()]
    else:
        adj = csr_matrix(space.scaled <= space.lt_threshold(r))
        _, labels = connected_components(adj, directed=False)
        first: dict[int, list[int]] = {}
        for p, lab in enumerate(labels.tolist()):
            first.setdefault(lab, []).append(p)
        parts = [space.subset(pts) for pts in sorted(first.values(), key=lambda pts: pts[0])]
    bound = max(e.diameter_scaled for e in parts)
    return ColoredCover(space, (tuple(parts),), _norm(Fraction(r)), space.to_rational(bound))


def natural_colors(name: str, space: FiniteMetricSpace) -> int:
    if name == "greedy":
        return 1
    if name == "interval":
        def dim(s):
            return 1 if s.factors is None else dim(s.factors[0]) + dim(s.factors[1])
        return 2 ** dim(space)
    raise KeyError(name)


GENERATORS: dict[str, Generator] = {
    "interval": interval_generator,
    "greedy": greedy_cover,
}


def empirical_control_function(
    space: FiniteMetricSpace, generator: Generator, scales: Sequence[Number]
) -> list[tuple[Number, Number]]:
    """Measured maximum element diameter per scale, made non-decreasing."""
    table = []
    running = None
    for r in sorted(scales):
        c = generator(space, r)
        d = max((e.diameter_scaled for _, _, e in c.elements()), default=0)
        running = d if running is None else max(running, d)
        table.append((r, space.to_rational(running)))
    return table


def raw_empirical_control_function(space, generator, scales):
    """Same as :func:`empirical_control_function` but without monotonizing."""
    out = []
    for r in sorted(scales):
        c = generator(space, r)
        d = max((e.diameter_scaled for _, _, e in c.elements()), default=0)
        out.append((r, space.to_rational(d)))
    return out


def default_scales(space: FiniteMetricSpace) -> list[Number]:
    top = max(1, math.ceil(Fraction(space.diameter)))
    scales = [Fraction(1, 4), Fraction(1, 2)]
    s = 1
    while s <= 2 * top:
        scales.append(s)
        s *= 2
    return [_norm(Fraction(x)) for x in scales]


def _norm(q: Fraction) -> Number:
    q = Fraction(q)
    return q.numerator if q.denominator == 1 else q
