"""The map into the product of trees and its distortion certificates."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import AmbiguousElement, ColorMismatch, NestingViolation, PointNeverCovered
from .forest import EmbeddingForest, TreeVertex
from .growth import GrowthProfile
from .metric import Number, PointSubset
from .tower import CoverTower

EXHAUSTIVE_LIMIT = 1500
DEFAULT_SAMPLE = 10**6
_WITNESS_CAP = 100


# psi / phi -------------------------------------------------------------------


def psi(tower: CoverTower, j: int, x: int) -> int:
    """Lowest level at which some color-``j`` element contains ``x``."""
    for lvl in tower.levels:
        if any(x in e for e in lvl.cover.colors[j]):
            return lvl.k
    raise PointNeverCovered(f"point {x} is in no element of color {j}", witness=(x, j))


def phi(tower: CoverTower, j: int, x: int) -> TreeVertex:
    k = psi(tower, j, x)
    hits = [i for i, e in enumerate(tower.family(k, j)) if x in e]
    if len(hits) > 1:
        raise AmbiguousElement(
            f"point {x} lies in elements {hits} of color {j} at level {k}", witness=(x, j, k, hits)
        )
    i = hits[0]
    return TreeVertex(j, k, i, tower.family(k, j)[i])


def _first_cover(tower: CoverTower, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Per point: psi level and element index for color ``j`` (-1 if never)."""
    n = tower.space.n
    level = np.full(n, -1, dtype=np.int64)
    elem = np.full(n, -1, dtype=np.int64)
    for lvl in tower.levels:
        todo = level < 0
        if not todo.any():
            break
        count = np.zeros(n, dtype=np.int64)
        for i, e in enumerate(lvl.cover.colors[j]):
            hit = e.flags & todo
            count += hit
            elem[hit] = i
        amb = np.flatnonzero(count > 1)
        if len(amb):
            x = int(amb[0])
            raise AmbiguousElement(f"point {x} lies in several color-{j} elements at level {lvl.k}",
                                   witness=(x, j, lvl.k))
        level[count == 1] = lvl.k
    return level, elem


@dataclass(eq=False)
class EmbeddingMap:
    tower: CoverTower
    forest: EmbeddingForest
    psi: np.ndarray  # (points, colors) -> level
    phi: np.ndarray  # (points, colors) -> vertex id in forest.trees[color]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EmbeddingMap)
            and np.array_equal(self.psi, other.psi)
            and np.array_equal(self.phi, other.phi)
        )

    def vertex(self, x: int, j: int) -> TreeVertex:
        return self.forest.trees[j].vertices[int(self.phi[x, j])]

    def image(self, x: int) -> tuple[TreeVertex, ...]:
        return tuple(self.vertex(x, j) for j in range(self.phi.shape[1]))


def build_embedding(tower: CoverTower, forest: EmbeddingForest) -> EmbeddingMap:
    n, c = tower.space.n, tower.num_colors
    psi_tab = np.zeros((n, c), dtype=np.int64)
    phi_tab = np.zeros((n, c), dtype=np.int64)
    for j in range(c):
        level, elem = _first_cover(tower, j)
        missing = np.flatnonzero(level < 0)
        if len(missing):
            x = int(missing[0])
            raise PointNeverCovered(f"point {x} is in no element of color {j}", witness=(x, j))
        index = forest.trees[j].index
        psi_tab[:, j] = level
        phi_tab[:, j] = [index[(k, i)] for k, i in zip(level.tolist(), elem.tolist())]
    return EmbeddingMap(tower, forest, psi_tab, phi_tab)


def check_map(emb: EmbeddingMap) -> list[dict]:
    """Compare a (possibly loaded) map against the tower it claims to come from."""
    out = []
    for j in range(emb.tower.num_colors):
        level, elem = _first_cover(emb.tower, j)
        tree = emb.forest.trees[j]
        for x in range(emb.tower.space.n):
            vid = int(emb.phi[x, j])
            if not 0 <= vid < len(tree.vertices):
                out.append({"point": x, "color": j, "reason": "phi names no vertex"})
                continue
            v = tree.vertices[vid]
            if int(emb.psi[x, j]) != level[x]:
                out.append({"point": x, "color": j, "reason": f"psi {int(emb.psi[x, j])} != first level {int(level[x])}"})
            elif v.level != level[x] or v.element_index != elem[x]:
                out.append({"point": x, "color": j, "reason": f"phi {v.label()} is not the minimal element containing the point"})
            elif x not in v.element:
                out.append({"point": x, "color": j, "reason": "point not in phi element"})
    return out


def product_distance(forest: EmbeddingForest, vtuple: Sequence[TreeVertex], wtuple: Sequence[TreeVertex]) -> int:
    """Sup over colors of the per-tree path distance."""
    if len(vtuple) != len(forest.trees) or len(wtuple) != len(forest.trees):
        raise ColorMismatch(f"expected {len(forest.trees)} coordinates")
    best = 0
    for j, (v, w) in enumerate(zip(vtuple, wtuple)):
        if v.color != j or w.color != j:
            raise ColorMismatch(f"coordinate {j} holds a vertex of another color")
        tree = forest.trees[j]
        a, b = tree.vertex_id(v), tree.vertex_id(w)
        best = max(best, int(tree.distances(np.array([a]), np.array([b]))[0]))
    return best


# pairs -------------------------------------------------------------------------


@dataclass(frozen=True)
class PairSource:
    """``auto`` is exhaustive up to :data:`EXHAUSTIVE_LIMIT` points, sampled beyond."""

    mode: str = "auto"  # auto | exhaustive | sample
    size: int = DEFAULT_SAMPLE
    seed: int = 0

    def describe(self, n: int) -> dict:
        mode = self.resolve(n)
        d = {"mode": mode}
        if mode == "sample":
            d.update(size=self.size, seed=self.seed, extremes=n)
        return d

    def resolve(self, n: int) -> str:
        if self.mode == "auto":
            return "exhaustive" if n <= EXHAUSTIVE_LIMIT else "sample"
        return self.mode

    def pairs(self, space) -> tuple[np.ndarray, np.ndarray]:
        n = space.n
        if self.resolve(n) == "exhaustive":
            i, j = np.triu_indices(n, 1)
            return i.astype(np.int64), j.astype(np.int64)
        rng = np.random.default_rng(self.seed)
        a = rng.integers(0, n, size=self.size)
        b = rng.integers(0, n, size=self.size)
        keep = a != b
        a, b = a[keep], b[keep]
        i, j = np.minimum(a, b), np.maximum(a, b)
        ti, tj = np.triu_indices(n, 1)
        d = space.scaled[ti, tj]
        m = min(n, len(d))
        if m:
            near = np.argpartition(d, m - 1)[:m] if m < len(d) else np.arange(len(d))
            far = np.argpartition(-d, m - 1)[:m] if m < len(d) else np.arange(len(d))
            ext = np.sort(np.concatenate([near, far]))
            i = np.concatenate([i, ti[ext]])
            j = np.concatenate([j, tj[ext]])
        return i.astype(np.int64), j.astype(np.int64)


@dataclass
class PairData:
    i: np.ndarray
    j: np.ndarray
    d_x: np.ndarray  # scaled by space.denominator
    d_prod: np.ndarray
    sampling: dict


def pair_data(emb: EmbeddingMap, source: PairSource) -> PairData:
    space = emb.tower.space
    i, j = source.pairs(space)
    d_prod = np.zeros(len(i), dtype=np.int64)
    for c, tree in enumerate(emb.forest.trees):
        d_prod = np.maximum(d_prod, tree.distances(emb.phi[i, c], emb.phi[j, c]))
    return PairData(i, j, space.scaled[i, j], d_prod, source.describe(space.n))


# report ------------------------------------------------------------------------


@dataclass
class DistortionReport:
    denominator: int
    num_colors: int
    pairs_checked: int = 0
    sampling: dict = field(default_factory=dict)
    # the diagonal pair (x, x) always has margin 0 - 4
    expansive_margin: Number = -4
    expansive_witnesses: list[tuple[int, int, Number, int]] = field(default_factory=list)
    num_expansive_violations: int = 0
    proper_violations: list[tuple[int, int, Number, int, Number]] = field(default_factory=list)
    num_proper_violations: int = 0
    h_violations: list[tuple[int, int, int]] = field(default_factory=list)
    map_violations: list[dict] = field(default_factory=list)
    # envelope over distinct d_X values (scaled): max and min d_prod at exactly t
    env_t: list[int] = field(default_factory=list)
    env_max: list[int] = field(default_factory=list)
    env_min: list[int] = field(default_factory=list)

    @property
    def expansive(self) -> bool:
        return self.expansive_margin <= 0

    @property
    def proper(self) -> bool:
        return self.num_proper_violations == 0 and not self.h_violations

    @property
    def passed(self) -> bool:
        return self.expansive and self.proper and not self.map_violations

    def _merge_envelope(self, d_x: np.ndarray, d_prod: np.ndarray) -> None:
        t = np.concatenate([np.array(self.env_t, dtype=np.int64), d_x])
        hi = np.concatenate([np.array(self.env_max, dtype=np.int64), d_prod])
        lo = np.concatenate([np.array(self.env_min, dtype=np.int64), d_prod])
        if not len(t):
            return
        uniq, inv = np.unique(t, return_inverse=True)
        mx = np.full(len(uniq), np.iinfo(np.int64).min)
        mn = np.full(len(uniq), np.iinfo(np.int64).max)
        np.maximum.at(mx, inv, hi)
        np.minimum.at(mn, inv, lo)
        self.env_t, self.env_max, self.env_min = uniq.tolist(), mx.tolist(), mn.tolist()

    def _rat(self, scaled: int) -> Number:
        q = Fraction(scaled, self.denominator)
        return q.numerator if q.denominator == 1 else q

    def empirical_rho(self) -> list[tuple[Number, int]]:
        """``t -> max d_prod`` over checked pairs with ``d_X <= t``."""
        out, run = [], 0
        for t, m in zip(self.env_t, self.env_max):
            run = max(run, m)
            out.append((self._rat(t), run))
        return out

    def empirical_delta(self) -> list[tuple[Number, int]]:
        """``t -> min d_prod`` over checked pairs with ``d_X >= t``."""
        out, run = [], None
        for t, m in zip(reversed(self.env_t), reversed(self.env_min)):
            run = m if run is None else min(run, m)
            out.append((self._rat(t), run))
        return out[::-1]

    def delta_at(self, t: Number) -> float | int:
        """Lower envelope at an arbitrary ``t``; ``inf`` when no pair reaches it."""
        for s, v in self.empirical_delta():
            if s >= t:
                return v
        return float("inf")


def proper_bound(profile: GrowthProfile, num_colors: int, k: int) -> Number:
    """``2 f(g((n+1) max(k, 1)))``."""
    q = 2 * Fraction(profile.f(profile.g(num_colors * max(k, 1))))
    return q.numerator if q.denominator == 1 else q


def analytic_h(profile: GrowthProfile, num_colors: int, t: Number, max_k: int = 10_000) -> int:
    """``min {k >= 0 : t <= 2 f(g((n+1) k))}``."""
    prev = None
    for k in range(max_k + 1):
        bound = 2 * Fraction(profile.f(profile.g(num_colors * k)))
        if t <= bound:
            return k
        if prev is not None and bound <= prev:
            raise ValueError(f"h({t}) is never reached: the growth profile stopped growing at k={k}")
        prev = bound
    raise ValueError(f"h({t}) not reached within {max_k} steps; growth profile does not grow")


def _coerce(emb: EmbeddingMap, pairs) -> PairData:
    return pairs if isinstance(pairs, PairData) else pair_data(emb, pairs)


def new_report(emb: EmbeddingMap) -> DistortionReport:
    return DistortionReport(emb.tower.space.denominator, emb.tower.num_colors)


def verify_expansive(emb: EmbeddingMap, pairs, report: DistortionReport | None = None) -> DistortionReport:
    """Check ``d_prod(phi x, phi y) <= 2 d_X(x, y) + 4`` on every pair."""
    pd = _coerce(emb, pairs)
    report = report or new_report(emb)
    den = report.denominator
    margin = pd.d_prod * den - 2 * pd.d_x - 4 * den
    if len(margin):
        top = int(margin.max())
        report.expansive_margin = max(report.expansive_margin, report._rat(top))
        bad = np.flatnonzero(margin > 0)
        report.num_expansive_violations += len(bad)
        for b in bad[: _WITNESS_CAP].tolist():
            report.expansive_witnesses.append(
                (int(pd.i[b]), int(pd.j[b]), report._rat(int(pd.d_x[b])), int(pd.d_prod[b]))
            )
    report.pairs_checked = max(report.pairs_checked, len(pd.i))
    report.sampling = pd.sampling
    report._merge_envelope(pd.d_x, pd.d_prod)
    return report


def verify_proper(
    emb: EmbeddingMap,
    profile: GrowthProfile,
    pairs,
    report: DistortionReport | None = None,
    h_range: Sequence[Number] | None = None,
) -> DistortionReport:
    """Check ``d_X <= 2 f(g((n+1) max(k, 1)))`` with ``k = d_prod`` per pair,
    then ``empirical_delta(t) >= h(t)`` at each ``t`` in ``h_range``
    (default: every integer up to the largest checked distance)."""
    pd = _coerce(emb, pairs)
    report = report or new_report(emb)
    space = emb.tower.space
    n_col = emb.tower.num_colors
    kk = np.maximum(pd.d_prod, 1)
    for k in np.unique(kk).tolist():
        thr = space.le_threshold(proper_bound(profile, n_col, k))
        sel = np.flatnonzero((kk == k) & (pd.d_x > thr))
        report.num_proper_violations += len(sel)
        for b in sel[: _WITNESS_CAP].tolist():
            if len(report.proper_violations) < _WITNESS_CAP:
                report.proper_violations.append(
                    (int(pd.i[b]), int(pd.j[b]), space.to_rational(int(pd.d_x[b])), int(pd.d_prod[b]),
                     proper_bound(profile, n_col, k))
                )
    report.pairs_checked = max(report.pairs_checked, len(pd.i))
    report.sampling = pd.sampling
    report._merge_envelope(pd.d_x, pd.d_prod)
    if h_range is None:
        top = int(Fraction(space.to_rational(int(pd.d_x.max(initial=0)))))
        h_range = range(0, top + 1)
    for t in h_range:
        h = analytic_h(profile, n_col, t)
        delta = report.delta_at(t)
        if delta < h:
            report.h_violations.append((t, delta, h))
    return report


def verify_embedding(emb: EmbeddingMap, profile: GrowthProfile, source: PairSource, check: bool = True) -> DistortionReport:
    pd = pair_data(emb, source)
    report = verify_expansive(emb, pd)
    verify_proper(emb, profile, pd, report)
    if check:
        report.map_violations = check_map(emb)
    return report


# nesting and pigeonhole --------------------------------------------------------


def nesting_chain(tower: CoverTower, x: int, j: int) -> list[tuple[int, int, PointSubset]]:
    """Color-``j`` elements containing ``x``, by level; each inside the next."""
    chain = [
        (lvl.k, i, e)
        for lvl in tower.levels
        for i, e in enumerate(lvl.cover.colors[j])
        if x in e
    ]
    for (k1, i1, a), (k2, i2, b) in zip(chain, chain[1:]):
        if not a.issubset(b):
            raise NestingViolation(
                f"element {i1} at level {k1} is not inside element {i2} at level {k2} (color {j}, point {x})",
                witness=(j, x, k1, i1, k2, i2),
            )
    return chain


def certify_pigeonhole(tower: CoverTower, ks: Sequence[int] | None = None) -> tuple[bool, dict | None]:
    """Every window of ``(n+1) k`` consecutive levels covers each point at
    least ``k`` times in some single color."""
    c = tower.num_colors
    n = tower.space.n
    levels = len(tower.levels)
    cov = np.zeros((levels + 1, c, n), dtype=np.int64)
    for lvl in tower.levels:
        for j, fam in enumerate(lvl.cover.colors):
            for e in fam:
                cov[lvl.k + 1, j] |= e.flags
    csum = np.cumsum(cov, axis=0)
    if ks is None:
        ks = range(1, levels // c + 1)
    for k in ks:
        w = c * k
        if w > levels:
            continue
        counts = csum[w:] - csum[:-w]  # (windows, colors, points)
        best = counts.max(axis=1)
        bad = np.argwhere(best < k)
        if len(bad):
            s, x = map(int, bad[0])
            return False, {"k": k, "window_start": s, "point": x}
    return True, None
