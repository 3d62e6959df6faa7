"""Multi-scale coherent covers.

Each level ``k`` starts from a raw cover at scale ``g(k)`` with Lebesgue
number ``k``, has its colors permuted so the basepoint's ``k``-ball sits in
color ``k mod (n+1)``, and then every element ``U`` grows downward through
the lower levels of its color:

    W_k = U
    B_i = {V in level i, same color : d(V, W_{i+1}) < f(g(i))}
    W_i = W_{i+1} united with V^i for every V in B_i

``W_0(U)`` replaces ``U``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .covers import ColoredCover, CoverCertificate, Generator, check_cover, lebesgue_thicken
from .errors import (
    CoarseTreesError,
    CoherenceViolation,
    DiameterBudgetExceeded,
    LebesgueWitnessMissing,
)
from .growth import GrowthProfile
from .metric import FiniteMetricSpace, Number, PointSubset, gaps_to, neighborhood, set_distance

NINE_TENTHS = Fraction(9, 10)


@dataclass(frozen=True)
class AbsorptionStep:
    i: int
    w_above: PointSubset  # W_{i+1}
    absorbed: tuple[int, ...]  # indices into level i, same color (B_i)
    w: PointSubset  # W_i


@dataclass
class AbsorptionTrace:
    color: int
    element_index: int
    seed: PointSubset
    steps: list[AbsorptionStep] = field(default_factory=list)

    @property
    def result(self) -> PointSubset:
        return self.steps[-1].w if self.steps else self.seed


@dataclass(frozen=True)
class TowerLevel:
    k: int
    scale: Number  # g(k)
    cover: ColoredCover
    permutation: tuple[int, ...]  # new color i was raw color permutation[i]


@dataclass
class CoverTower:
    space: FiniteMetricSpace
    num_colors: int
    basepoint: int
    profile: GrowthProfile
    levels: list[TowerLevel]
    traces: dict[int, list[AbsorptionTrace]] = field(default_factory=dict, repr=False, compare=False)

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    def family(self, k: int, j: int) -> tuple[PointSubset, ...]:
        return self.levels[k].cover.colors[j]


def tower_height(space: FiniteMetricSpace, profile: GrowthProfile | None, num_colors: int) -> int:
    """``ceil(diam X) + num_colors - 1``: past ``ceil(diam X)`` every color
    gets one level where the basepoint ball is the whole space."""
    return math.ceil(Fraction(space.diameter)) + num_colors - 1


def _pad(c: ColoredCover, num_colors: int) -> ColoredCover:
    if c.num_colors > num_colors:
        raise ValueError(f"generator produced {c.num_colors} colors, tower has {num_colors}")
    if c.num_colors == num_colors:
        return c
    return c.with_colors(c.colors + ((),) * (num_colors - c.num_colors))


def raw_level_cover(
    space: FiniteMetricSpace, generator: Generator, profile: GrowthProfile, k: int, num_colors: int
) -> ColoredCover:
    """Scale-``g(k)`` cover with Lebesgue number ``k`` and diameter ``<= f(g(k))``."""
    gk = profile.g(k)
    c = _pad(generator(space, gk + 2 * k), num_colors)
    c = lebesgue_thicken(c, k)
    budget = profile.f(gk)
    thr = space.le_threshold(budget)
    for j, i, e in c.elements():
        if e.diameter_scaled > thr:
            raise DiameterBudgetExceeded(
                f"element {i} of color {j} has diameter {space.to_rational(e.diameter_scaled)} > f(g({k})) = {budget}",
                witness={"color": j, "element": i, "diameter": space.to_rational(e.diameter_scaled), "budget": budget},
                level=k,
            )
    return c.with_colors(c.colors, scale=gk, diameter_bound=budget)


def renumber_for_basepoint(
    c: ColoredCover, k: int, basepoint: int, num_colors: int
) -> tuple[ColoredCover, tuple[int, ...]]:
    """Swap colors so color ``k mod num_colors`` holds the basepoint's k-ball.

    Returns the permuted cover and the permutation (new color ``i`` is old
    color ``perm[i]``).  Among several qualifying colors the lowest index wins.
    """
    space = c.space
    ball = neighborhood(space.point(basepoint), k)
    target = k % num_colors
    qualifying = [j for j, fam in enumerate(c.colors) if any(ball.issubset(e) for e in fam)]
    if not qualifying:
        raise LebesgueWitnessMissing(
            f"no element contains the {k}-ball around point {basepoint}", witness=basepoint, level=k
        )
    perm = list(range(c.num_colors))
    if target not in qualifying:
        q = qualifying[0]
        perm[q], perm[target] = perm[target], perm[q]
    perm = tuple(perm)
    if perm == tuple(range(c.num_colors)):
        return c, perm
    return c.with_colors(tuple(c.colors[p] for p in perm)), perm


def absorb_level(
    raw: ColoredCover,
    lower_levels: Sequence[ColoredCover],
    profile: GrowthProfile,
    trace: bool = True,
) -> tuple[ColoredCover, list[AbsorptionTrace]]:
    """Grow every raw element through the already coherent lower levels.

    Raises :class:`CoherenceViolation` when the result is not
    ``9/10 g(k)``-disjoint with diameters ``<= 2 f(g(k))``.
    """
    k = len(lower_levels)
    space = raw.space
    thresholds: dict[int, int] = {}
    traces: list[AbsorptionTrace] = []
    colors = []
    for j, fam in enumerate(raw.colors):
        grown = []
        for idx, u in enumerate(fam):
            t = AbsorptionTrace(j, idx, u)
            w = u
            for i in range(k - 1, -1, -1):
                lower = lower_levels[i].colors[j]
                if w.is_full:
                    if not trace:
                        break
                    absorbed = tuple(range(len(lower)))
                    t.steps.append(AbsorptionStep(i, w, absorbed, w))
                    continue
                absorbed = ()
                new = w
                if lower:
                    if i not in thresholds:
                        thresholds[i] = space.lt_threshold(profile.f(profile.g(i)))
                    gaps = gaps_to(w, lower)
                    absorbed = tuple(int(a) for a in (gaps <= thresholds[i]).nonzero()[0])
                    for a in absorbed:
                        new = new | neighborhood(lower[a], i)
                if trace:
                    t.steps.append(AbsorptionStep(i, w, absorbed, new))
                w = new
            grown.append(w)
            if trace:
                traces.append(t)
        colors.append(tuple(grown))
    gk = profile.g(k)
    out = ColoredCover(space, tuple(colors), _norm(NINE_TENTHS * gk), _norm(2 * Fraction(profile.f(gk))))
    cert = check_cover(out)
    if not cert.passed:
        raise CoherenceViolation(
            "absorbed cover fails its 9/10 g(k) disjointness or 2 f(g(k)) diameter certificate",
            witness=cert.witness(),
            level=k,
        )
    return out, traces


def build_tower(
    space: FiniteMetricSpace,
    generator: Generator,
    profile: GrowthProfile,
    num_colors: int,
    basepoint: int = 0,
    keep_traces: bool = False,
) -> CoverTower:
    if num_colors < 1:
        raise ValueError("need at least one color")
    if not 0 <= basepoint < space.n:
        raise ValueError(f"basepoint {basepoint} out of range")
    height = tower_height(space, profile, num_colors)
    levels: list[TowerLevel] = []
    traces: dict[int, list[AbsorptionTrace]] = {}
    lower: list[ColoredCover] = []
    for k in range(height + 1):
        try:
            raw = raw_level_cover(space, generator, profile, k, num_colors)
            raw, perm = renumber_for_basepoint(raw, k, basepoint, num_colors)
            cover, tr = absorb_level(raw, lower, profile, trace=keep_traces)
        except CoarseTreesError as e:
            if e.level is None:
                e.level = k
            raise
        if keep_traces:
            traces[k] = tr
        lower.append(cover)
        levels.append(TowerLevel(k, profile.g(k), cover, perm))
    return CoverTower(space, num_colors, basepoint, profile, levels, traces)


# certificates ---------------------------------------------------------------


def certify_levels(tower: CoverTower) -> list[CoverCertificate]:
    out = []
    for lvl in tower.levels:
        gk = tower.profile.g(lvl.k)
        out.append(check_cover(lvl.cover, _norm(NINE_TENTHS * gk), _norm(2 * Fraction(tower.profile.f(gk)))))
    return out


@dataclass
class Certificate:
    name: str
    passed: bool
    checked: int = 0
    violations: int = 0
    witness: dict | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        s = f"{status} {self.name}: {self.checked} checked, {self.violations} violations"
        if self.witness:
            s += f" witness={self.witness}"
        return s


def certify_property1(tower: CoverTower) -> Certificate:
    """For all colors j, levels l < k, U in level k and V in level l:
    ``d(U, V) <= l`` implies ``V^l`` is inside ``U``.

    ``d(U, V) <= l`` is the same as ``U`` meeting ``V^l``, so each check is a
    pair of bitmask operations.
    """
    checked = 0
    bad = 0
    witness = None
    K = tower.height
    for j in range(tower.num_colors):
        for l in range(K + 1):
            for vi, v in enumerate(tower.family(l, j)):
                vl = neighborhood(v, l).mask
                ok_masks: set[int] = set()
                for k in range(l + 1, K + 1):
                    for ui, u in enumerate(tower.family(k, j)):
                        checked += 1
                        if u.mask in ok_masks:
                            continue
                        if u.mask & vl and vl & ~u.mask:
                            bad += 1
                            if witness is None:
                                outside = vl & ~u.mask
                                p = (outside & -outside).bit_length() - 1
                                witness = {
                                    "color": j, "l": l, "k": k, "U": ui, "V": vi,
                                    "d(U,V)": set_distance(u, v), "point_of_V^l_outside_U": p,
                                }
                        else:
                            ok_masks.add(u.mask)
    return Certificate("property1", bad == 0, checked, bad, witness)


def certify_property2(tower: CoverTower) -> Certificate:
    """Every level ``k`` has the basepoint's ``k``-ball inside one element of
    color ``k mod (n+1)``."""
    space = tower.space
    bad = 0
    witness = None
    for lvl in tower.levels:
        ball = neighborhood(space.point(tower.basepoint), lvl.k)
        j = lvl.k % tower.num_colors
        if not any(ball.issubset(e) for e in lvl.cover.colors[j]):
            bad += 1
            if witness is None:
                witness = {"k": lvl.k, "color": j}
    return Certificate("property2", bad == 0, len(tower.levels), bad, witness)


def certify_psi_defined(tower: CoverTower) -> Certificate:
    space = tower.space
    full = (1 << space.n) - 1
    bad = 0
    witness = None
    for j in range(tower.num_colors):
        union = 0
        for lvl in tower.levels:
            for e in lvl.cover.colors[j]:
                union |= e.mask
        if union != full:
            bad += 1
            if witness is None:
                missing = full & ~union
                witness = {"color": j, "point": (missing & -missing).bit_length() - 1}
    return Certificate("psi_defined", bad == 0, tower.num_colors, bad, witness)


def certify_tower(tower: CoverTower) -> list[Certificate]:
    certs = []
    level_certs = certify_levels(tower)
    failing = [i for i, c in enumerate(level_certs) if not c.passed]
    certs.append(
        Certificate(
            "level_covers",
            not failing,
            len(level_certs),
            len(failing),
            None if not failing else {"k": failing[0], **(level_certs[failing[0]].witness() or {})},
        )
    )
    certs.append(certify_property1(tower))
    certs.append(certify_property2(tower))
    certs.append(certify_psi_defined(tower))
    return certs


def nontrivial_depth(tower: CoverTower) -> int:
    """Number of leading levels in which some element is a proper subset."""
    for lvl in tower.levels:
        if all(e.is_full for _, _, e in lvl.cover.elements()):
            return lvl.k
    return len(tower.levels)


def _norm(q) -> Number:
    q = Fraction(q)
    return q.numerator if q.denominator == 1 else q
