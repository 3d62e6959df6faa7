"""Control functions and the growth sequences built on top of them."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import NonMonotoneControlFunction
from .metric import Number, as_rational


def _norm(q) -> Number:
    q = Fraction(q)
    return q.numerator if q.denominator == 1 else q


@dataclass(frozen=True)
class LinearControl:
    """``f'(r) = a*r + b``."""

    a: Number = 2
    b: Number = 0

    tag = "linear"

    def __call__(self, r: Number) -> Number:
        return _norm(Fraction(self.a) * Fraction(r) + Fraction(self.b))


@dataclass(frozen=True)
class StepControl:
    """Monotone step table: the value at the smallest key ``>= r``, else ``tail``.

    Reading the table upward is what makes a measured table a valid bound
    for generators whose diameters grow with the scale.
    """

    table: tuple[tuple[Number, Number], ...]
    tail: Number

    tag = "step"

    def __post_init__(self):
        table = tuple(sorted((as_rational(r), as_rational(v)) for r, v in self.table))
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "tail", as_rational(self.tail))
        object.__setattr__(self, "_keys", [r for r, _ in table])

    def __call__(self, r: Number) -> Number:
        i = bisect.bisect_left(self._keys, r)
        return self.table[i][1] if i < len(self.table) else self.tail


class GrowthProfile:
    """Control function ``f'`` with the derived ``f(x) = f'(3x) + 3x`` and
    ``g(0) = g0``, ``g(k) = growth_constant * f(g(k-1))``.

    Every evaluation of ``f'`` is checked against all earlier ones; a pair
    witnessing a decrease raises :class:`NonMonotoneControlFunction`.
    """

    def __init__(self, f_prime, growth_constant: Number = 100, g0: Number = 2):
        self.f_prime = f_prime
        self.growth_constant = as_rational(growth_constant)
        self.g0 = as_rational(g0)
        if self.growth_constant <= 0 or self.g0 <= 0:
            raise ValueError("growth constant and g0 must be positive")
        self._args: list[Fraction] = []
        self._vals: list[Fraction] = []
        self._g: list[Number] = [self.g0]
        self._f: dict[Fraction, Number] = {}

    def __repr__(self) -> str:
        return f"GrowthProfile({self.f_prime!r}, growth_constant={self.growth_constant}, g0={self.g0})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GrowthProfile)
            and self.f_prime == other.f_prime
            and self.growth_constant == other.growth_constant
            and self.g0 == other.g0
        )

    def eval_f_prime(self, r: Number) -> Number:
        val = self.f_prime(r)
        r = Fraction(r)
        i = bisect.bisect_left(self._args, r)
        if i < len(self._args) and self._args[i] == r:
            return val
        if i > 0 and self._vals[i - 1] > val:
            raise NonMonotoneControlFunction(
                f"f'({self._args[i - 1]}) = {self._vals[i - 1]} > f'({r}) = {val}",
                witness=(self._args[i - 1], r),
            )
        if i < len(self._args) and self._vals[i] < val:
            raise NonMonotoneControlFunction(
                f"f'({r}) = {val} > f'({self._args[i]}) = {self._vals[i]}",
                witness=(r, self._args[i]),
            )
        self._args.insert(i, r)
        self._vals.insert(i, Fraction(val))
        return val

    def f(self, x: Number) -> Number:
        if x <= 0:
            raise ValueError("f is defined on positive arguments")
        x = Fraction(x)
        val = self._f.get(x)
        if val is None:
            val = self._f[x] = _norm(Fraction(self.eval_f_prime(3 * x)) + 3 * x)
        return val

    def g(self, k: int) -> Number:
        if k < 0 or int(k) != k:
            raise ValueError("g is defined on non-negative integers")
        while len(self._g) <= k:
            self._g.append(_norm(self.growth_constant * Fraction(self.f(self._g[-1]))))
        return self._g[k]


def eval_f(profile: GrowthProfile, x: Number) -> Number:
    return profile.f(x)


def eval_g(profile: GrowthProfile, k: int) -> Number:
    return profile.g(k)


def step_profile_from_table(
    table: Sequence[tuple[Number, Number]], tail: Number, growth_constant: Number = 100, g0: Number = 2
) -> GrowthProfile:
    return GrowthProfile(StepControl(tuple(table), tail), growth_constant, g0)
