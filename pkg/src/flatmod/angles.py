"""Exact angle data: cone angles as rational multiples of 2*pi, group orders and leaf labels."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Sequence

from .errors import InputError, PreconditionError


@dataclass(frozen=True, order=True)
class RationalAngle:
    """The angle 2*pi*num/den, always stored reduced with den > 0."""

    num: int
    den: int = 1

    def __post_init__(self):
        if self.den == 0:
            raise InputError("angle denominator must be nonzero")
        g = gcd(self.num, self.den) or 1
        sgn = -1 if self.den < 0 else 1
        object.__setattr__(self, "num", sgn * self.num // g)
        object.__setattr__(self, "den", sgn * self.den // g)

    @classmethod
    def of(cls, x) -> "RationalAngle":
        """Coerce a RationalAngle, Fraction, int, (num, den) pair or 'a/b' string."""
        if isinstance(x, RationalAngle):
            return x
        if isinstance(x, (tuple, list)):
            return cls(int(x[0]), int(x[1]))
        if isinstance(x, str):
            fr = Fraction(x.strip())
            return cls(fr.numerator, fr.denominator)
        fr = Fraction(x)
        return cls(fr.numerator, fr.denominator)

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.num, self.den)

    @property
    def radians(self) -> float:
        return 2.0 * 3.141592653589793 * self.num / self.den

    def is_multiple_of_2pi(self) -> bool:
        return self.den == 1

    def __add__(self, other):
        return RationalAngle.of(self.fraction + RationalAngle.of(other).fraction)

    def __sub__(self, other):
        return RationalAngle.of(self.fraction - RationalAngle.of(other).fraction)

    def __neg__(self):
        return RationalAngle(-self.num, self.den)

    def __str__(self):
        return f"{self.num}/{self.den}"

    def to_json(self):
        return [self.num, self.den]


def curvature(theta: RationalAngle) -> Fraction:
    """2*pi - theta, in units of 2*pi."""
    return 1 - theta.fraction


@dataclass(frozen=True)
class AngleDatum:
    """Genus plus cone angles. For genus one the big angle is moved to the front.

    ``permutation[i]`` is the index in the caller's list of ``angles[i]``.
    """

    genus: int
    angles: tuple
    permutation: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.genus < 0:
            raise InputError("genus must be nonnegative")
        angs = tuple(RationalAngle.of(a) for a in self.angles)
        if not angs and self.genus != 1:
            raise InputError("only the regular torus may have no cone angles")
        for a in angs:
            if a.num <= 0:
                raise InputError(f"cone angle {a} is not positive")
        object.__setattr__(self, "angles", angs)
        if not self.permutation:
            object.__setattr__(self, "permutation", tuple(range(len(angs))))

    @classmethod
    def create(cls, genus: int, angles: Iterable) -> "AngleDatum":
        """Build a datum, sorting angles descending with ties broken by original index."""
        angs = [RationalAngle.of(a) for a in angles]
        order = sorted(range(len(angs)), key=lambda i: (-angs[i].fraction, i))
        return cls(genus, tuple(angs[i] for i in order), tuple(order))

    @property
    def n(self) -> int:
        return len(self.angles)

    def satisfies_hyp(self) -> bool:
        return all(not a.is_multiple_of_2pi() for a in self.angles)

    def is_main_regime(self) -> bool:
        fr = [a.fraction for a in self.angles]
        if self.genus == 0:
            return all(0 < f < 1 for f in fr)
        if self.genus == 1:
            return 1 < fr[0] < 2 and all(0 < f < 1 for f in fr[1:])
        return False

    def to_json(self):
        return {"genus": self.genus, "angles": [a.to_json() for a in self.angles]}


def gauss_bonnet_residual(datum: AngleDatum) -> RationalAngle:
    """sum(2pi - theta_i) - 2pi(2 - 2g), as an exact multiple of 2pi."""
    total = sum((curvature(a) for a in datum.angles), Fraction(0))
    return RationalAngle.of(total - (2 - 2 * datum.genus))


def is_admissible(datum: AngleDatum) -> bool:
    return gauss_bonnet_residual(datum).num == 0 and datum.satisfies_hyp()


def minimal_group_order(datum: AngleDatum | Sequence) -> int:
    """Order m of the group generated by the exp(i theta_k).

    The subgroup of the circle generated by exp(2 pi i a/b) with gcd(a, b) = 1
    is cyclic of order b, so the generated group has order lcm of the reduced
    denominators.
    """
    angs = datum.angles if isinstance(datum, AngleDatum) else [RationalAngle.of(a) for a in datum]
    for a in angs:
        if a.is_multiple_of_2pi():
            raise PreconditionError(f"angle {a} is a multiple of 2pi")
    m = 1
    for a in angs:
        m = lcm(m, a.den)
    return m


@dataclass(frozen=True)
class LeafLabel:
    datum: AngleDatum
    M: int
    m: int
    p: int | None
    q: int

    def to_json(self):
        return {"angles": [a.to_json() for a in self.datum.angles], "M": self.M,
                "m": self.m, "p": self.p, "q": self.q}


def leaf_label(datum: AngleDatum, M: int) -> LeafLabel:
    if not isinstance(M, int) or M <= 0:
        raise InputError("M must be a positive integer")
    if gauss_bonnet_residual(datum).num != 0:
        raise PreconditionError("angle datum fails Gauss-Bonnet")
    m = minimal_group_order(datum)
    p = None
    if datum.genus == 1:
        if not datum.is_main_regime():
            raise PreconditionError("genus one datum needs theta_1 in (2pi, 4pi) and the rest in (0, 2pi)")
        # theta_1 = 2pi (1 + p/m)
        f = datum.angles[0].fraction - 1
        p = f.numerator * (m // f.denominator)
    return LeafLabel(datum, M, m, p, m * M)


def label_from_fractions(fracs: Sequence, M: int = 1, genus: int | None = None) -> LeafLabel:
    """Convenience: angles given as fractions of 2pi, genus inferred from Gauss-Bonnet if omitted."""
    angs = [RationalAngle.of(a) for a in fracs]
    if genus is None:
        total = sum((curvature(a) for a in angs), Fraction(0))
        g2 = 2 - total
        if g2.denominator != 1 or g2.numerator % 2:
            raise PreconditionError("angles do not satisfy Gauss-Bonnet for any genus")
        genus = int(g2) // 2
    return leaf_label(AngleDatum.create(genus, angs), M)


@dataclass(frozen=True)
class ReductionWitness:
    parent: LeafLabel
    child: LeafLabel
    kind: str

    def __post_init__(self):
        if self.parent.q % self.child.q:
            raise PreconditionError("child holonomy order must divide the parent's")
