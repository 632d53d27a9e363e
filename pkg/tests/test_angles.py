from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from flatmod.angles import (AngleDatum, RationalAngle, ReductionWitness, gauss_bonnet_residual,
                            is_admissible, label_from_fractions, leaf_label, minimal_group_order)
from flatmod.errors import InputError, PreconditionError


def datum(g, *fr):
    return AngleDatum.create(g, fr)


def test_rational_angle_is_reduced():
    a = RationalAngle(6, -4)
    assert (a.num, a.den) == (-3, 2)
    assert RationalAngle.of("3/2") == RationalAngle(3, 2)
    assert RationalAngle.of((6, 4)) == RationalAngle(3, 2)
    with pytest.raises(InputError):
        RationalAngle(1, 0)


@pytest.mark.parametrize("g, angles", [
    (1, ["3/2", "1/2"]),          # (3pi, pi)
    (0, ["1/2"] * 4),             # four right angles
    (1, ["5/4", "3/4"]),          # (5pi/2, 3pi/2)
])
def test_gauss_bonnet_zero(g, angles):
    assert gauss_bonnet_residual(datum(g, *angles)).num == 0


def test_gauss_bonnet_nonzero():
    r = gauss_bonnet_residual(datum(0, "1/2", "1/2", "1/2"))
    assert r.fraction == Fraction(-1, 2)
    assert not is_admissible(datum(0, "1/2", "1/2", "1/2"))


@pytest.mark.parametrize("angles, m", [
    (["3/2", "1/2"], 2),
    (["5/3", "2/3", "2/3"], 3),
    (["7/4", "3/4", "3/4", "3/4"], 4),
])
def test_minimal_group_order(angles, m):
    assert minimal_group_order(datum(1, *angles)) == m


def test_multiple_of_two_pi_rejected():
    with pytest.raises((InputError, PreconditionError)):
        minimal_group_order([Fraction(1), Fraction(1, 2)])


def test_leaf_labels():
    lab = leaf_label(datum(1, "3/2", "1/2"), 5)
    assert (lab.m, lab.p, lab.q) == (2, 1, 10)
    lab = leaf_label(datum(1, "5/3", "2/3", "2/3"), 1)
    assert (lab.m, lab.p, lab.q) == (3, 2, 3)
    assert leaf_label(datum(1, "3/2", "1/2"), 1).q == 2
    with pytest.raises((InputError, PreconditionError)):
        leaf_label(datum(1, "3/2", "1/2"), 0)


def test_big_angle_sorted_first():
    d = datum(1, "1/2", "3/2")
    assert d.angles[0] == RationalAngle(3, 2)


def test_witness_requires_divisibility():
    parent = label_from_fractions(["3/2", "1/2"], 2)
    child = label_from_fractions(["1/4", "1/4", "1/2"], 1)
    ReductionWitness(parent, child, "S3")
    small = label_from_fractions(["3/2", "1/2"], 1)
    with pytest.raises((InputError, PreconditionError)):
        ReductionWitness(small, child, "S3")


@st.composite
def genus_one_data(draw):
    den = draw(st.integers(2, 12))
    n = draw(st.integers(2, 5))
    # curvature of the big point is -(sum of the small ones)
    small = draw(st.lists(st.integers(1, den - 1), min_size=n - 1, max_size=n - 1))
    big = den + sum(den - k for k in small)
    if not den < big < 2 * den:
        return None
    return [Fraction(big, den)] + [Fraction(k, den) for k in small]


@given(genus_one_data(), st.permutations(range(5)))
def test_group_order_permutation_invariant(fr, perm):
    if fr is None or any(f.denominator == 1 for f in fr):
        return
    d = AngleDatum.create(1, fr)
    assert gauss_bonnet_residual(d).num == 0
    shuffled = [fr[i] for i in perm if i < len(fr)]
    assert minimal_group_order(shuffled) == minimal_group_order(fr)
    for M in (1, 2, 7):
        assert leaf_label(d, M).q == minimal_group_order(d) * M
