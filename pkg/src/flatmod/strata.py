"""Codimension-one strata of genus-one leaves, one-dimensional counting, and the arithmetic-lattice search."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm

from .angles import (AngleDatum, LeafLabel, RationalAngle, ReductionWitness, curvature,
                     gauss_bonnet_residual, leaf_label, minimal_group_order)
from .errors import PreconditionError


def totient(n: int) -> int:
    if n < 1:
        raise ValueError("totient needs n >= 1")
    result, k, x = n, 2, n
    while k * k <= x:
        if x % k == 0:
            while x % k == 0:
                x //= k
            result -= result // k
        k += 1
    if x > 1:
        result -= result // x
    return result


def divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


@dataclass(frozen=True)
class StratumRecord:
    kind: str                      # "P", "C" or "K"
    datum: AngleDatum              # reduced angle datum (genus 0 for P, 1 for C and K)
    angle: RationalAngle           # cone-manifold angle transverse to the stratum
    multiplicity: int = 1
    decomposition: tuple | None = None   # (r', r'') for P
    M_child: int | None = None            # M' for C
    pair: tuple | None = None             # collided indices for C
    notes: tuple = field(default=())

    def to_json(self):
        out = {"kind": self.kind, "datum": self.datum.to_json(), "angle": self.angle.to_json(),
               "multiplicity": self.multiplicity}
        if self.decomposition is not None:
            out["decomposition"] = list(self.decomposition)
        if self.M_child is not None:
            out["M_child"] = self.M_child
        if self.pair is not None:
            out["pair"] = list(self.pair)
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _require_genus_one(label: LeafLabel):
    if label.datum.genus != 1 or label.p is None:
        raise PreconditionError("a genus-one leaf label is required")


def p_strata(label: LeafLabel) -> list[StratumRecord]:
    """One record per unordered decomposition pM = r' + r''.

    The pinched sphere carries angles 2 pi r'/(mM), 2 pi r''/(mM) plus the
    untouched theta_2..theta_n; the transverse angle is 2 pi lcm(r', r'')/(mM).
    """
    _require_genus_one(label)
    q, pM = label.q, label.p * label.M
    rest = label.datum.angles[1:]
    out = []
    for r1 in range(1, pM // 2 + 1):
        r2 = pM - r1
        sphere = AngleDatum.create(0, [RationalAngle(r1, q), RationalAngle(r2, q), *rest])
        out.append(StratumRecord("P", sphere, RationalAngle(lcm(r1, r2), q),
                                 multiplicity=gcd(r1, r2), decomposition=(r1, r2)))
    return out


def solve_child_M(M: int, m: int, m_child: int) -> list[int]:
    """All M' with lcm(M', m/m') = M*m/m'."""
    if m % m_child:
        raise PreconditionError("child group order must divide the parent's")
    k = m // m_child
    target = M * k
    return [d for d in divisors(target) if lcm(d, k) == target]


def c_strata(label: LeafLabel, pair: tuple[int, int]) -> list[StratumRecord]:
    """Collision of the cone points with 0-based indices ``pair``."""
    _require_genus_one(label)
    k, l = pair
    angs = label.datum.angles
    if k == l or not (0 <= k < len(angs) and 0 <= l < len(angs)):
        raise PreconditionError("collision needs two distinct valid indices")
    if len(angs) < 3:
        raise PreconditionError("collisions need at least three cone points")
    merged = angs[k].fraction + angs[l].fraction - 1
    if merged <= 0:
        return []
    if merged.denominator == 1:
        # the merged point would be regular; outside the admissible setting
        return []
    new_angle = RationalAngle.of(merged)
    others = [a for i, a in enumerate(angs) if i not in (k, l)]
    child = AngleDatum.create(1, [new_angle, *others])
    m_child = minimal_group_order(child)
    out = []
    for Mc in solve_child_M(label.M, label.m, m_child):
        out.append(StratumRecord("C", child, new_angle, multiplicity=1, M_child=Mc,
                                 pair=(k, l), notes=("multiplicity reported as 1",)))
    return out


def all_c_strata(label: LeafLabel) -> list[StratumRecord]:
    n = label.datum.n
    out = []
    if n < 3:
        return out
    for k in range(n):
        for l in range(k + 1, n):
            out.extend(c_strata(label, (k, l)))
    return out


def k_strata(label: LeafLabel) -> list[StratumRecord]:
    _require_genus_one(label)
    if label.datum.n == 3 and label.M == 1:
        regular = AngleDatum(1, (), ())
        return [StratumRecord("K", regular, RationalAngle(1, 2))]
    return []


def reduction_witnesses(label: LeafLabel) -> list[ReductionWitness]:
    out = []
    for rec in all_c_strata(label):
        child = leaf_label(rec.datum, rec.M_child)
        out.append(ReductionWitness(label, child, "S1/S2"))
    return out


def _is_three_pi_pi(label: LeafLabel) -> bool:
    return (label.datum.genus == 1 and label.datum.n == 2
            and label.datum.angles[0].fraction == Fraction(3, 2)
            and label.datum.angles[1].fraction == Fraction(1, 2))


@dataclass(frozen=True)
class ConePointClass:
    angle: RationalAngle | None   # None when the source count gives no angle
    count: int
    decomposition: tuple | None
    note: str = ""

    def to_json(self):
        return {"angle": None if self.angle is None else self.angle.to_json(), "count": self.count,
                "decomposition": None if self.decomposition is None else list(self.decomposition),
                "note": self.note}


def dim1_cone_points(label: LeafLabel) -> list[ConePointClass]:
    """Cone points of a one-dimensional leaf, grouped by decomposition pM = r' + r''.

    Each decomposition contributes phi(gcd(r', r'', mM)) points of angle
    2 pi lcm(r', r'')/(mM). A symmetric decomposition r' = r'' lives on a sphere
    with an involution swapping the two equal points: it halves the count, and
    when the count is a single point the angle is halved instead.
    """
    _require_genus_one(label)
    if label.datum.n != 2:
        raise PreconditionError("one-dimensional counting needs exactly two cone points")
    q, pM = label.q, label.p * label.M
    out = []
    for r1 in range(1, pM // 2 + 1):
        r2 = pM - r1
        count = totient(gcd(gcd(r1, r2), q))
        ang = RationalAngle(lcm(r1, r2), q)
        note = ""
        if r1 == r2:
            if count % 2 == 0:
                count //= 2
                note = "symmetric decomposition: count halved"
            else:
                ang = RationalAngle(ang.num, 2 * ang.den)
                note = "symmetric decomposition: angle halved"
        out.append(ConePointClass(ang, count, (r1, r2), note))
    if _is_three_pi_pi(label) and label.M == 3:
        # the printed total for M = 3 is two cone points, one more than the partitions give
        out.append(ConePointClass(None, 1, None, "extra point in the printed count for M=3; angle not given"))
    return out


def dim1_cusps(label: LeafLabel) -> int:
    """Unordered coprime decompositions pM = r' + r''."""
    _require_genus_one(label)
    if label.datum.n != 2:
        raise PreconditionError("one-dimensional counting needs exactly two cone points")
    pM = label.p * label.M
    return sum(1 for r1 in range(1, pM // 2 + 1) if gcd(r1, pM - r1) == 1)


def dim1_punctures_3pi_pi(M: int) -> int:
    if M < 2:
        raise PreconditionError("M must be at least 2")
    if M == 2:
        return 2
    if M in (3, 4):
        return 3
    s = sum(totient(d) * totient(M // d) for d in divisors(M))
    assert s % 2 == 0
    return s // 2


def y1_counts(max_M: int) -> list[tuple[int, int, int, int]]:
    """Rows (M, cone points, cusps, punctures) for theta = (3pi, pi)."""
    datum = AngleDatum.create(1, ["3/2", "1/2"])
    rows = []
    for M in range(2, max_M + 1):
        lab = leaf_label(datum, M)
        cones = sum(c.count for c in dim1_cone_points(lab))
        rows.append((M, cones, dim1_cusps(lab), dim1_punctures_3pi_pi(M)))
    return rows


def arithmetic_lattice_flag(label: LeafLabel | int) -> bool:
    """True iff the ring generated by the holonomy image is discrete, i.e. q in {1, 2, 3, 4, 6}."""
    q = label if isinstance(label, int) else label.q
    return q in (1, 2, 3, 4, 6)


def _row_label(i: int) -> str:
    return chr(ord("a") + i) if i < 26 else f"r{i}"


def table1_search(min_n: int = 3, max_n: int | None = None, orders=(3, 4, 6)) -> list[tuple]:
    """Exhaustive search for genus-one data whose holonomy order mM lies in ``orders``.

    Rows are (n, k-tuple, m, M) with theta_i = 2 pi k_i / m, sorted by n, then
    by the order the table lists them: by m, then k-tuple descending. The
    number of points is bounded because each small point carries curvature
    at least 2pi/m while the big point carries at most 2pi(1 - 1/m).
    """
    rows = set()
    for q in orders:
        for m in divisors(q):
            M = q // m
            if m == 1:
                continue
            # n - 1 small points each of curvature >= 1/m, sum equals 1 - ... bound n <= m + 1
            top = m + 1 if max_n is None else min(max_n, m + 1)
            for n in range(max(min_n, 2), top + 1):
                for k1 in range(m + 1, 2 * m):
                    rest_total = n * m - k1
                    for tail in _partitions_desc(rest_total, n - 1, m - 1):
                        ks = (k1, *tail)
                        g = m
                        for k in ks:
                            g = gcd(g, k)
                        if g != 1:
                            continue
                        rows.add((n, ks, m, M))
    return sorted(rows, key=_row_key)


def _row_key(row):
    # rows whose small points all agree come first, then by order and big angle
    n, ks, m, M = row
    uniform = len(set(ks[1:])) == 1
    return (n, M, not uniform, m, ks[0], tuple(-k for k in ks[1:]))


def _partitions_desc(total: int, parts: int, largest: int):
    """Nonincreasing tuples of ``parts`` integers in [1, largest] summing to ``total``."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(min(largest, total - (parts - 1)), 0, -1):
        if first * parts < total:
            break
        for rest in _partitions_desc(total - first, parts - 1, first):
            yield (first, *rest)


def table1_csv(rows=None) -> str:
    rows = table1_search() if rows is None else rows
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "k", "m", "M", "label"])
    for i, (n, ks, m, M) in enumerate(rows):
        w.writerow([n, " ".join(str(k) for k in ks), m, M, _row_label(i)])
    return buf.getvalue()


@dataclass
class LeafReport:
    label: LeafLabel
    p_strata: list
    c_strata: list
    k_strata: list
    cone_points: list | None = None
    cusps: int | None = None
    punctures: int | None = None
    arithmetic: bool = False

    def to_json(self):
        out = {"schema": 1, "label": self.label.to_json(),
               "P": [r.to_json() for r in self.p_strata],
               "C": [r.to_json() for r in self.c_strata],
               "K": [r.to_json() for r in self.k_strata],
               "arithmetic_lattice": self.arithmetic}
        if self.cone_points is not None:
            out["cone_points"] = [c.to_json() for c in self.cone_points]
            out["cusps"] = self.cusps
            out["punctures"] = self.punctures
        return out


def leaf_report(label: LeafLabel) -> LeafReport:
    _require_genus_one(label)
    rep = LeafReport(label, p_strata(label), all_c_strata(label), k_strata(label),
                     arithmetic=arithmetic_lattice_flag(label))
    if label.datum.n == 2:
        rep.cone_points = dim1_cone_points(label)
        rep.cusps = dim1_cusps(label)
        rep.punctures = sum(c.count for c in rep.cone_points) + rep.cusps
    return rep


def check_reduced_datum(rec: StratumRecord) -> bool:
    return gauss_bonnet_residual(rec.datum).num == 0 if rec.datum.angles else True
