"""Local cut-and-glue surgeries that create cone points, and their reverses.

S1 and S2 blow one cone point up into two (bigon and kite removal). S3
removes a cone disk around each of two points of a sphere and glues the two
resulting geodesic loops (genus goes up by one). S4 removes a kite from a
regular torus. S5 slits a saddle connection and glues in a flat cylinder.

Surgeries never touch their input; every result is a fresh FlatSurface.
Positions on a cone are measured from the anchor of the target point: the
lexicographically first half-edge leaving it in the Delaunay triangulation.
Angles accept exact values (RationalAngle, Fraction, (num, den) or 'a/b', all
read as fractions of 2*pi) or floats in radians.
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm

import numpy as np

from .angles import RationalAngle, ReductionWitness, label_from_fractions, minimal_group_order
from .errors import DegeneracyError, FlatmodError, InputError, PreconditionError
from .geometry import distance_matrix, saddle_connections
from .mesh import Mesh, TWO_PI
from .surface import FlatSurface, develop, holonomy_order, lattice_torus

log = logging.getLogger(__name__)

KINDS = ("S1", "S2", "S3", "S4", "S5")
RAT_TOL = 1e-9


# ---------------------------------------------------------------------------- specs and results
@dataclass
class SurgerySpec:
    kind: str
    target: tuple = ()
    split: tuple = ()
    z0: complex = 0j
    branch: int = 0
    tau: complex | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown surgery kind {self.kind!r}")
        t = self.target
        self.target = (int(t),) if isinstance(t, (int, np.integer)) else tuple(int(x) for x in t)
        self.split = tuple(RationalAngle.of(a) for a in self.split)
        self.z0 = complex(self.z0)
        self.branch = int(self.branch)
        need = {"S1": 1, "S2": 1, "S3": 2, "S4": 3, "S5": 0}[self.kind]
        if len(self.split) != need:
            raise InputError(f"{self.kind} takes {need} split angle(s), got {len(self.split)}")
        ntar = {"S1": 1, "S2": 1, "S3": 2, "S4": 0, "S5": 2}[self.kind]
        if len(self.target) < ntar:
            raise InputError(f"{self.kind} needs {ntar} target point(s)")
        if self.kind == "S4":
            s = sum((1 - a.fraction for a in self.split), Fraction(0))
            if s != 0:
                raise PreconditionError("kite angles must have total curvature zero")

    @classmethod
    def from_json(cls, data: dict) -> "SurgerySpec":
        try:
            z = data.get("z0", [0, 0])
            tau = data.get("tau")
            return cls(kind=data["kind"], target=data.get("target", ()),
                       split=[tuple(a) if isinstance(a, list) else a for a in data.get("split", [])],
                       z0=complex(z[0], z[1]), branch=data.get("branch", 0),
                       tau=None if tau is None else complex(tau[0], tau[1]))
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            if isinstance(exc, FlatmodError):
                raise
            raise InputError(f"malformed surgery spec: {exc}") from exc

    def to_json(self) -> dict:
        out = {"kind": self.kind, "target": list(self.target) if len(self.target) != 1 else self.target[0],
               "split": [a.to_json() for a in self.split], "z0": [self.z0.real, self.z0.imag],
               "branch": self.branch}
        if self.tau is not None:
            out["tau"] = [self.tau.real, self.tau.imag]
        return out


@dataclass
class SurgeryResult:
    kind: str
    surface: FlatSurface
    width: float | None                 # at area one
    defect: float                       # area(before) - area(after); negative when area grows
    mu: float | None                    # defect / |z0|^2
    new_points: dict = field(default_factory=dict)
    removed_area: float = 0.0           # summed area of the deleted triangles
    witness: ReductionWitness | None = None
    data: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        w = self.witness
        return {"kind": self.kind, "width": self.width, "defect": self.defect, "mu": self.mu,
                "new_points": self.new_points, "removed_area": self.removed_area,
                "area": self.surface.area(),
                "cone_angles": {str(k): v for k, v in self.surface.cone_angles().items()},
                "witness": None if w is None else {"parent": w.parent.to_json(), "child": w.child.to_json()},
                "data": {k: ([v.real, v.imag] if isinstance(v, complex) else v) for k, v in self.data.items()}}


# ---------------------------------------------------------------------------- helpers
def _rad(x) -> float:
    if isinstance(x, (float, np.floating)):
        return float(x)
    return RationalAngle.of(x).radians


def _frac(theta: float, max_den: int = 10000) -> Fraction | None:
    fr = Fraction(theta / TWO_PI).limit_denominator(max_den)
    return fr if abs(float(fr) * TWO_PI - theta) < RAT_TOL else None


def _check_point(surface, label):
    if label not in surface.vertices:
        raise InputError(f"no point with label {label}")


def _anchor(m: Mesh, label: int) -> int:
    for t in m.triangles():
        for e in range(3):
            if m.lab[t][e] == label:
                return m.eid[t][e]
    raise InputError(f"no point with label {label}")


def _delaunay_mesh(surface) -> Mesh:
    m = surface.to_mesh()
    m.delaunay_flips()
    return m


def _polar(z0, theta):
    r = abs(z0)
    if r == 0:
        raise PreconditionError("surgery parameter must be nonzero")
    return r, cmath.phase(z0) % theta


def _check_embedded(surface, label, R):
    """A disk of radius R around the point must be an embedded cone."""
    for c in saddle_connections(surface, 2 * R * (1 + 1e-9), start=label):
        if c.end != label and c.length <= R:
            raise PreconditionError(f"parameter too large: point {c.end} lies within {R:.6g}")
        if c.end == label and c.length <= 2 * R:
            raise PreconditionError("parameter too large: the cone neighbourhood is not embedded")


def _removed_area(m, region):
    return sum(0.5 * ((m.P[t][1] - m.P[t][0]).conjugate() * (m.P[t][2] - m.P[t][0])).imag for t in region)


def _finalize(m: Mesh, keep: dict):
    """Freeze the mesh, keeping the named points; returns (surface, {name: label})."""
    corner = {k: _corner_with(m, v) for k, v in keep.items()}
    m.marked = set()
    m.relabel_classes()
    keep = {k: m.lab[t][i] for k, (t, i) in corner.items()}
    S, order = FlatSurface.from_mesh_mapped(m, set(keep.values()))
    return S, {k: order[v] for k, v in keep.items() if v in order}


def _leaf(surface: FlatSurface):
    angs = []
    for a in surface.singular_points().values():
        fr = _frac(a)
        if fr is None:
            return None
        angs.append(fr)
    if not angs:
        return None
    q = holonomy_order(surface)
    m = minimal_group_order(angs) if all(f.denominator > 1 for f in angs) else None
    if q is None or m is None or q % m:
        return None
    try:
        return label_from_fractions(angs, q // m, genus=surface.genus)
    except (FlatmodError, IndexError):
        return None


def _witness(before, after, kind):
    p, c = _leaf(after), _leaf(before)
    if p is None or c is None:
        return None
    try:
        return ReductionWitness(p, c, kind)
    except FlatmodError:
        return None


def _distance(surface, a, b, bound):
    """Geodesic distance between two labelled points, or bound when they are farther apart."""
    D, verts = distance_matrix(surface, [], bound * (1 + 1e-9))
    return min(float(D[verts.index(a), verts.index(b)]), bound)


def _shortest_connection(surface, a, b=None, accept=None):
    """Shortest saddle connection from a (to b, or passing ``accept``), searching with doubling radii."""
    lens = surface.edge_lengths()
    radius = float(np.min(lens))
    cap = 4 * surface.n_triangles * float(np.max(lens)) + math.sqrt(surface.area())
    while radius <= 2 * cap:
        for c in saddle_connections(surface, radius, start=a):
            if b is not None and c.end != b:
                continue
            if accept is not None and not accept(c):
                continue
            return c
        radius *= 2
    raise PreconditionError(f"no suitable saddle connection from point {a}")


def _sectors(surface, c):
    """(left, right) angles at the base point of a closed saddle connection."""
    m = surface._mesh
    ref = surface.corner_of(c.start)
    total = m.vertex_angle(ref)
    a_out = m.angle_between(ref, c.start_corner) + c.start_local
    a_back = m.angle_between(ref, c.end_corner) + c.end_local
    left = (a_back - a_out) % total
    return left, total - left


def _insert_connection(m, c, start_frame=True):
    """Insert a saddle connection of the surface m was made from (eids are 3t + e)."""
    t, i = c.start_corner
    ch, end_ref, back = m.insert_segment(3 * t + i, c.start_local, c.length)
    return ch, end_ref, back


def _area1_width(w, area):
    return w / math.sqrt(area)


# ---------------------------------------------------------------------------- S1
def s1(surface: FlatSurface, target: int, theta1p, z0) -> SurgeryResult:
    """Split a point of angle theta1 < 2pi into points of angles theta1' and theta1''."""
    _check_point(surface, target)
    th1 = surface.cone_angle(target)
    a1 = _rad(theta1p)
    a2 = th1 + TWO_PI - a1
    if not th1 < TWO_PI - 1e-9:
        raise PreconditionError("S1 needs a point of angle less than 2pi")
    if not (0 < a1 < TWO_PI and 0 < a2 < TWO_PI):
        raise PreconditionError("S1 split angles must both lie in (0, 2pi)")
    r, phi = _polar(z0, th1)
    d = r * math.sin(a1 / 2) / math.sin(a2 / 2)
    ell = r * math.sin(th1 / 2) / math.sin(a2 / 2)
    _check_embedded(surface, target, max(r, d))
    m = _delaunay_mesh(surface)
    ref = _anchor(m, target)
    _, xref, back = m.insert_segment(ref, phi, r)
    alpha, beta = TWO_PI - a1, TWO_PI - a2
    chains, _ = m.insert_polyline(xref, back - alpha / 2, [(ell, 0.0), (ell, beta)])
    C1, C2 = m.expand(chains[0]), m.expand(chains[1])
    x = m.start_label(C1[0])
    if m.end_label(C2[-1]) != x:
        raise DegeneracyError("bigon did not close")
    region = m.region_left_of(C1 + C2)
    o1, o2 = m.outer_side(C1), m.outer_side(C2)
    y = m.start_label(o1[0])
    removed = _removed_area(m, region)
    m.delete(region)
    m.glue_chains(o1, o2)
    S, pts = _finalize(m, {"p1'": x, "p1''": y})
    defect = r * d * math.sin(th1 / 2)
    width = _distance(S, pts["p1'"], pts["p1''"], ell)
    return SurgeryResult("S1", S, _area1_width(width, S.area()), defect, defect / r ** 2, pts, removed,
                         _witness(surface, S, "S1"),
                         {"r": r, "phi": phi, "d": d, "seam": ell, "theta1": th1})


def reverse_s1(surface: FlatSurface, p1: int, p2: int, connection=None) -> SurgeryResult:
    """Merge two points of angles theta', theta'' < 2pi joined by a saddle connection."""
    for p in (p1, p2):
        _check_point(surface, p)
    ta, tb = surface.cone_angle(p1), surface.cone_angle(p2)
    th1 = ta + tb - TWO_PI
    if not (ta < TWO_PI and tb < TWO_PI and 0 < th1):
        raise PreconditionError("reverse S1 needs two points of angle < 2pi with sum > 2pi")
    c = connection or _shortest_connection(surface, p1, p2)
    ell = c.length
    r = ell * math.sin(tb / 2) / math.sin(th1 / 2)
    d = ell * math.sin(ta / 2) / math.sin(th1 / 2)
    m = surface.to_mesh()
    ch, _, _ = _insert_connection(m, c)
    left, right = m.slit(ch)
    lx, ly = m.start_label(left[0]), m.end_label(left[-1])
    apex = m.new_label()
    yp, ym = d * cmath.exp(0.5j * th1), d * cmath.exp(-0.5j * th1)
    T1 = m.add_triangle([0, r, yp], [apex, lx, ly])
    T2 = m.add_triangle([0, ym, r], [apex, ly, lx])
    m.glue((T1, 0), (T2, 2))
    m.glue((T1, 2), (T2, 0))
    m.glue_chains([m.eid[T1][1]], right)
    m.glue_chains([m.eid[T2][1]], left)
    S, pts = _finalize(m, {"p1": apex})
    defect = r * d * math.sin(th1 / 2)
    return SurgeryResult("S1-reverse", S, None, -defect, None, pts, 0.0, _witness(S, surface, "S1"),
                         {"z0": r, "theta1": th1, "seam": ell})


# ---------------------------------------------------------------------------- S2
def s2(surface: FlatSurface, target: int, theta1p, z0) -> SurgeryResult:
    """Split a point of angle theta1 in (2pi, 4pi) into theta1' > 2pi and theta1'' < 2pi."""
    _check_point(surface, target)
    th1 = surface.cone_angle(target)
    a1 = _rad(theta1p)
    a2 = th1 + TWO_PI - a1
    if not TWO_PI + 1e-9 < th1 < 2 * TWO_PI:
        raise PreconditionError("S2 needs a point of angle in (2pi, 4pi)")
    if not (a1 > TWO_PI and 0 < a2 < TWO_PI):
        raise PreconditionError("S2 needs theta1' > 2pi and theta1'' in (0, 2pi)")
    eta = th1 - TWO_PI
    r, phi = _polar(z0, th1)
    sp = -math.sin(a1 / 2)
    l = r * math.sin(eta / 2) / sp
    L = r * math.sin(a2 / 2) / sp
    _check_embedded(surface, target, max(r, L))
    m = _delaunay_mesh(surface)
    ref = _anchor(m, target)
    legs = [(L, 0.0), (l, TWO_PI - a1 / 2), (l, TWO_PI - a2), (L, TWO_PI - a1 / 2)]
    chains, _ = m.insert_polyline(ref, phi - eta / 2, legs)
    chs = [m.expand(c) for c in chains]
    if m.end_label(chs[3][-1]) != target:
        raise DegeneracyError("kite did not close")
    region = m.region_left_of(sum(chs, []))
    o = [m.outer_side(c) for c in chs]
    q = m.start_label(o[1][0])
    ab = m.start_label(o[2][0])
    removed = _removed_area(m, region)
    m.delete(region)
    m.glue_chains(o[0], o[3])
    m.glue_chains(o[2], o[1])
    S, pts = _finalize(m, {"p1'": ab, "p1''": q})
    defect = r * L * math.sin(eta / 2)
    width = _distance(S, pts["p1'"], pts["p1''"], l)
    return SurgeryResult("S2", S, _area1_width(width, S.area()), defect, defect / r ** 2, pts, removed,
                         _witness(surface, S, "S2"),
                         {"r": r, "phi": phi, "l": l, "L": L, "theta1": th1})


def s2_extension_length(theta_p: float, theta_pp: float, l: float) -> float:
    """Length of the extension bisecting theta' in the reverse of S2."""
    return math.sin(theta_pp / 2) / math.sin((theta_p + theta_pp) / 2) * l


def reverse_s2(surface: FlatSurface, q: int, p: int, connection=None, explain=False):
    """Merge q (angle < 2pi) into p (angle in (2pi, 4pi)) through a saddle connection q -> p.

    Returns None when the bisecting extension at p meets a point or the kite
    cannot be glued in; with ``explain`` returns (result or None, reason).
    """
    def out(res, why):
        return (res, why) if explain else res

    for x in (p, q):
        _check_point(surface, x)
    tp, tq = surface.cone_angle(p), surface.cone_angle(q)
    th1 = tp + tq - TWO_PI
    if not (tq < TWO_PI and TWO_PI < tp and TWO_PI < th1 < 2 * TWO_PI):
        raise PreconditionError("reverse S2 needs angles theta' > 2pi, theta'' < 2pi, sum in (4pi, 6pi)")
    c = connection or _shortest_connection(surface, q, p)
    l = c.length
    eta = th1 - TWO_PI
    L = s2_extension_length(tp, tq, l)
    r = L * -math.sin(tp / 2) / math.sin(tq / 2)
    m = surface.to_mesh()
    chC, end_ref, back = _insert_connection(m, c)
    nC = len(m.expand(chC))
    try:
        chE, _, _ = m.insert_segment(end_ref, back + tp / 2, L)
    except PreconditionError:
        return out(None, "extension meets a cone point")
    if len(m.expand(chC)) != nC:
        return out(None, "kite blocked: extension crosses the connection")
    try:
        Cl, Cr = m.slit(chC)
        El, Er = m.slit(chE)
        apex = m.start_label(Er[0])
        lq = m.start_label(Cl[0])
        lp = m.end_label(Cl[-1])
        b = L * cmath.exp(-0.5j * eta)
        a = L * cmath.exp(0.5j * eta)
        T1 = m.add_triangle([0, b, r], [apex, lp, lq])
        T2 = m.add_triangle([0, r, a], [apex, lq, lp])
        m.glue((T1, 2), (T2, 0))
        m.glue_chains([m.eid[T1][0]], El)
        m.glue_chains([m.eid[T1][1]], Cl)
        m.glue_chains([m.eid[T2][1]], Cr)
        m.glue_chains([m.eid[T2][2]], Er)
        S, pts = _finalize(m, {"p1": apex})
    except (PreconditionError, DegeneracyError, InputError) as exc:
        return out(None, f"kite blocked: {exc}")
    if len(S.vertices) != surface.n_points - 1:
        return out(None, "kite blocked: merged surface has the wrong number of points")
    defect = r * L * math.sin(eta / 2)
    res = SurgeryResult("S2-reverse", S, None, -defect, None, pts, 0.0, _witness(S, surface, "S2"),
                        {"z0": r, "l": l, "L": L, "theta1": th1})
    return out(res, "ok")


# ---------------------------------------------------------------------------- S3
def s3_branches(theta_a: float, theta_b: float, M: int = 1, others=()):
    """(q, r', r'', number of branches) for angles 2pi r'/q and 2pi r''/q with q = mM."""
    fa, fb = _frac(theta_a), _frac(theta_b)
    if fa is None or fb is None:
        raise PreconditionError("Devil's surgery is implemented for rational angles only")
    fo = [f for f in (_frac(x) for x in others) if f is not None]
    m = minimal_group_order([fa, fb] + fo)
    q = m * M
    ra, rb = int(fa * q), int(fb * q)
    return q, ra, rb, gcd(ra, rb)


def s3_devil(sphere: FlatSurface, i1: int, i2: int, z0, branch: int = 0, M: int = 1) -> SurgeryResult:
    """Glue the geodesic loops around two points of a sphere into a torus.

    z0 places the loop's corner around the first point; the corner around the
    second point sits at the matching radius, at the same angle offset by
    ``branch`` steps of 2pi/(mM).
    """
    for x in (i1, i2):
        _check_point(sphere, x)
    if i1 == i2:
        raise InputError("Devil's surgery needs two distinct points")
    ta, tb = sphere.cone_angle(i1), sphere.cone_angle(i2)
    if not (ta < math.pi - 1e-9 and tb < math.pi - 1e-9):
        raise PreconditionError("Devil's surgery is implemented for angles below pi")
    others = [a for L, a in sphere.cone_angles().items() if L not in (i1, i2)]
    q, ra, rb, nb = s3_branches(ta, tb, M, others)
    if not 0 <= branch < nb:
        raise InputError(f"branch must lie in [0, {nb})")
    r1, phi1 = _polar(z0, ta)
    r2 = r1 * math.sin(ta / 2) / math.sin(tb / 2)
    phi2 = (phi1 + TWO_PI * branch / q) % tb
    for x, rr in ((i1, r1), (i2, r2)):
        _check_embedded(sphere, x, rr)
    if _distance(sphere, i1, i2, 2 * (r1 + r2)) <= r1 + r2:
        raise PreconditionError("parameter too large: the two cone disks overlap")
    m = _delaunay_mesh(sphere)
    refs = [_anchor(m, i1), _anchor(m, i2)]
    loops = []
    m.frozen.add(refs[1])           # the second anchor must survive sliver repair around the first loop
    for ref, rr, ph, th in ((refs[0], r1, phi1, ta), (refs[1], r2, phi2, tb)):
        _, xref, back = m.insert_segment(ref, ph, rr)
        ch, _, _ = m.insert_segment(xref, back - (math.pi - th) / 2, 2 * rr * math.sin(th / 2))
        loops.append(ch)
        m.frozen.discard(refs[1])
    L1, L2 = m.expand(loops[0]), m.expand(loops[1])
    for ch in (L1, L2):
        if m.start_label(ch[0]) != m.end_label(ch[-1]):
            raise DegeneracyError("cone loop did not close")
    R1, R2 = m.region_left_of(L1), m.region_left_of(L2)
    if R1 & R2:
        raise PreconditionError("parameter too large: the two cone disks overlap")
    o1, o2 = m.outer_side(L1), m.outer_side(L2)
    removed = _removed_area(m, R1 | R2)
    m.delete(R1 | R2)
    m.glue_chains(o1, o2)
    S, pts = _finalize(m, {"p1": m.start_label(o1[0])})
    defect = 0.5 * (r1 ** 2 * math.sin(ta) + r2 ** 2 * math.sin(tb))
    w = 2 * r1 * math.sin(ta / 2)
    return SurgeryResult("S3", S, _area1_width(w, S.area()), defect, defect / r1 ** 2, pts, removed,
                         _witness(sphere, S, "S3"),
                         {"r1": r1, "r2": r2, "phi1": phi1, "phi2": phi2, "q": q, "branches": nb})


def _cone_patch(m, loop_len, theta, apex, lx):
    """Two triangles forming the cone of angle theta bounded by a loop; returns the boundary chain."""
    r = loop_len / (2 * math.sin(theta / 2))
    e = r * cmath.exp(1j * theta)
    mid = (r + e) / 2
    T1 = m.add_triangle([0, r, mid], [apex, lx, lx])
    T2 = m.add_triangle([0, mid, e], [apex, lx, lx])
    m.glue((T1, 0), (T2, 2))
    m.glue((T1, 2), (T2, 0))
    return [m.eid[T1][1], m.eid[T2][1]], r


def reverse_s3(torus: FlatSurface, p: int, theta_a=None, loop=None) -> SurgeryResult:
    """Cut a torus along a closed saddle connection with sectors pi + a, pi + b and cap both sides."""
    _check_point(torus, p)
    total = torus.cone_angle(p)
    want = None if theta_a is None else _rad(theta_a)

    def ok(c):
        if c.end != p:
            return False
        left, right = _sectors(torus, c)
        if left <= math.pi + 1e-9 or right <= math.pi + 1e-9:
            return False
        return want is None or min(abs(left - math.pi - want), abs(right - math.pi - want)) < 1e-7

    c = loop or _shortest_connection(torus, p, accept=ok)
    left, right = _sectors(torus, c)
    ta, tb = left - math.pi, right - math.pi
    if max(ta, tb) >= math.pi - 1e-9:
        raise PreconditionError("capping cones of angle at least pi is not implemented")
    m = torus.to_mesh()
    ch, _, _ = _insert_connection(m, c)
    lft, rgt = m.slit(ch)
    lx = m.start_label(lft[0])
    caps = {}
    for name, side, th in (("a", lft, ta), ("b", rgt, tb)):
        apex = m.new_label()
        chain, rr = _cone_patch(m, c.length, th, apex, lx)
        m.glue_chains(chain, side)
        caps[name] = (apex, rr)
    S, pts = _finalize(m, {"p1'": caps["a"][0], "p1''": caps["b"][0]})
    r1, r2 = caps["a"][1], caps["b"][1]
    defect = 0.5 * (r1 ** 2 * math.sin(ta) + r2 ** 2 * math.sin(tb))
    return SurgeryResult("S3-reverse", S, None, -defect, None, pts, 0.0, _witness(S, torus, "S3"),
                         {"z0": r1, "theta_a": ta, "theta_b": tb, "loop": c.length})


# ---------------------------------------------------------------------------- S4
def _shortest_lattice_vector(tau):
    return min(abs(a + b * tau) for a in range(-6, 7) for b in range(-6, 7) if a or b)


def _insert_point(m, z):
    """Insert a vertex at the plane point z of a lattice torus mesh (triangle 0 frame)."""
    last = None
    for t0 in m.triangles():
        try:
            t, q, _, _ = m.locate(t0, z)
            break
        except (DegeneracyError, PreconditionError) as exc:
            last = exc
    else:
        raise PreconditionError(f"cannot place a point at {z}: {last}")
    pts = m.P[t]
    sc = m.scale()
    for i in range(3):
        if abs(pts[i] - q) < 1e-9 * sc:
            raise PreconditionError("kite corner falls on an existing vertex")
    for e in range(3):
        a, b = pts[e], pts[(e + 1) % 3]
        s = ((q - a) * (b - a).conjugate()).real / abs(b - a) ** 2
        if abs(((q - a) * (b - a).conjugate()).imag) / abs(b - a) < 1e-9 * sc and 0 < s < 1:
            L, _ = m.split_edge(t, e, s)
            m.legalize_around(L)
            return L
    L, _ = m.split_triangle(t, q)
    m.legalize_around(L)
    return L


def _corner_with(m, label):
    for t in m.triangles():
        for i in range(3):
            if m.lab[t][i] == label:
                return t, i
    raise DegeneracyError(f"label {label} disappeared")


def kite_lengths(z0abs, th1, th2, th3):
    """(|v2 b|, |v3 b|) for a kite with exterior angles th2, th3 at its diagonal ends."""
    s = -math.sin(th1 / 2)
    return z0abs * math.sin(th3 / 2) / s, z0abs * math.sin(th2 / 2) / s


def s4_kite(tau, z0, thetas) -> SurgeryResult:
    """Remove a kite from the torus C/(Z + tau Z); the diagonal runs from c - z0/2 to c + z0/2."""
    tau = complex(tau)
    if tau.imag <= 0:
        raise InputError("tau must lie in the upper half-plane")
    th1, th2, th3 = (_rad(x) for x in thetas)
    if abs((TWO_PI - th1) + (TWO_PI - th2) + (TWO_PI - th3)) > 1e-9:
        raise PreconditionError("kite angles must have total curvature zero")
    if not (TWO_PI < th1 < 2 * TWO_PI and 0 < th2 < TWO_PI and 0 < th3 < TWO_PI):
        raise PreconditionError("kite needs theta1 in (2pi, 4pi) and theta2, theta3 in (0, 2pi)")
    z0 = complex(z0)
    if z0 == 0:
        raise PreconditionError("surgery parameter must be nonzero")
    base = lattice_torus(tau)
    l2, l3 = kite_lengths(abs(z0), th1, th2, th3)
    u = z0 / abs(z0)
    c = (1 + tau) / 2
    v2, v3 = c - z0 / 2, c + z0 / 2
    w = cmath.exp(1j * (math.pi - th2 / 2))
    a, b = v2 + l2 * u * w, v2 + l2 * u / w
    corners = [v2, b, v3, a]
    diam = max(abs(x - y) for x in corners for y in corners)
    if diam >= _shortest_lattice_vector(tau) * (1 - 1e-9):
        raise PreconditionError("kite does not embed in the torus")
    m = base.to_mesh()
    m.delaunay_flips()
    L2 = _insert_point(m, v2)
    L3 = _insert_point(m, v3)
    m.marked = {L2, L3}
    m.remove_unmarked_regular()
    t, i = _corner_with(m, L2)
    ref = m.eid[t][i]
    phi = cmath.phase(u * w.conjugate() / m.vec(t, i))
    legs = [(l2, 0.0), (l3, TWO_PI - th1 / 2), (l3, TWO_PI - th3), (l2, TWO_PI - th1 / 2)]
    try:
        chains, _ = m.insert_polyline(ref, phi, legs)
    except PreconditionError as exc:
        raise PreconditionError(f"kite does not embed: {exc}") from exc
    chs = [m.expand(x) for x in chains]
    if m.end_label(chs[1][-1]) != L3 or m.end_label(chs[3][-1]) != L2:
        raise DegeneracyError("kite did not close")
    region = m.region_left_of(sum(chs, []))
    o = [m.outer_side(x) for x in chs]
    A = m.start_label(o[2][0])
    removed = _removed_area(m, region)
    m.delete(region)
    m.glue_chains(o[0], o[3])
    m.glue_chains(o[2], o[1])
    S, pts = _finalize(m, {"p1": A, "p2": L2, "p3": L3})
    defect = abs(z0) ** 2 * math.sin(th2 / 2) * math.sin(th3 / 2) / -math.sin(th1 / 2)
    width = _distance(S, pts["p2"], pts["p3"], l2 + l3)
    return SurgeryResult("S4", S, _area1_width(width, S.area()), defect, defect / abs(z0) ** 2, pts,
                         removed, _witness(base, S, "S4"),
                         {"tau": tau, "l2": l2, "l3": l3, "kite": [[x.real, x.imag] for x in corners]})


def reverse_s4(torus: FlatSurface, p1: int, p2: int, p3: int) -> SurgeryResult:
    """Cut the two saddle connections from p1 to p2 and p3 and glue a kite back in."""
    for x in (p1, p2, p3):
        _check_point(torus, x)
    th1, th2, th3 = (torus.cone_angle(x) for x in (p1, p2, p3))
    if abs(3 * TWO_PI - th1 - th2 - th3) > 1e-7 or not th1 > TWO_PI:
        raise PreconditionError("reverse kite surgery needs angles theta1 > 2pi with total curvature zero")
    ratio = math.sin(th3 / 2) / math.sin(th2 / 2)
    m0 = torus._mesh
    ref = torus.corner_of(p1)

    def ang(c):
        return m0.angle_between(ref, c.start_corner) + c.start_local

    lens = torus.edge_lengths()
    radius = float(np.min(lens))
    cap = 4 * torus.n_triangles * float(np.max(lens))
    best = None
    while best is None and radius <= 2 * cap:
        cs = saddle_connections(torus, radius, start=p1)
        c2s = [c for c in cs if c.end == p2]
        c3s = [c for c in cs if c.end == p3]
        for a in c2s:
            for b in c3s:
                if abs(a.length / b.length - ratio) > 1e-7 * ratio:
                    continue
                if abs((ang(b) - ang(a)) % th1 - th1 / 2) > 1e-7:
                    continue
                if best is None or a.length + b.length < best[0]:
                    best = (a.length + b.length, a, b)
        radius *= 2
    if best is None:
        raise PreconditionError("no pair of saddle connections bounds a kite")
    _, c2, c3 = best
    l2, l3 = c2.length, c3.length
    z = l2 * -math.sin(th1 / 2) / math.sin(th3 / 2)
    m = torus.to_mesh()
    ch2, _, _ = _insert_connection(m, c2)
    ch3, _, _ = _insert_connection(m, c3)
    S2l, S2r = m.slit(ch2)
    S3l, S3r = m.slit(ch3)
    la = m.start_label(S2l[0])
    lv2, lv3 = m.end_label(S2l[-1]), m.end_label(S3l[-1])
    w = cmath.exp(1j * (math.pi - th2 / 2))
    b, a = l2 / w, l2 * w
    T1 = m.add_triangle([0, b, z], [lv2, la, lv3])
    T2 = m.add_triangle([0, z, a], [lv2, lv3, la])
    m.glue((T1, 2), (T2, 0))
    m.glue_chains([m.eid[T1][0]], S2l)
    m.glue_chains([m.eid[T2][2]], S2r)
    m.glue_chains([m.eid[T1][1]], S3r)
    m.glue_chains([m.eid[T2][1]], S3l)
    S, pts = _finalize(m, {})
    defect = z ** 2 * math.sin(th2 / 2) * math.sin(th3 / 2) / -math.sin(th1 / 2)
    return SurgeryResult("S4-reverse", S, None, -defect, None, pts, 0.0, None, {"z0": z, "l2": l2, "l3": l3})


def torus_modulus(surface: FlatSurface) -> complex:
    """tau in the upper half-plane with the surface's lattice similar to Z + tau Z (regular tori)."""
    if surface.genus != 1 or surface.singular_points():
        raise PreconditionError("modulus is defined for regular tori")
    sides = develop(surface).sides
    a = sides[0]
    for b in sides[1:]:
        t = b / a
        if abs(t.imag) > 1e-9:
            return t if t.imag > 0 else -t
    raise DegeneracyError("degenerate torus")


# ---------------------------------------------------------------------------- S5
def s5_cylinder(surface: FlatSurface, p1: int, p2: int, z0, connection=None) -> SurgeryResult:
    """Slit a saddle connection p1 -> p2 and glue in the cylinder of base 1 and height z0 (scaled)."""
    for x in (p1, p2):
        _check_point(surface, x)
    if p1 == p2:
        raise InputError("S5 joins two distinct points")
    z0 = complex(z0)
    if not z0.imag > 0:
        raise PreconditionError("cylinder modulus must have positive imaginary part")
    c = connection or _shortest_connection(surface, p1, p2)
    L = c.length
    m = surface.to_mesh()
    ch, _, _ = _insert_connection(m, c)
    left, right = m.slit(ch)
    P = m.new_label()
    w = L * z0
    T1 = m.add_triangle([0, L, L + w], [P, P, P])
    T2 = m.add_triangle([0, L + w, w], [P, P, P])
    m.glue((T1, 2), (T2, 0))
    m.glue((T1, 1), (T2, 2))
    m.glue_chains([m.eid[T1][0]], right)
    m.glue_chains([m.eid[T2][1]], left)
    S, pts = _finalize(m, {"p": P})
    added = L * L * z0.imag
    return SurgeryResult("S5", S, None, -added, None, pts, 0.0, _witness(surface, S, "S5"),
                         {"L": L, "z0": z0})


def reverse_s5(surface: FlatSurface, p: int, loop=None) -> SurgeryResult:
    """Remove a flat cylinder bounded by two loops at p, splitting p in two."""
    _check_point(surface, p)

    def ok(c):
        return c.end == p and abs(_sectors(surface, c)[0] - math.pi) < 1e-7

    c = loop or _shortest_connection(surface, p, accept=ok)
    if not ok(c):
        raise PreconditionError("loop does not bound a cylinder on its left")
    L = c.length
    m0 = surface._mesh
    ref = surface.corner_of(p)
    total = m0.vertex_angle(ref)
    a_out = m0.angle_between(ref, c.start_corner) + c.start_local
    radius = math.hypot(L, surface.area() / L) * (1 + 1e-9)
    from .geometry import Unfolder
    unf = Unfolder(surface)
    unf.set_targets([])
    best = None
    for cc in m0.fan(ref)[0]:
        base = m0.angle_between(ref, cc)
        e = surface.edge_vector(*cc)
        for h in unf.from_corner(cc[0], cc[1], radius):
            if h.kind != "vertex":
                continue
            rel = (base + cmath.phase(h.vector / e) % TWO_PI - a_out) % total
            if not 0 < rel < math.pi:
                continue
            X = abs(h.vector) * cmath.exp(1j * rel)
            if not -1e-9 <= X.real < L - 1e-9:
                continue
            key = (round(X.imag, 9), X.real)
            if best is None or key < best[0]:
                best = (key, X, h)
    if best is None:
        raise PreconditionError("no cylinder on the left of the loop")
    _, X, h = best
    if h.index != p:
        raise PreconditionError("the far boundary of the strip is not a loop at the same point")
    m = surface.to_mesh()
    t, i = h.corner
    top_ref = 3 * t + i
    top_phi = h.local + (math.pi - cmath.phase(X))
    bottom, _, _ = _insert_connection(m, c)
    try:
        top, _, _ = m.insert_segment(top_ref, top_phi, L)
    except PreconditionError as exc:
        raise PreconditionError(f"cylinder top is not a saddle connection: {exc}") from exc
    bottom, top = m.expand(bottom), m.expand(top)
    region = m.region_left_of(bottom, extra_walls=top)
    ob = m.outer_side(bottom)
    removed = _removed_area(m, region)
    m.delete(region)
    m.glue_chains(top, ob)
    S, pts = _finalize(m, {})
    return SurgeryResult("S5-reverse", S, None, removed, None, pts, removed, _witness(S, surface, "S5"),
                         {"L": L, "z0": X / L})


# ---------------------------------------------------------------------------- cone angles of strata
def stratum_cone_angle(kind: str, *angles, M: int | None = None) -> RationalAngle:
    """Cone-manifold angle around the stratum a surgery degenerates to.

    S1/S2: the angle of the blown-up point. S3: angles 2pi m'/M, 2pi m''/M give
    2pi lcm(m', m'')/M. S4: pi. S5 has none.
    """
    if kind in ("S1", "S2"):
        if len(angles) != 1:
            raise InputError(f"{kind} takes the blown-up angle")
        return RationalAngle.of(angles[0])
    if kind == "S3":
        if len(angles) != 2:
            raise InputError("S3 takes the two merged angles")
        a, b = (RationalAngle.of(x).fraction for x in angles)
        den = M if M is not None else lcm(a.denominator, b.denominator)
        ma, mb = a * den, b * den
        if ma.denominator != 1 or mb.denominator != 1:
            raise InputError("angles are not multiples of 2pi/M")
        return RationalAngle(lcm(int(ma), int(mb)), den)
    if kind == "S4":
        return RationalAngle(1, 2)
    if kind == "S5":
        raise PreconditionError("S5 has no codimension-one stratum angle")
    raise InputError(f"unknown surgery kind {kind!r}")


# ---------------------------------------------------------------------------- dispatch
def apply(spec: SurgerySpec, surface: FlatSurface | None = None) -> SurgeryResult:
    k = spec.kind
    if k == "S4":
        tau = spec.tau if spec.tau is not None else (torus_modulus(surface) if surface is not None else 1j)
        return s4_kite(tau, spec.z0, spec.split)
    if surface is None:
        raise InputError(f"{k} needs an input surface")
    if k == "S1":
        return s1(surface, spec.target[0], spec.split[0], spec.z0)
    if k == "S2":
        return s2(surface, spec.target[0], spec.split[0], spec.z0)
    if k == "S3":
        return s3_devil(surface, spec.target[0], spec.target[1], spec.z0, spec.branch)
    return s5_cylinder(surface, spec.target[0], spec.target[1], spec.z0)


def reverse(result: SurgeryResult, explain: bool = False):
    """Undo a forward surgery using its recorded new points.

    Returns the reverse SurgeryResult, or None when the reverse surgery is
    blocked; with ``explain`` returns (result or None, reason).
    """
    S, P = result.surface, result.new_points
    k = result.kind
    try:
        if k == "S1":
            res = reverse_s1(S, P["p1'"], P["p1''"])
        elif k == "S2":
            res, why = reverse_s2(S, P["p1''"], P["p1'"], explain=True)
            return (res, why) if explain else res
        elif k == "S3":
            res = reverse_s3(S, P["p1"])
        elif k == "S4":
            res = reverse_s4(S, P["p1"], P["p2"], P["p3"])
        elif k == "S5":
            res = reverse_s5(S, P["p"])
        else:
            raise InputError(f"{k} is not a forward surgery")
    except (PreconditionError, DegeneracyError) as exc:
        if not explain:
            raise
        return None, str(exc)
    return (res, "ok") if explain else res
