"""Delaunay triangulations and the four characteristic lengths of a flat surface.

systole sigma: shortest essential closed curve
relative systole delta: shortest path between two distinct cone points
diameter D: largest distance between two points
relative diameter s: largest distance from a point to the cone points
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, asdict, field

import numpy as np

from .errors import InputError, PreconditionError, DegeneracyError
from .geometry import Unfolder, saddle_connections, distance_matrix, SaddleConnection
from .surface import FlatSurface

log = logging.getLogger(__name__)


def delaunay(surface: FlatSurface) -> FlatSurface:
    """Flip edges until the triangulation is Delaunay; vertices are kept as they are."""
    m = surface.to_mesh()
    m.delaunay_flips()
    return FlatSurface.from_mesh(m, keep=set(surface.vertices))


def incircle_excess(surface: FlatSurface, t, e) -> float:
    """Sum of the two angles facing edge (t, e) minus pi; positive means not Delaunay."""
    t2, e2 = surface.adj[t, e]
    return surface.corner_angle(t, (e + 2) % 3) + surface.corner_angle(t2, (e2 + 2) % 3) - math.pi


def is_delaunay(surface: FlatSurface, tol=1e-9) -> bool:
    return all(incircle_excess(surface, t, e) <= tol for t, e in surface.edges())


def circumradius(a: complex, b: complex, c: complex) -> float:
    la, lb, lc = abs(b - c), abs(c - a), abs(a - b)
    area2 = abs(((b - a).conjugate() * (c - a)).imag)
    return la * lb * lc / (2 * area2)


def relative_diameter(surface: FlatSurface) -> float:
    """Largest distance to the vertex set: the largest Delaunay circumradius."""
    d = delaunay(surface)
    return max(circumradius(*row) for row in d.tri)


def relative_systole(surface: FlatSurface):
    """(delta, witness) where the witness is the shortest Delaunay edge joining distinct points."""
    if surface.n_points < 2:
        raise PreconditionError("relative systole needs at least two distinct points")
    d = delaunay(surface)
    best = None
    for t, e in d.edges():
        a, b = int(d.lab[t, e]), int(d.lab[t, (e + 1) % 3])
        if a == b:
            continue
        v = d.edge_vector(t, e)
        if best is None or abs(v) < best[0] - 1e-12:
            best = (abs(v), SaddleConnection(a, b, v, (t, e), 0.0, (t, (e + 1) % 3),
                                             d.corner_angle(t, (e + 1) % 3), ()))
    if best is None:
        raise DegeneracyError("no Delaunay edge joins two distinct points")
    return best


def shortest_saddle_connection_between_distinct(surface: FlatSurface, radius: float):
    """Brute-force oracle for the relative systole."""
    sc = [c for c in saddle_connections(surface, radius) if c.start != c.end]
    return sc[0].length if sc else math.inf


def graph_distances(surface: FlatSurface) -> np.ndarray:
    """Shortest paths along edges between vertex labels (an upper bound on distances)."""
    V = surface.vertices
    idx = {L: k for k, L in enumerate(V)}
    D = np.full((len(V), len(V)), math.inf)
    np.fill_diagonal(D, 0.0)
    for t, e in surface.edges():
        a, b = idx[int(surface.lab[t, e])], idx[int(surface.lab[t, (e + 1) % 3])]
        w = abs(surface.edge_vector(t, e))
        D[a, b] = min(D[a, b], w)
        D[b, a] = min(D[b, a], w)
    for k in range(len(V)):
        D = np.minimum(D, D[:, [k]] + D[[k], :])
    return D


def _sample_points(surface: FlatSurface, samples: int):
    pts = []
    k = max(1, int(samples))
    for t in range(surface.n_triangles):
        a, b, c = surface.tri[t]
        for i in range(k + 1):
            for j in range(k + 1 - i):
                l = k - i - j
                if (i, j, l).count(0) >= 2:
                    continue
                z = (i * a + j * b + l * c) / k
                # nudged off the edges so that every sample is interior
                pts.append((t, z + 1e-6 * ((a + b + c) / 3 - z)))
        # the circumcenter, when it lies in the triangle
        z = _circumcenter(a, b, c)
        if _in_triangle(z, a, b, c):
            pts.append((t, z + 1e-6 * ((a + b + c) / 3 - z)))
    return pts


def _circumcenter(a, b, c):
    b, c = b - a, c - a
    d = 2 * (b.real * c.imag - b.imag * c.real)
    ux = (c.imag * abs(b) ** 2 - b.imag * abs(c) ** 2) / d
    uy = (b.real * abs(c) ** 2 - c.real * abs(b) ** 2) / d
    return a + complex(ux, uy)


def _in_triangle(z, a, b, c, tol=1e-12):
    def cr(p, q, r):
        return ((q - p).conjugate() * (r - p)).imag
    return cr(a, b, z) >= -tol and cr(b, c, z) >= -tol and cr(c, a, z) >= -tol


def diameter_bounds(surface: FlatSurface, samples: int = 3):
    """(lower, upper) bracket of the diameter.

    lower is the largest exact distance among sample points and vertices;
    upper is 2n times the relative diameter.
    """
    d = delaunay(surface)
    s = max(circumradius(*row) for row in d.tri)
    n = d.n_points
    upper = 2 * n * s
    G = graph_distances(d)
    radius = min(upper, 2 * s + float(np.max(G))) * (1 + 1e-9)
    pts = _sample_points(d, samples)
    D, _ = distance_matrix(d, pts, radius)
    finite = D[np.isfinite(D)]
    lower = float(finite.max()) if finite.size else 0.0
    if lower > upper * (1 + 1e-9):
        raise DegeneracyError("diameter lower bound exceeds the upper bound")
    return lower, upper


# ---------------------------------------------------------------------------- homology
class HomologyTester:
    """Intersection numbers of closed dual paths with a basis of primal cycles."""

    def __init__(self, surface: FlatSurface):
        self.s = surface
        V = surface.vertices
        # primal BFS tree with parent half-edges pointing to the parent
        out = {}
        for t in range(surface.n_triangles):
            for e in range(3):
                out.setdefault(int(surface.lab[t, e]), []).append((t, e))
        root = V[0]
        up = {root: []}
        tree = set()
        queue = [root]
        while queue:
            v = queue.pop(0)
            for t, e in out.get(v, []):
                w = int(surface.lab[t, (e + 1) % 3])
                if w not in up:
                    back = tuple(int(x) for x in surface.adj[t, e])   # w -> v
                    up[w] = [back] + up[v]
                    tree.add(self._canon((t, e)))
                    queue.append(w)
        # dual spanning tree over the remaining edges
        F = surface.n_triangles
        seen = {0}
        queue = [0]
        dual = set()
        while queue:
            t = queue.pop(0)
            for e in range(3):
                c = self._canon((t, e))
                if c in tree:
                    continue
                t2 = int(surface.adj[t, e, 0])
                if t2 not in seen:
                    seen.add(t2)
                    dual.add(c)
                    queue.append(t2)
        left = [h for h in surface.edges() if self._canon(h) not in tree and self._canon(h) not in dual]
        self.cycles = []
        for t, e in left:
            u, v = int(surface.lab[t, e]), int(surface.lab[t, (e + 1) % 3])
            cyc = [(t, e)] + up[v] + [tuple(int(x) for x in surface.adj[h]) for h in reversed(up[u])]
            self.cycles.append(cyc)

    def _canon(self, h):
        p = tuple(int(x) for x in self.s.adj[h[0], h[1]])
        return min(tuple(h), p)

    @property
    def rank(self):
        return len(self.cycles)

    def intersections(self, crossings):
        counts = {}
        for h in crossings:
            counts[tuple(h)] = counts.get(tuple(h), 0) + 1
        vec = []
        for cyc in self.cycles:
            n = 0
            for h in cyc:
                n += counts.get(h, 0)
                n -= counts.get(tuple(int(x) for x in self.s.adj[h]), 0)
            vec.append(n)
        return vec

    def turn(self, c_from, c_to):
        """Crossings of a small ccw arc around a vertex from one corner to another."""
        m = self.s._mesh
        out = []
        c = tuple(c_from)
        guard = 0
        while c != tuple(c_to):
            t, i = c
            out.append((t, (i - 1) % 3))
            c = m.ccw_next(c)
            guard += 1
            if guard > 3 * self.s.n_triangles + 3:
                raise DegeneracyError("corners belong to different vertices")
        return out

    def loop_crossings(self, connections):
        """Closed dual path following a cycle of saddle connections."""
        cr = []
        k = len(connections)
        for j, c in enumerate(connections):
            cr.extend(c.crossings)
            nxt = connections[(j + 1) % k]
            cr.extend(self.turn(c.end_corner, nxt.start_corner))
        return cr

    def is_essential(self, connections) -> bool:
        return any(x != 0 for x in self.intersections(self.loop_crossings(connections)))


def systole(surface: FlatSurface, length_cap: float | None = None):
    """(sigma, witness) with the witness a cycle of saddle connections.

    Candidates are cycles of saddle connections through distinct vertices,
    tested for homological essentiality. Without a cap the search radius
    doubles until a curve is found; with a cap that is too small an error is
    raised rather than a wrong value returned.
    """
    if surface.genus < 1:
        raise PreconditionError("a sphere has no systole")
    d = delaunay(surface)
    H = HomologyTester(d)
    s = max(circumradius(*row) for row in d.tri)
    hard = 4 * d.n_points * s * (1 + 1e-9)     # sigma <= 2D <= 4ns
    caps = [length_cap] if length_cap is not None else []
    if not caps:
        c = max(2 * s, min(abs(d.edge_vector(t, e)) for t, e in d.edges()))
        while c < hard:
            caps.append(c)
            c *= 2
        caps.append(hard)
    for cap in caps:
        best = _shortest_essential_cycle(d, H, cap)
        if best is not None:
            return best
    raise PreconditionError(f"no essential closed curve shorter than the cap {caps[-1]:.6g}")


def _shortest_essential_cycle(d, H, cap):
    sc = saddle_connections(d, cap)
    by_start = {}
    for c in sc:
        by_start.setdefault(c.start, []).append(c)
    best = None

    def dfs(root, path, length, visited):
        nonlocal best
        last = path[-1]
        bound = cap if best is None else min(cap, best[0])
        if last.end == root:
            if length <= bound + 1e-12 and H.is_essential(path):
                if best is None or length < best[0] - 1e-12:
                    best = (length, list(path))
            return
        for c in by_start.get(last.end, []):
            if length + c.length > bound + 1e-12:
                break
            if c.end != root and (c.end in visited or c.end < root):
                continue
            path.append(c)
            visited.add(c.end)
            dfs(root, path, length + c.length, visited)
            visited.discard(c.end)
            path.pop()

    for root in sorted(by_start):
        for c in by_start[root]:
            bound = cap if best is None else min(cap, best[0])
            if c.length > bound + 1e-12:
                break
            if c.end != root and c.end < root:
                continue
            dfs(root, [c], c.length, {root, c.end})
    return best


# ---------------------------------------------------------------------------- closed forms
def cone_closed_geodesic(theta: float, r: float):
    """Closed geodesic at distance r around a cone point of angle theta < pi: (length, corner angle)."""
    if not 0 < theta < math.pi:
        raise PreconditionError("closed geodesics around a cone point need 0 < theta < pi")
    if r <= 0:
        raise InputError("distance must be positive")
    return 2 * math.sin(theta / 2) * r, math.pi - theta


def diameter_constants(n: int, q: int):
    """Constants (K1, K2) bounding diameter against systoles and cylinder length."""
    if n < 1 or q < 3:
        raise InputError("need n >= 1 and q >= 3")
    K1 = (2 * n / math.sqrt(math.pi)) * max(2.0, 1 + 1 / math.tan(math.pi / q))
    K2 = math.sqrt(3) / (2 * n)
    return K1, K2


# ---------------------------------------------------------------------------- cylinders
@dataclass
class Cylinder:
    width: float          # circumference
    length: float         # height, distance between the boundary components
    core: complex         # direction of the core geodesic in the witness frame
    base: int             # vertex the witness loop is based at
    side: str             # side of the witness loop the cylinder lies on

    def to_json(self):
        return {"width": self.width, "length": self.length, "base": self.base, "side": self.side}


def find_cylinder(surface: FlatSurface, witness=None):
    """Maximal flat cylinder whose boundary contains the systole witness, if any."""
    if surface.genus != 1:
        raise PreconditionError("cylinder detection is implemented for tori")
    d = delaunay(surface)
    if witness is None:
        _, witness = systole(d)
    if len(witness) != 1:
        return None
    c = witness[0]
    m = d._mesh
    total = m.vertex_angle(c.start_corner)
    # angle at the base point between the outgoing direction and the returning one
    a_out = m.angle_between(d.corner_of(c.start), c.start_corner) + c.start_local
    a_back = m.angle_between(d.corner_of(c.start), c.end_corner) + c.end_local
    left = (a_back - a_out) % total
    right = total - left
    for side, sector in (("left", left), ("right", right)):
        if abs(sector - math.pi) > 1e-7:
            continue
        h = _cylinder_height(d, c, side)
        if h is not None:
            return Cylinder(c.length, h, c.vector / c.length, c.start, side)
    return None


def _cylinder_height(d, c, side):
    L = c.length
    u = c.vector / L
    bound = d.area() / L
    radius = math.hypot(L, bound) * (1 + 1e-9)
    unf = Unfolder(d)
    unf.set_targets([])
    t, i = c.start_corner
    best = None
    # vertices seen from every corner of the base point, rotated into the witness frame
    m = d._mesh
    ref = c.start_corner
    base_dir = c.vector
    for cc in m.fan(ref)[0]:
        rot = _corner_rotation(d, m, ref, cc)
        for hit in unf.from_corner(cc[0], cc[1], radius):
            if hit.kind != "vertex":
                continue
            z = hit.vector * rot / u
            y = z.imag if side == "left" else -z.imag
            if y > 1e-9 and -1e-9 <= z.real < L - 1e-9:
                best = y if best is None else min(best, y)
    return best


def _corner_rotation(d, m, ref, cc):
    """Rotation taking the frame of corner cc to the frame of corner ref around the same vertex."""
    t0, i0 = ref
    t1, i1 = cc
    e0 = d.edge_vector(t0, i0)
    e1 = d.edge_vector(t1, i1)
    ang = m.angle_between(ref, cc)
    import cmath
    return cmath.exp(1j * ang) * (e0 / abs(e0)) / (e1 / abs(e1))


# ---------------------------------------------------------------------------- reports
@dataclass
class MetricReport:
    systole: float | None
    relative_systole: float | None
    diameter: float
    diameter_upper: float
    relative_diameter: float
    n: int
    tolerance: float = 1e-6
    witnesses: dict = field(default_factory=dict)

    def inequalities(self):
        """Check D >= delta, D >= sigma/2, D >= s and s >= D/(2n) on the bracket."""
        tol = self.tolerance
        D_hi, D_lo = self.diameter_upper, self.diameter
        out = {"D>=delta": self.relative_systole is None or D_hi + tol >= self.relative_systole,
               "D>=sigma/2": self.systole is None or D_hi + tol >= self.systole / 2,
               "D>=s": D_hi + tol >= self.relative_diameter,
               "s>=D/2n": self.relative_diameter + tol >= D_lo / (2 * self.n)}
        return out

    def to_json(self):
        return asdict(self)


def metric_report(surface: FlatSurface, samples: int = 3) -> MetricReport:
    """The four characteristic lengths after normalising to area 1."""
    N = delaunay(surface.normalized())
    s = relative_diameter(N)
    lo, hi = diameter_bounds(N, samples)
    wit = {}
    sigma = delta = None
    if N.genus >= 1:
        sigma, loop = systole(N)
        wit["systole"] = [c.to_json() for c in loop]
    if N.n_points >= 2:
        delta, sc = relative_systole(N)
        wit["relative_systole"] = sc.to_json()
    return MetricReport(sigma, delta, lo, hi, s, N.n_points, witnesses=wit)


# ---------------------------------------------------------------------------- isometry
def isometric(A: FlatSurface, B: FlatSurface, tol=1e-7, up_to_scale=False) -> bool:
    """Decide whether two surfaces are isometric (orientation preserving), matching marked points."""
    if up_to_scale:
        A, B = A.normalized(), B.normalized()
    if A.n_points != B.n_points or A.n_triangles != B.n_triangles:
        return False
    if abs(A.area() - B.area()) > tol * max(1.0, A.area()):
        return False
    angA = sorted(A.cone_angles().values())
    angB = sorted(B.cone_angles().values())
    if any(abs(x - y) > 1e-6 for x, y in zip(angA, angB)):
        return False
    B = delaunay(B)
    # cocircular cells have several Delaunay triangulations; try each one of A's
    return any(_match(A2, B, tol) for A2 in _tied_triangulations(delaunay(A)))


def _tied_triangulations(S: FlatSurface, cap=64, tol=1e-9):
    """S and the triangulations reached from it by flipping edges with tied incircle test."""
    keep = set(S.vertices)
    seen, queue = set(), [S]
    while queue and len(seen) < cap:
        X = queue.pop(0)
        ang = X.cone_angles()
        key = tuple(sorted(tuple(sorted((round(abs(X.edge_vector(t, e)), 7), round(ang[int(X.lab[t, e])], 6))
                                        for e in range(3))) for t in range(X.n_triangles)))
        if key in seen:
            continue
        seen.add(key)
        yield X
        for t, e in X.edges():
            t2, _ = X.adj[t, e]
            if t2 == t or abs(incircle_excess(X, t, e)) > tol:
                continue
            m = X.to_mesh()
            if m.flip(t, e):
                queue.append(FlatSurface.from_mesh(m, keep=keep))


def _match(A, B, tol):
    mB = B._mesh
    cA, cB = A.cone_angles(), B.cone_angles()
    t0, e0 = min(A.edges(), key=lambda h: (abs(A.edge_vector(*h)), h))
    h0 = abs(A.edge_vector(t0, e0))
    a0 = (cA[int(A.lab[t0, e0])], cA[int(A.lab[t0, (e0 + 1) % 3])])
    for tb in range(B.n_triangles):
        for eb in range(3):
            if abs(abs(B.edge_vector(tb, eb)) - h0) > tol * max(1.0, h0):
                continue
            b0 = (cB[int(B.lab[tb, eb])], cB[int(B.lab[tb, (eb + 1) % 3])])
            if abs(a0[0] - b0[0]) > 1e-6 or abs(a0[1] - b0[1]) > 1e-6:
                continue
            if _match_from(A, B, mB, (t0, e0), (tb, eb), cA, cB, tol):
                return True
    return False


def _match_from(A, B, mB, ha, hb, cA, cB, tol):
    ta, ea = ha
    tb, eb = hb
    va, vb = A.edge_vector(ta, ea), B.edge_vector(tb, eb)
    rot = (vb / abs(vb)) / (va / abs(va))
    # affine map from A's triangle ta to B's triangle tb: z -> rot z + shift
    shift = complex(B.tri[tb, eb]) - rot * complex(A.tri[ta, ea])
    state = {ta: (tb, rot, shift)}
    queue = [ta]
    scale = max(abs(A.edge_vector(t, e)) for t, e in A.edges())
    while queue:
        t = queue.pop(0)
        tB, R, S = state[t]
        for i in range(3):
            z = R * complex(A.tri[t, i]) + S
            # the image must be a vertex of B's triangle with the same angle
            k = int(np.argmin(np.abs(B.tri[tB] - z)))
            if abs(B.tri[tB, k] - z) > 1e-6 * scale:
                return False
            if abs(cA[int(A.lab[t, i])] - cB[int(B.lab[tB, k])]) > 1e-6:
                return False
        cen = sum(complex(x) for x in A.tri[t]) / 3
        for e in range(3):
            t2, e2 = (int(x) for x in A.adj[t, e])
            # walk in B from the image of the centroid to the image of the midpoint, then across
            r, b = A._mesh.frame_map((t, e))
            cen2 = sum(complex(x) for x in A.tri[t2]) / 3
            target = r * cen2 + b               # neighbour centroid in t's frame
            # two legs through the edge midpoint, so the path stays inside t and t2
            mid = (A.tri[t, e] + A.tri[t, (e + 1) % 3]) / 2
            try:
                t1, p1, R1, B1, _ = mB.walk(tB, R * cen + S, R * (mid - cen))
                tE, pE, R2_, B2_, _ = mB.walk(t1, p1, R1 * R * (target - mid))
            except Exception:
                return False
            RR, BB = R2_ * R1, R2_ * B1 + B2_
            # frame for t2: A-coordinates of t2 -> t's frame -> B's tB frame -> B's tE frame
            R2 = RR * R * r
            S2 = RR * (R * b + S) + BB
            if t2 in state:
                tB2, Rp, Sp = state[t2]
                if tB2 != tE or abs(Rp - R2) > 1e-6 or abs(Sp - S2) > 1e-6 * scale:
                    return False
            else:
                state[t2] = (tE, R2, S2)
                queue.append(t2)
    return len({v[0] for v in state.values()}) == B.n_triangles
