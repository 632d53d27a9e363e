"""Flat surfaces with conical singularities as glued Euclidean triangles.

Surfaces are immutable; all editing happens on a Mesh (see mesh.py) which is
frozen back into a FlatSurface. Every vertex of the triangulation is a marked
point: cone points plus any regular points the caller asked to keep.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InputError, PreconditionError, DegeneracyError
from .mesh import Mesh, ear_clip, signed_area, TWO_PI

log = logging.getLogger(__name__)

LENGTH_TOL = 1e-9


class FlatSurface:
    """Closed flat surface: triangles (F, 3) complex, adjacency (F, 3, 2) int, vertex labels (F, 3)."""

    def __init__(self, tri, adj, lab):
        self.tri = np.asarray(tri, dtype=complex).reshape(-1, 3)
        self.adj = np.asarray(adj, dtype=int).reshape(-1, 3, 2)
        self.lab = np.asarray(lab, dtype=int).reshape(-1, 3)
        for a in (self.tri, self.adj, self.lab):
            a.setflags(write=False)

    # -------------------------------------------------------------- conversion
    @classmethod
    def from_mesh(cls, mesh: Mesh, keep=None) -> "FlatSurface":
        """Freeze a closed mesh. Unmarked regular vertices are removed where possible."""
        return cls.from_mesh_mapped(mesh, keep)[0]

    @classmethod
    def from_mesh_mapped(cls, mesh: Mesh, keep=None):
        """Like from_mesh, also returning a map from mesh labels to surface labels."""
        m = mesh.copy()
        m.relabel_classes()
        for t in m.triangles():
            for e in range(3):
                if m.adj[t][e] is None:
                    raise InputError(f"edge {(t, e)} is not glued")
        angles = {}
        for L, c in m.vertex_corners().items():
            angles[L] = m.vertex_angle(c)
        m.marked |= {L for L, a in angles.items() if abs(a - TWO_PI) > 1e-7}
        if keep is not None:
            m.marked |= set(keep)
        if not m.marked:
            m.marked.add(min(angles))
        stuck = m.remove_unmarked_regular()
        if stuck:
            log.warning("could not remove %d regular vertices; keeping them as marked points", len(stuck))
        m.compact()
        m.delaunay_flips()
        order = {}
        for t in range(len(m.P)):
            for i in range(3):
                order.setdefault(m.lab[t][i], len(order))
        lab = [[order[x] for x in row] for row in m.lab]
        adj = [[list(h) for h in row] for row in m.adj]
        return cls(m.P, adj, lab), order

    def to_mesh(self) -> Mesh:
        m = Mesh()
        for t in range(len(self.tri)):
            m.add_triangle(list(self.tri[t]), [int(x) for x in self.lab[t]])
        for t in range(len(self.tri)):
            for e in range(3):
                m.adj[t][e] = (int(self.adj[t, e, 0]), int(self.adj[t, e, 1]))
        m.marked = set(self.vertices)
        return m

    # -------------------------------------------------------------- combinatorics
    @property
    def n_triangles(self) -> int:
        return len(self.tri)

    @cached_property
    def vertices(self) -> tuple:
        return tuple(sorted({int(x) for x in self.lab.ravel()}))

    @property
    def n_points(self) -> int:
        return len(self.vertices)

    def edges(self):
        """Canonical half-edges, one per edge."""
        out = []
        for t in range(self.n_triangles):
            for e in range(3):
                p = tuple(self.adj[t, e])
                if (t, e) <= p:
                    out.append((t, e))
        return out

    @property
    def euler_characteristic(self) -> int:
        return self.n_points - len(self.edges()) + self.n_triangles

    @property
    def genus(self) -> int:
        return (2 - self.euler_characteristic) // 2

    def edge_vector(self, t, e) -> complex:
        return complex(self.tri[t, (e + 1) % 3] - self.tri[t, e])

    def rotation(self, t, e) -> complex:
        """Gluing rotation taking the partner's edge vector onto minus this one."""
        t2, e2 = self.adj[t, e]
        r = -self.edge_vector(t, e) / self.edge_vector(t2, e2)
        return r / abs(r)

    def corner_angle(self, t, i) -> float:
        p = self.tri[t]
        return abs(np.angle((p[(i - 1) % 3] - p[i]) / (p[(i + 1) % 3] - p[i])))

    @cached_property
    def _mesh(self) -> Mesh:
        return self.to_mesh()

    def corner_of(self, label: int):
        for t in range(self.n_triangles):
            for i in range(3):
                if self.lab[t, i] == label:
                    return (t, i)
        raise InputError(f"no vertex with label {label}")

    def fan(self, label: int):
        cs, closed = self._mesh.fan(self.corner_of(label))
        return cs

    # -------------------------------------------------------------- geometry
    def cone_angle(self, label: int) -> float:
        return sum(self.corner_angle(t, i) for t, i in self.fan(label))

    def cone_angles(self) -> dict:
        """Angle (radians) at every vertex."""
        return {L: self.cone_angle(L) for L in self.vertices}

    def singular_points(self, tol=1e-7) -> dict:
        return {L: a for L, a in self.cone_angles().items() if abs(a - TWO_PI) > tol}

    def gauss_bonnet_residual(self) -> float:
        return sum(TWO_PI - a for a in self.cone_angles().values()) - TWO_PI * self.euler_characteristic

    def area(self) -> float:
        z = self.tri[:, 1] - self.tri[:, 0]
        w = self.tri[:, 2] - self.tri[:, 0]
        return float(0.5 * np.sum(np.imag(np.conj(z) * w)))

    def edge_lengths(self) -> np.ndarray:
        return np.array([abs(self.edge_vector(t, e)) for t, e in self.edges()])

    def scaled(self, lam: float) -> "FlatSurface":
        if lam <= 0:
            raise InputError("scale factor must be positive")
        return FlatSurface(self.tri * lam, self.adj, self.lab)

    def normalized(self) -> "FlatSurface":
        return self.scaled(1 / math.sqrt(self.area()))

    def validate(self, tol=1e-7):
        for t in range(self.n_triangles):
            if signed_area(*self.tri[t]) <= 0:
                raise InputError(f"triangle {t} is degenerate or clockwise")
            for e in range(3):
                t2, e2 = self.adj[t, e]
                if tuple(self.adj[t2, e2]) != (t, e):
                    raise InputError(f"gluing of {(t, e)} is not symmetric")
                if (t2, e2) == (t, e):
                    raise InputError("edge glued to itself")
                l1, l2 = abs(self.edge_vector(t, e)), abs(self.edge_vector(t2, e2))
                if abs(l1 - l2) > tol * max(1.0, l1):
                    raise InputError(f"glued edges {(t, e)} and {(t2, e2)} differ in length")
        return True

    # -------------------------------------------------------------- io
    def to_json(self) -> dict:
        gl = []
        for t, e in self.edges():
            t2, e2 = (int(x) for x in self.adj[t, e])
            r = self.rotation(t, e)
            gl.append({"a": [t, e], "b": [t2, e2], "rot": [r.real, r.imag]})
        return {"schema": 1,
                "triangles": [[[p.real, p.imag] for p in row] for row in self.tri],
                "gluings": gl, "marked": list(self.vertices)}

    @classmethod
    def from_json(cls, data) -> "FlatSurface":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            tris = [[complex(float(x), float(y)) for x, y in row] for row in data["triangles"]]
            gl = data["gluings"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed surface file: {exc}") from exc
        m = Mesh()
        for k, row in enumerate(tris):
            if len(row) != 3:
                raise InputError(f"triangle {k} does not have three vertices")
            try:
                m.add_triangle(row, [3 * k, 3 * k + 1, 3 * k + 2])
            except DegeneracyError as exc:
                raise InputError(f"triangle {k}: {exc}") from exc
        F = len(tris)
        for g in gl:
            try:
                a, b = tuple(int(x) for x in g["a"]), tuple(int(x) for x in g["b"])
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"malformed gluing {g}") from exc
            for h in (a, b):
                if not (0 <= h[0] < F and 0 <= h[1] < 3):
                    raise InputError(f"gluing refers to missing edge {h}")
            if m.adj[a[0]][a[1]] is not None or m.adj[b[0]][b[1]] is not None or a == b:
                raise InputError(f"edge glued twice in {g}")
            m.glue(a, b)
            if "rot" in g:
                r = complex(*g["rot"])
                want = -m.vec(*a) / m.vec(*b)
                want /= abs(want)
                if abs(r - want) > 1e-6:
                    raise InputError(f"rotation {g['rot']} inconsistent with the edge vectors")
        for t in range(F):
            for e in range(3):
                if m.adj[t][e] is None:
                    raise InputError(f"edge {(t, e)} is not glued")
        # the marked list refers to vertex classes numbered by first appearance
        classes = _vertex_classes(m)
        marked = data.get("marked")
        keep = None
        if marked is not None:
            keep = set()
            for v in marked:
                if not 0 <= int(v) < len(classes):
                    raise InputError(f"marked vertex {v} does not exist")
                keep.add(m.lab[classes[int(v)][0]][classes[int(v)][1]])
        m.marked = set()
        return cls.from_mesh(m, keep=keep)

    def __repr__(self):
        return f"FlatSurface(F={self.n_triangles}, genus={self.genus}, points={self.n_points})"


def _vertex_classes(m: Mesh):
    m.relabel_classes()
    firsts = []
    seen = set()
    for t in m.triangles():
        for i in range(3):
            if m.lab[t][i] not in seen:
                seen.add(m.lab[t][i])
                firsts.append((t, i))
    return firsts


# ---------------------------------------------------------------------------- holonomy
def holonomy_along(surface: FlatSurface, path) -> complex:
    """Product of gluing rotations along a closed dual path given as crossed half-edges."""
    path = [tuple(int(x) for x in h) for h in path]
    if not path:
        return 1 + 0j
    for k, (t, e) in enumerate(path):
        nxt = path[(k + 1) % len(path)]
        if int(surface.adj[t, e, 0]) != nxt[0]:
            raise PreconditionError("path is not closed in the dual graph")
    h = 1 + 0j
    for t, e in path:
        h *= surface.rotation(t, e)
    return h


def holonomy_order(surface: FlatSurface, max_den: int = 10000) -> int | None:
    """Order of the finite group of linear holonomies, or None if it looks infinite.

    The group is generated by the side gluings of a developed polygon (the
    gluing rotation of paired sides is minus their ratio).
    """
    from fractions import Fraction
    from math import lcm
    model = develop(surface)
    q = 1
    for rho in model.rotations:
        a = (math.atan2(-rho.imag, -rho.real) / TWO_PI) % 1.0
        fr = Fraction(a).limit_denominator(max_den)
        if abs(float(fr) - a) > 1e-9 and abs(float(fr) - a - 1) > 1e-9:
            return None
        q = lcm(q, fr.denominator)
    return q


def reverse_path(surface: FlatSurface, path):
    return [tuple(int(x) for x in surface.adj[t, e]) for t, e in reversed(path)]


def vertex_loop(surface: FlatSurface, label: int):
    """Dual path circling a vertex counterclockwise."""
    return [(t, (i - 1) % 3) for t, i in surface.fan(label)]


# ---------------------------------------------------------------------------- polygon models
@dataclass
class PolygonalModel:
    """Closed polygon with side vectors z and a side pairing.

    ``rotations[i]`` is rho_i with z_i = rho_i z_pair(i); sides are glued with
    reversed orientation so the map applied to the partner edge is -rho_i.
    ``provenance`` optionally records the surface half-edge behind each side
    and ``tri_ids`` the surface triangle behind each polygon triangle.
    """

    sides: np.ndarray
    pairing: np.ndarray
    triangles: list | None = None
    provenance: list | None = None
    tri_ids: list | None = None
    origin: complex = 0j

    def __post_init__(self):
        self.sides = np.asarray(self.sides, dtype=complex)
        self.pairing = np.asarray(self.pairing, dtype=int)
        n = len(self.sides)
        if len(self.pairing) != n or n < 2:
            raise InputError("pairing must list one partner per side")
        for i, j in enumerate(self.pairing):
            if not 0 <= j < n or j == i or self.pairing[j] != i:
                raise InputError(f"pairing is not an involution without fixed points at side {i}")

    @property
    def k(self) -> int:
        return len(self.sides) // 2

    @property
    def rotations(self) -> np.ndarray:
        return self.sides / self.sides[self.pairing]

    def vertex_positions(self) -> np.ndarray:
        return self.origin + np.concatenate([[0], np.cumsum(self.sides)[:-1]])

    def representatives(self):
        return [i for i in range(len(self.sides)) if i < self.pairing[i]]

    def check(self, tol=LENGTH_TOL):
        scale = float(np.max(np.abs(self.sides)))
        if abs(self.sides.sum()) > tol * max(1.0, scale) * len(self.sides):
            raise InputError("polygon boundary does not close")
        for i, j in enumerate(self.pairing):
            if abs(abs(self.sides[i]) - abs(self.sides[j])) > 1e-7 * max(1.0, scale):
                raise InputError(f"paired sides {i} and {j} differ in length")

    def with_sides(self, sides) -> "PolygonalModel":
        return PolygonalModel(np.asarray(sides, dtype=complex), self.pairing, self.triangles,
                              self.provenance, self.tri_ids, self.origin)

    def to_json(self):
        return {"sides": [[z.real, z.imag] for z in self.sides], "pairing": self.pairing.tolist(),
                "rotations": [[r.real, r.imag] for r in self.rotations],
                "triangles": None if self.triangles is None else [list(map(int, t)) for t in self.triangles]}

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        try:
            sides = [complex(float(a), float(b)) for a, b in data["sides"]]
            pairing = [int(x) for x in data["pairing"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed polygon file: {exc}") from exc
        model = cls(sides, pairing, data.get("triangles"))
        if "rotations" in data and data["rotations"] is not None:
            rots = np.array([complex(a, b) for a, b in data["rotations"]])
            if np.max(np.abs(rots - model.rotations)) > 1e-6:
                raise InputError("rotations inconsistent with the side vectors")
        return model


def build_from_polygon(model: PolygonalModel, keep="all") -> FlatSurface:
    """Glue the paired sides of a (pseudo-)polygon.

    ``keep="all"`` marks every vertex class; ``keep="singular"`` keeps only
    cone points (at least one vertex always survives).
    """
    model.check()
    pts = list(model.vertex_positions())
    n = len(pts)
    tris = model.triangles
    if tris is None:
        if _polygon_area(pts) <= 0:
            raise InputError("polygon must be counterclockwise")
        try:
            tris = ear_clip(pts)
        except DegeneracyError as exc:
            raise DegeneracyError(f"cannot triangulate polygon: {exc}") from exc
    m = Mesh()
    owner = {}
    for k, (a, b, c) in enumerate(tris):
        try:
            t = m.add_triangle([pts[a], pts[b], pts[c]], [a, b, c])
        except DegeneracyError as exc:
            raise DegeneracyError(f"polygon triangle {k} is degenerate") from exc
        for e, (x, y) in enumerate(((a, b), (b, c), (c, a))):
            if (y - x) % n == 1 and (x, y) not in owner:
                owner[(x, y)] = (t, e)
            elif (y, x) in owner:
                m.link((t, e), owner.pop((y, x)))
            else:
                owner[(x, y)] = (t, e)
    for i in range(n):
        if (i, (i + 1) % n) not in owner:
            raise InputError(f"triangulation does not cover polygon side {i}")
    for i in range(n):
        j = int(model.pairing[i])
        if i < j:
            m.glue(owner[(i, (i + 1) % n)], owner[(j, (j + 1) % n)], tol=1e-7)
    m.relabel_classes()
    m.marked = set(m.vertex_corners()) if keep == "all" else set()
    return FlatSurface.from_mesh(m)


def _polygon_area(pts):
    return 0.5 * sum((pts[i].conjugate() * pts[(i + 1) % len(pts)]).imag for i in range(len(pts)))


# ---------------------------------------------------------------------------- developing
def _primal_tree(surface: FlatSurface):
    """BFS spanning tree of the 1-skeleton, as a set of canonical edges."""
    adj = {}
    for t, e in surface.edges():
        a, b = int(surface.lab[t, e]), int(surface.lab[t, (e + 1) % 3])
        adj.setdefault(a, []).append((b, (t, e)))
        adj.setdefault(b, []).append((a, (t, e)))
    root = surface.vertices[0]
    seen, tree, queue = {root}, set(), [root]
    while queue:
        v = queue.pop(0)
        for w, h in adj.get(v, []):
            if w not in seen:
                seen.add(w)
                tree.add(h)
                queue.append(w)
    return tree


def _canon(surface, h):
    p = (int(surface.adj[h[0], h[1], 0]), int(surface.adj[h[0], h[1], 1]))
    return min(tuple(h), p)


def develop(surface: FlatSurface, base: int = 0, cut=None) -> PolygonalModel:
    """Cut the surface along a graph with simply connected complement and lay it flat.

    ``cut`` is a collection of edges (any half-edge of each); by default a BFS
    spanning tree of the 1-skeleton plus the edges left over by a dual
    spanning tree, giving 2k = 2(2g - 1 + n) sides.
    """
    F = surface.n_triangles
    if not 0 <= base < F:
        raise InputError("base triangle out of range")
    if cut is None:
        primal = _primal_tree(surface)
        dual_ok = lambda h: _canon(surface, h) not in primal
    else:
        cutset = {_canon(surface, tuple(h)) for h in cut}
        dual_ok = lambda h: _canon(surface, h) not in cutset
    frames = {base: (1 + 0j, 0j)}
    order = [base]
    tree_edges = set()
    queue = [base]
    m = surface._mesh
    while queue:
        t = queue.pop(0)
        for e in range(3):
            h = (t, e)
            if not dual_ok(h):
                continue
            t2, e2 = (int(x) for x in surface.adj[t, e])
            if t2 in frames:
                continue
            r, b = m.frame_map(h)
            R, B = frames[t]
            frames[t2] = (R * r, R * b + B)
            tree_edges.add(_canon(surface, h))
            order.append(t2)
            queue.append(t2)
    if len(frames) != F:
        raise PreconditionError("complement of the cut graph is not connected")
    if cut is not None:
        n_dual = sum(1 for h in surface.edges() if dual_ok(h))
        if n_dual != F - 1:
            raise PreconditionError("complement of the cut graph is not simply connected")
    boundary = lambda h: _canon(surface, h) not in tree_edges

    def pos(t, i):
        R, B = frames[t]
        return R * complex(surface.tri[t, i]) + B

    # walk the boundary counterclockwise
    start = next((t, e) for t in order for e in range(3) if boundary((t, e)))
    sides, prov, corner_index = [], [], {}
    h = start
    while True:
        t, e = h
        idx = len(sides)
        sides.append(pos(t, (e + 1) % 3) - pos(t, e))
        prov.append(h)
        # rotate around the end vertex inside the disk to the next boundary edge
        c = (t, (e + 1) % 3)
        while True:
            corner_index[c] = (idx + 1)
            nxt = (c[0], c[1])
            if boundary(nxt):
                h = nxt
                break
            t2, e2 = (int(x) for x in surface.adj[nxt[0], nxt[1]])
            c = (t2, (e2 + 1) % 3)
        if h == start:
            break
        if len(sides) > 3 * F + 3:
            raise DegeneracyError("boundary walk did not close")
    nside = len(sides)
    corner_index = {c: k % nside for c, k in corner_index.items()}
    pairing = [0] * nside
    where = {p: k for k, p in enumerate(prov)}
    for k, (t, e) in enumerate(prov):
        pairing[k] = where[(int(surface.adj[t, e, 0]), int(surface.adj[t, e, 1]))]
    tris, ids = [], []
    for t in order:
        tris.append(tuple(corner_index[(t, i)] for i in range(3)))
        ids.append(t)
    origin = pos(*prov[0])
    return PolygonalModel(np.array(sides), np.array(pairing), tris, prov, ids, origin)


# ---------------------------------------------------------------------------- canned surfaces
def lattice_torus(tau: complex = 1j, scale: float = 1.0) -> FlatSurface:
    tau = complex(tau)
    if tau.imag <= 0:
        raise InputError("tau must lie in the upper half-plane")
    s = [scale, scale * tau, -scale, -scale * tau]
    return build_from_polygon(PolygonalModel(s, [2, 3, 0, 1], [(0, 1, 2), (0, 2, 3)]))


def square_torus() -> FlatSurface:
    return lattice_torus(1j)


def rectangle_torus(a: float, b: float) -> FlatSurface:
    return lattice_torus(1j * b / a, scale=a)


def doubled_polygon(pts) -> FlatSurface:
    """Sphere obtained by gluing a convex polygon to its mirror image along the boundary."""
    pts = [complex(p) for p in pts]
    if _polygon_area(pts) <= 0:
        raise InputError("polygon must be counterclockwise")
    n = len(pts)
    m = Mesh()
    top = ear_clip(pts)
    mirror = [p.conjugate() for p in pts]
    owner = [{}, {}]
    for side, (poly, tris) in enumerate(((pts, top), (mirror, [(a, c, b) for a, b, c in top]))):
        for a, b, c in tris:
            t = m.add_triangle([poly[a], poly[b], poly[c]], [a, b, c])
            for e, (x, y) in enumerate(((a, b), (b, c), (c, a))):
                if (y, x) in owner[side]:
                    m.link((t, e), owner[side].pop((y, x)))
                else:
                    owner[side][(x, y)] = (t, e)
    for i in range(n):
        j = (i + 1) % n
        m.glue(owner[0][(i, j)], owner[1][(j, i)])
    m.relabel_classes()
    m.marked = set(m.vertex_corners())
    return FlatSurface.from_mesh(m)


def triangle_sphere(alpha: float, beta: float, base: float = 1.0) -> FlatSurface:
    """Double of a Euclidean triangle with angles alpha, beta at the base (radians)."""
    gamma = math.pi - alpha - beta
    if min(alpha, beta, gamma) <= 0:
        raise InputError("triangle angles must be positive")
    # apex from the law of sines
    side = base * math.sin(beta) / math.sin(gamma)
    apex = side * complex(math.cos(alpha), math.sin(alpha))
    return doubled_polygon([0, base, apex])


def regular_polygon_sphere(n: int, radius: float = 1.0) -> FlatSurface:
    pts = [radius * complex(math.cos(2 * math.pi * k / n), math.sin(2 * math.pi * k / n)) for k in range(n)]
    return doubled_polygon(pts)


HEXAGON_PATTERNS = {
    1: [1, 0, 4, 5, 2, 3],   # one adjacent pair folded, the other two pairs interleaved
    2: [3, 4, 5, 0, 1, 2],   # opposite sides
    3: [2, 4, 0, 5, 1, 3],
}


def hexagon_torus(pattern: int, sides) -> FlatSurface:
    """Torus with (at most) two vertex classes from a hexagon and one of three gluing patterns."""
    if pattern not in HEXAGON_PATTERNS:
        raise InputError("pattern must be 1, 2 or 3")
    sides = np.asarray(sides, dtype=complex)
    if sides.shape != (6,):
        raise InputError("a hexagon needs six side vectors")
    model = PolygonalModel(sides, HEXAGON_PATTERNS[pattern])
    try:
        model.check()
    except InputError as exc:
        raise InputError(f"sides incompatible with pattern {pattern}: {exc}") from exc
    return build_from_polygon(model)


def regular_hexagon_sides(scale=1.0):
    return np.array([scale * complex(math.cos(math.pi * k / 3), math.sin(math.pi * k / 3)) for k in range(6)])
