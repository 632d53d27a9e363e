"""Straight-line visibility on a flat surface by unfolding triangles along beams.

A beam is an angular window of directions from a source, carried through a
sequence of developed triangles. Whenever a vertex falls strictly inside the
window it is visible (a saddle connection when the source is a vertex) and
the window splits in two. Targets (arbitrary points) are reported the same
way. All geodesics between points pass through vertices only, so visibility
plus shortest paths over vertices gives exact distances.
"""
from __future__ import annotations

import heapq
import math
import cmath
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, InputError

EPS = 1e-11
MAX_BEAMS = 2_000_000


def _cross(a, b):
    return a.real * b.imag - a.imag * b.real


def _unit(z):
    return z / abs(z)


def _inside(lo, hi, d):
    """Strictly inside the ccw window (lo, hi) of unit directions, window narrower than pi."""
    return _cross(lo, d) > EPS and _cross(d, hi) > EPS


def _seg_dist(s, a, b):
    ab = b - a
    t = ((s - a) * ab.conjugate()).real / (abs(ab) ** 2)
    t = min(1.0, max(0.0, t))
    return abs(s - (a + t * ab))


@dataclass(frozen=True)
class Hit:
    kind: str          # "vertex" or "target"
    index: int         # vertex label or target index
    vector: complex    # developed displacement from the source
    crossings: tuple   # half-edges crossed, each as (triangle, edge) exited
    corner: tuple | None = None   # arrival corner for vertices
    local: float = 0.0            # angle inside the arrival corner, from its first edge


@dataclass(frozen=True)
class SaddleConnection:
    """Straight segment between two vertices with no vertex in its interior."""
    start: int
    end: int
    vector: complex          # in the frame of the start corner's triangle
    start_corner: tuple
    start_local: float       # angle inside the start corner, from its first edge
    end_corner: tuple
    end_local: float
    crossings: tuple

    @property
    def length(self) -> float:
        return abs(self.vector)

    def to_json(self):
        return {"start": self.start, "end": self.end, "length": self.length,
                "vector": [self.vector.real, self.vector.imag],
                "start_corner": list(self.start_corner), "crossings": [list(h) for h in self.crossings]}


class Unfolder:
    """Precomputed triangle data for repeated unfolding on one surface."""

    def __init__(self, surface):
        self.s = surface
        self.P = [[complex(z) for z in row] for row in surface.tri]
        self.adj = [[(int(h[0]), int(h[1])) for h in row] for row in surface.adj]
        self.lab = [[int(x) for x in row] for row in surface.lab]
        self.maps = {}
        for t in range(len(self.P)):
            for e in range(3):
                t2, e2 = self.adj[t][e]
                v = self.P[t][(e + 1) % 3] - self.P[t][e]
                v2 = self.P[t2][(e2 + 1) % 3] - self.P[t2][e2]
                r = _unit(-v / v2)
                self.maps[(t, e)] = (r, self.P[t][(e + 1) % 3] - r * self.P[t2][e2])
        self.targets_in = {}

    def set_targets(self, points):
        """points: list of (triangle, complex coordinate)."""
        self.targets = list(points)
        self.targets_in = {}
        for k, (t, p) in enumerate(self.targets):
            self.targets_in.setdefault(t, []).append((k, complex(p)))

    # ------------------------------------------------------------------ core
    def _beams_from(self, s, t, e, lo, hi, radius, out, crossings, R=1 + 0j, B=0j, budget=None):
        """Push a beam exiting triangle t through edge e (coordinates of t map to the plane by R, B)."""
        stack = [(t, e, R, B, lo, hi, crossings)]
        count = 0
        while stack:
            t, e, R, B, lo, hi, cr = stack.pop()
            count += 1
            if count > MAX_BEAMS:
                raise DegeneracyError("unfolding exceeded its beam budget")
            r, b = self.maps[(t, e)]
            t2, e2 = self.adj[t][e]
            R2, B2 = R * r, R * b + B
            cr2 = cr + ((t, e),)
            pts = self.P[t2]
            Pp = R2 * pts[e2] + B2                # hi side
            Qp = R2 * pts[(e2 + 1) % 3] + B2      # lo side
            w = (e2 + 2) % 3
            W = R2 * pts[w] + B2
            # targets inside this triangle
            for k, q in self.targets_in.get(t2, ()):
                z = R2 * q + B2
                d = z - s
                if abs(d) <= radius and abs(d) > 0 and _inside(lo, hi, _unit(d)):
                    out.append(Hit("target", k, d, cr2))
            dW = W - s
            uW = _unit(dW)
            if _inside(lo, hi, uW):
                if abs(dW) <= radius:
                    back = s - W
                    first = Pp - W
                    local = abs(cmath.phase(back / first))
                    out.append(Hit("vertex", self.lab[t2][w], dW, cr2, (t2, w), local))
                lo_a, hi_a = lo, uW     # through Q -> W
                lo_b, hi_b = uW, hi     # through W -> P
            elif _cross(uW, hi) <= EPS and _cross(lo, uW) > EPS:
                # W at or beyond hi: only the Q -> W side sees the window
                lo_a, hi_a, lo_b, hi_b = lo, hi, None, None
            else:
                lo_a, hi_a, lo_b, hi_b = None, None, lo, hi
            if lo_a is not None and _seg_dist(s, Qp, W) <= radius:
                stack.append((t2, (e2 + 1) % 3, R2, B2, lo_a, hi_a, cr2))
            if lo_b is not None and _seg_dist(s, W, Pp) <= radius:
                stack.append((t2, w, R2, B2, lo_b, hi_b, cr2))
        return count

    def from_corner(self, t, i, radius):
        """Everything visible from the vertex at corner (t, i), in the frame of triangle t."""
        pts = self.P[t]
        s = pts[i]
        out = []
        a, b = pts[(i + 1) % 3], pts[(i + 2) % 3]
        if abs(a - s) <= radius:
            j = (i + 1) % 3
            out.append(Hit("vertex", self.lab[t][j], a - s, (), (t, j), self._corner_angle(t, j)))
        for k, q in self.targets_in.get(t, ()):
            if abs(q - s) > 0 and abs(q - s) <= radius:
                out.append(Hit("target", k, q - s, ()))
        if _seg_dist(s, a, b) <= radius:
            self._beams_from(s, t, (i + 1) % 3, _unit(a - s), _unit(b - s), radius, out, ())
        return out

    def from_point(self, t, p, radius):
        pts = self.P[t]
        s = complex(p)
        out = []
        for k, q in self.targets_in.get(t, ()):
            if abs(q - s) > 0 and abs(q - s) <= radius:
                out.append(Hit("target", k, q - s, ()))
        for i in range(3):
            d = pts[i] - s
            if abs(d) <= radius:
                out.append(Hit("vertex", self.lab[t][i], d, (), (t, i),
                               abs(cmath.phase((s - pts[i]) / (pts[(i + 1) % 3] - pts[i])))))
        for e in range(3):
            a, b = pts[e], pts[(e + 1) % 3]
            if _seg_dist(s, a, b) <= radius:
                self._beams_from(s, t, e, _unit(a - s), _unit(b - s), radius, out, ())
        return out

    def _corner_angle(self, t, i):
        p = self.P[t]
        return abs(cmath.phase((p[(i - 1) % 3] - p[i]) / (p[(i + 1) % 3] - p[i])))

    def corners(self):
        return [(t, i) for t in range(len(self.P)) for i in range(3)]


def saddle_connections(surface, radius, start=None, unfolder=None):
    """All saddle connections of length at most radius (from one vertex label, or all)."""
    u = unfolder or Unfolder(surface)
    if unfolder is None:
        u.set_targets([])
    out = []
    for t, i in u.corners():
        L = u.lab[t][i]
        if start is not None and L != start:
            continue
        for h in u.from_corner(t, i, radius):
            if h.kind != "vertex":
                continue
            local = abs(cmath.phase(h.vector / (u.P[t][(i + 1) % 3] - u.P[t][i])))
            out.append(SaddleConnection(L, h.index, h.vector, (t, i), local, h.corner, h.local, h.crossings))
    out.sort(key=lambda c: (c.length, c.start, c.start_corner))
    return out


def distance_matrix(surface, points, radius):
    """Exact geodesic distances between points and vertices, valid for all distances up to radius.

    points: list of (triangle, coordinate). Returns (D, labels) where rows and
    columns are the points followed by the vertex labels; pairs farther than
    radius come back as inf.
    """
    u = Unfolder(surface)
    u.set_targets(points)
    verts = list(surface.vertices)
    vidx = {L: len(points) + k for k, L in enumerate(verts)}
    N = len(points) + len(verts)
    W = [dict() for _ in range(N)]

    def add(a, b, w):
        if w < W[a].get(b, math.inf):
            W[a][b] = w
            W[b][a] = w

    for k, (t, p) in enumerate(points):
        for h in u.from_point(t, p, radius):
            add(k, h.index if h.kind == "target" else vidx[h.index], abs(h.vector))
    for t, i in u.corners():
        src = vidx[u.lab[t][i]]
        for h in u.from_corner(t, i, radius):
            if h.kind == "vertex":
                add(src, vidx[h.index], abs(h.vector))
    D = np.full((N, N), math.inf)
    for a in range(N):
        D[a, a] = 0.0
        dist = {a: 0.0}
        pq = [(0.0, a)]
        while pq:
            d, x = heapq.heappop(pq)
            if d > dist.get(x, math.inf):
                continue
            D[a, x] = d
            # geodesics only turn at vertices
            if x != a and x < len(points):
                continue
            for y, w in W[x].items():
                nd = d + w
                if nd < dist.get(y, math.inf) and nd <= radius * (1 + 1e-12) + 1e-12:
                    dist[y] = nd
                    heapq.heappush(pq, (nd, y))
    return D, verts


def locate_point(surface, t, target):
    """Walk from the centroid of triangle t to a point given in t's coordinates."""
    m = surface._mesh
    c = sum(m.P[t]) / 3
    try:
        t_end, p_end, *_ = m.walk(t, c, complex(target) - c)
    except Exception:
        return None
    return t_end, p_end
