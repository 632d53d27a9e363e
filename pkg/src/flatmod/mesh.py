"""Mutable half-edge triangulation used by constructions, flips and surgeries.

A half-edge is the side of triangle t running from corner e to corner e+1.
Every half-edge carries a persistent integer id that survives rewiring, so
chains of edges can be tracked while the mesh is being edited. When an edge
is split, the piece touching the original start keeps the id.

Each triangle has its own planar coordinates; the gluing rotation across an
edge is implied by the two edge vectors (rot = -v / v_partner).
"""
from __future__ import annotations

import cmath
import math

from .errors import DegeneracyError, InputError, PreconditionError

TWO_PI = 2 * math.pi
ANG_TOL = 1e-9
SNAP = 1e-9          # relative offset below which a segment is moved onto a nearby edge


def cross(a: complex, b: complex) -> float:
    return a.real * b.imag - a.imag * b.real


def dot(a: complex, b: complex) -> float:
    return a.real * b.real + a.imag * b.imag


def signed_area(a: complex, b: complex, c: complex) -> float:
    return 0.5 * cross(b - a, c - a)


def ear_clip(pts: list[complex], tol: float = 1e-12) -> list[tuple[int, int, int]]:
    """Triangulate a simple counterclockwise polygon. Collinear vertices are allowed."""
    n = len(pts)
    if n < 3:
        raise InputError("polygon needs at least three vertices")
    scale = max(abs(p - pts[0]) for p in pts) or 1.0
    eps = tol * scale * scale
    idx = list(range(n))
    tris = []
    while len(idx) > 3:
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if cross(b - a, c - b) <= eps:
                continue
            blocked = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                q = pts[j]
                if min(abs(q - a), abs(q - b), abs(q - c)) < 1e-12 * scale:
                    continue
                if cross(b - a, q - a) >= -eps and cross(c - b, q - b) >= -eps and cross(a - c, q - c) >= -eps:
                    blocked = True
                    break
            if not blocked:
                tris.append((i0, i1, i2))
                del idx[k]
                break
        else:
            raise DegeneracyError("ear clipping failed: polygon is degenerate or not simple")
    a, b, c = (pts[i] for i in idx)
    if signed_area(a, b, c) <= eps:
        raise DegeneracyError("ear clipping produced a degenerate triangle")
    tris.append(tuple(idx))
    return tris


class Mesh:
    def __init__(self):
        self.P: list[list[complex]] = []
        self.adj: list[list] = []
        self.lab: list[list[int]] = []
        self.eid: list[list[int]] = []
        self.alive: list[bool] = []
        self.where: dict[int, tuple[int, int]] = {}
        self.pieces: dict[int, list[int]] = {}
        self.marked: set[int] = set()
        self.frozen: set[int] = set()      # half-edge ids that sliver repair must not flip
        self.next_label = 0
        self.next_eid = 0

    # ------------------------------------------------------------------ basics
    def copy(self) -> "Mesh":
        m = Mesh()
        m.P = [list(p) for p in self.P]
        m.adj = [list(a) for a in self.adj]
        m.lab = [list(l) for l in self.lab]
        m.eid = [list(x) for x in self.eid]
        m.alive = list(self.alive)
        m.where = dict(self.where)
        m.pieces = {k: list(v) for k, v in self.pieces.items()}
        m.marked = set(self.marked)
        m.frozen = set(self.frozen)
        m.next_label = self.next_label
        m.next_eid = self.next_eid
        return m

    def new_label(self) -> int:
        self.next_label += 1
        return self.next_label - 1

    def new_eid(self) -> int:
        self.next_eid += 1
        return self.next_eid - 1

    def _write(self, t, pts, labs, eids):
        pts = [complex(p) for p in pts]
        if signed_area(*pts) <= 0:
            raise DegeneracyError("triangle is degenerate or clockwise")
        eids = [self.new_eid() if x is None else x for x in eids]
        if t is None:
            self.P.append(pts)
            self.adj.append([None, None, None])
            self.lab.append(list(labs))
            self.eid.append(eids)
            self.alive.append(True)
            t = len(self.P) - 1
        else:
            self.P[t] = pts
            self.adj[t] = [None, None, None]
            self.lab[t] = list(labs)
            self.eid[t] = eids
        for e, x in enumerate(eids):
            self.where[x] = (t, e)
        for L in labs:
            self.next_label = max(self.next_label, L + 1)
        return t

    def add_triangle(self, pts, labs, eids=(None, None, None)) -> int:
        return self._write(None, pts, labs, list(eids))

    def triangles(self):
        return [t for t, a in enumerate(self.alive) if a]

    def pos(self, x: int) -> tuple[int, int]:
        h = self.where.get(x)
        if h is None or not self.alive[h[0]] or self.eid[h[0]][h[1]] != x:
            raise DegeneracyError(f"half-edge id {x} no longer exists")
        return h

    def expand(self, ids) -> list[int]:
        """Replace ids by the ordered list of their current pieces."""
        out = []
        for x in ids:
            out.append(x)
            for c in reversed(self.pieces.get(x, [])):
                out.extend(self.expand([c]))
        return out

    def vec(self, t: int, e: int) -> complex:
        p = self.P[t]
        return p[(e + 1) % 3] - p[e]

    def length(self, x: int) -> float:
        return abs(self.vec(*self.pos(x)))

    def partner(self, h):
        return self.adj[h[0]][h[1]]

    def partner_id(self, x: int):
        h = self.partner(self.pos(x))
        return None if h is None else self.eid[h[0]][h[1]]

    def link(self, h1, h2):
        self.adj[h1[0]][h1[1]] = h2
        self.adj[h2[0]][h2[1]] = h1

    def glue(self, h1, h2, tol=1e-7):
        """Glue two free half-edges of equal length."""
        l1, l2 = abs(self.vec(*h1)), abs(self.vec(*h2))
        if abs(l1 - l2) > tol * max(1.0, l1):
            raise InputError(f"glued edges {h1} and {h2} differ in length ({l1} vs {l2})")
        if self.partner(h1) is not None or self.partner(h2) is not None:
            raise InputError("edge glued twice")
        self.link(h1, h2)

    def corner_angle(self, t: int, i: int) -> float:
        p = self.P[t]
        return abs(cmath.phase((p[(i - 1) % 3] - p[i]) / (p[(i + 1) % 3] - p[i])))

    def scale(self) -> float:
        ls = [abs(self.vec(t, e)) for t in self.triangles() for e in range(3)]
        return max(ls) if ls else 1.0

    def start_label(self, x: int) -> int:
        t, e = self.pos(x)
        return self.lab[t][e]

    def end_label(self, x: int) -> int:
        t, e = self.pos(x)
        return self.lab[t][(e + 1) % 3]

    # -------------------------------------------------------------- frames
    def frame_map(self, h):
        """Affine map x -> r x + b taking the partner triangle's coordinates into h's triangle."""
        t, e = h
        t2, e2 = self.partner(h)
        r = -self.vec(t, e) / self.vec(t2, e2)
        r /= abs(r)
        b = self.P[t][(e + 1) % 3] - r * self.P[t2][e2]
        return r, b

    # -------------------------------------------------------------- vertex fans
    def ccw_next(self, c):
        t, i = c
        return self.adj[t][(i - 1) % 3]

    def cw_next(self, c):
        h = self.adj[c[0]][c[1]]
        return None if h is None else (h[0], (h[1] + 1) % 3)

    def fan(self, c):
        """Corners around the vertex of corner c, counterclockwise, and whether the fan closes.

        Open fans (boundary vertices) start at their clockwise-most corner.
        """
        seq = [c]
        cur = c
        while True:
            nxt = self.ccw_next(cur)
            if nxt is None:
                break
            if nxt == c:
                return seq, True
            seq.append(nxt)
            cur = nxt
            if len(seq) > 100000:
                raise DegeneracyError("vertex fan does not close")
        back = []
        cur = c
        while True:
            prv = self.cw_next(cur)
            if prv is None:
                break
            back.append(prv)
            cur = prv
        return back[::-1] + seq, False

    def vertex_angle(self, c) -> float:
        cs, _ = self.fan(c)
        return sum(self.corner_angle(*x) for x in cs)

    def corner_at_angle(self, c, phi: float):
        """Corner containing the direction at angle phi ccw from corner c's first edge.

        Returns (corner, local angle inside that corner). Directions within
        ANG_TOL of an edge snap onto it (local angle 0).
        """
        cs, closed = self.fan(c)
        k0 = cs.index(c)
        order = cs[k0:] + cs[:k0] if closed else cs[k0:]
        angs = [self.corner_angle(*x) for x in order]
        total = sum(angs)
        if closed:
            phi = phi % total
            if phi > total - ANG_TOL:
                phi = 0.0
        elif phi < -ANG_TOL or phi > total + ANG_TOL:
            raise PreconditionError("direction leaves the surface through its boundary")
        acc = 0.0
        for k, (cc, a) in enumerate(zip(order, angs)):
            if phi < acc + a - ANG_TOL:
                loc = phi - acc
                return cc, (0.0 if loc < ANG_TOL else loc)
            if phi <= acc + a + ANG_TOL:
                if k + 1 < len(order):
                    return order[k + 1], 0.0
                if closed:
                    return order[0], 0.0
                return cc, a
            acc += a
        raise PreconditionError("direction outside the available sectors")

    def angle_between(self, c_from, c_to) -> float:
        """Angle from corner c_from's first edge ccw to corner c_to's first edge."""
        cs, closed = self.fan(c_from)
        k0 = cs.index(c_from)
        order = cs[k0:] + cs[:k0] if closed else cs[k0:]
        acc = 0.0
        for cc in order:
            if cc == c_to:
                return acc
            acc += self.corner_angle(*cc)
        raise PreconditionError("corners belong to different vertices")

    # -------------------------------------------------------------- walking
    def walk(self, t: int, p: complex, d: complex):
        """Follow the straight segment from p (in triangle t) along d.

        Returns (t_end, p_end, R, B, crossings) where x -> R x + B maps the
        starting frame to the final one and crossings lists the half-edges left
        through. Raises DegeneracyError if the segment meets a vertex before its end.
        """
        R, B = 1 + 0j, 0j
        crossings = []
        rem = d
        scale = max(abs(self.vec(t, e)) for e in range(3))
        for _ in range(1000000):
            pts = self.P[t]
            best = None
            for e in range(3):
                a, b = pts[e], pts[(e + 1) % 3]
                den = cross(rem, b - a)
                if abs(den) < 1e-300:
                    continue
                s = cross(a - p, b - a) / den
                u = cross(a - p, rem) / den
                if -1e-9 <= u <= 1 + 1e-9 and (best is None or s > best[0]):
                    best = (s, u, e)
            if best is None:
                raise DegeneracyError("walk lost its triangle")
            s, u, e = best
            if s >= 1 - 1e-12:
                return t, p + rem, R, B, crossings
            a, b = pts[e], pts[(e + 1) % 3]
            if min(u, 1 - u) * abs(b - a) < 1e-10 * scale:
                raise DegeneracyError("walk passes through a vertex")
            h2 = self.adj[t][e]
            if h2 is None:
                raise PreconditionError("walk leaves the surface through a boundary edge")
            crossings.append((t, e))
            x = p + s * rem
            r, b0 = self.frame_map(h2)
            p = r * x + b0
            rem = r * rem * (1 - s)
            R, B = r * R, r * B + b0
            t = h2[0]
        raise DegeneracyError("walk did not terminate")

    def locate(self, t: int, q: complex):
        """Triangle containing q (given in t's frame); returns (t', q', R, B) with q' = R q + B."""
        c = sum(self.P[t]) / 3
        t2, q2, R, B, _ = self.walk(t, c, q - c)
        return t2, q2, R, B

    # -------------------------------------------------------------- rewiring helper
    def _rewire(self, moves: dict, old_partner: dict):
        """moves maps old positions to new ones; reconnect their former partners."""
        for old, new in moves.items():
            op = old_partner[old]
            if op is None:
                self.adj[new[0]][new[1]] = None
                continue
            npn = moves.get(op, op)
            self.link(new, npn)

    # -------------------------------------------------------------- local edits
    def split_triangle(self, t: int, p: complex, label: int | None = None):
        """Insert a vertex inside t. Returns (label, spokes) with spokes[i] the id of corner i -> new vertex."""
        L = self.new_label() if label is None else label
        A, Bv, C = self.P[t]
        lA, lB, lC = self.lab[t]
        e0, e1, e2 = self.eid[t]
        for a, b in ((A, Bv), (Bv, C), (C, A)):
            if signed_area(a, b, p) <= 0:
                raise DegeneracyError("split point not inside triangle")
        old_partner = {(t, k): self.adj[t][k] for k in range(3)}
        sBp, spB, sCp, spC, sAp, spA = (self.new_eid() for _ in range(6))
        self._write(t, [A, Bv, p], [lA, lB, L], [e0, sBp, spA])
        t1 = self._write(None, [Bv, C, p], [lB, lC, L], [e1, sCp, spB])
        t2 = self._write(None, [C, A, p], [lC, lA, L], [e2, sAp, spC])
        self._rewire({(t, 0): (t, 0), (t, 1): (t1, 0), (t, 2): (t2, 0)}, old_partner)
        self.link((t, 1), (t1, 2))
        self.link((t1, 1), (t2, 2))
        self.link((t2, 1), (t, 2))
        return L, {0: sAp, 1: sBp, 2: sCp}

    def split_edge(self, t: int, e: int, s: float, label: int | None = None):
        """Insert a vertex at fraction s along half-edge (t, e).

        Returns (label, spoke) where spoke is the id of the half-edge from the
        opposite corner of t to the new vertex.
        """
        if not 0 < s < 1:
            raise DegeneracyError("edge split parameter outside (0, 1)")
        L = self.new_label() if label is None else label
        h2 = self.adj[t][e]
        if h2 is not None and h2[0] == t:
            raise DegeneracyError("cannot split an edge glued to its own triangle")
        e1, e2 = (e + 1) % 3, (e + 2) % 3
        pts = self.P[t]
        A, Bv, C = pts[e], pts[e1], pts[e2]
        lA, lB, lC = self.lab[t][e], self.lab[t][e1], self.lab[t][e2]
        iAB, iBC, iCA = self.eid[t][e], self.eid[t][e1], self.eid[t][e2]
        X = A + s * (Bv - A)
        old_partner = {(t, k): self.adj[t][k] for k in range(3)}
        if h2 is not None:
            u, f = h2
            f1, f2 = (f + 1) % 3, (f + 2) % 3
            q = self.P[u]
            B2, A2, D = q[f], q[f1], q[f2]
            lD = self.lab[u][f2]
            jBA, jAD, jDB = self.eid[u][f], self.eid[u][f1], self.eid[u][f2]
            X2 = B2 + (1 - s) * (A2 - B2)
            for k in range(3):
                old_partner[(u, k)] = self.adj[u][k]
            old_partner[(t, e)] = None
            old_partner[(u, f)] = None
        nXB = self.new_eid()
        sXC, sCX = self.new_eid(), self.new_eid()
        self.pieces.setdefault(iAB, []).append(nXB)
        if iAB in self.frozen:
            self.frozen.add(nXB)
        self._write(t, [A, X, C], [lA, L, lC], [iAB, sXC, iCA])
        tn = self._write(None, [X, Bv, C], [L, lB, lC], [nXB, iBC, sCX])
        moves = {(t, e): (t, 0), (t, e1): (tn, 1), (t, e2): (t, 2)}
        if h2 is not None:
            nXA = self.new_eid()
            sXD, sDX = self.new_eid(), self.new_eid()
            self.pieces.setdefault(jBA, []).append(nXA)
            if jBA in self.frozen:
                self.frozen.add(nXA)
            self._write(u, [B2, X2, D], [lB, L, lD], [jBA, sXD, jDB])
            un = self._write(None, [X2, A2, D], [L, lA, lD], [nXA, jAD, sDX])
            moves.update({(u, f): (u, 0), (u, f1): (un, 1), (u, f2): (u, 2)})
        self._rewire(moves, old_partner)
        self.link((t, 1), (tn, 2))
        if h2 is not None:
            self.link((u, 1), (un, 2))
            self.link((t, 0), (un, 0))
            self.link((tn, 0), (u, 0))
        return L, sCX

    def flip(self, t: int, e: int) -> bool:
        h2 = self.adj[t][e]
        if h2 is None or h2[0] == t:
            return False
        u, f = h2
        e1, e2 = (e + 1) % 3, (e + 2) % 3
        f1, f2 = (f + 1) % 3, (f + 2) % 3
        r, b = self.frame_map((t, e))
        pts = self.P[t]
        A, Bv, C = pts[e], pts[e1], pts[e2]
        D = r * self.P[u][f2] + b
        sc = max(abs(Bv - A), abs(C - A), abs(D - A))
        if signed_area(C, A, D) <= 1e-12 * sc * sc or signed_area(D, Bv, C) <= 1e-12 * sc * sc:
            return False
        old = [(t, e1), (t, e2), (u, f1), (u, f2)]
        old_partner = {h: self.adj[h[0]][h[1]] for h in old}
        if any(old_partner[h] in ((t, e), (u, f)) for h in old):
            return False
        lA, lB, lC = self.lab[t][e], self.lab[t][e1], self.lab[t][e2]
        lD = self.lab[u][f2]
        iBC, iCA = self.eid[t][e1], self.eid[t][e2]
        jAD, jDB = self.eid[u][f1], self.eid[u][f2]
        self._write(t, [C, A, D], [lC, lA, lD], [iCA, jAD, None])
        self._write(u, [D, Bv, C], [lD, lB, lC], [jDB, iBC, None])
        self._rewire({(t, e2): (t, 0), (u, f1): (t, 1), (u, f2): (u, 0), (t, e1): (u, 1)}, old_partner)
        self.link((t, 2), (u, 2))
        return True

    def is_frozen(self, t: int, e: int) -> bool:
        h = self.adj[t][e]
        return self.eid[t][e] in self.frozen or (h is not None and self.eid[h[0]][h[1]] in self.frozen)

    def legalize_around(self, L, cap=200, tol=1e-10):
        """Flip non-frozen edges facing vertex L until they pass the incircle test (removes slivers at L)."""
        for _ in range(cap):
            cs, _ = self.fan(self.vertex_corners()[L])
            for t, i in cs:
                e = (i + 1) % 3
                h = self.adj[t][e]
                if h is None or h[0] == t or self.is_frozen(t, e):
                    continue
                if self.corner_angle(t, i) + self.corner_angle(h[0], (h[1] + 2) % 3) > math.pi + tol \
                        and self.flip(t, e):
                    break
            else:
                return

    def delete(self, tris):
        tris = set(tris)
        for t in tris:
            for e in range(3):
                h = self.adj[t][e]
                if h is not None and h[0] not in tris:
                    self.adj[h[0]][h[1]] = None
                self.adj[t][e] = None
            self.alive[t] = False

    def unglue(self, x: int):
        h = self.pos(x)
        h2 = self.partner(h)
        self.adj[h[0]][h[1]] = None
        if h2 is not None:
            self.adj[h2[0]][h2[1]] = None
        return None if h2 is None else self.eid[h2[0]][h2[1]]

    def remove_vertex(self, c) -> None:
        """Remove a regular interior vertex by re-triangulating its developed star."""
        cs, closed = self.fan(c)
        if not closed:
            raise PreconditionError("cannot remove a boundary vertex")
        if abs(sum(self.corner_angle(*x) for x in cs) - TWO_PI) > 1e-7:
            raise PreconditionError("only regular vertices can be removed")
        tris = [x[0] for x in cs]
        if len(set(tris)) != len(tris):
            raise DegeneracyError("vertex star is not embedded")
        L = self.lab[c[0]][c[1]]
        R, B = 1 + 0j, 0j
        poly, outer, labs = [], [], []
        for k, (t, i) in enumerate(cs):
            if k > 0:
                tp, ip = cs[k - 1]
                r, b = self.frame_map((tp, (ip - 1) % 3))
                R, B = R * r, R * b + B
            poly.append(R * self.P[t][(i + 1) % 3] + B)
            outer.append((t, (i + 1) % 3))
            labs.append(self.lab[t][(i + 1) % 3])
        if L in labs:
            raise DegeneracyError("vertex is joined to itself")
        ears = ear_clip(poly)
        old_partner = {h: self.adj[h[0]][h[1]] for h in outer}
        outer_ids = [self.eid[h[0]][h[1]] for h in outer]
        if any(op is not None and op[0] in tris and op not in outer for op in old_partner.values()):
            raise DegeneracyError("vertex star folds onto itself")
        for t in tris:
            self.alive[t] = False
        m = len(poly)
        owner = {}
        moves = {}
        for (a, b, c2) in ears:
            ids = []
            for x, y in ((a, b), (b, c2), (c2, a)):
                ids.append(outer_ids[x] if (y - x) % m == 1 else None)
            nt = self.add_triangle([poly[a], poly[b], poly[c2]], [labs[a], labs[b], labs[c2]], ids)
            for e, (x, y) in enumerate(((a, b), (b, c2), (c2, a))):
                if (y - x) % m == 1:
                    moves[outer[x]] = (nt, e)
                elif (y, x) in owner:
                    self.link((nt, e), owner.pop((y, x)))
                else:
                    owner[(x, y)] = (nt, e)
        if owner:
            raise DegeneracyError("star re-triangulation left unmatched diagonals")
        self._rewire(moves, old_partner)

    # -------------------------------------------------------------- segments
    def insert_segment(self, ref: int, phi: float, length: float, tol: float = 1e-9):
        """Make the geodesic segment leaving the start of half-edge ``ref`` a chain of edges.

        The direction is ``phi`` radians counterclockwise from ``ref``. The
        segment may only pass through vertices it creates itself; meeting any
        other vertex before its end raises PreconditionError.

        Returns (chain, end_ref, back_angle): chain lists the ids of the forward
        half-edges (triangle on the left of the segment); at the end vertex the
        reversed segment direction is ``back_angle`` ccw from ``end_ref``.
        """
        if length <= 0:
            raise PreconditionError("segment length must be positive")
        sc = self.scale()
        chain = []
        rem = length
        c = self.pos(ref)
        while True:
            (t, i), local = self.corner_at_angle(c, phi)
            # long segments grazing an edge would cross it near its end; run along the edge instead
            if rem < 1e3 * SNAP * sc:
                pass
            elif 0.0 < local and math.sin(local) * rem < SNAP * sc:
                local = 0.0
            elif local > 0.0 and math.sin(self.corner_angle(t, i) - local) * rem < SNAP * sc:
                nxt = self.ccw_next((t, i))
                if nxt is not None:
                    (t, i), local = nxt, 0.0
            pts = self.P[t]
            A = pts[i]
            u = self.vec(t, i)
            if local == 0.0:
                ln = abs(u)
                if ln <= rem + tol * sc:
                    chain.append(self.eid[t][i])
                    rem -= ln
                    end = (t, (i + 1) % 3)
                    if rem <= tol * sc:
                        return self._freeze(chain), self.eid[end[0]][end[1]], self.corner_angle(*end)
                    raise PreconditionError("segment passes through an existing vertex")
                orig = self.eid[t][i]
                self.split_edge(t, i, rem / ln)
                # the chain owns only the first piece: give it a fresh id and let the old id
                # name the remainder, so expanding either one stays correct
                fresh = self.pieces[orig].pop()
                rest = self.where[fresh]
                self.eid[t][0], self.eid[rest[0]][rest[1]] = fresh, orig
                self.where[fresh], self.where[orig] = (t, 0), rest
                chain.append(fresh)
                t0, e0 = self.pos(chain[-1])
                end = (t0, (e0 + 1) % 3)
                return self._freeze(chain), self.eid[end[0]][end[1]], self.corner_angle(*end)
            d = cmath.exp(1j * local) * u / abs(u)
            Bp, Cp = pts[(i + 1) % 3], pts[(i + 2) % 3]
            den = cross(d, Cp - Bp)
            s_ray = cross(Bp - A, Cp - Bp) / den
            v = cross(Bp - A, d) / den
            elen = abs(Cp - Bp)
            if s_ray > rem + tol * sc:
                Lp, spokes = self.split_triangle(t, A + d * rem)
                chain.append(spokes[i])
                self._freeze(chain)
                self.legalize_around(Lp)
                t0, e0 = self.pos(chain[-1])
                end = (t0, (e0 + 1) % 3)
                return self._freeze(chain), self.eid[end[0]][end[1]], self.corner_angle(*end)
            if min(v, 1 - v) * elen < tol * sc:
                raise PreconditionError("segment passes through an existing vertex")
            _, spoke = self.split_edge(t, (i + 1) % 3, v)
            chain.append(spoke)
            rem -= s_ray
            t0, e0 = self.pos(spoke)
            end = (t0, (e0 + 1) % 3)
            if rem <= tol * sc:
                return self._freeze(chain), self.eid[end[0]][end[1]], self.corner_angle(*end)
            # continue straight through the new (regular) vertex
            c = end
            phi = self.corner_angle(*end) - math.pi

    def _freeze(self, chain):
        for x in self.expand(chain):
            self.frozen.add(x)
            h = self.partner(self.pos(x))
            if h is not None:
                self.frozen.add(self.eid[h[0]][h[1]])
        return chain

    def insert_polyline(self, ref: int, phi: float, legs):
        """Insert a path of segments. legs is a list of (length, turn) pairs.

        Each leg after the first leaves at ``turn`` radians clockwise from the
        reversed direction of the previous leg (the interior angle when the
        region to be cut lies on the left). The first leg's turn is ignored.
        Returns the list of chains and the final (end_ref, back_angle).
        """
        chains = []
        cur_ref, cur_phi = ref, phi
        end = None
        for k, (ln, turn) in enumerate(legs):
            if k > 0:
                end_ref, back = end
                cur_ref, cur_phi = end_ref, back - turn
            ch, end_ref, back = self.insert_segment(cur_ref, cur_phi, ln)
            chains.append(ch)
            end = (end_ref, back)
        return chains, end

    # -------------------------------------------------------------- boundary chains
    def _refine(self, chain, cuts, tol):
        out = []
        acc = 0.0
        for x in self.expand(chain):
            cur = x
            while True:
                ln = self.length(cur)
                inner = sorted(c for c in cuts if acc + tol < c < acc + ln - tol)
                if not inner:
                    out.append(cur)
                    acc += ln
                    break
                t, e = self.pos(cur)
                if self.adj[t][e] is not None:
                    raise PreconditionError("refining an edge that is still glued")
                self.split_edge(t, e, (inner[0] - acc) / ln)
                out.append(cur)
                acc += self.length(cur)
                cur = self.pieces[cur][-1]
        return out

    def glue_chains(self, c1, c2, tol=1e-7):
        """Glue boundary paths c1 (from P to Q) and c2 (from Q' to P') with P=P', Q=Q'.

        Both are lists of half-edge ids whose triangles lie on their left;
        edges are subdivided so that breakpoints match, then paired.
        """
        c1, c2 = self.expand(c1), self.expand(c2)
        l1 = [self.length(x) for x in c1]
        l2 = [self.length(x) for x in c2]
        T1, T2 = sum(l1), sum(l2)
        sc = self.scale()
        if abs(T1 - T2) > tol * max(1.0, T1):
            raise PreconditionError(f"glued boundary paths differ in length: {T1} vs {T2}")
        cum1 = [sum(l1[:k + 1]) for k in range(len(l1) - 1)]
        cum2 = [sum(l2[:k + 1]) for k in range(len(l2) - 1)]
        etol = 1e-9 * sc
        c1 = self._refine(c1, [T1 - x for x in cum2], etol)
        c2 = self._refine(c2, [T2 - x for x in cum1], etol)
        if len(c1) != len(c2):
            raise DegeneracyError("boundary refinement produced mismatched pieces")
        for a, b in zip(c1, reversed(c2)):
            ha, hb = self.pos(a), self.pos(b)
            la, lb = abs(self.vec(*ha)), abs(self.vec(*hb))
            if abs(la - lb) > tol * max(1.0, la):
                raise DegeneracyError("glued pieces differ in length")
            if self.partner(ha) is not None or self.partner(hb) is not None:
                raise PreconditionError("edge already glued")
            self.link(ha, hb)

    def region_left_of(self, boundary_ids, extra_walls=()):
        """Triangles reachable from the left of the given half-edges without crossing them."""
        walls = set()
        seeds = []
        for x in self.expand(boundary_ids):
            h = self.pos(x)
            seeds.append(h[0])
        for x in self.expand(list(boundary_ids) + list(extra_walls)):
            h = self.pos(x)
            walls.add(h)
            p = self.partner(h)
            if p is not None:
                walls.add(p)
        region = set()
        stack = list(seeds)
        while stack:
            t = stack.pop()
            if t in region:
                continue
            region.add(t)
            for e in range(3):
                if (t, e) in walls:
                    continue
                h = self.adj[t][e]
                if h is not None and h[0] not in region:
                    stack.append(h[0])
        return region

    def outer_side(self, chain):
        """Ids of the partners of a chain, in reversed order (the path on the other side)."""
        out = []
        for x in reversed(self.expand(chain)):
            p = self.partner_id(x)
            if p is None:
                raise PreconditionError("chain has no other side")
            out.append(p)
        return out

    def slit(self, chain):
        """Cut along a chain; returns (left side, right side) as boundary paths."""
        ids = self.expand(chain)
        right = self.outer_side(ids)
        for x in ids:
            self.unglue(x)
        return ids, right

    # -------------------------------------------------------------- cleanup
    def relabel_classes(self):
        """Recompute vertex classes from the gluing; labels that now name several points are split."""
        parent = {}

        def find(x):
            while parent.setdefault(x, x) != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

        for t in self.triangles():
            for e in range(3):
                find((t, e))
                h = self.adj[t][e]
                if h is not None:
                    union((t, e), (h[0], (h[1] + 1) % 3))
                    union((t, (e + 1) % 3), h)
        classes = {}
        for t in self.triangles():
            for i in range(3):
                classes.setdefault(find((t, i)), []).append((t, i))
        used, marked = set(), set()
        for root in sorted(classes):
            cs = classes[root]
            labs = sorted({self.lab[t][i] for t, i in cs})
            L = next((x for x in labs if x not in used), None)
            if L is None:
                L = self.new_label()
            used.add(L)
            if any(x in self.marked for x in labs):
                marked.add(L)
            for t, i in cs:
                self.lab[t][i] = L
        self.marked = marked

    def vertex_corners(self):
        out = {}
        for t in self.triangles():
            for i in range(3):
                out.setdefault(self.lab[t][i], (t, i))
        return out

    def delaunay_flips(self, tol=1e-10, cap=None):
        """Flip edges until every edge passes the empty-circumdisk test (ties kept)."""
        E = 3 * len(self.triangles()) // 2
        cap = 50 * max(E, 1) if cap is None else cap
        flips = 0
        changed = True
        while changed:
            changed = False
            for t in self.triangles():
                for e in range(3):
                    h = self.adj[t][e]
                    if h is None or h[0] == t:
                        continue
                    a = self.corner_angle(t, (e + 2) % 3) + self.corner_angle(h[0], (h[1] + 2) % 3)
                    if a > math.pi + tol and self.flip(t, e):
                        flips += 1
                        changed = True
                        if flips > cap:
                            raise DegeneracyError("Delaunay flip loop exceeded its iteration cap")
        return flips

    def remove_unmarked_regular(self):
        """Remove unmarked vertices of angle 2pi where the star allows; returns labels left behind."""
        stuck = set()
        while True:
            self.delaunay_flips()
            removed = False
            for L, c in sorted(self.vertex_corners().items()):
                if L in self.marked or L in stuck:
                    continue
                cs, closed = self.fan(c)
                if not closed or abs(sum(self.corner_angle(*x) for x in cs) - TWO_PI) > 1e-7:
                    stuck.add(L)
                    continue
                if not (self._flip_and_remove(L) or self.collapse_vertex(L)):
                    stuck.add(L)
                    continue
                removed = True
                break
            if not removed:
                break
        return {L for L in stuck if L in self.vertex_corners() and L not in self.marked}

    def _flip_and_remove(self, L, max_flips=200) -> bool:
        """Remove regular vertex L, flipping its spokes away when its star is not embedded.

        On failure the mesh is restored, since blind spoke flips can leave long thin triangles.
        """
        saved = self.copy()
        if self._flip_spokes_and_remove(L, max_flips):
            return True
        self.__dict__.update(saved.__dict__)
        return False

    def _flip_spokes_and_remove(self, L, max_flips):
        for _ in range(max_flips):
            c = self.vertex_corners()[L]
            try:
                self.remove_vertex(c)
                return True
            except (DegeneracyError, PreconditionError):
                pass
            cs, _ = self.fan(c)
            if len(cs) <= 3:
                return False
            # flipping a spoke lowers the degree of L by one
            if not any(self.flip(t, i) for t, i in cs):
                return False
        return False

    def collapse_vertex(self, L) -> bool:
        """Slide regular vertex L along a spoke onto its neighbour, dropping the triangles that flatten.

        Works when the star of L is immersed but not embedded (loops at L, folded
        triangles near small cone angles), where re-triangulating the star is
        impossible. Returns False when no spoke allows it.
        """
        c = self.vertex_corners()[L]
        cs, closed = self.fan(c)
        if not closed:
            return False
        R = [1 + 0j]
        for k in range(1, len(cs)):
            tp, ip = cs[k - 1]
            R.append(R[-1] * self.frame_map((tp, (ip - 1) % 3))[0])
        spokes = sorted((abs(self.vec(t, i)), k) for k, (t, i) in enumerate(cs)
                        if self.lab[t][(i + 1) % 3] != L)
        sc = self.scale()
        eps = 1e-9 * sc
        for _, k in spokes:
            t, i = cs[k]
            X = self.lab[t][(i + 1) % 3]
            v = R[k] * self.vec(t, i)
            new = {}
            for j, (tt, ii) in enumerate(cs):
                new.setdefault(tt, list(self.P[tt]))[ii] = self.P[tt][ii] + v / R[j]
            doomed = {tt for tt, pts in new.items() if abs(signed_area(*pts)) <= eps * sc}
            # surviving triangles must stay well shaped, or later flips wander through slivers
            if t not in doomed or any(signed_area(*pts) <= 1e-6 * sc * sc
                                      for tt, pts in new.items() if tt not in doomed):
                continue
            # inside a flattened triangle the two long sides coincide; zero sides vanish
            twin = {}
            for tt in doomed:
                long = [e for e in range(3) if abs(new[tt][(e + 1) % 3] - new[tt][e]) > eps]
                if len(long) == 2:
                    twin[(tt, long[0])], twin[(tt, long[1])] = (tt, long[1]), (tt, long[0])
                elif long:
                    break
            else:
                ends, bad = [], False
                for tt, pts in new.items():
                    if tt in doomed:
                        continue
                    for e in range(3):
                        h = self.adj[tt][e]
                        if h is None or h[0] not in doomed:
                            continue
                        for _ in range(2 * len(doomed) + 1):
                            if h is None or h[0] not in doomed or h not in twin:
                                break
                            h = self.adj[h[0]][twin[h][1]]
                        if h is None or h[0] in doomed:
                            bad = True
                        ends.append(((tt, e), h))
                if bad:
                    continue
                for tt, pts in new.items():
                    if tt not in doomed:
                        self.P[tt] = pts
                        self.lab[tt] = [X if x == L else x for x in self.lab[tt]]
                for tt in doomed:
                    self.alive[tt] = False
                    self.adj[tt] = [None, None, None]
                for h1, h2 in ends:
                    self.link(h1, h2)
                return True
        return False

    def compact(self):
        keep = self.triangles()
        idx = {t: k for k, t in enumerate(keep)}
        self.P = [self.P[t] for t in keep]
        self.lab = [self.lab[t] for t in keep]
        self.eid = [self.eid[t] for t in keep]
        self.adj = [[None if h is None else (idx[h[0]], h[1]) for h in self.adj[t]] for t in keep]
        self.alive = [True] * len(keep)
        self.where = {x: (k, e) for k, row in enumerate(self.eid) for e, x in enumerate(row)}
