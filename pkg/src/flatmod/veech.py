"""Area as a Hermitian form in the side vectors of a polygonal model.

The side vectors of a developed surface obey z_i = rho_i z_pair(i) and
sum z_i = 0. Solving these for a set of free sides gives a linear
parametrisation of nearby surfaces with the same holonomy; the area is then a
Hermitian form in the free sides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, InputError, PreconditionError
from .surface import FlatSurface, PolygonalModel, develop

ZERO_TOL = 1e-9


@dataclass
class HermitianForm:
    H: np.ndarray

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=complex))
        if self.H.shape[0] != self.H.shape[1]:
            raise InputError("Hermitian form must be square")
        dev = np.max(np.abs(self.H - self.H.conj().T)) if self.H.size else 0.0
        if dev > 1e-12 * max(1.0, np.max(np.abs(self.H))):
            raise InputError(f"matrix is not Hermitian (deviation {dev:.3g})")
        self.H = (self.H + self.H.conj().T) / 2

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def __call__(self, v) -> float:
        v = np.asarray(v, dtype=complex)
        return float(np.real(v.conj() @ self.H @ v))

    def pullback(self, g) -> "HermitianForm":
        g = np.asarray(g, dtype=complex)
        return HermitianForm(g.conj().T @ self.H @ g)

    def to_json(self):
        return [[[z.real, z.imag] for z in row] for row in self.H]


@dataclass
class Signature:
    p: int
    q: int
    zero: int
    eigenvalues: list

    @property
    def degenerate(self) -> bool:
        return self.zero > 0

    def pair(self):
        return (self.p, self.q)

    def to_json(self):
        return {"p": self.p, "q": self.q, "zero": self.zero, "eigenvalues": list(map(float, self.eigenvalues))}


def signature(H, tol: float = ZERO_TOL) -> Signature:
    """Counts of positive, negative and (near) zero eigenvalues, threshold relative to the spectral radius."""
    M = H.H if isinstance(H, HermitianForm) else HermitianForm(H).H
    ev = np.linalg.eigvalsh(M)
    rad = float(np.max(np.abs(ev))) if ev.size else 0.0
    thr = tol * max(rad, 1e-300)
    p = int(np.sum(ev > thr))
    q = int(np.sum(ev < -thr))
    return Signature(p, q, len(ev) - p - q, ev.tolist())


class LinearParametrisation:
    """Free sides of a polygonal model and the matrix E with sides = E @ free."""

    def __init__(self, model: PolygonalModel, tol: float = 1e-9):
        self.model = model
        z = model.sides
        pair = model.pairing
        rho = model.rotations
        reps = model.representatives()
        c = {i: 1 / rho[i] for i in reps}             # z_pair(i) = c_i z_i
        coef = {i: 1 + c[i] for i in reps}
        scale = max(1.0, max(abs(x) for x in coef.values()))
        live = [i for i in reps if abs(coef[i]) > tol * scale]
        self.eliminated = live[-1] if live else None
        self.free = [i for i in reps if i != self.eliminated]
        n, d = len(z), len(self.free)
        E = np.zeros((n, d), dtype=complex)
        for col, i in enumerate(self.free):
            E[i, col] = 1
            E[pair[i], col] = c[i]
            if self.eliminated is not None:
                j = self.eliminated
                a = -coef[i] / coef[j]
                E[j, col] += a
                E[pair[j], col] += c[j] * a
        self.E = E
        if d and np.linalg.matrix_rank(E, tol=1e-9) < d:
            raise DegeneracyError("parametrisation is rank deficient")
        self.base = z[self.free]
        err = np.max(np.abs(E @ self.base - z)) if n else 0.0
        if err > 1e-8 * max(1.0, np.max(np.abs(z))):
            raise DegeneracyError(f"model does not satisfy its own relations (error {err:.3g})")

    @property
    def dim(self) -> int:
        return len(self.free)

    def sides(self, v) -> np.ndarray:
        return self.E @ np.asarray(v, dtype=complex)

    def positions(self) -> np.ndarray:
        """Matrix mapping free parameters to polygon vertex positions (vertex 0 at the origin)."""
        n = self.E.shape[0]
        P = np.zeros((n, self.dim), dtype=complex)
        for a in range(1, n):
            P[a] = P[a - 1] + self.E[a - 1]
        return P

    def model_at(self, v) -> PolygonalModel:
        m = self.model
        return PolygonalModel(self.sides(v), m.pairing, m.triangles, m.provenance, m.tri_ids)

    def edge_rows(self):
        """For each polygon triangle and edge, the row vector giving that edge vector."""
        P = self.positions()
        out = []
        for a, b, c in self.model.triangles:
            out.append((P[b] - P[a], P[c] - P[b], P[a] - P[c]))
        return out


def area_form(model, triangles=None) -> tuple[HermitianForm, LinearParametrisation]:
    """Hermitian form H with conj(v) H v equal to the area at free sides v.

    ``model`` may be a PolygonalModel (with triangles) or a LinearParametrisation.
    """
    par = model if isinstance(model, LinearParametrisation) else LinearParametrisation(model)
    tris = triangles if triangles is not None else par.model.triangles
    if tris is None:
        raise PreconditionError("the polygon needs a triangulation")
    P = par.positions()
    d = par.dim
    H = np.zeros((d, d), dtype=complex)
    for a, b, c in tris:
        U = P[b] - P[a]
        T = P[c] - P[a]
        H += (np.outer(U.conj(), T) - np.outer(T.conj(), U)) / 4j
    return HermitianForm(H), par


def surface_form(surface: FlatSurface, base: int = 0, cut=None):
    """Develop a surface and return (form, parametrisation)."""
    return area_form(develop(surface, base, cut))


def transition_map(parA: LinearParametrisation, parB: LinearParametrisation) -> np.ndarray:
    """Matrix g with vA = g vB; then g^H H_A g = H_B.

    Both parametrisations must come from developing the same triangulated
    surface, so every free side of A is a fixed rotation of a surface edge
    vector, which B expresses linearly.
    """
    mA, mB = parA.model, parB.model
    if mA.provenance is None or mB.provenance is None or mB.tri_ids is None:
        raise PreconditionError("parametrisations need provenance from develop()")
    rowsB = parB.edge_rows()
    posB = {}
    for k, t in enumerate(mB.tri_ids):
        for e in range(3):
            posB[(t, e)] = rowsB[k][e]
    vB = parB.base
    g = np.zeros((parA.dim, parB.dim), dtype=complex)
    for r, i in enumerate(parA.free):
        h = tuple(mA.provenance[i])
        if h not in posB:
            raise PreconditionError("parametrisations of different surfaces")
        row = posB[h]
        zb = row @ vB
        za = mA.sides[i]
        if abs(zb) < 1e-14 or abs(abs(za) - abs(zb)) > 1e-8 * max(1.0, abs(za)):
            raise PreconditionError("parametrisations of different surfaces")
        g[r] = (za / zb) * row
    return g


def is_gaussian_integer_matrix(g, tol=1e-9) -> bool:
    g = np.asarray(g, dtype=complex)
    return bool(np.all(np.abs(g - (np.round(g.real) + 1j * np.round(g.imag))) < tol))


def in_ring(g, q: int, tol=1e-9) -> bool:
    """Whether each entry is an integer combination of powers of exp(2 pi i / q) (q = 3, 4, 6)."""
    g = np.asarray(g, dtype=complex).ravel()
    if q == 4:
        return is_gaussian_integer_matrix(g, tol)
    if q in (3, 6):
        w = np.exp(2j * math.pi / 3)
        # z = a + b w  with real a, b
        b = g.imag / w.imag
        a = g.real - b * w.real
        return bool(np.all(np.abs(a - np.round(a)) < tol) and np.all(np.abs(b - np.round(b)) < tol))
    if q in (1, 2):
        return bool(np.all(np.abs(g.imag) < tol) and np.all(np.abs(g.real - np.round(g.real)) < tol))
    raise InputError("ring test implemented for q in 1, 2, 3, 4, 6")


def extend_with_surgery(H: HermitianForm, mu: float) -> HermitianForm:
    """Block-diagonal extension A' = A - mu |z0|^2 by one surgery coordinate."""
    if mu <= 0:
        raise InputError("surgery coefficient must be positive")
    d = H.dim
    M = np.zeros((d + 1, d + 1), dtype=complex)
    M[:d, :d] = H.H
    M[d, d] = -mu
    return HermitianForm(M)
