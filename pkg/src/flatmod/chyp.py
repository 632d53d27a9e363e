"""Complex hyperbolic numerics in the projective model of a signature (1, n) form.

Conventions: <z, w> = w^H H z (linear in the first slot). Points are lines with
<v, v> > 0. The distance is normalised so that cosh^2(d/2) is the cross-ratio
|<z,w>|^2 / (<z,z><w,w>).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, InputError, PreconditionError
from .veech import HermitianForm, extend_with_surgery, signature

SLACK = 1e-12


def _H(form) -> np.ndarray:
    if isinstance(form, HermitianForm):
        return form.H
    return HermitianForm(form).H


def _vec(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1:
        raise InputError("points must be one-dimensional complex vectors")
    return v


def inner(z, w, form) -> complex:
    H = _H(form)
    return complex(np.conj(w) @ H @ z)


def check_signature(form) -> int:
    """Return n for a form of signature (1, n); raise otherwise."""
    H = HermitianForm(_H(form))
    sig = signature(H.H)
    if sig.degenerate or sig.p != 1:
        raise PreconditionError(f"form has signature ({sig.p}, {sig.q}), need (1, n)")
    return sig.q


def _positive(v, H, what="point") -> float:
    n = float(np.real(np.conj(v) @ H @ v))
    if not n > 0:
        raise PreconditionError(f"{what} is not in the positive cone (<v,v> = {n:.3g})")
    return n


def _sinh2_half(x, y, H) -> float:
    """sinh^2(d/2) computed through the difference vector to avoid cancellation.

    |<x,y>|^2 - <x,x><y,y> equals |<x,e>|^2 - <x,x><e,e> with e = y - x.
    """
    xx = _positive(x, H, "first point")
    yy = _positive(y, H, "second point")
    e = y - x
    xe = np.conj(e) @ H @ x
    ee = float(np.real(np.conj(e) @ H @ e))
    num = float(abs(xe) ** 2 - xx * ee)
    val = num / (xx * yy)
    if val < -SLACK:
        raise PreconditionError(f"cross-ratio below 1 by {-val:.3g}; inputs are not positive points")
    return max(val, 0.0)


def chd_distance(x, y, form) -> float:
    H = _H(form)
    x, y = _vec(x), _vec(y)
    if x.shape != y.shape or x.shape[0] != H.shape[0]:
        raise InputError("dimension mismatch between points and form")
    # normalise scales first so the difference trick is meaningful
    x = x / np.sqrt(_positive(x, H, "first point"))
    y = y / np.sqrt(_positive(y, H, "second point"))
    xy = np.conj(y) @ H @ x
    if abs(xy) > 0:
        y = y * (xy / abs(xy))
    return 2.0 * float(np.arcsinh(np.sqrt(_sinh2_half(x, y, H))))


def normalize_pair(x, y, form):
    """Scale so <x,x> = <y,y> = 1 and <x,y> is real and positive."""
    H = _H(form)
    x, y = _vec(x), _vec(y)
    x = x / np.sqrt(_positive(x, H, "first point"))
    y = y / np.sqrt(_positive(y, H, "second point"))
    xy = np.conj(y) @ H @ x
    if abs(xy) == 0:
        raise DegeneracyError("orthogonal positive vectors cannot occur in signature (1, n)")
    return x, y * (xy / abs(xy))


def geodesic_point(x, y, t: float, form, arclength: bool = True) -> np.ndarray:
    """Point on the geodesic from x to y.

    With arclength=True the returned point lies at distance t*d(x, y) from x;
    otherwise it is the projectivised linear segment (1-t)x + ty.
    """
    H = _H(form)
    x, y = normalize_pair(x, y, H)
    if not arclength:
        p = (1 - t) * x + t * y
    else:
        d = chd_distance(x, y, H)
        if d < 1e-14:
            return x.copy()
        a, b = np.sinh((1 - t) * d / 2), np.sinh(t * d / 2)
        p = (a * x + b * y) / np.sinh(d / 2)
    assert np.real(np.conj(p) @ H @ p) > 0, "segment left the positive cone"
    return p


def random_isometry(form, rng, scale: float = 1.0) -> np.ndarray:
    """Random g with g^H H g = H, via the Cayley transform of a Lie algebra element."""
    H = _H(form)
    d = H.shape[0]
    K = scale * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    K = (K - K.conj().T) / 2
    # X = H^{-1} K satisfies X^H H + H X = 0
    X = np.linalg.solve(H, K)
    I = np.eye(d)
    return np.linalg.solve(I - X, I + X)


def random_positive_point(form, rng, spread: float = 1.0) -> np.ndarray:
    H = _H(form)
    w, V = np.linalg.eigh(H)
    i = int(np.argmax(w))
    c = spread * (rng.normal(size=len(w)) + 1j * rng.normal(size=len(w)))
    # keep the negative part strictly smaller than the positive one
    c /= np.sqrt(np.abs(w))
    c[i] = (1 + np.linalg.norm(np.delete(c, i)) + rng.random()) / np.sqrt(w[i])
    return V @ c


# -- pseudo-horospherical coordinates ---------------------------------------


class PseudoHorosphericalChart:
    """Chart xi = (xi_1, ..., xi_n) with xi_0 = 1 for the form

        <xi, eta> = (i/2)(xi_0 conj(eta_n) - xi_n conj(eta_0)) + a(xi_hat, eta_hat)

    where xi_hat = (xi_0, ..., xi_{n-1}) and a has signature (1, n-1).
    Then u = <xi, xi> = Im xi_n + a(xi_hat, xi_hat) and s = Re xi_n.
    """

    def __init__(self, a):
        A = _H(a)
        self.a = A
        self.n = A.shape[0]
        if self.n < 1:
            raise InputError("splitting form must be at least 1x1")
        n = self.n
        H = np.zeros((n + 1, n + 1), dtype=complex)
        H[:n, :n] = A
        H[n, 0] = 0.5j
        H[0, n] = -0.5j
        self.H = H
        if check_signature(H) != n:
            raise PreconditionError("chart form does not have signature (1, n)")

    @classmethod
    def standard(cls, n: int) -> "PseudoHorosphericalChart":
        return cls(np.diag([1.0] + [-1.0] * (n - 1)))

    @classmethod
    def random(cls, n: int, rng) -> "PseudoHorosphericalChart":
        if n == 1:
            return cls(np.array([[0.5 + rng.random()]]))
        m = n - 1
        B = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        N = B @ B.conj().T + 0.5 * np.eye(m)
        b = 0.5 * (rng.normal(size=m) + 1j * rng.normal(size=m))
        A = np.zeros((n, n), dtype=complex)
        A[1:, 1:] = -N
        A[1:, 0] = b
        A[0, 1:] = b.conj()
        # a00 may be negative as long as the Schur complement stays positive
        A[0, 0] = -np.real(b.conj() @ np.linalg.solve(N, b)) + 0.2 + rng.random()
        return cls(A)

    def omega_block(self) -> np.ndarray:
        """a restricted to xi_0 = 0; negative definite exactly when the chart is valid."""
        return self.a[1:, 1:]

    def hat(self, xi) -> np.ndarray:
        xi = _vec(xi)
        if xi.shape[0] != self.n:
            raise InputError(f"chart coordinates need {self.n} entries")
        return np.concatenate([[1.0 + 0j], xi[:-1]])

    def lift(self, xi) -> np.ndarray:
        return np.concatenate([[1.0 + 0j], _vec(xi)])

    def a_form(self, x, y) -> complex:
        return complex(np.conj(y) @ self.a @ x)

    def u(self, xi) -> float:
        xi = _vec(xi)
        h = self.hat(xi)
        return float(xi[-1].imag + np.real(self.a_form(h, h)))

    def s(self, xi) -> float:
        return float(_vec(xi)[-1].real)

    def point(self, s: float, u: float, rest=()) -> np.ndarray:
        """Chart point with given s, u and xi_1..xi_{n-1}."""
        rest = np.asarray(rest, dtype=complex).reshape(-1)
        if rest.shape[0] != self.n - 1:
            raise InputError(f"need {self.n - 1} transverse coordinates")
        h = np.concatenate([[1.0 + 0j], rest])
        v = u - float(np.real(self.a_form(h, h)))
        return np.concatenate([rest, [s + 1j * v]])

    def tangent(self, xi, ds: float, du: float, drest=()) -> np.ndarray:
        """Tangent vector in xi coordinates for given (ds, du, dxi_1..)."""
        xi = _vec(xi)
        drest = np.asarray(drest, dtype=complex).reshape(-1)
        h = self.hat(xi)
        dh = np.concatenate([[0j], drest])
        dv = du - 2 * np.real(self.a_form(h, dh))
        return np.concatenate([drest, [ds + 1j * dv]])

    def _pieces(self, xi, dxi):
        xi, dxi = _vec(xi), _vec(dxi)
        u = self.u(xi)
        if not u > 0:
            raise PreconditionError(f"point outside the chart domain (u = {u:.3g})")
        h = self.hat(xi)
        dh = np.concatenate([[0j], dxi[:-1]])
        w = self.a_form(h, dh)
        Om = float(np.real(self.a_form(dh, dh)))
        ds = float(dxi[-1].real)
        du = float(dxi[-1].imag + 2 * w.real)
        return u, ds, du, w, Om


def ph_metric_tensor(chart: PseudoHorosphericalChart, point, tangent) -> float:
    """Squared length of `tangent` at `point`:

        g = (4/u^2) (du^2/4 + (ds/2 + Im w)^2 - u W)

    with w = a(xi_hat, dxi_hat), W = a(dxi_hat, dxi_hat).
    """
    u, ds, du, w, Om = chart._pieces(point, tangent)
    return 4.0 / u**2 * (du**2 / 4 + (ds / 2 + w.imag) ** 2 - u * Om)


def ph_metric_tensor_as_printed(chart: PseudoHorosphericalChart, point, tangent) -> float:
    """Variant carrying an extra (Re w)^2 term; kept to document that it disagrees
    with the distance function whenever Re w != 0."""
    u, ds, du, w, Om = chart._pieces(point, tangent)
    return 4.0 / u**2 * (du**2 / 4 + (ds / 2 + w.imag) ** 2 + w.real**2 - u * Om)


def homogeneous_metric(form, z, dz) -> float:
    """-4/<z,z>^2 det [[<z,z>, <dz,z>], [<z,dz>, <dz,dz>]]."""
    H = _H(form)
    z, dz = _vec(z), _vec(dz)
    zz = _positive(z, H)
    zd = np.conj(dz) @ H @ z
    dd = float(np.real(np.conj(dz) @ H @ dz))
    return 4.0 / zz**2 * (abs(zd) ** 2 - zz * dd)


def finite_difference_metric(chart: PseudoHorosphericalChart, point, tangent, h: float = 1e-5) -> float:
    """Symmetric second-order estimate of g from chd_distance along xi + t*tangent."""
    x = chart.lift(point)
    t = _vec(tangent)
    dp = chd_distance(x, chart.lift(point + h * t), chart.H)
    dm = chd_distance(x, chart.lift(point - h * t), chart.H)
    return (dp**2 + dm**2) / (2 * h * h)


def _metric_matrices(chart: PseudoHorosphericalChart, rest, u) -> np.ndarray:
    """Real 2n x 2n Gram matrices of g in coordinates (s, u, Re xi_j, Im xi_j).

    rest has shape (N, n-1), u shape (N,). Expanding the tensor gives
    g = (4/u^2)(l1.v^2 + l2.v^2 + u N(v)) with l1 = du/2, l2 = ds/2 + Im w and
    N the real form of -W.
    """
    n = chart.n
    rest = np.asarray(rest, dtype=complex).reshape(len(u), n - 1)
    u = np.asarray(u, dtype=float)
    dim = 2 * n
    L1 = np.zeros((len(u), dim))
    L1[:, 1] = 0.5
    L2 = np.zeros((len(u), dim))
    L2[:, 0] = 0.5
    hat = np.concatenate([np.ones((len(u), 1)), rest], axis=1)
    c = hat @ chart.a.T[:, 1:]  # (A xi_hat)_j for j >= 1
    # Im w = sum_j dx_j Im c_j - dy_j Re c_j
    L2[:, 2::2] = c.imag
    L2[:, 3::2] = -c.real
    W = -chart.omega_block()
    Nr = np.zeros((dim - 2, dim - 2))
    Nr[0::2, 0::2] = W.real
    Nr[1::2, 1::2] = W.real
    Nr[0::2, 1::2] = -W.imag
    Nr[1::2, 0::2] = W.imag
    G = np.einsum("ki,kj->kij", L1, L1) + np.einsum("ki,kj->kij", L2, L2)
    G[:, 2:, 2:] += u[:, None, None] * Nr
    return (4.0 / u**2)[:, None, None] * G


def _metric_matrix(chart: PseudoHorosphericalChart, xi) -> np.ndarray:
    xi = _vec(xi)
    return _metric_matrices(chart, xi[None, :-1], np.array([chart.u(xi)]))[0]


def _densities(chart, rest, u) -> np.ndarray:
    d = np.linalg.det(_metric_matrices(chart, rest, u))
    if np.any(d <= 0):
        raise DegeneracyError("metric not positive definite")
    return np.sqrt(d)


def volume_density(chart: PseudoHorosphericalChart, xi) -> float:
    """sqrt(det g) in coordinates (s, u, Re xi_j, Im xi_j)."""
    xi = _vec(xi)
    if not chart.u(xi) > 0:
        raise PreconditionError("point outside the chart domain")
    return float(_densities(chart, xi[None, :-1], np.array([chart.u(xi)]))[0])


def volume_density_closed_form(chart: PseudoHorosphericalChart, u: float) -> float:
    """4^(n-1) det(-W) / u^(n+1); independent of s and the transverse coordinates."""
    n = chart.n
    det = float(np.real(np.linalg.det(-chart.omega_block()))) if n > 1 else 1.0
    return 4.0 ** (n - 1) * det / u ** (n + 1)


def path_length(chart: PseudoHorosphericalChart, path) -> float:
    """Trapezoidal length of a polyline given as an (N, n) array of chart points."""
    P = np.asarray(path, dtype=complex)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    if P.shape[1] != chart.n:
        raise InputError(f"path points need {chart.n} coordinates")
    if len(P) < 2:
        return 0.0
    for p in P:
        if not chart.u(p) > 0:
            raise PreconditionError("path exits the chart domain")
    total = 0.0
    for a, b in zip(P[:-1], P[1:]):
        d = b - a
        ga = ph_metric_tensor(chart, a, d)
        gb = ph_metric_tensor(chart, b, d)
        total += 0.5 * (np.sqrt(max(ga, 0.0)) + np.sqrt(max(gb, 0.0)))
    return float(total)


def adaptive_path_length(chart, curve, tol: float = 1e-4, n0: int = 16, max_n: int = 1 << 16):
    """Length of a parametrised curve t -> xi(t), t in [0, 1], refining until stable."""
    n = n0
    prev = path_length(chart, [curve(t) for t in np.linspace(0, 1, n + 1)])
    while n < max_n:
        n *= 2
        cur = path_length(chart, [curve(t) for t in np.linspace(0, 1, n + 1)])
        if abs(cur - prev) <= tol * max(cur, 1e-300):
            return cur, abs(cur - prev)
        prev = cur
    raise DegeneracyError("path length did not converge")


@dataclass
class VolumeEstimate:
    value: float
    error: float
    grid: int

    def to_json(self):
        return {"value": self.value, "error": self.error, "grid": self.grid}


def _volume_on_grid(chart, K, lam, u_max, m):
    n = chart.n
    k = n - 1
    # polar coordinates on each transverse disc |xi_j| < K; u nodes log-spaced
    r = np.linspace(0.0, K, m + 1)
    phi = np.linspace(0.0, 2 * np.pi, m + 1)[:-1]
    axes = [r, phi] * k
    mesh = np.meshgrid(*axes, indexing="ij") if k else []
    if k:
        rr = np.stack([mesh[2 * j].reshape(-1) for j in range(k)], axis=1)
        pp = np.stack([mesh[2 * j + 1].reshape(-1) for j in range(k)], axis=1)
        rest = rr * np.exp(1j * pp)
        jac = np.prod(rr, axis=1)
    else:
        rest = np.zeros((1, 0), dtype=complex)
        jac = np.ones(1)
    hat = np.concatenate([np.ones((len(rest), 1)), rest], axis=1)
    u0 = lam + np.real(np.einsum("ki,ij,kj->k", hat.conj(), chart.a.T, hat))
    if np.any(u0 <= 0):
        raise PreconditionError("lambda too small: region leaves the chart domain")
    t = np.linspace(0.0, 1.0, m + 1)
    lo = np.minimum(u0, u_max)
    # u = lo * (u_max/lo)^t, du = u log(u_max/lo) dt
    span = np.log(u_max / lo)
    U = lo[:, None] * np.exp(span[:, None] * t[None, :])
    f = _densities(chart, np.repeat(rest, m + 1, axis=0), U.reshape(-1)).reshape(U.shape)
    inner = np.trapezoid(f * U, t, axis=1) * span * jac
    vals = inner.reshape([len(a) for a in axes]) if k else inner
    for j in range(k):
        vals = np.trapezoid(vals, r, axis=0)
        # periodic direction: plain Riemann sum is the trapezoid rule
        vals = vals.sum(axis=0) * (2 * np.pi / m)
    return 2 * K * float(np.asarray(vals).reshape(-1)[0])


def region_volume(chart, K: float, lam: float, u_max: float, grid: int = 8,
                  rtol: float = 1e-2, max_grid: int | None = None) -> VolumeEstimate:
    """Volume of {|xi_j| < K, |Re xi_n| < K, Im xi_n > lam} truncated at u <= u_max.

    The grid is doubled until two successive estimates agree to rtol.
    """
    if K <= 0 or lam <= 0:
        raise InputError("K and lambda must be positive")
    if u_max <= 0:
        raise InputError("u_max must be positive")
    if max_grid is None:
        max_grid = {1: 4096, 2: 128}.get(chart.n, 16)
    m = grid
    prev = _volume_on_grid(chart, K, lam, u_max, m)
    while True:
        if 2 * m > max_grid:
            raise DegeneracyError(f"grid too coarse: no agreement to {rtol:g} up to grid {m}")
        m *= 2
        cur = _volume_on_grid(chart, K, lam, u_max, m)
        err = abs(cur - prev)
        if err <= rtol * max(abs(cur), 1e-300):
            return VolumeEstimate(cur, err, m)
        prev = cur


def density_decay(chart, u: float, rest=()) -> float:
    """Ratio volume_density(2u) / volume_density(u) at fixed transverse coordinates."""
    return volume_density(chart, chart.point(0.0, 2 * u, rest)) / volume_density(chart, chart.point(0.0, u, rest))


# -- surgery distance bound ---------------------------------------------------


@dataclass
class SurgeryDistance:
    alpha: float
    cosh2: float
    eps: float
    mu: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.alpha <= self.bound * (1 + 1e-12) + 1e-15

    def to_json(self):
        return {"alpha": self.alpha, "cosh2": self.cosh2, "eps": self.eps, "mu": self.mu,
                "bound": self.bound, "holds": self.holds}


def surgery_distance(form, zhat, z0: complex, mu: float) -> SurgeryDistance:
    """Distance between the base point (zhat, 0) and the surgered point (zhat, z0)
    in the extended form H - mu|z0|^2, with the surgered point scaled to area 1."""
    H = HermitianForm(_H(form))
    zhat = _vec(zhat)
    Hx = extend_with_surgery(H, mu)
    x = np.concatenate([zhat, [0j]])
    y = np.concatenate([zhat, [complex(z0)]])
    Ay = _positive(y, Hx.H, "surgered point")
    y = y / np.sqrt(Ay)
    eps = abs(y[-1])
    alpha = chd_distance(x, y, Hx)
    xx = _positive(x, Hx.H)
    xy = np.conj(y) @ Hx.H @ x
    cosh2 = float(abs(xy) ** 2 / xx)
    return SurgeryDistance(alpha, cosh2, float(eps), float(mu), float(2 * np.sqrt(mu) * eps))
