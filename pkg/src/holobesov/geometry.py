"""Defining functions, normal projection, Leray map and quasimetric.

Points of C^n are numpy arrays whose last axis has length ``n``; every
function here broadcasts over leading axes.

The supported domains are ``{sum_j a_j |z_j|^2 < 1}`` (ball when all
``a_j = 1``).  For these the Levi polynomial of the defining function has no
holomorphic second-order part, so the Leray map is simply
``w(xi, z) = d rho(xi)`` and ``v(xi, z) = <d rho(xi), xi - z>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePointError, GridGeometryError, ParameterError, ProjectionError

# largest admissible shell widths; keep the Levi lower bound well inside beta > 0
MAX_EPSILON = {"ball": 0.5, "ellipsoid": 0.25}


@dataclass(frozen=True)
class Domain:
    n: int
    weights: tuple
    epsilon: float
    kind: str

    def __post_init__(self):
        if self.kind not in MAX_EPSILON:
            raise ParameterError(f"unknown domain kind {self.kind!r}")
        if self.n not in (1, 2, 3):
            raise ParameterError("only n in {1, 2, 3} is supported")
        if len(self.weights) != self.n or min(self.weights) <= 0:
            raise ParameterError("need n positive axis weights")
        if not 0 < self.epsilon <= MAX_EPSILON[self.kind]:
            raise ParameterError(
                f"epsilon={self.epsilon} outside (0, {MAX_EPSILON[self.kind]}] for {self.kind}")
        # strict convexity: the real Hessian of rho is diag(2 a_j) (each weight twice)
        if min(self.weights) <= 0:
            raise ParameterError("defining function is not strictly convex")

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def is_ball(self) -> bool:
        return self.kind == "ball"

    # -- defining function and derivatives -------------------------------
    def rho(self, z):
        z = np.asarray(z)
        return np.sum(self.a * np.abs(z) ** 2, axis=-1) - 1.0

    def d_rho(self, z):
        """Holomorphic derivatives ``d rho / d z_j``."""
        return self.a * np.conj(z)

    def dbar_rho(self, z):
        """Antiholomorphic derivatives ``d rho / d zbar_j``."""
        return self.a * np.asarray(z)

    def grad_rho(self, z):
        """Real gradient packed as a complex vector (d/dx + i d/dy)."""
        return 2.0 * self.dbar_rho(z)

    def real_hessian_eigenvalues(self):
        return np.repeat(2.0 * self.a, 2)

    def surface_area(self, t: float = 0.0) -> float:
        """sigma(dOmega_t); closed form for the ball only."""
        if not self.is_ball:
            raise ParameterError("closed-form area only for the ball")
        return sphere_area(self.n) * (1.0 + t) ** ((2 * self.n - 1) / 2)

    # -- Leray map ---------------------------------------------------------
    def leray_w(self, xi, z=None):
        """Leray map w(xi, z); independent of z for these domains."""
        return self.d_rho(xi)

    def leray_v(self, xi, z):
        xi = np.asarray(xi)
        z = np.asarray(z)
        return np.sum(self.leray_w(xi) * (xi - z), axis=-1)

    def quasimetric(self, xi, z):
        return np.abs(self.leray_v(xi, z))


def sphere_area(n: int) -> float:
    from math import factorial, pi
    return 2 * pi ** n / factorial(n - 1)


def ball(n: int = 2, epsilon: float = 0.5) -> Domain:
    return Domain(n=n, weights=tuple([1.0] * n), epsilon=epsilon, kind="ball")


def ellipsoid(weights, epsilon: float = 0.25) -> Domain:
    weights = tuple(float(a) for a in weights)
    return Domain(n=len(weights), weights=weights, epsilon=epsilon, kind="ellipsoid")


def normal_vector(dom: Domain, xi):
    """Complex normal dbar(rho)/|dbar(rho)| with |.| the sum of moduli."""
    g = dom.dbar_rho(np.asarray(xi, dtype=complex))
    s = np.sum(np.abs(g), axis=-1, keepdims=True)
    if np.any(s < 1e-12):
        raise DegeneratePointError("gradient of rho vanishes")
    return g / s


def unit_normal(dom: Domain, xi):
    """Same direction as :func:`normal_vector`, Euclidean-normalized."""
    g = dom.dbar_rho(np.asarray(xi, dtype=complex))
    s = np.linalg.norm(g, axis=-1, keepdims=True)
    if np.any(s < 1e-12):
        raise DegeneratePointError("gradient of rho vanishes")
    return g / s


def _flow_time(dom: Domain, z, maxiter: int = 50):
    """s with rho(z_j exp(-a_j s)) = 0, by damped Newton."""
    a = dom.a
    m2 = np.abs(z) ** 2
    s = np.zeros(z.shape[:-1])
    for _ in range(maxiter):
        e = np.exp(-2.0 * a * s[..., None])
        g = np.sum(a * m2 * e, axis=-1) - 1.0
        dg = np.sum(-2.0 * a * a * m2 * e, axis=-1)
        # damp large steps
        step = np.clip(g / dg, -0.5, 0.5)
        s = s - step
        if np.all(np.abs(step) < 1e-15):
            return s
    if np.any(np.abs(step) > 1e-10):
        raise ProjectionError("normal projection did not converge")
    return s


def project_boundary(dom: Domain, z):
    """Psi(z): follow the gradient flow of rho back to the boundary.

    Integral curves of grad(rho) are ``z_j exp(a_j s)``; we solve for the
    flow time with damped Newton.  The ball is radial projection.
    """
    z = np.asarray(z, dtype=complex)
    r = np.linalg.norm(z, axis=-1, keepdims=True)
    if np.any(r < 1e-12):
        raise ProjectionError("cannot project the origin")
    if dom.is_ball:
        return z / r
    return z * np.exp(-dom.a * _flow_time(dom, z)[..., None])


def projection_jacobian(dom: Domain, z):
    """Psi(z) with its Wirtinger Jacobians d Psi_j / d z_l and d Psi_j / d zbar_l.

    Psi = z_j exp(-a_j s(z)) with s defined by rho(Psi) = 0; the derivatives
    of s come from implicit differentiation of that constraint.
    """
    z = np.asarray(z, dtype=complex)
    a = dom.a
    if dom.is_ball:
        e = np.broadcast_to(1.0 / np.linalg.norm(z, axis=-1, keepdims=True), z.shape)
    else:
        e = np.exp(-a * _flow_time(dom, z)[..., None])
    psi = z * e
    e2 = e * e
    dg = -2.0 * np.sum(a * a * np.abs(z) ** 2 * e2, axis=-1)
    ds_dz = -(a * np.conj(z) * e2) / dg[..., None]
    ds_dzb = -(a * z * e2) / dg[..., None]
    base = -(a * z * e)[..., :, None]
    eye = np.eye(dom.n)
    d_dz = eye * e[..., :, None] + base * ds_dz[..., None, :]
    d_dzb = base * ds_dzb[..., None, :]
    return psi, d_dz, d_dzb


def flow_to_level(dom: Domain, b, t: float, maxiter: int = 50):
    """Phi_t: move boundary points along the normal flow to level ``t``."""
    b = np.asarray(b, dtype=complex)
    if dom.is_ball:
        return b * np.sqrt(1.0 + t)
    a = dom.a
    m2 = np.abs(b) ** 2
    s = np.zeros(b.shape[:-1])
    for _ in range(maxiter):
        e = np.exp(2.0 * a * s[..., None])
        g = np.sum(a * m2 * e, axis=-1) - 1.0 - t
        dg = np.sum(2.0 * a * a * m2 * e, axis=-1)
        step = np.clip(g / dg, -0.5, 0.5)
        s = s - step
        if np.all(np.abs(step) < 1e-15):
            break
    return b * np.exp(a * s[..., None])


def comparison_check(dom: Domain, xi, z):
    """Ratios d(xi,z)/(d(Psi(xi),z)+rho(xi)) and the reciprocal."""
    xi = np.asarray(xi, dtype=complex)
    num = dom.quasimetric(xi, z)
    den = dom.quasimetric(project_boundary(dom, xi), z) + dom.rho(xi)
    ratio = num / den
    return ratio, 1.0 / ratio


@dataclass
class TangentFrame:
    """Local coordinates (z', w) centred at a point of a level set.

    ``z - xi = U' z' - i nu w``; the real tangent space is ``{Im w = 0}`` and
    the complex tangent space is ``{w = 0}``.
    """

    dom: Domain
    xi: np.ndarray
    nu: np.ndarray
    tangent: np.ndarray  # (n, n-1) orthonormal complex tangent basis
    level: float = field(init=False)

    def __post_init__(self):
        self.level = float(self.dom.rho(self.xi))

    @property
    def unitary(self):
        return np.column_stack([self.tangent, self.nu])

    def to_local(self, z):
        d = np.asarray(z) - self.xi
        zp = d @ np.conj(self.tangent)
        w = 1j * (d @ np.conj(self.nu))
        return zp, w

    def from_local(self, zp, w):
        zp = np.asarray(zp, dtype=complex)
        w = np.asarray(w, dtype=complex)
        return self.xi + zp @ self.tangent.T - 1j * w[..., None] * self.nu

    def pr(self, z):
        zp, w = self.to_local(z)
        return zp, w.real

    def pi(self, z):
        zp, _ = self.to_local(z)
        return zp

    def _lift_height(self, zp, x):
        p = self.from_local(zp, np.asarray(x, dtype=complex))
        a = self.dom.a
        qa = np.sum(a * np.abs(self.nu) ** 2)
        qb = np.real(np.sum(np.conj(self.dom.grad_rho(p)) * self.nu, axis=-1))
        qc = self.dom.rho(p) - self.level
        disc = qb * qb - 4 * qa * qc
        if np.any(disc < 0) or np.any(qb <= 0):
            raise GridGeometryError("tangent projection is not invertible here")
        return -2 * qc / (qb + np.sqrt(disc))

    def lift(self, zp, x):
        """pr^{-1}: the point of the level set over (z', Re w = x)."""
        y = self._lift_height(zp, x)
        x = np.asarray(x, dtype=float)
        return self.from_local(zp, x + 1j * y)

    def lift_with_slopes(self, zp, x):
        """Lifted points, d(Im w)/dx and the graph area factor."""
        pts = self.lift(zp, x)
        g = self.dom.grad_rho(pts)

        def dd(e):
            return np.real(np.sum(np.conj(g) * e, axis=-1))

        dy = dd(self.nu)
        slopes = []
        for k in range(self.tangent.shape[1]):
            e = self.tangent[:, k]
            slopes.append(-dd(e) / dy)
            slopes.append(-dd(1j * e) / dy)
        sx = -dd(-1j * self.nu) / dy
        slopes.append(sx)
        slopes = np.stack(slopes, axis=-1)
        area = np.sqrt(1.0 + np.sum(slopes ** 2, axis=-1))
        return pts, sx, area


def tangent_frame(dom: Domain, xi) -> TangentFrame:
    xi = np.asarray(xi, dtype=complex)
    nu = unit_normal(dom, xi)
    n = dom.n
    # complete nu to a unitary basis
    m = np.eye(n, dtype=complex)
    k = int(np.argmax(np.abs(nu)))
    cols = [nu] + [m[:, j] for j in range(n) if j != k]
    q, _ = np.linalg.qr(np.column_stack(cols))
    # q[:, 0] is nu up to a phase, so the other columns span its complement
    return TangentFrame(dom=dom, xi=xi, nu=nu, tangent=q[:, 1:].reshape(n, n - 1))


def levi_lower_bound(dom: Domain, xi, z, delta: float = 0.5, half_normal: bool = True):
    """Fitted constants of |v| >= c (rho(xi)-rho(z)) + beta |xi-z|^2.

    Returns (beta, s): beta is the infimum over pairs with |xi-z| < delta,
    s the infimum of |v| over pairs with |xi-z| >= delta.  ``c`` is 1/2 when
    ``half_normal`` (the form that holds for v = <d rho, xi - z>), else 1.
    """
    xi = np.asarray(xi, dtype=complex)
    z = np.asarray(z, dtype=complex)
    v = np.abs(dom.leray_v(xi, z))
    c = 0.5 if half_normal else 1.0
    gap = dom.rho(xi) - dom.rho(z)
    dist = np.linalg.norm(xi - z, axis=-1)
    near = (dist < delta) & (dist > 0)
    beta = np.min((v[near] - c * gap[near]) / dist[near] ** 2) if np.any(near) else np.inf
    far = dist >= delta
    s = np.min(v[far]) if np.any(far) else np.inf
    return float(beta), float(s)


def random_sphere_points(dom: Domain, size: int, rng) -> np.ndarray:
    """Uniform points of the unit sphere pushed to dOmega by z = eta / sqrt(a)."""
    g = rng.standard_normal((size, dom.n)) + 1j * rng.standard_normal((size, dom.n))
    eta = g / np.linalg.norm(g, axis=-1, keepdims=True)
    return eta / np.sqrt(dom.a)


def quasiball_measure_ball(n: int, delta: float) -> float:
    """sigma(B(z, delta)) on the unit sphere of C^2.

    <x, z> is uniform on the unit disc when x is uniform on S^3, so the
    measure is 2 pi^2 |{s in D : |1 - s| < delta}| / pi.
    """
    if n != 2:
        raise ParameterError("closed form only for n = 2")
    d = delta
    if d >= 2:
        return sphere_area(2)
    # area of lens: unit disc intersect disc of radius d centred at 1
    r1, r2, c = 1.0, d, 1.0
    a1 = r1 ** 2 * np.arccos((c * c + r1 * r1 - r2 * r2) / (2 * c * r1))
    a2 = r2 ** 2 * np.arccos((c * c + r2 * r2 - r1 * r1) / (2 * c * r2))
    a3 = 0.5 * np.sqrt((-c + r1 + r2) * (c + r1 - r2) * (c - r1 + r2) * (c + r1 + r2))
    return float(2 * np.pi * (a1 + a2 - a3))
