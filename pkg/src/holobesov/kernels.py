"""Cauchy-Fantappie kernels for the Leray map w = d rho and their polynomial surrogates.

On these domains ``K(xi, z) = v(xi, z)^{-n}`` with ``v = <w(xi), xi - z>``.
The boundary form ``(n-1)!/(2 pi i)^n w' (dbar w)^{n-1} dxi`` is evaluated
numerically on an oriented tangent frame, giving its density against surface
measure; a single normalization (reproducing the constant 1 at the origin)
fixes orientation conventions.  In the sphere variables ``eta = sqrt(a) xi``
the density is ``R / sigma(S^{2n-1})`` on the sphere of radius R, which the
tests use as the closed-form check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, comb, factorial, log, pi

import numpy as np

from .errors import OrderTooSmallError, ParameterError, SingularKernelError
from .geometry import Domain, random_sphere_points, sphere_area
from .quadrature import QuadratureRule, boundary_rule, pole_rotation

SINGULAR_TOL = 1e-14


def _real(vecs):
    """C^n vectors as R^{2n} vectors ordered (x1, y1, x2, y2, ...)."""
    out = np.empty(vecs.shape[:-1] + (2 * vecs.shape[-1],))
    out[..., 0::2] = vecs.real
    out[..., 1::2] = vecs.imag
    return out


def form_density_raw(dom: Domain, xi) -> np.ndarray:
    """Unnormalized density of the Cauchy-Fantappie boundary form against d sigma."""
    xi = np.atleast_2d(np.asarray(xi, dtype=complex))
    n = dom.n
    N = xi.shape[0]
    g = dom.dbar_rho(xi)
    nu = g / np.linalg.norm(g, axis=-1, keepdims=True)
    # rows 1.. of Vh (conjugated) are an orthonormal basis of the complex tangent space
    _, _, vh = np.linalg.svd(np.conj(nu)[:, None, :])
    q = np.conj(np.swapaxes(vh, 1, 2))
    tang = [1j * nu]
    for j in range(1, n):
        e = q[:, :, j]
        tang += [e, 1j * e]
    T = np.stack(tang, axis=1)  # (N, 2n-1, n)
    # boundary orientation: (outward normal, T) positively oriented
    frame = np.concatenate([_real(nu)[:, None, :], _real(T)], axis=1)
    sign = np.sign(np.linalg.det(frame))
    T[:, 0, :] *= sign[:, None]
    w = dom.leray_w(xi)
    D = np.diag(dom.a).astype(complex)  # d w_j / d xibar_l
    phi = np.conj(T) @ D.T  # (N, 2n-1, n): (dbar w_j)(t_i)
    dz = T  # dxi_j(t_i)
    total = np.zeros(N, dtype=complex)
    for kk in range(n):
        rows = [phi[:, :, j] for j in range(n) if j != kk] + [dz[:, :, j] for j in range(n)]
        M = np.stack(rows, axis=1)
        total += (-1) ** kk * w[:, kk] * np.linalg.det(M)
    return factorial(n - 1) / (2j * pi) ** n * total


def closed_form_density(dom: Domain, xi) -> np.ndarray:
    """R / sigma(S) pulled back from the sphere of radius R = sqrt(1 + rho)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=complex))
    a = dom.a
    R = np.sqrt(1.0 + dom.rho(xi))
    # d sigma_dom / d sigma_sphere for z = eta / sqrt(a), at radius R
    jac = np.linalg.norm(a * xi, axis=-1) / R / np.prod(a)
    return R / sphere_area(dom.n) / jac


@dataclass(frozen=True)
class KernelContext:
    dom: Domain
    normalization: complex
    calibration_order: int = 8

    def density(self, xi) -> np.ndarray:
        """Leray density of the kernel form against d sigma on the level set through xi."""
        return np.real(self.normalization * form_density_raw(self.dom, xi))


def kernel_context(dom: Domain, order: int = 8) -> KernelContext:
    rule = boundary_rule(dom, 0.0, order)
    raw = form_density_raw(dom, rule.nodes)
    # v(xi, 0) = 1 on dOmega, so reproducing 1 at 0 is the total mass
    mass = np.sum(rule.weights * raw)
    return KernelContext(dom, complex(1.0 / mass), order)


def kernel(ctx: KernelContext, xi, z):
    v = ctx.dom.leray_v(np.asarray(xi, dtype=complex), np.asarray(z, dtype=complex))
    if np.any(np.abs(v) < SINGULAR_TOL):
        raise SingularKernelError("v(xi, z) vanishes")
    return v ** (-ctx.dom.n)


def adapted_rule(ctx: KernelContext, z, degree: int = 8, tol: float = 1e-12) -> QuadratureRule:
    """Boundary rule with its pole along sqrt(a) z, where the kernel peaks.

    In rotated sphere variables the kernel depends on the first phase only,
    through the geometric series in r e^{i phi}, r = |sqrt(a) z|; the
    trapezoid rule in that phase converges like r^M.
    """
    dom = ctx.dom
    zeta = np.sqrt(dom.a) * np.asarray(z, dtype=complex)
    r = float(np.linalg.norm(zeta))
    extra = 0 if r < 1e-12 else int(ceil(log(tol) / log(r)))
    M1 = extra + 2 * degree + 16
    Mk = 2 * degree + 1
    Nu = degree + dom.n + 4
    order = (Nu, M1) + (Mk,) * (dom.n - 1)
    rot = pole_rotation(zeta) if r > 1e-12 else None
    return boundary_rule(dom, 0.0, order, rotation=rot)


def reproduce(ctx: KernelContext, f, z, rule: QuadratureRule | None = None, degree: int = 8):
    """Boundary integral of f against K(., z) times the Leray density."""
    z = np.asarray(z, dtype=complex)
    if rule is None:
        rule = adapted_rule(ctx, z, degree)
    k = kernel(ctx, rule.nodes, z)
    vals = np.asarray(f(rule.nodes), dtype=complex)
    return complex(np.sum(rule_density(ctx, rule) * k * vals))


def rule_density(ctx: KernelContext, rule: QuadratureRule) -> np.ndarray:
    """Quadrature weights times the Leray density, cached on the rule."""
    cache = rule.__dict__.setdefault("_leray", {})
    if ctx not in cache:
        cache[ctx] = rule.weights * ctx.density(rule.nodes)
    return cache[ctx]


def volume_density(dom: Domain, xi, z, dbar_f):
    """Shell integrand of the continuation formula against Lebesgue measure.

    For f holomorphic in Omega and C^1 on the shell,
    f(z) = int_{dOmega_eps} f K omega - int_shell volume_density d mu.
    In sphere variables the form is (n-1)!/pi^n <eta_bar, dbar f>; here it is
    written in xi with det(dbar w) = prod(a).
    """
    xi = np.asarray(xi, dtype=complex)
    v = dom.leray_v(xi, z)
    inner = np.sum(np.conj(xi) * np.asarray(dbar_f), axis=-1)
    return factorial(dom.n - 1) / pi ** dom.n * np.prod(dom.a) * inner / v ** dom.n


# -- local approximant ----------------------------------------------------------

def taylor_coefficients(n: int, m: int) -> np.ndarray:
    """Coefficients of 1 + sum c_k x^k, the order-m Taylor polynomial of (1+x)^{-n}."""
    return np.array([(-1) ** k * comb(n + k - 1, k) for k in range(m + 1)], dtype=float)


@dataclass(frozen=True)
class LocalKernelApproximant:
    dom: Domain
    z0: np.ndarray
    m: int
    h: float
    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        return self.m

    def delta(self, xi, z):
        """Delta = v(xi, z) - v(xi, z0), linear in z."""
        w = self.dom.leray_w(np.asarray(xi, dtype=complex))
        return np.sum(w * (self.z0 - np.asarray(z, dtype=complex)), axis=-1)

    def __call__(self, xi, z):
        v0 = self.dom.leray_v(np.asarray(xi, dtype=complex), self.z0)
        x = self.delta(xi, z) / v0
        return np.polynomial.polynomial.polyval(x, self.coeffs) * v0 ** (-self.dom.n)

    def to_dict(self) -> dict:
        return {"z0": [[float(c.real), float(c.imag)] for c in self.z0], "m": self.m,
                "h": self.h, "coeffs": self.coeffs.tolist()}


def local_approximant(ctx: KernelContext, z0, m: int, h: float) -> LocalKernelApproximant:
    if m < 0:
        raise ParameterError("order must be nonnegative")
    if not 0 < h < ctx.dom.epsilon / 4:
        raise ParameterError(f"scale h={h} must lie in (0, eps/4)")
    return LocalKernelApproximant(ctx.dom, np.asarray(z0, dtype=complex), m, h,
                                  taylor_coefficients(ctx.dom.n, m))


# -- global approximant ---------------------------------------------------------

def richardson_weights(alpha: int) -> np.ndarray:
    """lambda with sum lambda_j = 1 and sum lambda_j 2^{jk} = 0 for k = 1..alpha-1."""
    if alpha < 1:
        raise ParameterError("alpha must be positive")
    J = np.arange(alpha)
    V = np.array([2.0 ** (J * k) for k in range(alpha)])
    rhs = np.zeros(alpha)
    rhs[0] = 1.0
    return np.linalg.solve(V, rhs)


@dataclass(frozen=True)
class GlobalKernelApproximant:
    n: int
    m: int
    alpha: int
    lambdas: np.ndarray
    radii: np.ndarray
    coeffs: np.ndarray  # of A_m(s), degree = len - 1

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def A(self, s):
        return np.polynomial.polynomial.polyval(np.asarray(s, dtype=complex), self.coeffs)

    def __call__(self, xi, z):
        xi = np.asarray(xi, dtype=complex)
        z = np.asarray(z, dtype=complex)
        r2 = np.sum(np.abs(xi) ** 2, axis=-1)
        s = np.sum(z * np.conj(xi), axis=-1) / r2
        return r2 ** (-self.n) * self.A(s)

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "alpha": self.alpha,
                "lambdas": self.lambdas.tolist(), "radii": self.radii.tolist(),
                "degree": self.degree}


MIN_GLOBAL_ORDER = 4


def global_approximant(ctx: KernelContext, m: int, alpha: int = 1) -> GlobalKernelApproximant:
    """Polynomial surrogate for K on the ball from shifted, combined kernels.

    A_m(s) is the degree-4m*ceil(log m) Taylor section of
    sum_j lambda_j (1 - r_j s)^{-n}, r_j = 1 - 2^j / m.
    """
    if not ctx.dom.is_ball:
        raise ParameterError("the global surrogate is defined on the ball only")
    if alpha not in (1, 2):
        raise ParameterError("alpha must be 1 or 2")
    if m < MIN_GLOBAL_ORDER:
        raise OrderTooSmallError(f"order m={m} below {MIN_GLOBAL_ORDER}")
    n = ctx.dom.n
    lam = richardson_weights(alpha)
    radii = 1.0 - 2.0 ** np.arange(alpha) / m
    D = 4 * m * ceil(log(m))
    k = np.arange(D + 1)
    binom = np.array([comb(n + kk - 1, kk) for kk in k], dtype=float)
    coeffs = binom * sum(l * r ** k for l, r in zip(lam, radii))
    return GlobalKernelApproximant(n, m, alpha, lam, radii, coeffs)


# -- sampled diagnostics ----------------------------------------------------------

def kernel_pair_samples(dom: Domain, size: int, rng, levels=(0.0, 0.1, 0.3)):
    """Pairs (xi in the closed shell, z in the closed domain) with d spread over decades."""
    xi = random_sphere_points(dom, size, rng)
    t = rng.choice(np.asarray(levels), size)
    xi = xi * np.sqrt(1.0 + t)[:, None]
    # z near Psi(xi) at log-uniform quasidistances, plus generic interior points
    base = xi / np.sqrt(1.0 + t)[:, None]
    step = 10.0 ** rng.uniform(-4, 0.3, size)
    g = rng.standard_normal((size, dom.n)) + 1j * rng.standard_normal((size, dom.n))
    z = base + np.sqrt(step)[:, None] * g / np.linalg.norm(g, axis=-1, keepdims=True)
    # pull into the closed domain
    scale = np.sqrt(np.maximum(1.0, dom.rho(z) + 1.0))
    z = z / scale[:, None]
    return xi, z


def global_bound_constants(ctx: KernelContext, ga: GlobalKernelApproximant, size: int = 20000,
                           seed: int = 0):
    """Sampled constants of the two surrogate bounds.

    C1 = max_{d >= 1/m} |K - K_glob| m^alpha d^{n+alpha};  C2 = max_{d <= 1/m} |K_glob| / m^n.
    """
    rng = np.random.default_rng(seed)
    xi, z = kernel_pair_samples(ctx.dom, size, rng)
    d = ctx.dom.quasimetric(xi, z)
    n, m, a = ctx.dom.n, ga.m, ga.alpha
    far = d >= 1.0 / m
    ok = d > SINGULAR_TOL
    K = np.zeros(size, dtype=complex)
    K[ok] = d[ok] ** 0 * ctx.dom.leray_v(xi[ok], z[ok]) ** (-n)
    Kg = ga(xi, z)
    c1 = float(np.max(np.abs(K[far] - Kg[far]) * m ** a * d[far] ** (n + a))) if np.any(far) else 0.0
    near = ~far
    c2 = float(np.max(np.abs(Kg[near])) / m ** n) if np.any(near) else 0.0
    return c1, c2


def local_error_slope(ctx: KernelContext, m: int, h: float = 0.1, size: int = 400, seed: int = 0,
                      z0=None):
    """Fitted exponent of |K - K_loc| in d(z, z0), for xi with d(xi, z0) > 2h."""
    dom = ctx.dom
    rng = np.random.default_rng(seed)
    if z0 is None:
        z0 = random_sphere_points(dom, 1, rng)[0]
    la = local_approximant(ctx, z0, m, h)
    # xi on shell levels, far from z0
    xi = random_sphere_points(dom, 4 * size, rng) * np.sqrt(1 + rng.uniform(0, dom.epsilon, 4 * size))[:, None]
    xi = xi[dom.quasimetric(xi, z0) > 2 * h][:size]
    # z on dOmega near z0 in random tangential and normal directions
    dist = 10.0 ** rng.uniform(-5, np.log10(h / 4), len(xi))
    g = rng.standard_normal((len(xi), dom.n)) + 1j * rng.standard_normal((len(xi), dom.n))
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    z = z0 + np.sqrt(dist)[:, None] * g
    from .geometry import project_boundary
    z = project_boundary(dom, z)
    dz = dom.quasimetric(z0, z)
    err = np.abs(kernel(ctx, xi, z) - la(xi, z))
    good = (err > 1e-300) & (dz > 0)
    slope, _ = np.polyfit(np.log(dz[good]), np.log(err[good]), 1)
    return float(slope)


def delta_chain_constant(ctx: KernelContext, h: float = 0.1, size: int = 2000, seed: int = 0):
    """max |Delta| / (d(z, z0)^{1/2} d(xi, z)^{1/2}) over sampled triples."""
    dom = ctx.dom
    rng = np.random.default_rng(seed)
    z0 = random_sphere_points(dom, size, rng)
    xi = random_sphere_points(dom, size, rng) * np.sqrt(1 + rng.uniform(0, dom.epsilon, size))[:, None]
    g = rng.standard_normal((size, dom.n)) + 1j * rng.standard_normal((size, dom.n))
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    from .geometry import project_boundary
    z = project_boundary(dom, z0 + np.sqrt(10.0 ** rng.uniform(-4, np.log10(h), size))[:, None] * g)
    delta = np.abs(dom.leray_v(xi, z) - dom.leray_v(xi, z0))
    den = np.sqrt(dom.quasimetric(z0, z) * dom.quasimetric(xi, z))
    ok = den > 0
    return float(np.max(delta[ok] / den[ok]))
