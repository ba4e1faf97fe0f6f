"""Surface and shell quadrature on level sets of the defining function.

The unit sphere of C^n is parameterized by moduli ``u_j = |eta_j|^2`` on the
simplex and phases ``phi_j``; then ``d sigma = 2^{1-n} du dphi``.  Gauss-Legendre
is used in the moduli and the trapezoid rule in the phases.  Ellipsoids are
the image of the sphere under ``z = eta / sqrt(a)`` with the surface Jacobian
carried in the weights, and level sets ``dOmega_t`` are the dilates
``sqrt(1 + t) dOmega``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyDomainError, InvalidOrderError
from .geometry import Domain, TangentFrame


@dataclass
class QuadratureRule:
    level: float
    nodes: np.ndarray
    weights: np.ndarray
    order: tuple

    @property
    def sigma(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, values):
        return np.sum(self.weights * values, axis=-1)

    def subset(self, mask) -> "QuadratureRule":
        return QuadratureRule(self.level, self.nodes[mask], self.weights[mask], self.order)

    def __len__(self):
        return len(self.weights)


def _orders(n, order):
    if np.isscalar(order):
        N = int(order)
        if N < 2:
            raise InvalidOrderError("boundary rule order must be >= 2")
        return (N,) + (2 * N + 1,) * n
    order = tuple(int(k) for k in order)
    if len(order) != n + 1 or min(order) < 1:
        raise InvalidOrderError("order tuple is (moduli, phase_1, ..., phase_n)")
    if order[0] < 2 and n > 1:
        raise InvalidOrderError("boundary rule order must be >= 2")
    return order


def _gl01(k):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (x + 1.0), 0.5 * w


def sphere_rule(n: int, order, rotation=None):
    """Nodes and weights on the unit sphere of C^n (n in 1..3)."""
    nu, *phases = _orders(n, order)
    if n == 1:
        moduli = np.ones((1, 1))
        mw = np.ones(1)
    elif n == 2:
        u, wu = _gl01(nu)
        moduli = np.column_stack([1.0 - u, u])
        mw = 0.5 * wu
    else:
        x, wx = _gl01(nu)
        y, wy = _gl01(nu)
        X, Y = np.meshgrid(x, y, indexing="ij")
        W = np.outer(wx, wy) * (1.0 - X)
        X, Y, W = X.ravel(), Y.ravel(), W.ravel()
        moduli = np.column_stack([X, (1 - X) * Y, (1 - X) * (1 - Y)])
        mw = 0.25 * W
    angles = [2 * np.pi * np.arange(M) / M for M in phases]
    grids = np.meshgrid(*angles, indexing="ij")
    ph = np.stack([g.ravel() for g in grids], axis=-1)
    pw = np.prod([2 * np.pi / M for M in phases])
    eta = np.sqrt(np.clip(moduli, 0, None))[:, None, :] * np.exp(1j * ph)[None, :, :]
    eta = eta.reshape(-1, n)
    w = np.repeat(mw * pw, ph.shape[0])
    if rotation is not None:
        eta = eta @ np.asarray(rotation).T
    return eta, w


def boundary_rule(dom: Domain, t: float = 0.0, order=16, rotation=None) -> QuadratureRule:
    """Product rule on dOmega_t.

    For the sphere an integer order N integrates z^alpha zbar^beta exactly
    whenever |alpha| + |beta| <= 2N.  ``rotation`` is a unitary acting on the
    sphere variables eta = sqrt(a) z before the push-forward.
    """
    eta, w = sphere_rule(dom.n, order, rotation)
    z = eta / np.sqrt(dom.a)
    if not dom.is_ball:
        a = dom.a
        w = w * np.linalg.norm(a * z, axis=-1) / np.prod(a)
    s = np.sqrt(1.0 + t)
    return QuadratureRule(float(t), z * s, w * s ** (2 * dom.n - 1), _orders(dom.n, order))


def pole_rotation(direction):
    """Unitary whose first column is the unit vector ``direction``."""
    d = np.asarray(direction, dtype=complex)
    n = d.size
    nrm = np.linalg.norm(d)
    if nrm < 1e-14:
        return np.eye(n, dtype=complex)
    d = d / nrm
    k = int(np.argmax(np.abs(d)))
    cols = [d] + [np.eye(n)[:, j] for j in range(n) if j != k]
    q, r = np.linalg.qr(np.column_stack(cols))
    q[:, 0] *= r[0, 0] / abs(r[0, 0])
    return q


def lp_norm(values, weights, p):
    """Weighted L^p norm of sampled values; p may be np.inf."""
    values = np.abs(np.asarray(values))
    weights = np.asarray(weights)
    if values.size == 0:
        raise EmptyDomainError("no quadrature nodes")
    if np.isinf(p):
        return float(np.max(values))
    return float(np.sum(weights * values ** p) ** (1.0 / p))


def patch_rule(frame: TangentFrame, zp_half: float, x_range, nz: int = 12, nx: int = 12) -> QuadratureRule:
    """Gauss rule on the lifted tangent box [-zp_half, zp_half]^{2(n-1)} x x_range."""
    n = frame.dom.n
    gz, wz = np.polynomial.legendre.leggauss(nz)
    gx, wx = np.polynomial.legendre.leggauss(nx)
    x0, x1 = x_range
    xs = 0.5 * (x1 - x0) * (gx + 1) + x0
    wxs = 0.5 * (x1 - x0) * wx
    axes = [zp_half * gz] * (2 * (n - 1)) + [xs]
    waxes = [zp_half * wz] * (2 * (n - 1)) + [wxs]
    grids = np.meshgrid(*axes, indexing="ij")
    wgrids = np.meshgrid(*waxes, indexing="ij")
    P = np.stack([g.ravel() for g in grids], axis=-1)
    W = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    zp = P[:, 0:2 * (n - 1):2] + 1j * P[:, 1:2 * (n - 1):2]
    pts, _, area = frame.lift_with_slopes(zp, P[:, -1])
    return QuadratureRule(frame.level, pts, W * area, (nz, nx))


def curve_integral(g, w0, w1, order: int = 16, curve=None):
    """Integral of g along a path from w0 to w1.

    Without ``curve`` the path is the straight segment; otherwise ``curve``
    maps parameters t in [0, 1] to (points, derivatives) of the path.
    """
    t, wt = _gl01(order)
    if curve is None:
        pts = w0 + t * (w1 - w0)
        return np.sum(wt * g(pts)) * (w1 - w0)
    pts, dpts = curve(t)
    return np.sum(wt * g(pts) * dpts)


@dataclass
class ShellRule:
    levels: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    node_levels: np.ndarray

    def integrate(self, values):
        return np.sum(self.weights * values, axis=-1)


def dyadic_intervals(epsilon: float, bands: int):
    """[eps 2^-(k+1), eps 2^-k] for k < bands, plus [0, eps 2^-bands]."""
    edges = [epsilon * 2.0 ** (-k) for k in range(bands + 1)] + [0.0]
    return [(edges[k + 1], edges[k]) for k in range(len(edges) - 1)]


def shell_rule(dom: Domain, base: QuadratureRule, intervals=None, radial_order: int = 32) -> ShellRule:
    """Coarea rule d mu = d sigma_r dr / |grad rho| over the given r-intervals.

    ``base`` must be a rule on dOmega (level 0); level sets are its dilates.
    """
    if intervals is None:
        intervals = dyadic_intervals(dom.epsilon, 6)
    rs, wr = [], []
    for lo, hi in intervals:
        x, w = _gl01(radial_order)
        rs.append(lo + (hi - lo) * x)
        wr.append((hi - lo) * w)
    rs = np.concatenate(rs)
    wr = np.concatenate(wr)
    scale = np.sqrt(1.0 + rs)
    nodes = scale[:, None, None] * base.nodes[None, :, :]
    gnorm = np.linalg.norm(dom.grad_rho(nodes), axis=-1)
    weights = (wr * scale ** (2 * dom.n - 1))[:, None] * base.weights[None, :] / gnorm
    return ShellRule(levels=rs, nodes=nodes.reshape(-1, dom.n), weights=weights.ravel(),
                     node_levels=np.repeat(rs, len(base.weights)))


def shell_integral(dom: Domain, g, rule: ShellRule):
    """Integral of g over the shell, g evaluated on (N, n) node arrays."""
    vals = np.asarray(g(rule.nodes))
    outside = (rule.node_levels <= 0) | (rule.node_levels > dom.epsilon)
    vals = np.where(outside, 0.0, vals)
    return rule.integrate(vals)
