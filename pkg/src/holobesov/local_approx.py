"""Moment-interpolation projectors on fat boundary sets and best-approximation oracles.

A grid over a fat set K = B(xi, h) lives in the tangent frame at xi.  The box
``[-c sqrt h, c sqrt h)^{2(n-1)} x [-c h, c h)`` of ``(z', Re w)`` is covered
by (m+1)^n cells: m+1 squares per complex tangent variable and m+1 intervals
of length ``h1 = 2 c h / (m+1)`` in ``Re w``.  Each node sits on the boundary
over the centre of its squares and the bottom of its interval.

The functional attached to a node u averages f with the weight
``conj(P1((z' - u') / hs)) / hs^2`` over the squares and ``P0`` along a path in
the normal variable.  In "holomorphic" mode the path is the segment from the
node's own normal coordinate ``u_n`` to the boundary point above, which makes
the functional reproduce every polynomial of per-variable degree m exactly.
In "boundary" mode the path is the boundary curve over ``(z', Re w)``; it only
uses boundary values and is exact up to the drift of the curve's base point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import ceil, sqrt

import numpy as np

from .decomposition import FatSet, domain_frame_constant
from .errors import AccuracyError, ConditioningError, GridGeometryError, ParameterError
from .geometry import Domain, TangentFrame, tangent_frame
from .polynomials import (MAX_CONDITION, MultiPoly, interpolate, monomial_exponents,
                          p0_moment_poly, p1_moment_poly, vandermonde)
from .quadrature import QuadratureRule

MAX_GRID_DEGREE = {1: 20, 2: 6, 3: 3}
REPRODUCTION_TOL = 1e-7
RESIDUAL_LIMIT = 1e-5


@dataclass
class InterpGrid:
    dom: Domain
    host: FatSet
    frame: TangentFrame
    m: int
    h: float
    c: float
    squares: int  # squares per side in each tangent variable
    hs: float  # half side of a tangent square
    h1: float  # length of a normal interval
    nodes: np.ndarray  # (N, n) boundary points
    node_zp: np.ndarray  # (N, n-1) tangent coordinates of the nodes
    node_x: np.ndarray  # (N,) bottom of each node's interval
    node_w: np.ndarray  # (N,) normal coordinate x + i y of each node
    origin: np.ndarray
    transform: np.ndarray
    order: int = 0  # Gauss order used by the functionals, set by calibration
    calibration_error: float = np.nan
    _rules: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.nodes)

    @property
    def n(self) -> int:
        return self.dom.n

    def scaled(self, z):
        """Scaled frame coordinates (z' / sqrt h, w / h) used by the polynomials."""
        z = np.asarray(z, dtype=complex)
        return (z - self.origin) @ self.transform.T

    def basis_poly(self, coeffs) -> MultiPoly:
        return MultiPoly(monomial_exponents(self.n, self.m, "per_variable"), coeffs,
                         "per_variable", self.origin, self.transform)

    def weight(self, j: int, zp, w):
        """P_{Q^j}(z', w) for the boundary curve over the node's cell."""
        zp = np.asarray(zp, dtype=complex)
        p1 = p1_moment_poly(self.m)
        tang = np.ones(zp.shape[:-1], dtype=complex)
        for k in range(self.n - 1):
            tang = tang * np.conj(p1((zp[..., k] - self.node_zp[j, k]) / self.hs)) / self.hs ** 2
        return tang


@lru_cache(maxsize=None)
def _gauss(q: int):
    return np.polynomial.legendre.leggauss(q)


def _square_centers(c_sqrt_h: float, k: int, count: int) -> np.ndarray:
    side = 2 * c_sqrt_h / k
    centers = []
    for a in range(k):
        for b in range(k):
            centers.append(complex(-c_sqrt_h + (b + 0.5) * side, -c_sqrt_h + (a + 0.5) * side))
    return np.array(centers[:count])


def build_grid(dom: Domain, K: FatSet, m: int) -> InterpGrid:
    """Interpolation grid of (m+1)^n boundary nodes over the fat set K."""
    if m < 0:
        raise ParameterError("degree must be nonnegative")
    if m > MAX_GRID_DEGREE[dom.n]:
        raise ParameterError(f"degree {m} too large for n={dom.n}")
    xi = np.asarray(K.center, dtype=complex)
    h = float(K.scale)
    fr = tangent_frame(dom, xi)
    c = domain_frame_constant(dom)
    n = dom.n
    k = ceil(sqrt(m + 1))
    hs = c * np.sqrt(h) / k
    h1 = 2 * c * h / (m + 1)
    centers = _square_centers(c * np.sqrt(h), k, m + 1)
    xs = -c * h + h1 * np.arange(m + 1)
    grids = np.meshgrid(*([np.arange(m + 1)] * (n - 1) + [np.arange(m + 1)]), indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=-1)
    zp = centers[idx[:, :-1]] if n > 1 else np.zeros((len(idx), 0), dtype=complex)
    x = xs[idx[:, -1]]
    # the lift must exist over the whole box, corners included
    corner = np.array([c * np.sqrt(h) * (1 + 1j)] * (n - 1)).reshape(1, n - 1)
    _check_lift(fr, np.concatenate([corner, -corner]), np.array([c * h, -c * h]))
    nodes = fr.lift(zp, x)
    _, wn = fr.to_local(nodes)
    D = np.array([1 / np.sqrt(h)] * (n - 1) + [1 / h])
    A = np.vstack([np.conj(fr.tangent).T, 1j * np.conj(fr.nu)[None, :]])
    grid = InterpGrid(dom=dom, host=K, frame=fr, m=m, h=h, c=c, squares=k, hs=hs, h1=h1,
                      nodes=nodes, node_zp=zp, node_x=x, node_w=wn, origin=xi,
                      transform=D[:, None] * A)
    calibrate(grid)
    return grid


def _check_lift(fr: TangentFrame, zp, x):
    try:
        fr.lift(zp, x)
    except GridGeometryError as exc:
        raise GridGeometryError(f"scale too large for the tangent lift: {exc}") from None


def _tangent_nodes(grid: InterpGrid, j: int, q: int):
    """Gauss nodes and weights on the product of the node's tangent squares."""
    n = grid.n
    if n == 1:
        return np.zeros((1, 0), dtype=complex), np.ones(1)
    g, wg = _gauss(q)
    axes = [g * grid.hs] * (2 * (n - 1))
    grids = np.meshgrid(*axes, indexing="ij")
    wgrids = np.meshgrid(*([wg * grid.hs] * (2 * (n - 1))), indexing="ij")
    P = np.stack([a.ravel() for a in grids], axis=-1)
    W = np.prod(np.stack([a.ravel() for a in wgrids], axis=-1), axis=-1)
    zp = P[:, 0::2] + 1j * P[:, 1::2] + grid.node_zp[j]
    return zp, W


def functional_rule(grid: InterpGrid, j: int, q: int | None = None, mode: str = "holomorphic"):
    """Points and complex weights with L_j(f) = sum(weights * f(points)).

    Also returns the density of the functional against surface measure at each
    point (boundary mode) which bounds |L_j f| by sup|density| int |f| d sigma.
    """
    q = q or grid.order
    key = (j, q, mode)
    if key in grid._rules:
        return grid._rules[key]
    fr = grid.frame
    zp, wz = _tangent_nodes(grid, j, q)
    tang = grid.weight(j, zp, None) * wz
    t, wt = _gauss(q)
    t = 0.5 * (t + 1)
    wt = 0.5 * wt
    p0 = p0_moment_poly(grid.m)
    x0 = grid.node_x[j]
    x1 = x0 + grid.h1
    Z = np.repeat(zp, q, axis=0)
    T = np.tile(t, len(zp))
    WT = np.tile(wt, len(zp))
    TANG = np.repeat(tang, q)
    w1 = x1 + 1j * _heights(fr, zp, np.full(len(zp), x1))
    W1 = np.repeat(w1, q)
    if mode == "holomorphic":
        un = grid.node_w[j]
        w = un + T * (W1 - un)
        pts = fr.from_local(Z, w)
        weights = TANG * WT * p0(T)
        density = np.full(len(pts), np.nan)
    elif mode == "boundary":
        w0 = x0 + 1j * _heights(fr, zp, np.full(len(zp), x0))
        W0 = np.repeat(w0, q)
        x = x0 + T * grid.h1
        pts, sx, area = fr.lift_with_slopes(Z, x)
        _, w = fr.to_local(pts)
        dw = (1 + 1j * sx) * grid.h1
        kern = TANG / np.repeat(wz, q) * p0((w - W0) / (W1 - W0)) / (W1 - W0) * (1 + 1j * sx)
        weights = TANG * WT * p0((w - W0) / (W1 - W0)) / (W1 - W0) * dw
        density = np.abs(kern) / area
    else:
        raise ParameterError(f"unknown functional mode {mode!r}")
    out = (pts, weights, density)
    grid._rules[key] = out
    return out


def _heights(fr: TangentFrame, zp, x):
    try:
        return fr._lift_height(zp, x)
    except GridGeometryError as exc:
        raise GridGeometryError(f"scale too large for the tangent lift: {exc}") from None


def calibrate(grid: InterpGrid, start: int = 8, max_order: int = 64) -> int:
    """Smallest doubled Gauss order reproducing all basis monomials at the nodes."""
    exps = monomial_exponents(grid.n, grid.m, "per_variable")
    target = vandermonde(grid.scaled(grid.nodes), exps)
    q = start
    while True:
        err = 0.0
        for j in range(len(grid)):
            pts, wts, _ = functional_rule(grid, j, q)
            got = wts @ vandermonde(grid.scaled(pts), exps)
            err = max(err, float(np.max(np.abs(got - target[j]))))
        if err <= REPRODUCTION_TOL:
            grid.order = q
            grid.calibration_error = err
            return q
        if 2 * q > max_order:
            raise AccuracyError(f"functional quadrature stalls at residual {err:.2e}")
        q *= 2


def _evaluate(f, pts):
    return np.asarray(f(pts), dtype=complex)


def projector_functional(grid: InterpGrid, f, j: int, mode: str = "holomorphic",
                         with_residual: bool = False, order: int | None = None, strict: bool = True):
    """L_j(f): the moment-weighted average attached to node j.

    With ``with_residual`` the value is refined by doubling the Gauss order
    (up to four times the calibrated one) until two successive values agree to
    the residual limit; the last value and relative residual are returned.
    """
    q = order or grid.order
    pts, wts, _ = functional_rule(grid, j, q, mode)
    val = complex(wts @ _evaluate(f, pts))
    if not with_residual:
        return val
    res = np.inf
    for _ in range(2):
        q *= 2
        pts, wts, _ = functional_rule(grid, j, q, mode)
        fine = complex(wts @ _evaluate(f, pts))
        res = abs(fine - val) / max(1.0, abs(fine))
        val = fine
        if res <= RESIDUAL_LIMIT:
            break
    if res > RESIDUAL_LIMIT and strict:
        raise AccuracyError(f"functional quadrature residual {res:.2e} at node {j}")
    return val, res


@dataclass
class ProjectorResult:
    poly: MultiPoly
    values: np.ndarray
    residuals: np.ndarray
    nodes: np.ndarray
    mode: str

    def to_json(self) -> str:
        return json.dumps({
            "mode": self.mode,
            "nodes": [[[float(c.real), float(c.imag)] for c in row] for row in self.nodes],
            "values": [[float(v.real), float(v.imag)] for v in self.values],
            "residuals": [float(r) for r in self.residuals],
            "poly": self.poly.to_dict(),
        })


def project(grid: InterpGrid, f, mode: str = "holomorphic", strict: bool = True) -> ProjectorResult:
    """P_K f: the per-variable-degree-m interpolant of the nodal functionals.

    ``strict=False`` keeps values whose quadrature residual exceeds the limit
    (the residuals are still reported) instead of raising.
    """
    vals, res = [], []
    for j in range(len(grid)):
        v, r = projector_functional(grid, f, j, mode, with_residual=True, strict=strict)
        vals.append(v)
        res.append(r)
    vals = np.array(vals)
    poly = interpolate(grid.nodes, vals, grid.m, grid.origin, grid.transform)
    miss = np.max(np.abs(poly(grid.nodes) - vals))
    if miss > 1e-8 * max(1.0, np.max(np.abs(vals))):
        raise ConditioningError(f"interpolant misses the nodal values by {miss:.2e}")
    return ProjectorResult(poly, vals, np.array(res), grid.nodes, mode)


def lebesgue_box(grid: InterpGrid, lam: float, per_axis: int | None = None) -> np.ndarray:
    """Points of the box around K enlarged by lam h in each frame direction."""
    n, h, c = grid.n, grid.h, grid.c
    per_axis = per_axis or (9 if n <= 2 else 5)
    s = np.linspace(-1, 1, per_axis)
    zr = (1 + lam) * c * np.sqrt(h) * s
    xr = (1 + lam) * c * h * s
    top = lam * h
    bottom = -((1 + lam) ** 2 * c * c + lam) * h * (n - 1) - lam * h
    yr = np.linspace(bottom, top, per_axis)
    axes = [zr] * (2 * (n - 1)) + [xr, yr]
    grids = np.meshgrid(*axes, indexing="ij")
    P = np.stack([a.ravel() for a in grids], axis=-1)
    zp = P[:, 0:2 * (n - 1):2] + 1j * P[:, 1:2 * (n - 1):2]
    w = P[:, -2] + 1j * P[:, -1]
    return grid.frame.from_local(zp, w)


def stability_constant(grid: InterpGrid, lam: float = 1.0) -> float:
    """C with max_{dist(z,K) <= lam h} |P_K f| <= C / sigma(K) int_K |f| d sigma.

    The boundary-mode functionals have kernels kappa_j on disjoint cells, so
    P_K f(z) = int sum_j l_j(z) kappa_j f d sigma and the constant is
    sigma(K) * max_z max_j |l_j(z)| sup|kappa_j| with l_j the Lagrange basis.
    """
    V = vandermonde(grid.scaled(grid.nodes), monomial_exponents(grid.n, grid.m, "per_variable"))
    Vinv = np.linalg.inv(V)
    pts = lebesgue_box(grid, lam)
    L = np.abs(vandermonde(grid.scaled(pts), monomial_exponents(grid.n, grid.m, "per_variable")) @ Vinv)
    sup = np.array([np.max(functional_rule(grid, j, grid.order, "boundary")[2]) for j in range(len(grid))])
    return float(grid.host.sigma * np.max(L * sup[None, :]))


# -- best approximation -------------------------------------------------------

@dataclass
class BestApprox:
    error: float
    poly: MultiPoly
    lower: float = np.nan
    approximate: bool = False
    iterations: int = 0

    def __iter__(self):
        yield self.error
        yield self.poly


def _sample(K, f):
    rule = K.rule if isinstance(K, FatSet) else K
    if not isinstance(rule, QuadratureRule):
        raise ParameterError("K must carry a quadrature rule")
    vals = f if not callable(f) else f(rule.nodes)
    vals = np.asarray(vals, dtype=complex)
    if vals.shape != rule.weights.shape:
        raise ParameterError("sampled values do not match the quadrature nodes")
    return rule, vals


def whitening_frame(nodes, weights):
    """Affine coordinates in which the samples have unit covariance.

    Total degree is affine invariant, so the polynomial space is unchanged
    while the monomial basis becomes well scaled on small anisotropic sets.
    """
    w = weights / np.sum(weights)
    mu = w @ nodes
    d = nodes - mu
    C = (d.T * w) @ np.conj(d)
    lam, U = np.linalg.eigh(C)
    lam = np.maximum(lam, 1e-300)
    return mu, U.conj().T / np.sqrt(lam)[:, None]


def _weighted_basis(rule: QuadratureRule, m: int):
    origin, transform = whitening_frame(rule.nodes, rule.weights)
    exps = monomial_exponents(rule.nodes.shape[1], m, "total")
    shell = MultiPoly(exps, np.zeros(len(exps)), "total", origin, transform)
    V = vandermonde(shell.local(rule.nodes), exps)
    return shell, V


def _orthonormal_solve(B, y):
    """Least squares via two passes of Householder QR (re-orthogonalized)."""
    Q, R = np.linalg.qr(B)
    Q2, R2 = np.linalg.qr(Q)
    R = R2 @ R
    d = np.abs(np.diag(R))
    if d.size and d.min() <= d.max() / MAX_CONDITION:
        raise ConditioningError("polynomial basis is numerically rank deficient on K")
    return np.linalg.solve(R, Q2.conj().T @ y)


def ls_best_approx(f, K, m: int) -> BestApprox:
    """Discrete L^2(K) projection onto holomorphic polynomials of total degree <= m."""
    if m < 0:
        raise ParameterError("degree must be nonnegative")
    rule, vals = _sample(K, f)
    shell, V = _weighted_basis(rule, m)
    sw = np.sqrt(rule.weights)
    B = V * sw[:, None]
    y = vals * sw
    coef = _orthonormal_solve(B, y)
    shell.coeffs = coef
    err = float(np.linalg.norm(y - B @ coef))
    return BestApprox(err, shell)


def minimax_best_approx(f, K, m: int, maxiter: int = 200, tol: float = 1e-8) -> BestApprox:
    """Discrete sup-norm best approximation by Lawson's reweighting.

    ``lower`` is the weighted least-squares residual for the final weights
    (weights summing to one), which never exceeds the true discrete minimax
    error, so [lower, error] brackets it.
    """
    if m < 0:
        raise ParameterError("degree must be nonnegative")
    rule, vals = _sample(K, f)
    shell, V = _weighted_basis(rule, m)
    N = len(vals)
    lw = np.full(N, 1.0 / N)
    best = None
    lower = 0.0
    prev = np.inf
    it = 0
    for it in range(1, maxiter + 1):
        sw = np.sqrt(lw)
        keep = sw > 0
        coef = _orthonormal_solve(V[keep] * sw[keep, None], vals[keep] * sw[keep])
        r = np.abs(vals - V @ coef)
        lower = max(lower, float(np.sqrt(np.sum(lw * r * r))))
        emax = float(r.max())
        if best is None or emax < best[0]:
            best = (emax, coef)
        if emax <= 1e-14 or abs(prev - emax) <= tol * max(emax, 1e-300):
            break
        prev = emax
        lw = lw * r
        s = lw.sum()
        if s <= 0:
            break
        lw = lw / s
        lw[lw < 1e-300] = 0.0
    err, coef = best
    shell.coeffs = coef
    return BestApprox(err, shell, lower=min(lower, err), approximate=err > 0 and lower < (1 - 1e-3) * err,
                      iterations=it)


# -- piecewise projections ----------------------------------------------------

def piecewise_projection(dom: Domain, decomposition, f, m: int, p=2, method: str = "projector"):
    """T_h on a decomposition and ||f - T_h||_p over its quadrature nodes.

    ``method="projector"`` uses P_K on the grid at each cell centre,
    ``"ls"`` the per-cell least-squares best approximation.
    """
    from .quadrature import lp_norm
    rule = decomposition.rule
    vals = np.asarray(f(rule.nodes), dtype=complex)
    approx = np.empty_like(vals)
    for j, cell in enumerate(decomposition.cells):
        mine = decomposition.labels == j
        if method == "projector":
            grid = build_grid(dom, FatSet(cell.center, cell.scale, cell.rule), m)
            P = project(grid, f, strict=False).poly
        elif method == "ls":
            P = ls_best_approx(vals[mine], cell, m).poly
        else:
            raise ParameterError(f"unknown method {method!r}")
        approx[mine] = P(rule.nodes[mine])
    return lp_norm(vals - approx, rule.weights, p)
