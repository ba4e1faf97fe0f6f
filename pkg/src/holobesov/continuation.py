"""Pseudoanalytic continuations into the outer shell and the S_p profile.

Global mode glues a dyadic sequence of polynomials P_{2^m} across the bands
``2^{-m} < rho <= 2^{-m+1}``.  Local mode glues local projector polynomials with
a Whitney-type partition of unity: log-dyadic radial bumps times normalized
tangential bumps around quasimetric nets on dOmega.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial, pi

import numpy as np
from scipy.spatial import cKDTree

from .decomposition import FatSet, greedy_net, quasiball, sphere_coords
from .errors import AccuracyError, IncompleteSequenceError, ParameterError
from .local_approx import RESIDUAL_LIMIT, build_grid, project
from .geometry import Domain, project_boundary, projection_jacobian
from .kernels import taylor_coefficients
from .polynomials import MultiPoly, monomial_exponents, vandermonde
from .quadrature import boundary_rule, lp_norm, pole_rotation


@dataclass(frozen=True)
class Cutoff:
    """1 for t <= lo, 0 for t >= hi, quintic smoothstep in between."""

    lo: float = 1.25
    hi: float = 1.75

    def _u(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def __call__(self, t):
        u = self._u(t)
        return 1.0 - u ** 3 * (10 - 15 * u + 6 * u * u)

    def derivative(self, t):
        u = self._u(t)
        return -30 * u * u * (1 - u) ** 2 / (self.hi - self.lo)

    @property
    def max_slope(self) -> float:
        return 1.875 / (self.hi - self.lo)


CUTOFF = Cutoff()
CHUNK = 4096


def band_index(rho):
    """m with 2^{-m} < rho <= 2^{-m+1}."""
    rho = np.asarray(rho, dtype=float)
    return np.floor(-np.log2(rho)).astype(int) + 1


@dataclass
class ContinuationField:
    dom: Domain
    mode: str
    polys: dict = field(default_factory=dict)  # global: m -> P_{2^m}
    top: int = 0  # shallowest band index
    depth: int = 0  # deepest band index
    whitney: object = None  # local mode data

    @property
    def epsilon(self) -> float:
        return self.dom.epsilon

    # -- evaluation -------------------------------------------------------------
    def _outer(self, rho):
        t = 2 * rho / self.epsilon
        return CUTOFF(t), CUTOFF.derivative(t) * 2 / self.epsilon

    def value(self, z, chunk: int = CHUNK):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if len(z) > chunk:
            return np.concatenate([self.value(z[s:s + chunk]) for s in range(0, len(z), chunk)])
        rho = self.dom.rho(z)
        chi_out, _ = self._outer(rho)
        inner = self._inner_value(z, rho)
        out = np.where(rho > 0, chi_out * inner, inner)
        return np.where(rho >= self.epsilon, 0.0, out)

    def dbar(self, z, chunk: int = CHUNK):
        """d f / d zbar_j at shell points, shape (N, n)."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if len(z) > chunk:
            return np.concatenate([self.dbar(z[s:s + chunk]) for s in range(0, len(z), chunk)])
        rho = self.dom.rho(z)
        chi_out, dchi_out = self._outer(rho)
        inner, dbar_inner = self._inner_dbar(z, rho)
        g = self.dom.dbar_rho(z)
        out = chi_out[:, None] * dbar_inner + (inner * dchi_out)[:, None] * g
        inside = (rho <= 0) | (rho >= self.epsilon)
        out[inside] = 0.0
        return out

    def dbar_size(self, z):
        """|dbar f| as the sum of component moduli."""
        return np.sum(np.abs(self.dbar(z)), axis=-1)

    def _inner_value(self, z, rho):
        if self.mode == "global":
            return self._global_value(z, rho)[0]
        return self.whitney.value(z, rho)

    def _inner_dbar(self, z, rho):
        if self.mode == "global":
            return self._global_dbar(z, rho)
        return self.whitney.dbar(z, rho)

    # -- global mode ----------------------------------------------------------------
    def _band(self, rho):
        m = band_index(np.maximum(rho, 1e-300))
        return np.clip(m, self.top, self.depth)

    def _global_parts(self, z, rho):
        m = self._band(rho)
        lo = np.empty(len(z), dtype=complex)
        hi = np.empty(len(z), dtype=complex)
        for k in np.unique(m):
            sel = m == k
            lo[sel] = self.polys[k](z[sel])
            hi[sel] = self.polys[k + 1](z[sel])
        return m, lo, hi

    def _global_value(self, z, rho):
        m, lo, hi = self._global_parts(z, rho)
        t = 2.0 ** m * rho
        chi = np.where(rho <= 2.0 ** (-self.depth), 1.0, CUTOFF(t))
        return lo + chi * (hi - lo), m, lo, hi

    def _global_dbar(self, z, rho):
        val, m, lo, hi = self._global_value(z, rho)
        t = 2.0 ** m * rho
        dchi = np.where(rho <= 2.0 ** (-self.depth), 0.0, CUTOFF.derivative(t) * 2.0 ** m)
        return val, ((hi - lo) * dchi)[:, None] * self.dom.dbar_rho(z)

    def lam(self, z):
        """lambda(z) = |P_{2^{m+1}} - P_{2^m}| / rho on the band of z."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        rho = self.dom.rho(z)
        _, lo, hi = self._global_parts(z, rho)
        return np.abs(hi - lo) / rho


def build_global(dom: Domain, polys, M: int) -> ContinuationField:
    """Glue P_{2^m} (dict m -> MultiPoly, or a list indexed by m) over bands top..M-1.

    Below rho = 2^{-(M-1)} the field is P_{2^M}.
    """
    if isinstance(polys, (list, tuple)):
        polys = dict(enumerate(polys))
    top = int(band_index(dom.epsilon))
    if M <= top:
        raise ParameterError(f"depth M={M} must exceed the top band {top}")
    missing = [m for m in range(top, M + 1) if polys.get(m) is None]
    if missing:
        raise IncompleteSequenceError(f"missing P_(2^m) for m in {missing}")
    return ContinuationField(dom, "global", {m: polys[m] for m in range(top, M + 1)}, top, M - 1)


# -- local mode: Whitney partition -------------------------------------------------

def _bump(t):
    """C^2 bump, positive on [0, 2), zero beyond."""
    u = np.clip(np.asarray(t) / 2.0, 0.0, 1.0)
    return (1 - u * u) ** 3


@dataclass
class Whitney:
    dom: Domain
    f: object
    m: int
    top: int
    depth: int
    c1: float
    scales: dict
    centers: dict
    trees: dict
    cell_polys: dict = field(default_factory=dict)
    unresolved: int = 0

    def radial(self, k, rho, with_derivative: bool = False):
        """Log-dyadic bumps cos^2 centred at rho = 2^{-k}; they sum to one."""
        s = np.log2(np.maximum(rho, 1e-300)) + k
        inside = np.abs(s) < 1
        val = np.where(inside, np.cos(0.5 * pi * s) ** 2, 0.0)
        der = np.where(inside, -0.5 * pi * np.sin(pi * s) / (np.maximum(rho, 1e-300) * np.log(2)), 0.0)
        for edge, side in ((self.depth, s <= 0), (self.top, s >= 0)):
            if k == edge:
                val = np.where(side, 1.0, val)
                der = np.where(side, 0.0, der)
        return (val, der) if with_derivative else val

    def poly(self, k, i) -> MultiPoly:
        key = (k, i)
        if key not in self.cell_polys:
            K = FatSet(self.centers[k][i], self.scales[k], None)
            grid = build_grid(self.dom, K, self.m)
            res = project(grid, self.f, "holomorphic", strict=False)
            if np.max(res.residuals) > RESIDUAL_LIMIT:
                # singular point of f near the cell; keep the refined value
                self.unresolved += 1
            self.cell_polys[key] = res.poly
        return self.cell_polys[key]

    def pairs(self, z, rho):
        """(point, band, cell) triples whose bumps may be nonzero at z."""
        psi = project_boundary(self.dom, z)
        sc = sphere_coords(self.dom, psi)
        pts, bands, cells = [], [], []
        for k in range(self.top, self.depth + 1):
            active = np.where(self.radial(k, rho) > 0)[0]
            if not active.size:
                continue
            # Euclidean reach of the bump support d < 2h (with a little slack)
            lists = self.trees[k].query_ball_point(sc[active], np.sqrt(2 * 2.2 * self.scales[k]))
            for p, lst in zip(active, lists):
                pts.extend([p] * len(lst))
                bands.extend([k] * len(lst))
                cells.extend(lst)
        return np.array(pts, dtype=int), np.array(bands, dtype=int), np.array(cells, dtype=int)

    def chi(self, z, pts, bands, cells, with_dbar: bool = False):
        """Partition-function values for the given triples, optionally with dbar chi.

        chi = R_k(rho) B_i / sum_j B_j with B_i = bump(d(c_i, Psi(z)) / h_k); the
        derivative goes through the Wirtinger Jacobians of Psi.
        """
        dom = self.dom
        z = np.atleast_2d(z)
        N, n = z.shape
        rho = dom.rho(z)
        if with_dbar:
            psi, J, Kb = projection_jacobian(dom, z)
        else:
            psi = project_boundary(dom, z)
        out = np.zeros(len(pts))
        dout = np.zeros((len(pts), n), dtype=complex)
        for k in np.unique(bands):
            sel = np.where(bands == k)[0]
            p = pts[sel]
            c = self.centers[k][cells[sel]]
            wc = dom.leray_w(c)
            phi = np.sum(wc * (c - psi[p]), axis=-1)
            d = np.abs(phi)
            h = self.scales[k]
            u = np.clip(d / (2 * h), 0.0, 1.0)
            b = (1 - u * u) ** 3
            total = np.bincount(p, weights=b, minlength=N)
            R, dR = self.radial(k, rho[p], True)
            out[sel] = R * b / total[p]
            if not with_dbar:
                continue
            # d phi / d zbar_l and d phi / d z_l
            dphi_b = -np.einsum("pj,pjl->pl", wc, Kb[p])
            dphi = -np.einsum("pj,pjl->pl", wc, J[p])
            dsafe = np.maximum(d, 1e-300)[:, None]
            dd = (np.conj(phi)[:, None] * dphi_b + phi[:, None] * np.conj(dphi)) / (2 * dsafe)
            db = (-3 * u * (1 - u * u) ** 2 / h)[:, None] * dd
            dtot = np.stack([np.bincount(p, weights=db[:, l].real, minlength=N)
                             + 1j * np.bincount(p, weights=db[:, l].imag, minlength=N)
                             for l in range(n)], axis=-1)
            drho = dom.dbar_rho(z[p])
            T = total[p][:, None]
            dout[sel] = (dR * b / total[p])[:, None] * drho + \
                R[:, None] * (db * T - b[:, None] * dtot[p]) / (T * T)
        return (out, dout) if with_dbar else out

    def dbar_chi(self, z, pts, bands, cells):
        return self.chi(z, pts, bands, cells, with_dbar=True)[1]

    def dbar_chi_fd(self, z, pts, bands, cells, step: float = 1e-6):
        """Central finite differences of chi in each zbar_j, for checking."""
        n = self.dom.n
        out = np.zeros((len(pts), n), dtype=complex)
        for j in range(n):
            e = np.zeros(n, dtype=complex)
            e[j] = step
            dx = self.chi(z + e, pts, bands, cells) - self.chi(z - e, pts, bands, cells)
            dy = self.chi(z + 1j * e, pts, bands, cells) - self.chi(z - 1j * e, pts, bands, cells)
            out[:, j] = 0.25 * (dx + 1j * dy) / step
        return out

    def _poly_values(self, z, pts, bands, cells):
        vals = np.empty(len(pts), dtype=complex)
        keys = bands.astype(np.int64) * 10 ** 9 + cells
        order = np.argsort(keys, kind="stable")
        uniq, starts = np.unique(keys[order], return_index=True)
        for key, idx in zip(uniq, np.split(order, starts[1:])):
            k, i = divmod(int(key), 10 ** 9)
            vals[idx] = self.poly(k, i)(z[pts[idx]])
        return vals

    def value(self, z, rho):
        pts, bands, cells = self.pairs(z, rho)
        chi = self.chi(z, pts, bands, cells)
        live = chi > 0
        pts, bands, cells, chi = pts[live], bands[live], cells[live], chi[live]
        vals = self._poly_values(z, pts, bands, cells)
        return np.bincount(pts, weights=(chi * vals).real, minlength=len(z)) + \
            1j * np.bincount(pts, weights=(chi * vals).imag, minlength=len(z))

    def dbar(self, z, rho):
        pts, bands, cells = self.pairs(z, rho)
        chi, dchi = self.chi(z, pts, bands, cells, with_dbar=True)
        live = (chi > 0) | np.any(dchi != 0, axis=-1)
        pts, bands, cells, chi, dchi = pts[live], bands[live], cells[live], chi[live], dchi[live]
        vals = self._poly_values(z, pts, bands, cells)
        N = len(z)
        value = np.bincount(pts, weights=(chi * vals).real, minlength=N) + \
            1j * np.bincount(pts, weights=(chi * vals).imag, minlength=N)
        # T = P_{J(z)}: the cell with the largest partition value at z
        order = np.lexsort((-chi, pts))
        first = np.ones(len(order), dtype=bool)
        first[1:] = pts[order][1:] != pts[order][:-1]
        T = np.zeros(N, dtype=complex)
        T[pts[order][first]] = vals[order][first]
        diff = (vals - T[pts])[:, None] * dchi
        out = np.zeros((N, self.dom.n), dtype=complex)
        for j in range(self.dom.n):
            out[:, j] = np.bincount(pts, weights=diff[:, j].real, minlength=N) + \
                1j * np.bincount(pts, weights=diff[:, j].imag, minlength=N)
        return value, out

    def partition_sum(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        rho = self.dom.rho(z)
        pts, bands, cells = self.pairs(z, rho)
        chi = self.chi(z, pts, bands, cells)
        return np.bincount(pts, weights=chi, minlength=len(z))

    def gradient_bound(self, z):
        """max_k |grad chi_k(z)| * rho(z) over the given shell points."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        rho = self.dom.rho(z)
        pts, bands, cells = self.pairs(z, rho)
        d = self.dbar_chi(z, pts, bands, cells)
        # for real chi, |grad chi| = 2 |dbar chi|
        g = 2 * np.linalg.norm(d, axis=-1) * rho[pts]
        return float(np.max(g)) if g.size else 0.0


def _patch_cover(dom: Domain, centers, h: float, rng, reach: float = 1.75, size: int = 20000):
    """Add centers where random boundary points lie beyond reach * h of the net.

    The tangential bumps vanish at d = 2h, so every point needs a center
    strictly closer than that.
    """
    from .geometry import random_sphere_points
    pts = random_sphere_points(dom, size, rng)
    k = min(24, len(centers))
    _, idx = cKDTree(sphere_coords(dom, centers)).query(sphere_coords(dom, pts), k=k)
    idx = np.asarray(idx).reshape(len(pts), k)
    d = np.min(np.abs(dom.leray_v(centers[idx], pts[:, None, :])), axis=1)
    far = np.where(d >= reach * h)[0]
    if not far.size:
        return centers
    extra = greedy_net(dom, pts[far], h, np.arange(len(far)))
    return np.concatenate([centers, pts[far][extra]])


def _net_rule_order(dom: Domain, h: float, per_cell: int = 12) -> int:
    from .geometry import sphere_area
    target = per_cell * sphere_area(dom.n) / (3.5 * h ** dom.n)
    N = 2
    while (2 * N + 1) ** dom.n * (N ** (dom.n - 1) if dom.n > 1 else 1) < target:
        N += 1
    return N


def build_local(dom: Domain, f, m: int, M: int, c1: float = 0.5, seed: int = 0) -> ContinuationField:
    """Whitney-glued local projectors P_{J_k} f, J_k = B(c_k, c1 2^{-k}), bands top..M."""
    top = int(band_index(dom.epsilon * 7 / 8))
    top = max(1, top - 1)
    if M < top:
        raise ParameterError(f"depth M={M} must be at least {top}")
    rng = np.random.default_rng(seed)
    scales, centers, trees = {}, {}, {}
    for k in range(top, M + 1):
        h = c1 * 2.0 ** (-k)
        rule = boundary_rule(dom, 0.0, _net_rule_order(dom, h))
        idx = greedy_net(dom, rule.nodes, h, rng.permutation(len(rule.nodes)))
        scales[k] = h
        centers[k] = _patch_cover(dom, rule.nodes[idx], h, rng)
        trees[k] = cKDTree(sphere_coords(dom, centers[k]))
    wh = Whitney(dom, f, m, top, M, c1, scales, centers, trees)
    return ContinuationField(dom, "local", {}, top, M, wh)


# -- profiles -----------------------------------------------------------------------

@dataclass
class SPProfile:
    radii: np.ndarray
    values: np.ndarray
    p: float
    bands: np.ndarray


def default_level_order(field: ContinuationField):
    """Boundary-rule order resolving the field on a level set."""
    dom = field.dom
    if field.mode == "global":
        deg = np.zeros(dom.n, dtype=int)
        for P in field.polys.values():
            keep = np.abs(P.coeffs) > 0
            if np.any(keep):
                deg = np.maximum(deg, P.exponents[keep].max(axis=0))
        total = int(deg.sum())
        return (max(total // 2 + 4, 4),) + tuple(int(2 * d + 5) for d in deg)
    h = min(field.whitney.scales.values())
    return max(8, _net_rule_order(dom, h, per_cell=12))


def sp_profile(field: ContinuationField, p, radii, order=None) -> SPProfile:
    """S_p(f, r) = || dbar f ||_{L^p(dOmega_r)} at each radius."""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(radii >= field.epsilon):
        raise ParameterError("radii must lie in (0, eps)")
    order = order or default_level_order(field)
    vals = []
    for r in radii:
        rule = boundary_rule(field.dom, float(r), order)
        vals.append(lp_norm(field.dbar_size(rule.nodes), rule.weights, p))
    return SPProfile(radii, np.array(vals), p, band_index(radii))


def level_set_ratio(dom: Domain, P, r: float, q, points) -> float:
    """||P||_{L^q(dOmega_r)} / ||P||_{L^q(dOmega)} on dilated sample points.

    ``points`` is a QuadratureRule on dOmega (for q = inf any sample rule).
    """
    s = np.sqrt(1.0 + r)
    w_r = points.weights * s ** (2 * dom.n - 1)
    num = lp_norm(P(points.nodes * s), w_r, q)
    den = lp_norm(P(points.nodes), points.weights, q)
    return num / den


def shell_samples(dom: Domain, size: int, rng, lo: float, hi: float) -> np.ndarray:
    """Random points with rho log-uniform in [lo, hi] and uniform directions."""
    from .geometry import random_sphere_points
    rho = np.exp(rng.uniform(np.log(lo), np.log(hi), size))
    return random_sphere_points(dom, size, rng) * np.sqrt(1.0 + rho)[:, None]


def lambda_constant(field: ContinuationField, size: int = 10000, seed: int = 0) -> float:
    """max |dbar f| / lambda over shell samples below the outer cutoff (global mode)."""
    if field.mode != "global":
        raise ParameterError("lambda is defined for the global construction")
    rng = np.random.default_rng(seed)
    lo = 2.0 ** (-field.depth)
    z = shell_samples(field.dom, size, rng, lo, 5 * field.epsilon / 8)
    db = field.dbar_size(z)
    lam = field.lam(z)
    live = lam > 0
    if np.any(db[~live] > 0):
        return np.inf
    return float(np.max(db[live] / lam[live])) if np.any(live) else 0.0


def band_profile(field: ContinuationField, rates, p=2, per_band: int = 3, order=None):
    """Rows (r, S_p(f, r), m, 2^m E_{2^m}) for radii inside each band below the outer cutoff.

    ``rates`` maps m to E_{2^m}(f)_p.  Radii sit at the midpoints of ``per_band``
    equal pieces of the band cutoff transition 2^{-m} [5/4, 7/4].
    """
    rows = []
    for m in range(field.top, field.depth + 1):
        for k in range(per_band):
            r = 2.0 ** (-m) * (1.25 + 0.5 * (k + 0.5) / per_band)
            if r >= 5 * field.epsilon / 8:
                continue
            S = sp_profile(field, p, [r], order).values[0]
            rows.append((r, float(S), m, float(2.0 ** m * rates[m])))
    return rows


def local_profile(field: ContinuationField, f, radii, m: int, p=2, R: int = 2, seed: int = 0,
                  order=None, cache=None):
    """Rows (r, S_p(f, r), omega_m(f, 10 r)_p) for a local-mode field."""
    from .besov import modulus
    rows = []
    for r in radii:
        S = sp_profile(field, p, [r], order).values[0]
        om = modulus(field.dom, f, m, [10 * r], R=R, p=p, seed=seed, cache=cache).values[0]
        rows.append((float(r), float(S), float(om)))
    return rows


@dataclass
class RidgePoly:
    """sum_k c_k <z, u_k>^{D_k} with unit directions u_k (ball only).

    Different degrees are L^2-orthogonal on spheres and the Gram entries of
    equal degree are 2 pi^n D! / (D+n-1)! <u_l, u_k>^D, so L^2 norms on every
    level set are exact.
    """

    coeffs: np.ndarray
    directions: np.ndarray
    degrees: np.ndarray

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        lin = z @ np.conj(self.directions).T
        return np.sum(self.coeffs * lin ** self.degrees, axis=-1)

    def l2_norm(self, r: float = 0.0) -> float:
        n = self.directions.shape[1]
        s = np.sqrt(1.0 + r)
        total = 0.0
        for D in np.unique(self.degrees):
            k = self.degrees == D
            c = self.coeffs[k] * s ** D
            U = self.directions[k]
            G = (U @ np.conj(U).T) ** int(D)  # G[l, k] = <u_l, u_k>^D
            const = 2 * pi ** n * np.exp(_lgamma(D + 1) - _lgamma(D + n))
            total += float(np.real(np.conj(c) @ G @ c)) * const
        return float(np.sqrt(total * s ** (2 * n - 1)))

    def sup_norm(self, r: float = 0.0, rng=None, size: int = 2000) -> float:
        """Sampled sup of |P| on dOmega_r, refined by local optimization."""
        from scipy.optimize import minimize
        from .geometry import ball, random_sphere_points
        n = self.directions.shape[1]
        s = np.sqrt(1.0 + r)
        rng = rng if rng is not None else np.random.default_rng(0)
        phases = np.exp(2j * pi * np.arange(32) / 32)
        cand = [(self.directions[:, None, :] * phases[None, :, None]).reshape(-1, n),
                random_sphere_points(ball(n), size, rng)]
        cand = np.concatenate(cand)
        vals = np.abs(self(s * cand))
        best = float(vals.max())

        def neg(x):
            z = (x[:n] + 1j * x[n:]) / np.linalg.norm(x)
            return -abs(self(s * z[None, :])[0])

        for i in np.argsort(vals)[-3:]:
            x0 = np.concatenate([cand[i].real, cand[i].imag])
            res = minimize(neg, x0, method="BFGS", options={"gtol": 1e-10, "maxiter": 200})
            best = max(best, -float(res.fun))
        return best


def _lgamma(x):
    from math import lgamma
    return lgamma(float(x))


def random_ridge_poly(n: int, degree: int, rng, terms: int = 4) -> RidgePoly:
    """Random ridge polynomial whose top degree is exactly ``degree``."""
    from .geometry import ball, random_sphere_points
    U = random_sphere_points(ball(n), terms, rng)
    D = rng.integers(0, degree + 1, size=terms)
    D[0] = degree
    c = rng.normal(size=terms) + 1j * rng.normal(size=terms)
    return RidgePoly(c, U, D)


def level_set_constant(n: int, m: int, q, trials: int = 20, seed: int = 0) -> float:
    """max ||P||_{L^q(dOmega_r)} / ||P||_{L^q(dOmega)} over random ridge
    polynomials of degree 2^m and r in {2^-m, 2^{-m+1}} (unit ball)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    radii = [2.0 ** (-m), 2.0 ** (-m + 1)]
    for _ in range(trials):
        P = random_ridge_poly(n, 2 ** m, rng)
        for r in radii:
            if np.isinf(q):
                ratio = P.sup_norm(r, rng) / P.sup_norm(0.0, rng)
            else:
                ratio = P.l2_norm(r) / P.l2_norm(0.0)
            worst = max(worst, ratio)
    return worst


# -- polynomials from a continuation -------------------------------------------------

RESIDUAL_TOL = {"global": 1e-3, "local": 2e-2}


@dataclass
class PolyFromContinuation:
    poly: MultiPoly
    budget: tuple
    residual: float


def radial_support(field: ContinuationField):
    """Level intervals in (0, 7 eps / 8] covering supp dbar f, split where dbar f kinks."""
    eps = field.epsilon
    top = 7 * eps / 8
    if field.mode == "global":
        spans = [(5 * eps / 8, top)]
        for m in range(field.top, field.depth):
            spans.append((1.25 * 2.0 ** (-m), 1.75 * 2.0 ** (-m)))
        cuts = sorted({c for span in spans for c in span if c <= top} | {5 * eps / 8})
        pieces = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            mid = 0.5 * (lo + hi)
            if any(a <= mid <= b for a, b in spans):
                pieces.append((lo, hi))
        return pieces
    cuts = {0.0, 5 * eps / 8, top}
    cuts |= {2.0 ** (-k) for k in range(field.top - 1, field.depth + 2) if 2.0 ** (-k) < top}
    cuts = sorted(cuts)
    return list(zip(cuts[:-1], cuts[1:]))


def _gauss(k, lo, hi):
    x, w = np.polynomial.legendre.leggauss(k)
    return lo + 0.5 * (hi - lo) * (x + 1), 0.5 * (hi - lo) * w


def _log_gauss(k, lo, hi):
    """Gauss in log t on [lo, hi]; returns t and weights for dt."""
    u, w = _gauss(k, np.log(lo), np.log(hi))
    t = np.exp(u)
    return t, w * t


@dataclass
class ExcisionRule:
    """Shell nodes split at d(xi, z0) = 2h, with volume weights."""

    nodes: np.ndarray
    weights: np.ndarray
    far: np.ndarray


def _disc_pieces(R, tau, k_theta):
    """theta nodes/weights for eta_1 = R - t e^{i theta} and the t-ranges on each ray.

    Returns (theta, w_theta, tlo, thi, kind) where kind is 0 for rays split at
    tau, 1 for rays entirely far and 2 for rays entirely near.
    """
    cmax = np.sqrt(max(1.0 - 1.0 / R ** 2, 0.0))
    tmax = np.arccos(cmax)
    cstar = (tau * tau + R * R - 1) / (2 * R * tau)
    out = []
    if cstar >= 1.0:
        u, w = _gauss(k_theta, -0.5 * pi, 0.5 * pi)
        out.append((tmax * np.sin(u), tmax * np.cos(u) * w, 1 if tau <= R - 1 else 2))
    else:
        tc = np.arccos(min(cstar, 1.0))
        u, w = _gauss(k_theta, -tc, tc)
        out.append((u, w, 0))
        if tmax - tc > 1e-14:
            kind = 1 if tau * tau <= R * R - 1 else 2
            u, w = _gauss(k_theta, 0.0, 1.0)
            th = tmax - (tmax - tc) * (1 - u) ** 2
            wt = 2 * (tmax - tc) * (1 - u) * w
            out.append((th, wt, kind))
            out.append((-th, wt, kind))
    return out


def _ray_limits(R, theta):
    c = np.cos(theta)
    disc = np.sqrt(np.clip(R * R * c * c - R * R + 1, 0.0, None))
    return np.maximum(R * c - disc, 1e-300), R * c + disc


def _sphere_tail(n, k_omega):
    """Nodes and weights on the unit sphere of C^{n-1}."""
    if n == 2:
        phi = 2 * pi * np.arange(k_omega) / k_omega
        return np.exp(1j * phi)[:, None], np.full(k_omega, 2 * pi / k_omega)
    from .quadrature import sphere_rule
    return sphere_rule(n - 1, max(2, k_omega // 2))


def excision_rule(dom: Domain, z0, h: float, levels, level_weights, order) -> ExcisionRule:
    """Volume rule on the shell adapted to the set d(xi, z0) < 2h.

    In rotated sphere variables eta with sqrt(a) z0 at the pole, the level set
    rho = R^2 - 1 has xi = R Q eta / sqrt(a) and d(xi, z0) = R |R - eta_1|.  The
    eta_1 disc is integrated in polar coordinates about R (log-graded in the
    radius), the remaining coordinates over a sphere of radius sqrt(1 - |eta_1|^2).
    """
    n = dom.n
    k_theta, k_t, k_omega = order
    Q = pole_rotation(np.sqrt(dom.a) * np.asarray(z0))
    sa = np.sqrt(dom.a)
    nodes, weights, far = [], [], []
    if n > 1:
        om, w_om = _sphere_tail(n, k_omega)
    for rho, wr in zip(levels, level_weights):
        R = np.sqrt(1.0 + rho)
        tau = 2 * h / R
        vol = wr * R ** (2 * n - 2) / 2 / np.prod(dom.a)
        if n == 1:
            phi, wphi, is_far = _circle_pieces(R, tau, k_t)
            eta = np.exp(1j * phi)[:, None]
            nodes.append(R * (eta @ Q.T) / sa)
            weights.append(vol * wphi)
            far.append(is_far)
            continue
        for theta, wth, kind in _disc_pieces(R, tau, k_theta):
            tlo, thi = _ray_limits(R, theta)
            segs = []
            if kind in (0, 1):
                a = np.maximum(tlo, tau) if kind == 0 else tlo
                segs.append((a, thi, True))
            if kind in (0, 2):
                b = np.minimum(thi, tau) if kind == 0 else thi
                segs.append((tlo, b, False))
            for lo, hi, is_far in segs:
                u, w = _gauss(k_t, 0.0, 1.0)
                L, H = np.log(lo)[:, None], np.log(hi)[:, None]
                t = np.exp(L + (H - L) * u)
                wt = (H - L) * w * t * t  # dt times the polar factor t
                eta1 = R - t * np.exp(1j * theta)[:, None]
                s2 = np.clip(1 - np.abs(eta1) ** 2, 0.0, None)
                base_w = (wth[:, None] * wt * s2 ** (n - 2)).ravel()
                eta1 = eta1.ravel()
                s = np.sqrt(s2.ravel())
                head = np.broadcast_to(eta1[:, None, None], (len(eta1), len(w_om), 1))
                eta = np.concatenate([head, s[:, None, None] * om[None, :, :]], axis=-1).reshape(-1, n)
                nodes.append(R * (eta @ Q.T) / sa)
                weights.append(vol * np.outer(base_w, w_om).ravel())
                far.append(np.full(eta.shape[0], is_far))
    return ExcisionRule(np.concatenate(nodes), np.concatenate(weights), np.concatenate(far))


def _circle_pieces(R, tau, k):
    """Arc nodes for n = 1, split at |R - e^{i phi}| = tau."""
    cstar = (R * R + 1 - tau * tau) / (2 * R)
    pc = float(np.arccos(np.clip(cstar, -1.0, 1.0))) if cstar < 1 else 0.0
    inner = min(R - 1, pi / 2)
    phis, ws, fars = [], [], []

    def add(lo, hi, is_far):
        if hi - lo <= 1e-15:
            return
        if lo <= 0:
            mid = min(inner, hi)
            x, w = _gauss(k, 0.0, mid)
            phis.append(x), ws.append(w), fars.append(np.full(k, is_far))
            lo = mid
            if hi - lo <= 1e-15:
                return
        x, w = _log_gauss(k, lo, hi)
        phis.append(x), ws.append(w), fars.append(np.full(k, is_far))

    add(0.0, pc, False)
    add(pc, pi, True)
    phi = np.concatenate(phis)
    w = np.concatenate(ws)
    f = np.concatenate(fars)
    return np.concatenate([phi, -phi]), np.concatenate([w, w]), np.concatenate([f, f])


def poly_from_continuation(field: ContinuationField, z0, h: float, m: int, order=None,
                           radial_order: int = 8, tol: float | None = None) -> PolyFromContinuation:
    """P_J from the shell integral of dbar f against K_loc outside d(xi, z0) > 2h.

    The budget pair is the two error integrals at z = z0:
    B1 = int_{d<2h} C |xi| |dbar f| / d^n and
    B2 = int_{d>2h} C |xi| |dbar f| tail_m (h/d)^{(m+1)/2} / d^n, where C is the
    shell-form constant and tail_m bounds the Taylor remainder of (1+x)^{-n}
    for |x| <= 1/2.  The residual is the relative sup difference on J from a rule
    with about two thirds of the nodes in each direction.  The default
    tolerance is ``RESIDUAL_TOL[field.mode]``: the Whitney partition makes
    local-mode dbar f only piecewise smooth, which caps product-rule accuracy.
    """
    dom = field.dom
    if not 0 < h < dom.epsilon / 4:
        raise ParameterError(f"h={h} must lie in (0, eps/4)")
    z0 = np.asarray(z0, dtype=complex)
    tol = RESIDUAL_TOL[field.mode] if tol is None else tol
    if order is None:
        if field.mode == "global":
            order = {1: (1, 24, 1), 2: (24, 12, 14), 3: (16, 10, 8)}[dom.n]
            if dom.n > 1:
                # the phases of the remaining coordinates must resolve the band polynomials
                deg = max(P.degree() for P in field.polys.values())
                order = order[:2] + (max(order[2], deg + 8),)
        else:
            order = {1: (1, 24, 1), 2: (16, 10, 10), 3: (12, 8, 8)}[dom.n]
    support = radial_support(field)
    exps = monomial_exponents(dom.n, m, "total")
    ck = taylor_coefficients(dom.n, m)
    C = factorial(dom.n - 1) / pi ** dom.n * np.prod(dom.a)
    mult = np.array([factorial(int(b.sum())) / np.prod([factorial(int(x)) for x in b]) for b in exps])
    signs = np.array([ck[int(b.sum())] * (-1) ** int(b.sum()) for b in exps])

    def compute(ordr, rad):
        levels, lw = [], []
        for lo, hi in support:
            x, w = _gauss(rad, lo, hi)
            levels.append(x), lw.append(w)
        rule = excision_rule(dom, z0, h, np.concatenate(levels), np.concatenate(lw), ordr)
        db = field.dbar(rule.nodes)
        live = np.any(db != 0, axis=-1)
        xi, db, wts, far = rule.nodes[live], db[live], rule.weights[live], rule.far[live]
        dens = -C * np.sum(np.conj(xi) * db, axis=-1) * wts
        v0 = dom.leray_v(xi, z0)
        d0 = np.abs(v0)
        w = dom.leray_w(xi)[far]
        base = dens[far] * v0[far] ** (-dom.n)
        ratio = w / v0[far][:, None]
        coeffs = (vandermonde(ratio, exps) * base[:, None]).sum(axis=0) * mult * signs
        size = np.sum(np.abs(db), axis=-1) * np.linalg.norm(xi, axis=-1) * C * wts
        tail = _taylor_tail(dom.n, m)
        b1 = float(np.sum(size[~far] / d0[~far] ** dom.n))
        b2 = float(np.sum(size[far] * tail * (h / d0[far]) ** ((m + 1) / 2) / d0[far] ** dom.n))
        return coeffs, (b1, b2)

    coeffs, budget = compute(order, radial_order)
    coarse = tuple(max(1, (2 * o) // 3) for o in order)
    coeffs_c, _ = compute(coarse, max(3, (2 * radial_order) // 3))
    poly = MultiPoly(exps, coeffs, "total", z0, None)
    # compare the two rules through their polynomials on J
    probe = quasiball(dom, z0, h, nz=6, nx=6).rule.nodes
    fine = poly(probe)
    diff = fine - MultiPoly(exps, coeffs_c, "total", z0, None)(probe)
    residual = float(np.max(np.abs(diff))) / max(1.0, float(np.max(np.abs(fine))))
    if residual > tol:
        raise AccuracyError(f"shell quadrature residual {residual:.2e}")
    return PolyFromContinuation(poly, budget, residual)


def _taylor_tail(n: int, m: int) -> float:
    """sup_{|x| <= 1/2} |(1+x)^{-n} - T_m(x)| / |x|^{m+1}."""
    x = -0.5
    c = taylor_coefficients(n, m)
    return abs((1 + x) ** (-n) - np.polynomial.polynomial.polyval(x, c)) / abs(x) ** (m + 1)
