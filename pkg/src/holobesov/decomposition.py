"""Fat boundary sets and t-decompositions of dOmega built from quasimetric nets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DecompositionError
from .geometry import Domain, tangent_frame
from .quadrature import QuadratureRule, boundary_rule, patch_rule

# With a maximal t-separated net, Voronoi cells satisfy B(c, t/4) < F < B(c, t)
# because sqrt(d) is a metric on the sphere.
FATNESS_FACTOR = 4.0


@dataclass
class FatSet:
    center: np.ndarray
    scale: float
    rule: QuadratureRule
    inner: float = np.nan  # sampled inf of d(center, x) over x outside the set
    outer: float = np.nan  # sampled sup of d(center, x) over x inside the set
    member: object = None

    @property
    def sigma(self) -> float:
        return self.rule.sigma

    def contains(self, z):
        return self.member(z)

    def is_fat(self, factor: float = 2.0) -> bool:
        return bool(self.outer < self.scale and self.inner >= self.scale / factor)


@dataclass
class Decomposition:
    scale: float
    cells: list
    rule: QuadratureRule
    labels: np.ndarray
    centers: np.ndarray
    seed: int = 0
    certificate: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.cells)

    def to_json(self) -> str:
        return json.dumps({
            "scale": self.scale,
            "seed": self.seed,
            "centers": [[[float(c.real), float(c.imag)] for c in row] for row in self.centers],
            "sample_counts": [int(len(c.rule)) for c in self.cells],
            "certificate": self.certificate,
        })


def sphere_coords(dom: Domain, z):
    """Real embedding of eta = sqrt(a) z; |eta_x - eta_c|^2 <= 2 d(x, c) on dOmega."""
    eta = np.asarray(z) * np.sqrt(dom.a)
    return np.concatenate([eta.real, eta.imag], axis=-1)


def boundary_diameter(dom: Domain) -> float:
    return 2.0


def default_rule(dom: Domain, t: float, per_cell: int = 40, max_order: int = 40) -> QuadratureRule:
    """Smallest product rule with about ``per_cell`` nodes per expected cell."""
    from .geometry import sphere_area
    # Voronoi cells of a t-net have measure about 3.5 t^n on the sphere
    target = per_cell * sphere_area(dom.n) / (3.5 * min(t, 2.0) ** dom.n)
    N = 2
    while N < max_order:
        size = (2 * N + 1) ** dom.n * (N ** (dom.n - 1) if dom.n > 1 else 1)
        if size >= target:
            break
        N += 1
    return boundary_rule(dom, 0.0, N)


def greedy_net(dom: Domain, points, separation: float, order) -> np.ndarray:
    """Indices of a maximal separated set, visiting points in ``order``."""
    tree = cKDTree(sphere_coords(dom, points))
    covered = np.zeros(len(points), dtype=bool)
    centers = []
    radius = np.sqrt(2.0 * separation) * (1 + 1e-9)
    for i in order:
        if covered[i]:
            continue
        centers.append(i)
        cand = np.asarray(tree.query_ball_point(sphere_coords(dom, points[i]), radius), dtype=int)
        if cand.size:
            d = dom.quasimetric(points[i], points[cand])
            covered[cand[d < separation]] = True
        covered[i] = True
    return np.array(centers, dtype=int)


def nearest_center(dom: Domain, points, centers, reach: float, k: int = 32):
    """Index of the quasimetric-nearest center among Euclidean candidates."""
    ctree = cKDTree(sphere_coords(dom, centers))
    k = min(k, len(centers))
    radius = np.sqrt(2.0 * reach) * (1 + 1e-9)
    dist, idx = ctree.query(sphere_coords(dom, points), k=k, distance_upper_bound=radius)
    dist = np.asarray(dist).reshape(len(points), k)
    idx = np.asarray(idx).reshape(len(points), k)
    valid = np.isfinite(dist)
    safe = np.where(valid, idx, 0)
    d = dom.quasimetric(centers[safe], points[:, None, :])
    d = np.where(valid, d, np.inf)
    best = np.argmin(d, axis=1)
    labels = safe[np.arange(len(points)), best]
    dbest = d[np.arange(len(points)), best]
    # candidates list may have been truncated at k: recheck those rows exactly
    full = valid.all(axis=1) & (k < len(centers))
    if np.any(~np.isfinite(dbest)) or np.any(full):
        rows = np.where(full | ~np.isfinite(dbest))[0]
        dd = dom.quasimetric(centers[None, :, :], points[rows][:, None, :])
        labels[rows] = np.argmin(dd, axis=1)
        dbest[rows] = dd[np.arange(len(rows)), labels[rows]]
    return labels, dbest


def build_decomposition(dom: Domain, t: float, seed: int = 0, rule: QuadratureRule | None = None,
                        per_cell: int = 40) -> Decomposition:
    """Voronoi cells (in d) of a greedy maximal t-separated net on the samples."""
    if t <= 0:
        raise DecompositionError("scale must be positive")
    if rule is None:
        rule = default_rule(dom, t, per_cell)
    pts = rule.nodes
    if t >= boundary_diameter(dom):
        c = pts[0]
        cell = FatSet(center=c, scale=t, rule=rule, inner=np.inf,
                      outer=float(np.max(dom.quasimetric(c, pts))),
                      member=lambda z: np.ones(np.shape(z)[:-1], dtype=bool))
        return Decomposition(t, [cell], rule, np.zeros(len(pts), dtype=int), pts[:1], seed,
                             {"factor": 2.0, "certified": True, "strict_fraction": 1.0})
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pts))
    cidx = greedy_net(dom, pts, t, order)
    if len(cidx) < 2:
        raise DecompositionError(f"scale {t} admits a single cell only")
    centers = pts[cidx]
    labels, _ = nearest_center(dom, pts, centers, t)
    tree = cKDTree(sphere_coords(dom, pts))
    cells = []
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(len(centers) + 1))
    for j, c in enumerate(centers):
        mine = order[bounds[j]:bounds[j + 1]]
        outer = float(np.max(dom.quasimetric(c, pts[mine])))
        near = np.asarray(tree.query_ball_point(sphere_coords(dom, c), np.sqrt(2 * t) * 1.0001), dtype=int)
        foreign = near[labels[near] != j]
        inner = float(np.min(dom.quasimetric(c, pts[foreign]))) if foreign.size else t
        member = _voronoi_member(dom, centers, j, t)
        cells.append(FatSet(center=c, scale=t, rule=rule.subset(mine), inner=inner, outer=outer,
                            member=member))
    cert = certify(cells, t)
    return Decomposition(t, cells, rule, labels, centers, seed, cert)


def _voronoi_member(dom, centers, j, t):
    def member(z):
        z = np.atleast_2d(z)
        lab, _ = nearest_center(dom, z, centers, 2 * t)
        return lab == j
    return member


def certify(cells, t: float, factor: float = FATNESS_FACTOR) -> dict:
    inner = np.array([c.inner for c in cells])
    outer = np.array([c.outer for c in cells])
    ok = (outer < t) & (inner >= t / factor)
    strict = (outer < t) & (inner >= t / 2)
    return {
        "factor": factor,
        "certified": bool(np.all(ok)),
        "strict_fraction": float(np.mean(strict)),
        "min_inner_over_t": float(np.min(inner) / t),
        "max_outer_over_t": float(np.max(outer) / t),
    }


def frame_constant(dom: Domain, h_values=(0.05, 0.1, 0.2), n_centers: int = 4, seed: int = 0) -> float:
    """Sampled c with pr_xi(B(xi, h)) inside [-c sqrt h, c sqrt h)^{2(n-1)} x [-c h, c h)."""
    from .geometry import random_sphere_points
    rng = np.random.default_rng(seed)
    c = 0.0
    for xi in random_sphere_points(dom, n_centers, rng):
        fr = tangent_frame(dom, xi)
        for h in h_values:
            half = 2.0 * np.sqrt(h)
            rule = patch_rule(fr, min(half, 0.6), (-2 * h, 2 * h), nz=16, nx=16)
            pts = rule.nodes[dom.quasimetric(xi, rule.nodes) < h]
            zp, x = fr.pr(pts)
            zc = np.concatenate([zp.real, zp.imag], axis=-1)
            cz = np.max(np.abs(zc)) / np.sqrt(h) if zc.size else 0.0
            c = max(c, cz, np.max(np.abs(x)) / h)
    return float(c * 1.02)


_FRAME_C = {}


def domain_frame_constant(dom: Domain) -> float:
    key = (dom.kind, dom.weights)
    if key not in _FRAME_C:
        _FRAME_C[key] = frame_constant(dom) if dom.n > 1 else 1.02
    return _FRAME_C[key]


def quasiball(dom: Domain, xi, h: float, nz: int = 14, nx: int = 14) -> FatSet:
    """B(xi, h) sampled by a Gauss rule on the lifted tangent box."""
    xi = np.asarray(xi, dtype=complex)
    fr = tangent_frame(dom, xi)
    c = domain_frame_constant(dom)
    rule = patch_rule(fr, c * np.sqrt(h), (-c * h, c * h), nz=nz, nx=nx)
    keep = dom.quasimetric(xi, rule.nodes) < h
    return FatSet(center=xi, scale=h, rule=rule.subset(keep), inner=h, outer=h,
                  member=lambda z: dom.quasimetric(xi, z) < h)
