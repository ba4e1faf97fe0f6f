"""Global best approximation rates, the polynomial modulus of smoothness and Besov norms.

Rates are E_{2^m}(f)_p on the whole boundary; the modulus aggregates per-cell
best approximation errors over seeded t-decompositions.  Finiteness verdicts
on truncated sums come from the tail trend of the summands.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .decomposition import build_decomposition, default_rule
from .errors import InsufficientDataError, ParameterError
from .geometry import Domain
from .local_approx import FatSet, build_grid, ls_best_approx, minimax_best_approx, project
from .polynomials import MAX_CONDITION, MultiPoly, monomial_exponents, vandermonde
from .quadrature import QuadratureRule, boundary_rule, lp_norm

# relative size below which an error counts as exact reproduction
ZERO_TOL = 1e-12
# tail slope (in log2 per dyadic step) above which a truncated sum is called divergent
DIVERGENCE_SLOPE = 0.0


@dataclass
class RateSequence:
    degrees: np.ndarray
    values: np.ndarray
    p: float
    method: str
    norm: float = np.nan  # ||f||_p, the scale for "zero"
    polys: list = field(default=None, repr=False)  # best approximants, when available

    def usable(self):
        """Indices whose error is above the exact-reproduction floor."""
        floor = ZERO_TOL * max(self.norm, 1e-300) if np.isfinite(self.norm) else 0.0
        return np.where(self.values > floor)[0]

    def to_dict(self) -> dict:
        return {"degrees": [int(d) for d in self.degrees], "values": [float(v) for v in self.values],
                "p": _p_label(self.p), "method": self.method, "norm": float(self.norm)}


def _p_label(p):
    return "inf" if np.isinf(p) else float(p)


def _check_p(p):
    if p not in (2, np.inf):
        raise ParameterError(f"p must be 2 or inf, got {p}")
    return float(p)


# -- global best approximation ------------------------------------------------------

def _circle_l2_errors(f, degrees, M: int):
    phi = 2 * np.pi * np.arange(M) / M
    F = np.fft.fft(f(np.exp(1j * phi)[:, None])) / M
    energy = 2 * np.pi * np.abs(F) ** 2
    k = np.fft.fftfreq(M, 1.0 / M).astype(int)
    total = float(np.sum(energy))
    errs = [float(np.sqrt(np.sum(energy[(k < 0) | (k > m)]))) for m in degrees]
    coeffs = np.zeros((max(degrees) + 1, 1), dtype=complex)
    coeffs[:, 0] = F[:max(degrees) + 1]
    return errs, np.sqrt(total), coeffs


def _hopf_l2_errors(f, degrees, nu: int, M: int):
    """Sphere of C^2 in Hopf coordinates (sqrt(u) e^{i a}, sqrt(1-u) e^{i b}).

    For each u-node the phases are transformed; the monomial z^beta lives in the
    single Fourier mode beta with profile u^{beta_1/2} (1-u)^{beta_2/2}, so the
    residual is a sum of nonnegative mode energies.
    """
    x, wx = np.polynomial.legendre.leggauss(nu)
    u = 0.5 * (x + 1)
    wu = 0.5 * wx
    D = max(degrees)
    phi = 2 * np.pi * np.arange(M) / M
    A, B = np.meshgrid(phi, phi, indexing="ij")
    scale = 0.5 * (2 * np.pi) ** 2
    energy = np.zeros((M, M))
    low = np.empty((nu, D + 1, D + 1), dtype=complex)  # holomorphic modes that can be fitted
    for i, ui in enumerate(u):
        z = np.stack([np.sqrt(ui) * np.exp(1j * A), np.sqrt(1 - ui) * np.exp(1j * B)], axis=-1)
        Fi = np.fft.fft2(f(z.reshape(-1, 2)).reshape(M, M)) / M ** 2
        energy += scale * wu[i] * np.abs(Fi) ** 2
        low[i] = Fi[:D + 1, :D + 1]
    k = np.fft.fftfreq(M, 1.0 / M).astype(int)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    fitted = np.zeros((D + 1, D + 1))
    coeffs = np.zeros((D + 1, D + 1), dtype=complex)
    for a in range(D + 1):
        for b in range(D + 1 - a):
            g = u ** (a / 2) * (1 - u) ** (b / 2)
            c = np.sum(wu * low[:, a, b] * g) / np.sum(wu * g * g)
            coeffs[a, b] = c
            fitted[a, b] = scale * np.sum(wu * np.abs(low[:, a, b] - c * g) ** 2)
    out = []
    for m in degrees:
        inside = (K1 >= 0) & (K2 >= 0) & (K1 + K2 <= m)
        out.append(float(np.sqrt(np.sum(energy[~inside]) + np.sum(fitted[:m + 1, :m + 1][
            np.add.outer(np.arange(m + 1), np.arange(m + 1)) <= m]))))
    return out, float(np.sqrt(np.sum(energy))), coeffs


def _poly_from_table(coeffs, m: int, rel: float = 0.1 * ZERO_TOL) -> MultiPoly:
    """sum c_beta z^beta over |beta| <= m from a dense (D+1)^n table, round-off pruned."""
    n = coeffs.ndim
    idx = np.argwhere(np.ones(coeffs.shape, dtype=bool))
    idx = idx[idx.sum(axis=1) <= m]
    c = coeffs[tuple(idx.T)]
    keep = np.abs(c) > rel * max(float(np.max(np.abs(coeffs))), 1e-300)
    if not np.any(keep):
        return MultiPoly(np.zeros((1, n), dtype=int), [0.0])
    return MultiPoly(idx[keep], c[keep])


def _rule_for_degree(dom: Domain, m: int, p: float) -> QuadratureRule:
    if np.isinf(p):
        # sup norms of functions with boundary singularities need dense sampling
        N = 4 * m + 8 if dom.n == 1 else max(8, m + 6)
    else:
        N = max(8, m + 4)
    return boundary_rule(dom, 0.0, N)


def global_best_approx(dom: Domain, f, degrees, p=2, method: str | None = None,
                       grid: tuple | None = None) -> RateSequence:
    """E_m(f)_p on dOmega for each m in ``degrees``.

    For the ball and p = 2 the default is the Fourier path (circle or Hopf
    coordinates, n <= 2); otherwise ``"ls"`` on a boundary rule; p = inf uses
    Lawson iterations on the boundary rule (``"minimax"``).
    """
    p = _check_p(p)
    degrees = np.asarray(sorted(int(d) for d in degrees))
    if degrees.size == 0 or degrees[0] < 0:
        raise ParameterError("degrees must be nonnegative")
    if method is None:
        if np.isinf(p):
            method = "minimax"
        else:
            method = "fft" if dom.is_ball and dom.n <= 2 else "ls"
    dmax = int(degrees[-1])
    if method == "fft":
        if not (dom.is_ball and dom.n <= 2) or np.isinf(p):
            raise ParameterError("the Fourier path needs the ball with n <= 2 and p = 2")
        if dom.n == 1:
            M = grid[0] if grid else max(1024, 16 * dmax)
            vals, norm, table = _circle_l2_errors(f, degrees, M)
            table = table[:, 0]
        else:
            nu, M = grid if grid else (max(48, dmax + 32), max(128, 8 * dmax))
            vals, norm, table = _hopf_l2_errors(f, degrees, nu, M)
        polys = [_poly_from_table(table, int(m)) for m in degrees]
    elif method in ("ls", "minimax"):
        rule = _rule_for_degree(dom, dmax, p)
        y = np.asarray(f(rule.nodes), dtype=complex)
        norm = lp_norm(y, rule.weights, p)
        solver = ls_best_approx if method == "ls" else minimax_best_approx
        fits = [solver(y, rule, int(m)) for m in degrees]
        vals = [b.error for b in fits]
        polys = [b.poly for b in fits]
    else:
        raise ParameterError(f"unknown method {method!r}")
    vals = np.asarray(vals, dtype=float)
    # a larger space never does worse; enforce it against round-off
    vals = np.minimum.accumulate(vals)
    return RateSequence(degrees, vals, p, method, float(norm), polys)


def dyadic_degrees(M: int):
    return [2 ** m for m in range(M + 1)]


# -- modulus of smoothness ----------------------------------------------------------

@dataclass
class ModulusTable:
    scales: np.ndarray
    values: np.ndarray
    R: int
    p: float
    m: int
    samples: np.ndarray = field(default=None, repr=False)  # (K, R) per-decomposition values
    cells: np.ndarray = field(default=None, repr=False)  # cell counts per scale

    def to_dict(self) -> dict:
        return {"scales": [float(h) for h in self.scales], "values": [float(v) for v in self.values],
                "R": self.R, "p": _p_label(self.p), "m": self.m,
                "cells": None if self.cells is None else [int(c) for c in self.cells]}


def _cell_ls_errors(nodes, weights, vals, labels, ncells: int, deg: int, chunk: int = 512):
    """Per-cell discrete L^2 best-approximation errors, solved in batches.

    Each cell gets the whitened affine frame of its samples (total degree is
    affine invariant) and a stacked QR of the weighted Vandermonde matrix.
    """
    n = nodes.shape[1]
    exps = monomial_exponents(n, deg, "total")
    nb = len(exps)
    order = np.argsort(labels, kind="stable")
    counts = np.bincount(labels, minlength=ncells)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    out = np.zeros(ncells)
    P = int(counts.max())
    for c0 in range(0, ncells, chunk):
        cs = np.arange(c0, min(c0 + chunk, ncells))
        slot = np.arange(P)[None, :]
        mask = slot < counts[cs][:, None]
        idx = order[np.where(mask, starts[cs][:, None] + slot, 0)]
        W = np.where(mask, weights[idx], 0.0)
        X = nodes[idx]
        Y = np.where(mask, vals[idx], 0.0)
        Wn = W / W.sum(axis=1, keepdims=True)
        mu = np.einsum("cp,cpi->ci", Wn, X)
        D = X - mu[:, None, :]
        C = np.einsum("cp,cpi,cpj->cij", Wn, D, np.conj(D))
        lam, U = np.linalg.eigh(C)
        T = np.conj(np.swapaxes(U, -1, -2)) / np.sqrt(np.maximum(lam, 1e-300))[..., None]
        loc = np.einsum("cij,cpj->cpi", T, D)
        V = vandermonde(loc.reshape(-1, n), exps).reshape(len(cs), P, nb)
        sw = np.sqrt(W)
        A = V * sw[..., None]
        y = Y * sw
        Q, Rm = np.linalg.qr(A)
        Q, R2 = np.linalg.qr(Q)
        Rm = R2 @ Rm
        diag = np.abs(np.diagonal(Rm, axis1=-2, axis2=-1))
        bad = (counts[cs] < nb) | (diag.min(axis=1) <= diag.max(axis=1) / MAX_CONDITION)
        res = y - np.einsum("cpk,ck->cp", Q, np.einsum("cpk,cp->ck", np.conj(Q), y))
        out[cs] = np.sqrt(np.sum(np.abs(res) ** 2, axis=1))
        for c, A_c, y_c in zip(cs[bad], A[bad], y[bad]):
            if counts[c] < nb:
                raise InsufficientDataError(f"cell {c} has {counts[c]} samples for {nb} coefficients")
            # numerically rank deficient: project onto the numerical range instead
            coef, *_ = np.linalg.lstsq(A_c, y_c, rcond=1.0 / MAX_CONDITION)
            out[c] = float(np.linalg.norm(y_c - A_c @ coef))
    return out


def _cell_errors(dom, dec, vals, f, deg: int, p: float, method: str):
    rule = dec.rule
    if method == "ls" and p == 2:
        return _cell_ls_errors(rule.nodes, rule.weights, vals, dec.labels, len(dec), deg)
    errs = np.zeros(len(dec))
    for j, cell in enumerate(dec.cells):
        mine = dec.labels == j
        if method == "projector":
            grid = build_grid(dom, FatSet(cell.center, cell.scale, cell.rule), max(deg, 0))
            P = project(grid, f, strict=False).poly
            errs[j] = lp_norm(vals[mine] - P(rule.nodes[mine]), rule.weights[mine], p)
        elif p == 2:
            errs[j] = ls_best_approx(vals[mine], cell, deg).error
        else:
            errs[j] = minimax_best_approx(vals[mine], cell, deg).error
    return errs


def _decomposition(dom, h, seed, rule, density, cache):
    key = (dom.kind, dom.weights, h, seed, density)
    if cache is not None and key in cache:
        return cache[key]
    dec = build_decomposition(dom, h, seed=seed, rule=rule)
    if cache is not None:
        cache[key] = dec
    return dec


def modulus(dom: Domain, f, m: int, scales, R: int = 8, p=2, seed: int = 0,
            method: str = "ls", per_cell: int | None = None, cache: dict | None = None) -> ModulusTable:
    """omega_m(f, h)_p as the max over R seeded decompositions at each scale h.

    Each decomposition contributes the l^p aggregate of per-cell errors
    E_{m-1}(f, F_j)_p; ``method="ls"`` uses exact discrete best approximation,
    ``"projector"`` the near-best local projector on each cell.  Decompositions
    depend only on (scale, seed, sampling density), so a shared ``cache`` dict
    lets several functions reuse them.
    """
    p = _check_p(p)
    if m < 1:
        raise ParameterError("modulus order m must be at least 1")
    scales = np.asarray(scales, dtype=float)
    if np.any(scales <= 0) or np.any(scales >= 2 * dom.n + 8):
        raise ParameterError("scales must be positive")
    deg = m - 1
    nb = comb(deg + dom.n, dom.n)
    per_cell = per_cell or max(40, 3 * nb)
    values, samples, cells = [], [], []
    for h in scales:
        density = per_cell
        for attempt in range(3):
            rule = default_rule(dom, float(h), density, max_order=64 if dom.n > 1 else 2048)
            dec = _decomposition(dom, float(h), seed, rule, density, cache)
            if len(dec) == 1 or np.bincount(dec.labels).min() > nb:
                break
            density *= 2  # too few samples in some cell: refine the rule
        vals = np.asarray(f(rule.nodes), dtype=complex)
        row = []
        for r in range(R):
            if r:
                dec = _decomposition(dom, float(h), seed + r, rule, density, cache)
            if np.bincount(dec.labels).min() <= nb and len(dec) > 1:
                continue  # under-sampled decomposition: skip this seed
            errs = _cell_errors(dom, dec, vals, f, deg, p, method)
            row.append(float(np.max(errs)) if np.isinf(p) else float(np.sqrt(np.sum(errs ** 2))))
            if len(dec) == 1:
                break  # every seed gives the same single cell
        if not row:
            raise InsufficientDataError(f"no decomposition at scale {h} has {nb} samples per cell")
        row += [np.nan] * (R - len(row))
        samples.append(row)
        values.append(np.nanmax(row))
        cells.append(len(dec))
    return ModulusTable(scales, np.array(values), R, p, m, np.array(samples), np.array(cells))


# -- norms, slopes and verdicts -------------------------------------------------------

def _dyadic_exponents(scales):
    k = -np.log2(np.asarray(scales, dtype=float))
    if np.any(np.abs(k - np.round(k)) > 1e-9):
        raise ParameterError("modulus scales must be dyadic")
    return np.round(k)


def _lq(terms, q):
    terms = np.abs(np.asarray(terms, dtype=float))
    if terms.size == 0:
        return 0.0
    if np.isinf(q):
        return float(terms.max())
    return float(np.sum(terms ** q) ** (1.0 / q))


def besov_terms(table: ModulusTable, s: float):
    k = _dyadic_exponents(table.scales)
    return table.values * 2.0 ** (k * s)


def besov_seminorm(table: ModulusTable, s: float, q) -> float:
    """Dyadic discretization of ||omega_m(f, t)_p t^{-s-1/q}||_{L^q(0, eps)}."""
    if table.m <= s:
        raise ParameterError(f"modulus order m={table.m} must exceed s={s}")
    return _lq(besov_terms(table, s), q)


def sequence_terms(seq: RateSequence, s: float):
    m = np.log2(seq.degrees)
    return seq.values * 2.0 ** (m * s)


def sequence_norm(seq: RateSequence, s: float, q) -> float:
    """l^q norm of 2^{ms} E_{2^m}(f)_p over the sampled m."""
    return _lq(sequence_terms(seq, s), q)


def _tail_fit(x, y):
    """Least-squares line through the last half (at least two) of the points."""
    k = max(2, (len(x) + 1) // 2)
    x, y = np.asarray(x[-k:], float), np.asarray(y[-k:], float)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[0]), resid


def slope(seq: RateSequence):
    """(s_hat, residual): tail-half fit of -log2 E_{2^m} against m, zeros dropped."""
    keep = seq.usable()
    if keep.size < 4:
        raise InsufficientDataError(f"{keep.size} nonzero rates; need at least 4")
    m = np.log2(seq.degrees[keep])
    s, resid = _tail_fit(m, -np.log2(seq.values[keep]))
    return s, resid


def modulus_slope(table: ModulusTable):
    """(s_hat, residual) of -log2 omega(2^{-k}) against k over the tail half."""
    k = _dyadic_exponents(table.scales)
    floor = ZERO_TOL * max(float(np.max(table.values)), 1e-300)
    keep = table.values > floor
    if keep.sum() < 2:
        raise InsufficientDataError("fewer than two nonzero modulus values")
    return _tail_fit(k[keep], -np.log2(table.values[keep]))


def is_superalgebraic(seq: RateSequence, min_drop: float = 6.0) -> bool:
    """Successive log2 drops increase and the last one exceeds ``min_drop`` bits,
    or the rates fall to the zero floor after being nonzero."""
    keep = seq.usable()
    if keep.size and keep[-1] < len(seq.values) - 1 and keep.size >= 3:
        return True
    if keep.size < 4:
        return False
    drops = -np.diff(np.log2(seq.values[keep]))
    tail = drops[-3:]
    return bool(np.all(np.diff(tail) > 0) and tail[-1] >= min_drop)


def verdict(terms, scale: float | None = None) -> str:
    """'finite' or 'divergent' for a truncated dyadic sum from the tail trend.

    Terms at the zero floor (relative to ``scale``) are exact reproduction and
    count as convergent.
    """
    terms = np.abs(np.asarray(terms, dtype=float))
    ref = scale if scale is not None else (float(terms.max()) if terms.size else 0.0)
    keep = np.where(terms > ZERO_TOL * max(ref, 1e-300))[0]
    if keep.size < 2 or keep[-1] < len(terms) - 1:
        return "finite"
    s, _ = _tail_fit(keep.astype(float), np.log2(terms[keep]))
    return "divergent" if s > DIVERGENCE_SLOPE else "finite"


def suggested_order(s_hat: float, cap: int = 6) -> int:
    """Modulus order floor(2 s) + 2, capped.

    Tangential cells of size sqrt(h) make degree m - 1 resolve smoothness up
    to about m / 2, so m must exceed 2 s; one extra order keeps the fit off
    that edge.  Higher orders than needed overfit the per-cell samples at
    desk-scale resolutions and steepen the measured modulus.
    """
    if not np.isfinite(s_hat):
        return cap
    return int(min(cap, np.floor(2 * max(s_hat, 0.0)) + 2))


@dataclass
class BesovReport:
    p: float
    q: float
    s: float
    m: int
    seminorm: float
    sequence: float
    slope: float
    slope_residual: float
    lp_norm: float
    superalgebraic: bool = False
    verdict_modulus: str = ""
    verdict_sequence: str = ""

    @property
    def a_norm(self) -> float:
        return self.lp_norm + self.seminorm

    def to_dict(self) -> dict:
        d = {k: (_p_label(v) if k in ("p", "q") else v) for k, v in self.__dict__.items()}
        d["a_norm"] = self.a_norm
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def besov_report(seq: RateSequence, table: ModulusTable, s: float, q) -> BesovReport:
    """Seminorm, sequence norm, slope and finiteness verdicts at one (s, q)."""
    try:
        s_hat, resid = slope(seq)
    except InsufficientDataError:
        s_hat, resid = np.inf, 0.0
    sup = is_superalgebraic(seq) or not np.isfinite(s_hat)
    c = besov_seminorm(table, s, q)
    v_mod = verdict(besov_terms(table, s), seq.norm)
    v_seq = "finite" if sup else verdict(sequence_terms(seq, s), seq.norm)
    return BesovReport(seq.p, float(q), float(s), table.m, c, sequence_norm(seq, s, q),
                       float(s_hat), float(resid), float(seq.norm), sup, v_mod, v_seq)
