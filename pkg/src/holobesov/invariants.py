"""Sampled invariant checks for every module, collected by ``holobesov verify``.

Each check returns a :class:`Check` with the measured constant, the threshold
it is compared with and a pass flag.  ``size="quick"`` shrinks sample counts
and parameter sweeps; ``"full"`` uses the documented sizes.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import Domain, ball


@dataclass
class Check:
    name: str
    module: str
    value: float
    threshold: float
    passed: bool
    note: str = ""
    asserted: bool = True
    seconds: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("value", "threshold"):
            v = d[k]
            d[k] = None if v is None or not np.isfinite(v) else float(v)
        return d


REGISTRY = []


def check(name: str, module: str):
    def wrap(fn):
        REGISTRY.append((name, module, fn))
        return fn
    return wrap


def _pick(size, quick, full):
    return quick if size == "quick" else full


def _le(name, module, value, threshold, note="", asserted=True):
    ok = bool(np.isfinite(value) and value <= threshold) if asserted else True
    return Check(name, module, float(value), float(threshold), ok, note, asserted)


def _ge(name, module, value, threshold, note=""):
    return Check(name, module, float(value), float(threshold), bool(value >= threshold), note)


# -- geometry ----------------------------------------------------------------------

def _triples(dom, size, rng):
    from .geometry import random_sphere_points
    return (random_sphere_points(dom, size, rng) for _ in range(3))


@check("quasi_triangle", "geometry")
def quasi_triangle(dom: Domain, size: str, seed: int):
    rng = np.random.default_rng(seed)
    N = _pick(size, 20000, 100000)
    z, xi, z0 = _triples(dom, N, rng)
    lhs = dom.quasimetric(z, z0)
    rhs = dom.quasimetric(z, xi) + dom.quasimetric(xi, z0)
    A = float(np.max(lhs / np.maximum(rhs, 1e-300)))
    return _le("quasi_triangle", "geometry", A, 2.05, f"{N} triples; sqrt(d) metric bound A <= 2")


@check("quasi_symmetry", "geometry")
def quasi_symmetry(dom: Domain, size: str, seed: int):
    rng = np.random.default_rng(seed + 1)
    N = _pick(size, 20000, 100000)
    z, xi, _ = _triples(dom, N, rng)
    a, b = dom.quasimetric(xi, z), dom.quasimetric(z, xi)
    A = float(np.max(a / np.maximum(b, 1e-300)))
    return _le("quasi_symmetry", "geometry", A, 2.05, f"{N} pairs")


@check("levi_lower_bound", "geometry")
def levi_bound(dom: Domain, size: str, seed: int):
    from .geometry import levi_lower_bound, random_sphere_points
    rng = np.random.default_rng(seed + 2)
    N = _pick(size, 10000, 10000)
    xi = random_sphere_points(dom, N, rng) * np.sqrt(1 + rng.uniform(0, dom.epsilon, N))[:, None]
    # z in the closed domain, half of them close to xi
    z = random_sphere_points(dom, N, rng) * np.sqrt(rng.uniform(0.5, 1.0, N))[:, None]
    near = rng.random(N) < 0.5
    step = 10.0 ** rng.uniform(-3, -0.5, N)[:, None]
    g = rng.standard_normal((N, dom.n)) + 1j * rng.standard_normal((N, dom.n))
    zn = xi + step * g / np.linalg.norm(g, axis=-1, keepdims=True)
    scale = np.sqrt(np.maximum(1.0, dom.rho(zn) + 1.0))
    z[near] = (zn / scale[:, None])[near]
    beta, s = levi_lower_bound(dom, xi, z, 0.5)
    ok = beta > 0 and s > 0
    return Check("levi_lower_bound", "geometry", beta, 0.0, bool(ok),
                 f"beta={beta:.4g} for |xi-z|<0.5, s={s:.4g} outside; coefficient 1/2 on rho(xi)-rho(z)")


@check("ball_measure_growth", "geometry")
def ball_measure_growth(dom: Domain, size: str, seed: int):
    from .decomposition import quasiball
    from .geometry import quasiball_measure_ball, random_sphere_points
    rng = np.random.default_rng(seed + 3)
    centers = random_sphere_points(dom, _pick(size, 2, 4), rng)
    ratios, rel = [], 0.0
    # delta = 1/2 is beyond the reach of the tangent-box lift
    for k in range(2, _pick(size, 7, 10)):
        delta = 2.0 ** (-k)
        for c in centers:
            sig = quasiball(dom, c, delta, nz=16, nx=16).sigma
            ratios.append(sig / delta ** dom.n)
            if dom.is_ball and dom.n == 2:
                rel = max(rel, abs(sig / quasiball_measure_ball(2, delta) - 1))
    note = f"sup over delta = 2^-2..; closed-form relative error {rel:.2e}" if rel else ""
    return _le("ball_measure_growth", "geometry", max(ratios), 20.0, note)


def _pushforward_integral(n, c, g, lo, hi, k=24):
    """int over the unit sphere of g(|c - <eta, e_1>|) restricted to lo < t < hi.

    <eta, e_1> has density (n-1)/pi (1-|s|^2)^{n-2} on the disc (times the
    sphere area); the disc is swept in polar coordinates around c >= 1.
    """
    from .geometry import sphere_area
    x, w = np.polynomial.legendre.leggauss(k)
    if c > 1:
        thmax = np.arcsin(1.0 / c)
    else:
        thmax = np.pi / 2
    total = 0.0
    # theta pieces clustered at the tangent direction where the chord shrinks
    edges = thmax * (1 - 2.0 ** -np.arange(0, 12))
    edges = np.append(edges, thmax)
    for a, b in zip(edges[:-1], edges[1:]):
        th = 0.5 * (b - a) * x + 0.5 * (a + b)
        wt = 0.5 * (b - a) * w
        cs = np.cos(th)
        disc = np.sqrt(np.maximum(cs * cs * c * c - c * c + 1, 0.0))
        t0 = c * cs - disc if c > 1 else np.zeros_like(cs)
        t1 = c * cs + disc
        t0, t1 = np.maximum(t0, lo), np.minimum(t1, hi)
        for i in range(len(th)):
            if t1[i] <= t0[i]:
                continue
            # log-spaced Gauss pieces in t
            lt = np.linspace(np.log(t0[i]), np.log(t1[i]), 9)
            for la, lb in zip(lt[:-1], lt[1:]):
                u = 0.5 * (lb - la) * x + 0.5 * (la + lb)
                t = np.exp(u)
                s = c - t * np.exp(1j * th[i])
                dens = (n - 1) / np.pi * np.maximum(1 - np.abs(s) ** 2, 0.0) ** (n - 2)
                total += 2 * wt[i] * np.sum(0.5 * (lb - la) * w * t * t * g(t) * dens)
    return sphere_area(n) * total


@check("integral_estimate", "geometry")
def integral_estimate(dom: Domain, size: str, seed: int):
    if not dom.is_ball:
        return Check("integral_estimate", "geometry", np.nan, np.nan, True,
                     "pushforward quadrature implemented for the ball only", asserted=False)
    n, alpha = dom.n, 1.0
    if n == 1:
        return Check("integral_estimate", "geometry", np.nan, np.nan, True, "n = 1 skipped", asserted=False)
    far = []
    for k in range(1, _pick(size, 7, 11)):
        delta = 2.0 ** (-k)
        I = _pushforward_integral(n, 1.0, lambda t: t ** (-n - alpha), delta, 2.0)
        far.append(I * delta ** alpha)
    logs = []
    for r in (0.05, 0.01):
        c = np.sqrt(1 + r)
        for delta in (2 * r, 4 * r, 16 * r, 0.5):
            # on the level r: xi = c e_1, d(xi, z) = c |c - <eta, e_1>|
            I = _pushforward_integral(n, c, lambda t: (c * t) ** (-n), r / c, delta / c)
            logs.append(I / (1 + np.log(delta / r)))
    value = max(max(far), max(logs))
    return _le("integral_estimate", "geometry", value, 100.0,
               f"sup delta^alpha int_(d>delta) d^(-n-alpha) = {max(far):.4g} (alpha=1); "
               f"sup int_(d<delta) d^-n / (1 + log(delta/r)) = {max(logs):.4g}")


# -- polynomials ---------------------------------------------------------------------

@check("interpolation_uniqueness", "polynomials")
def interpolation_uniqueness(dom: Domain, size: str, seed: int):
    from .polynomials import MultiPoly, interpolate, monomial_exponents
    rng = np.random.default_rng(seed + 10)
    worst = 0.0
    for m in range(_pick(size, 4, 6)):
        for _ in range(_pick(size, 3, 10)):
            # a product grid of distinct points per variable is unisolvent
            axes = [np.exp(2j * np.pi * (np.arange(m + 1) + rng.uniform(0, 0.5)) / (m + 1))
                    * rng.uniform(0.6, 1.0) for _ in range(dom.n)]
            mesh = np.meshgrid(*axes, indexing="ij")
            nodes = np.stack([g.ravel() for g in mesh], axis=-1)
            ex = monomial_exponents(dom.n, m, "per_variable")
            c = rng.standard_normal(len(ex)) + 1j * rng.standard_normal(len(ex))
            P = MultiPoly(ex, c, "per_variable")
            Q = interpolate(nodes, P(nodes), m)
            worst = max(worst, float(np.max(np.abs(Q.coeffs - c))))
    return _le("interpolation_uniqueness", "polynomials", worst, 1e-8, "max coefficient error")


@check("moment_residuals", "polynomials")
def moment_residuals(dom: Domain, size: str, seed: int):
    from .polynomials import p0_moment_poly, p1_moment_poly
    worst = 0.0
    for m in range(11):
        q = max(4 * m, 2)
        x, w = np.polynomial.legendre.leggauss(q)
        t, wt = 0.5 * (x + 1), 0.5 * w
        P0 = p0_moment_poly(m)
        target = np.zeros(m + 1)
        target[0] = 1.0
        got = np.array([np.sum(wt * t ** k * P0(t)) for k in range(m + 1)])
        worst = max(worst, float(np.max(np.abs(got - target))))
        P1 = p1_moment_poly(m)
        X, Y = np.meshgrid(x, x, indexing="ij")
        W = np.outer(w, w)
        Z = X + 1j * Y
        got = np.array([np.sum(W * Z ** k * P1.conj_call(Z)) for k in range(m + 1)])
        worst = max(worst, float(np.max(np.abs(got - target))))
    return _le("moment_residuals", "polynomials", worst, 1e-10, "P0 and P1, m <= 10, Gauss order 4m")


# -- quadrature ------------------------------------------------------------------

@check("rule_refinement", "quadrature")
def rule_refinement(dom: Domain, size: str, seed: int):
    from .quadrature import boundary_rule

    def g(z):
        return np.abs(z[:, 0]) ** 4 + np.real(np.exp(z[:, -1])) + np.abs(z[:, 0] * z[:, -1]) ** 2

    worst = 0.0
    for t in (0.0, dom.epsilon / 2):
        for N in (8, 12):
            a = boundary_rule(dom, t, N)
            b = boundary_rule(dom, t, 2 * N)
            worst = max(worst, abs(a.integrate(g(a.nodes)) - b.integrate(g(b.nodes))),
                        abs(a.sigma - b.sigma))
    return _le("rule_refinement", "quadrature", worst, 1e-8, "N -> 2N on two levels")


@check("monotone_consistency", "quadrature")
def monotone_consistency(dom: Domain, size: str, seed: int):
    from .decomposition import quasiball
    from .geometry import random_sphere_points
    from .quadrature import lp_norm
    rng = np.random.default_rng(seed + 20)
    worst = 0.0
    for c in random_sphere_points(dom, _pick(size, 3, 10), rng):
        K = quasiball(dom, c, 0.2)
        u = rng.standard_normal(dom.n) + 1j * rng.standard_normal(dom.n)
        v = np.sin(K.rule.nodes @ u) + 1j * rng.standard_normal(len(K.rule))
        sig = K.sigma
        n1, n2, ninf = (lp_norm(v, K.rule.weights, p) for p in (1, 2, np.inf))
        worst = max(worst, n1 / (sig ** 0.5 * n2), n2 / (sig ** 0.5 * ninf))
    return _le("monotone_consistency", "quadrature", worst, 1.0 + 1e-12,
               "max of ||g||_1 / (sigma^(1/2) ||g||_2) and ||g||_2 / (sigma^(1/2) ||g||_inf)")


# -- local approximation -----------------------------------------------------------

def _cells(dom, count, h, rng):
    from .decomposition import quasiball
    from .geometry import random_sphere_points
    return [quasiball(dom, c, h) for c in random_sphere_points(dom, count, rng)]


@check("projector_identity", "local_approx")
def projector_identity(dom: Domain, size: str, seed: int):
    from .local_approx import build_grid, project
    rng = np.random.default_rng(seed + 30)
    K = _cells(dom, 1, 0.1, rng)[0]
    trials = _pick(size, 5, 20)
    worst = 0.0
    for m in range(4 if dom.n <= 2 else 3):
        grid = build_grid(dom, K, m)
        for _ in range(trials):
            c = rng.standard_normal(len(grid)) + 1j * rng.standard_normal(len(grid))
            P = grid.basis_poly(c)
            r = project(grid, P)
            x = K.rule.nodes
            worst = max(worst, float(np.max(np.abs(r.poly(x) - P(x)))))
    return _le("projector_identity", "local_approx", worst, 1e-7, f"{trials} trials per m")


def _test_functions(dom, count, rng):
    """Non-polynomial holomorphic functions with singularities outside the closure."""
    out = []
    for k in range(count):
        u = rng.standard_normal(dom.n) + 1j * rng.standard_normal(dom.n)
        u /= np.linalg.norm(u * np.sqrt(dom.a) ** -1)
        kind = k % 3
        if kind == 0:
            c = rng.uniform(1.2, 2.0)
            out.append(lambda z, u=u, c=c: 1.0 / (c - z @ u))
        elif kind == 1:
            a = rng.uniform(1.0, 3.0)
            out.append(lambda z, u=u, a=a: np.exp(a * (z @ u)))
        else:
            al = rng.uniform(0.3, 2.5)
            out.append(lambda z, u=u, al=al: (1.3 - z @ u) ** al)
    return out


@check("near_best_constant", "local_approx")
def near_best_constant(dom: Domain, size: str, seed: int):
    from .local_approx import build_grid, ls_best_approx, project
    from .quadrature import lp_norm
    rng = np.random.default_rng(seed + 31)
    K = _cells(dom, 1, 0.1, rng)[0]
    worst = 0.0
    m = 1
    grid = build_grid(dom, K, m)
    for f in _test_functions(dom, _pick(size, 12, 30), rng):
        r = project(grid, f)
        vals = f(K.rule.nodes)
        err = lp_norm(vals - r.poly(K.rule.nodes), K.rule.weights, 2)
        best = ls_best_approx(vals, K.rule, m).error
        worst = max(worst, err / max(best, 1e-300))
    return _le("near_best_constant", "local_approx", worst, 100.0,
               "||f - P_K f||_2 / E_m(f, K)_2, m = 1, total-degree E")


@check("stability_constant", "local_approx")
def stability(dom: Domain, size: str, seed: int):
    from .local_approx import build_grid, stability_constant
    rng = np.random.default_rng(seed + 32)
    K = _cells(dom, 1, 0.1, rng)[0]
    vals = {}
    for m in range(_pick(size, 2, 4) if dom.n <= 2 else 2):
        grid = build_grid(dom, K, m)
        for lam in (1.0, 2.0):
            vals[f"m={m},lambda={lam:g}"] = stability_constant(grid, lam)
    worst = max(vals.values())
    note = "; ".join(f"{k}: {v:.3g}" for k, v in vals.items())
    return Check("stability_constant", "local_approx", worst, np.inf, bool(np.isfinite(worst)),
                 "finite and reported: " + note)


@check("piecewise_proxy", "local_approx")
def piecewise_proxy(dom: Domain, size: str, seed: int):
    from .besov import modulus
    from .decomposition import build_decomposition, default_rule
    from .functions import pow_singular
    from .local_approx import piecewise_projection
    f = pow_singular(1.5)
    h = 0.125
    # omega_2 uses total degree 1; the projector uses per-variable degree 1
    om = modulus(dom, f, 2, [h], R=1, seed=seed).values[0]
    dec = build_decomposition(dom, h, seed=seed, rule=default_rule(dom, h, 40, max_order=64))
    Th = piecewise_projection(dom, dec, f, 1, 2, "projector")
    ratio = Th / om
    return _le("piecewise_proxy", "local_approx", ratio, 100.0,
               f"||f - T_h||_2 / omega_2(f, h)_2 at h = {h}, f = (1-z1)^1.5")


# -- kernels --------------------------------------------------------------------

@check("local_error_law", "kernels")
def local_error_law(dom: Domain, size: str, seed: int):
    from .kernels import kernel_context, local_error_slope
    ctx = kernel_context(dom)
    margins, notes = [], []
    for m in (1, 2, 3):
        s = local_error_slope(ctx, m, size=_pick(size, 200, 400), seed=seed)
        margins.append(s - ((m + 1) / 2 - 0.2))
        notes.append(f"m={m}: {s:.3f}")
    return _ge("local_error_law", "kernels", min(margins), 0.0,
               "fitted slope minus (m+1)/2 - 0.2; " + ", ".join(notes))


@check("delta_chain", "kernels")
def delta_chain(dom: Domain, size: str, seed: int):
    from .kernels import delta_chain_constant, kernel_context
    c = delta_chain_constant(kernel_context(dom), size=_pick(size, 2000, 10000), seed=seed)
    return _le("delta_chain", "kernels", c, 100.0, "|Delta| / (d(z,z0) d(xi,z))^(1/2)")


@check("reproduction_refinement", "kernels")
def reproduction_refinement(dom: Domain, size: str, seed: int):
    from .geometry import random_sphere_points
    from .kernels import kernel_context, reproduce
    from .quadrature import boundary_rule
    ctx = kernel_context(dom)
    rng = np.random.default_rng(seed + 40)
    z = random_sphere_points(dom, 3, rng) * np.sqrt(0.7)

    def f(x):
        return np.exp(x[:, 0]) / (2.0 - x[:, -1])

    worst = np.inf
    for zz in z:
        exact = f(zz[None])[0]
        errs = [abs(reproduce(ctx, f, zz, boundary_rule(dom, 0.0, N)) - exact) for N in (4, 8)]
        if errs[1] < 1e-13:
            continue  # both at round-off: no measurable rate
        worst = min(worst, errs[0] / errs[1])
    return _ge("reproduction_refinement", "kernels", worst, 4.0,
               "error reduction when the boundary rule order doubles (rho(z) = -0.3)")


# -- continuation ---------------------------------------------------------------------

def _global_fields(dom, size, seed):
    from .besov import dyadic_degrees, global_best_approx
    from .continuation import build_global
    from .functions import make
    M = 6
    out = []
    for name, params in (("pow_singular", {"alpha": 0.5}), ("pow_singular", {"alpha": 1.5}),
                         ("exp_z1", {})):
        f = make(name, dom.n, **params)
        seq = global_best_approx(dom, f, dyadic_degrees(M))
        out.append((name, params, seq, build_global(dom, dict(enumerate(seq.polys)), M)))
    return out[:_pick(size, 2, 3)]


_FIELD_CACHE = {}


def _fields(dom, size, seed):
    key = (dom, size, seed)
    if key not in _FIELD_CACHE:
        _FIELD_CACHE.clear()
        _FIELD_CACHE[key] = _global_fields(dom, size, seed)
    return _FIELD_CACHE[key]


@check("global_lambda_bound", "continuation")
def global_lambda_bound(dom: Domain, size: str, seed: int):
    from .continuation import lambda_constant
    if not (dom.is_ball and dom.n <= 2):
        return Check("global_lambda_bound", "continuation", np.nan, np.nan, True,
                     "needs Fourier rates (ball, n <= 2)", asserted=False)
    cs = [lambda_constant(F, size=10000, seed=seed) for *_, F in _fields(dom, size, seed)]
    return _le("global_lambda_bound", "continuation", max(cs), 100.0,
               "one C for the suite: " + ", ".join(f"{c:.3g}" for c in cs))


@check("spen1_ratio", "continuation")
def spen1_ratio(dom: Domain, size: str, seed: int):
    from .continuation import band_profile
    if not (dom.is_ball and dom.n <= 2):
        return Check("spen1_ratio", "continuation", np.nan, np.nan, True,
                     "needs Fourier rates (ball, n <= 2)", asserted=False)
    worst = 0.0
    for _, _, seq, F in _fields(dom, size, seed):
        rates = dict(enumerate(seq.values))
        for r, S, m, ref in band_profile(F, rates, per_band=_pick(size, 2, 3)):
            if ref > 0:
                worst = max(worst, S / ref)
    return _le("spen1_ratio", "continuation", worst, 100.0, "max S_2(f,r) / (2^m E_(2^m)) over bands")


@check("level_set_lemma", "continuation")
def level_set_lemma(dom: Domain, size: str, seed: int):
    from .continuation import level_set_constant
    if not dom.is_ball:
        return Check("level_set_lemma", "continuation", np.nan, np.nan, True,
                     "ridge polynomials implemented for the ball", asserted=False)
    ms = _pick(size, (0, 2, 4, 6, 8), tuple(range(9)))
    trials = _pick(size, 6, 20)
    worst, notes = 0.0, []
    for q in (2, np.inf):
        c = max(level_set_constant(dom.n, m, q, trials=trials, seed=seed) for m in ms)
        notes.append(f"q={q}: {c:.3g}")
        worst = max(worst, c)
    return _le("level_set_lemma", "continuation", worst, 10.0, ", ".join(notes))


@check("whitney_gradient", "continuation")
def whitney_gradient(dom: Domain, size: str, seed: int):
    from .continuation import build_local, shell_samples
    from .functions import exp_z1
    F = build_local(dom, exp_z1, 0, _pick(size, 3, 4), seed=seed)
    rng = np.random.default_rng(seed + 50)
    z = shell_samples(dom, _pick(size, 500, 2000), rng, 2.0 ** (-F.depth - 1), dom.epsilon)
    g = F.whitney.gradient_bound(z)
    return _le("whitney_gradient", "continuation", g, 100.0, "max |grad chi_k| rho")


# -- besov ------------------------------------------------------------------------

def two_sided(dom: Domain, spec, size: str = "quick", seed: int = 0, levels: int = 5, R: int = 2,
              cache=None):
    """Verdicts of sequence and modulus norms at s_hat - 0.1 and s_hat + 0.2 (q = inf).

    Superalgebraic and polynomial inputs have no finite slope; they are tested
    at s = 0.5 and 1.5 where both norms must be finite.
    """
    from .besov import (besov_report, dyadic_degrees, global_best_approx, is_superalgebraic,
                        modulus, slope, suggested_order)
    from .errors import InsufficientDataError
    name, params = spec
    from .functions import make
    f = make(name, dom.n, **params)
    seq = global_best_approx(dom, f, dyadic_degrees(6))
    try:
        s_hat, _ = slope(seq)
        finite_slope = not is_superalgebraic(seq)
    except InsufficientDataError:
        s_hat, finite_slope = np.inf, False
    order = suggested_order(s_hat if finite_slope else np.inf)
    scales = [2.0 ** -k for k in range(1, levels + 1)]
    table = modulus(dom, f, order, scales, R=R, seed=seed, cache=cache)
    rows = []
    if finite_slope:
        plan = ((s_hat - 0.1, "finite"), (s_hat + 0.2, "divergent"))
    else:
        plan = ((0.5, "finite"), (1.5, "finite"))
    for s, want in plan:
        rep = besov_report(seq, table, s, np.inf)
        rows.append({"s": float(s), "expected": want, "modulus": rep.verdict_modulus,
                     "sequence": rep.verdict_sequence, "seminorm": rep.seminorm,
                     "sequence_norm": rep.sequence})
    agree = all(r["modulus"] == r["sequence"] == r["expected"] for r in rows)
    return {"function": name, "params": params, "slope": float(s_hat), "order": order, "rows": rows,
            "agree": agree}


@check("two_sided_consistency", "besov")
def two_sided_consistency(dom: Domain, size: str, seed: int):
    from .functions import SUITE
    if not (dom.is_ball and dom.n == 2):
        return Check("two_sided_consistency", "besov", np.nan, np.nan, True,
                     "suite experiment defined on the ball in C^2", asserted=False)
    suite = SUITE if size == "full" else (SUITE[1], SUITE[2], SUITE[3])
    cache = {}
    results = [two_sided(dom, spec, size, seed, cache=cache) for spec in suite]
    bad = [r["function"] + str(r["params"]) for r in results if not r["agree"]]
    return Check("two_sided_consistency", "besov", float(len(bad)), 0.0, not bad,
                 f"{len(results)} functions; disagreements: {bad or 'none'}")


@check("modulus_scale_stability", "besov")
def modulus_scale_stability(dom: Domain, size: str, seed: int):
    from .besov import modulus
    from .functions import pow_singular
    scales = [2.0 ** -k for k in range(1, 5)]
    t = modulus(dom, pow_singular(0.5), 2, scales, R=2, seed=seed)
    ratio = float(np.max(t.values[:-1] / t.values[1:]))
    return Check("modulus_scale_stability", "besov", ratio, np.nan, True,
                 "max omega_2(f, 2h) / omega_2(f, h); reported only", asserted=False)


@check("e1_ep_direction", "besov")
def e1_ep_direction(dom: Domain, size: str, seed: int):
    from .local_approx import ls_best_approx
    from .quadrature import lp_norm
    rng = np.random.default_rng(seed + 60)
    worst = 0.0
    for K in _cells(dom, _pick(size, 3, 8), 0.2, rng):
        for f in _test_functions(dom, 3, rng):
            y = f(K.rule.nodes)
            b = ls_best_approx(y, K.rule, 1)
            e1 = lp_norm(y - b.poly(K.rule.nodes), K.rule.weights, 1)  # an upper bound for E_1
            worst = max(worst, e1 / (K.sigma ** 0.5 * b.error))
    return _le("e1_ep_direction", "besov", worst, 1.0 + 1e-10,
               "||f - P||_1 / (sigma^(1/2) E_1(f, K)_2) with P the L^2-best fit")


# -- cli ------------------------------------------------------------------------

@check("deterministic_outputs", "cli_harness")
def deterministic_outputs(dom: Domain, size: str, seed: int):
    from .cli import rates_tables
    from .config import default_config
    cfg = default_config()
    cfg.domain = dom
    cfg.functions = cfg.functions[3:4]
    cfg.max_level, cfg.modulus_levels, cfg.decompositions = 4, 2, 1
    a = rates_tables(cfg)
    b = rates_tables(cfg)
    same = all(a[k] == b[k] for k in a)
    return Check("deterministic_outputs", "cli_harness", float(not same), 0.0, same,
                 "rates CSV/JSON rendered twice byte-compared")


@check("csv_headers", "cli_harness")
def csv_headers(dom: Domain, size: str, seed: int):
    from .cli import HEADERS, rates_tables
    from .config import default_config
    cfg = default_config()
    cfg.domain = dom
    cfg.functions = cfg.functions[3:4]
    cfg.max_level, cfg.modulus_levels, cfg.decompositions = 4, 2, 1
    out = rates_tables(cfg)
    bad = []
    for name, text in out.items():
        if name.endswith(".csv"):
            header = text.splitlines()[0].split(",")
            if header != HEADERS[name](cfg):
                bad.append(name)
    return Check("csv_headers", "cli_harness", float(len(bad)), 0.0, not bad,
                 f"checked {sorted(k for k in out if k.endswith('.csv'))}")


def run_all(dom: Domain | None = None, size: str = "quick", seed: int = 0, only=None):
    """Run every registered check; exceptions become failed checks."""
    dom = dom or ball(2)
    results = []
    for name, module, fn in REGISTRY:
        if only and name not in only and module not in only:
            continue
        t = time.perf_counter()
        try:
            c = fn(dom, size, seed)
        except Exception as exc:  # a crash is a failed invariant, not a crashed run
            c = Check(name, module, np.nan, np.nan, False, f"{type(exc).__name__}: {exc}")
        c.seconds = round(time.perf_counter() - t, 1)
        results.append(c)
    return results
