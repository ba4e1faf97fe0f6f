"""Multivariate complex polynomials, moment polynomials and node interpolation."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .errors import ConditioningError, IllPosedGridError, ParameterError


def monomial_exponents(n: int, m: int, mode: str = "total") -> np.ndarray:
    """Exponent rows, sorted by total degree then lexicographically descending.

    ``mode="total"``: |beta| <= m.  ``mode="per_variable"``: beta_j <= m.
    """
    if mode == "per_variable":
        rows = list(itertools.product(range(m + 1), repeat=n))
        rows.sort(key=lambda b: (sum(b), tuple(-x for x in b)))
    elif mode == "total":
        rows = [b for b in itertools.product(range(m + 1), repeat=n) if sum(b) <= m]
        rows.sort(key=lambda b: (sum(b), tuple(-x for x in b)))
    else:
        raise ParameterError(f"unknown degree mode {mode!r}")
    return np.array(rows, dtype=int).reshape(-1, n)


def power_table(z, maxdeg: int):
    """z[..., j] ** k for k = 0..maxdeg, built by repeated multiplication."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape + (maxdeg + 1,), dtype=complex)
    out[..., 0] = 1.0
    for k in range(1, maxdeg + 1):
        out[..., k] = out[..., k - 1] * z
    return out


def vandermonde(z, exponents) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    exponents = np.asarray(exponents)
    if len(exponents) == 0:
        return np.zeros((z.shape[0], 0), dtype=complex)
    pw = power_table(z, int(exponents.max()))
    V = np.ones((z.shape[0], len(exponents)), dtype=complex)
    for j in range(z.shape[1]):
        V *= pw[:, j, exponents[:, j]]
    return V


@dataclass
class MultiPoly:
    """sum_beta c_beta zeta^beta in local coordinates zeta = A (z - origin).

    ``origin`` and ``transform`` default to the global coordinates.
    """

    exponents: np.ndarray
    coeffs: np.ndarray
    mode: str = "total"
    origin: np.ndarray | None = None
    transform: np.ndarray | None = None

    def __post_init__(self):
        self.exponents = np.asarray(self.exponents, dtype=int)
        self.coeffs = np.asarray(self.coeffs, dtype=complex)

    @property
    def n(self) -> int:
        return self.exponents.shape[1]

    def local(self, z):
        z = np.asarray(z, dtype=complex)
        if self.origin is not None:
            z = z - self.origin
        if self.transform is not None:
            z = z @ np.asarray(self.transform).T
        return z

    def __call__(self, z, chunk: int = 4096):
        z = np.asarray(z, dtype=complex)
        flat = self.local(z.reshape(-1, self.n))
        out = np.empty(flat.shape[0], dtype=complex)
        for s in range(0, flat.shape[0], chunk):
            out[s:s + chunk] = vandermonde(flat[s:s + chunk], self.exponents) @ self.coeffs
        return out.reshape(z.shape[:-1])

    def degree(self, tol: float = 1e-14) -> int:
        keep = np.abs(self.coeffs) > tol
        if not np.any(keep):
            return 0
        e = self.exponents[keep]
        return int(e.max() if self.mode == "per_variable" else e.sum(axis=1).max())

    def same_frame(self, other: "MultiPoly") -> bool:
        def eq(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(np.asarray(a), np.asarray(b))
        return eq(self.origin, other.origin) and eq(self.transform, other.transform)

    def _combine(self, other: "MultiPoly", sign: float) -> "MultiPoly":
        if not self.same_frame(other):
            raise ParameterError("polynomials live in different coordinate frames")
        acc = {}
        for e, c in zip(map(tuple, self.exponents), self.coeffs):
            acc[e] = acc.get(e, 0) + c
        for e, c in zip(map(tuple, other.exponents), other.coeffs):
            acc[e] = acc.get(e, 0) + sign * c
        keys = sorted(acc, key=lambda b: (sum(b), tuple(-x for x in b)))
        mode = self.mode if self.mode == other.mode else "total"
        return MultiPoly(np.array(keys).reshape(-1, self.n), [acc[k] for k in keys], mode,
                         self.origin, self.transform)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode,
            "exponents": self.exponents.tolist(),
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
        }
        if self.origin is not None:
            d["origin"] = [[float(c.real), float(c.imag)] for c in np.asarray(self.origin)]
        if self.transform is not None:
            d["transform"] = [[[float(c.real), float(c.imag)] for c in row]
                              for row in np.asarray(self.transform)]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "MultiPoly":
        def cx(v):
            return np.array([complex(a, b) for a, b in v])
        origin = cx(d["origin"]) if "origin" in d else None
        transform = np.array([cx(row) for row in d["transform"]]) if "transform" in d else None
        return cls(np.array(d["exponents"], dtype=int), cx(d["coeffs"]), d["mode"], origin, transform)


def zero_poly(n: int, **frame) -> MultiPoly:
    return MultiPoly(np.zeros((1, n), dtype=int), [0.0], "total", **frame)


# -- moment polynomials -------------------------------------------------------

@dataclass
class MomentPoly:
    """sum_k coeffs[k] x^k; variant "P0" on [0, 1] or "P1" on the square [-1, 1]^2."""

    degree: int
    coeffs: np.ndarray
    variant: str

    def __call__(self, x):
        if self.variant == "P0":
            # P0 is the degree-m reproducing kernel at 0 for L^2[0, 1]; its
            # shifted Legendre expansion avoids the cancellation of the monomial form
            k = np.arange(self.degree + 1)
            return np.polynomial.legendre.legval(2 * np.asarray(x) - 1, (2 * k + 1) * (-1.0) ** k)
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def conj_call(self, x):
        return np.conj(self(x))


def _solve_rational(A, b):
    """Gauss-Jordan elimination over the rationals."""
    n = len(A)
    M = [list(row) + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise ConditioningError("singular moment system")
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [x / p for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[i][n] for i in range(n)]


MAX_MOMENT_DEGREE = 30


@lru_cache(maxsize=None)
def _p0_coeffs(m: int):
    H = [[Fraction(1, i + j + 1) for j in range(m + 1)] for i in range(m + 1)]
    rhs = [Fraction(1)] + [Fraction(0)] * m
    return tuple(_solve_rational(H, rhs))


def p0_moment_poly(m: int) -> MomentPoly:
    """Degree-m P0 with int_0^1 P0 = 1 and int_0^1 x^k P0 = 0 for k = 1..m."""
    if m < 0:
        raise ParameterError("degree must be nonnegative")
    if m > MAX_MOMENT_DEGREE:
        raise ConditioningError(f"moment system beyond degree {MAX_MOMENT_DEGREE}")
    return MomentPoly(m, np.array([float(c) for c in _p0_coeffs(m)]), "P0")


def _line_moment(p: int) -> Fraction:
    return Fraction(2, p + 1) if p % 2 == 0 else Fraction(0)


@lru_cache(maxsize=None)
def square_moment(k: int, l: int) -> Fraction:
    """int_{[-1,1]^2} z^k zbar^l d mu, which is real and rational."""
    if (k - l) % 4:
        return Fraction(0)
    re, im = Fraction(0), Fraction(0)
    ipow = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    for a in range(k + 1):
        for b in range(l + 1):
            q = (k - a) + (l - b)
            mom = _line_moment(a + b) * _line_moment(q)
            if mom == 0:
                continue
            # i^(k-a) * (-i)^(l-b) = i^(k-a+3(l-b))
            pr, pi = ipow[(k - a + 3 * (l - b)) % 4]
            c = comb(k, a) * comb(l, b) * mom
            re += pr * c
            im += pi * c
    assert im == 0
    return re


@lru_cache(maxsize=None)
def _p1_coeffs(m: int):
    # sum_l c_l int z^l zbar^k = delta_k0 (conjugate of the stated conditions)
    G = [[square_moment(l, k) for l in range(m + 1)] for k in range(m + 1)]
    rhs = [Fraction(1)] + [Fraction(0)] * m
    return tuple(_solve_rational(G, rhs))


def p1_moment_poly(m: int) -> MomentPoly:
    """Degree-m P1 with int P1 = 1 and int z^k conj(P1) = 0 on [-1, 1]^2."""
    if m < 0:
        raise ParameterError("degree must be nonnegative")
    if m > MAX_MOMENT_DEGREE:
        raise ConditioningError(f"moment system beyond degree {MAX_MOMENT_DEGREE}")
    return MomentPoly(m, np.array([float(c) for c in _p1_coeffs(m)]), "P1")


# -- interpolation ------------------------------------------------------------

MAX_CONDITION = 1e12


def interpolate(nodes, values, m: int, origin=None, transform=None) -> MultiPoly:
    """Per-variable-degree-m interpolant through (m+1)^n nodes.

    ``nodes`` are given in global coordinates; the polynomial is built in the
    local coordinates defined by ``origin`` and ``transform``.
    """
    nodes = np.atleast_2d(np.asarray(nodes, dtype=complex))
    n = nodes.shape[1]
    if nodes.shape[0] != (m + 1) ** n:
        raise IllPosedGridError(f"need {(m + 1) ** n} nodes, got {nodes.shape[0]}")
    shell = MultiPoly(monomial_exponents(n, m, "per_variable"), np.zeros((m + 1) ** n),
                      "per_variable", origin, transform)
    V = vandermonde(shell.local(nodes), shell.exponents)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllPosedGridError(f"Vandermonde condition {cond:.3g}")
    shell.coeffs = np.linalg.solve(V, np.asarray(values, dtype=complex))
    return shell


def product_formula_interpolant(nodes, values):
    """sum_k s_k prod_{j != k} <n_kj, z - u^j> / <n_kj, u^k - u^j>, n_kj = conj(u^k - u^j).

    Interpolates the values at the nodes.  Its degree is (#nodes - 1), so it
    coincides with :func:`interpolate` everywhere only when n = 1.
    """
    u = np.atleast_2d(np.asarray(nodes, dtype=complex))
    s = np.asarray(values, dtype=complex)
    N = u.shape[0]
    denoms = np.ones(N, dtype=complex)
    for k in range(N):
        for j in range(N):
            if j != k:
                denoms[k] *= np.sum(np.conj(u[k] - u[j]) * (u[k] - u[j]))

    def evaluate(z):
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        out = np.zeros(z.shape[0], dtype=complex)
        for k in range(N):
            term = np.ones(z.shape[0], dtype=complex)
            for j in range(N):
                if j != k:
                    term *= (z - u[j]) @ np.conj(u[k] - u[j])
            out += s[k] * term / denoms[k]
        return out

    evaluate.min_denominator = float(np.min(np.abs(denoms))) if N > 1 else 1.0
    return evaluate
