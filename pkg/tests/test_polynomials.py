from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holobesov.errors import ConditioningError, IllPosedGridError, ParameterError
from holobesov.polynomials import (MultiPoly, interpolate, monomial_exponents, p0_moment_poly,
                                   p1_moment_poly, product_formula_interpolant, square_moment)


def test_monomial_exponents_counts():
    assert len(monomial_exponents(2, 3, "total")) == 10
    assert len(monomial_exponents(2, 3, "per_variable")) == 16
    assert monomial_exponents(2, 1, "total").tolist() == [[0, 0], [1, 0], [0, 1]]
    with pytest.raises(ParameterError):
        monomial_exponents(2, 1, "other")


def test_p0_oracles():
    assert np.allclose(p0_moment_poly(0)(np.linspace(0, 1, 5)), 1.0)
    assert np.allclose(p0_moment_poly(1).coeffs, [4, -6])
    x = np.linspace(0, 1, 7)
    assert np.allclose(p0_moment_poly(1)(x), 4 - 6 * x)
    with pytest.raises(ParameterError):
        p0_moment_poly(-1)
    with pytest.raises(ConditioningError):
        p0_moment_poly(31)


@pytest.mark.parametrize("m", range(11))
def test_p0_moments(m):
    x, w = np.polynomial.legendre.leggauss(max(4 * m, 2))
    t, wt = 0.5 * (x + 1), 0.5 * w
    P = p0_moment_poly(m)
    got = [np.sum(wt * t ** k * P(t)) for k in range(m + 1)]
    assert abs(got[0] - 1) <= 1e-10
    assert np.max(np.abs(got[1:]), initial=0.0) <= 1e-10


def test_square_moment_oracles():
    assert square_moment(0, 0) == 4
    # int |z|^2 over [-1, 1]^2 = 2 * (2/3) * 2
    assert square_moment(1, 1) == Fraction(8, 3)
    assert square_moment(1, 0) == 0


@pytest.mark.parametrize("m", range(8))
def test_p1_moments(m):
    P = p1_moment_poly(m)
    x, w = np.polynomial.legendre.leggauss(max(4 * m, 2))
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    Z = X + 1j * Y
    got = np.array([np.sum(W * Z ** k * P.conj_call(Z)) for k in range(m + 1)])
    assert abs(got[0] - 1) <= 1e-10
    assert np.max(np.abs(got[1:]), initial=0.0) <= 1e-10
    if m == 0:
        assert np.allclose(P.coeffs, [0.25])


def test_interpolate_oracles():
    P = interpolate(np.array([[0], [1]]), [0, 1], 1)
    assert np.allclose(P.coeffs, [0, 1])
    # four product-grid nodes on the sphere reproduce z1 z2
    u = np.array([0.6, -0.6j]) / 1.0
    v = np.array([0.8, 0.8j])
    nodes = np.array([[a, b] for a in u for b in v])
    Q = interpolate(nodes, nodes[:, 0] * nodes[:, 1], 1)
    z = np.array([[0.3 + 0.1j, -0.2j]])
    assert np.allclose(Q(z), z[0, 0] * z[0, 1])
    with pytest.raises(IllPosedGridError):
        interpolate(nodes[:3], np.zeros(3), 1)
    with pytest.raises(IllPosedGridError):
        interpolate(np.zeros((4, 2)), np.zeros(4), 1)


@given(seed=st.integers(0, 10_000), m=st.integers(0, 3))
@settings(max_examples=25, deadline=None)
def test_interpolation_uniqueness(seed, m):
    rng = np.random.default_rng(seed)
    axes = [np.exp(2j * np.pi * (np.arange(m + 1) + rng.uniform(0, 0.5)) / (m + 1)) * rng.uniform(0.6, 1)
            for _ in range(2)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=-1)
    ex = monomial_exponents(2, m, "per_variable")
    c = rng.standard_normal(len(ex)) + 1j * rng.standard_normal(len(ex))
    Q = interpolate(nodes, MultiPoly(ex, c, "per_variable")(nodes), m)
    assert np.max(np.abs(Q.coeffs - c)) <= 1e-8


def test_product_formula_interpolates():
    rng = np.random.default_rng(0)
    u = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
    s = rng.standard_normal(5) + 0j
    g = product_formula_interpolant(u, s)
    assert np.allclose(g(u), s)
    # n = 1: equals the Lagrange interpolant
    u1 = np.array([[0.0], [1.0], [2.0j]])
    g1 = product_formula_interpolant(u1, [1, 2, 3])
    P = interpolate(u1, [1, 2, 3], 2)
    z = np.array([[0.3 - 0.4j]])
    assert np.allclose(g1(z), P(z))


def test_multipoly_algebra_and_json():
    a = MultiPoly([[1, 0], [0, 1]], [1, 2j])
    b = MultiPoly([[1, 0]], [3])
    z = np.array([[0.2, 0.5j], [1, 1]])
    assert np.allclose((a + b)(z), a(z) + b(z))
    assert np.allclose((a - b)(z), a(z) - b(z))
    assert a.degree() == 1
    c = MultiPoly([[2, 1]], [1], "per_variable", origin=np.array([0.1, 0]), transform=np.eye(2))
    d = MultiPoly.from_dict(c.to_dict())
    assert np.allclose(d(z), c(z))
    with pytest.raises(ParameterError):
        a + c
