from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holobesov.errors import EmptyDomainError, InvalidOrderError
from holobesov.geometry import ball, ellipsoid, sphere_area
from holobesov.quadrature import (boundary_rule, curve_integral, dyadic_intervals, lp_norm,
                                  pole_rotation, shell_integral, shell_rule)


def sphere_moment(n, beta):
    """int_{S^{2n-1}} |z^beta|^2 d sigma = 2 pi^n beta! / (n - 1 + |beta|)!."""
    return 2 * np.pi ** n * np.prod([factorial(b) for b in beta]) / factorial(n - 1 + sum(beta))


def test_boundary_rule_oracles():
    r = boundary_rule(ball(2), 0.0, 8)
    assert r.sigma == pytest.approx(2 * np.pi ** 2, abs=1e-10)
    assert r.integrate(np.abs(r.nodes[:, 0]) ** 2) == pytest.approx(np.pi ** 2, abs=1e-10)
    assert abs(r.integrate(r.nodes[:, 0])) <= 1e-12
    with pytest.raises(InvalidOrderError):
        boundary_rule(ball(2), 0.0, 1)


@given(b1=st.integers(0, 4), b2=st.integers(0, 4), n=st.sampled_from([2, 3]))
@settings(max_examples=30, deadline=None)
def test_sphere_moments_exact(b1, b2, n):
    beta = (b1, b2, 0)[:n]
    r = boundary_rule(ball(n), 0.0, 6)
    vals = np.prod(np.abs(r.nodes) ** (2 * np.array(beta)), axis=-1)
    assert r.integrate(vals) == pytest.approx(sphere_moment(n, beta), rel=1e-10)


def test_rotation_invariance():
    rng = np.random.default_rng(0)
    d = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    Q = pole_rotation(d)
    assert np.allclose(Q.conj().T @ Q, np.eye(2))
    assert np.allclose(Q[:, 0], d / np.linalg.norm(d))
    a = boundary_rule(ball(2), 0.0, 8)
    b = boundary_rule(ball(2), 0.0, 8, rotation=Q)
    g = lambda z: np.abs(z[:, 0]) ** 4 + np.abs(z[:, 1]) ** 2  # noqa: E731
    assert a.integrate(g(a.nodes)) == pytest.approx(b.integrate(g(b.nodes)), rel=1e-12)


def test_ellipsoid_area_converges():
    dom = ellipsoid((1.0, 2.0), 0.25)
    s = [boundary_rule(dom, 0.0, N).sigma for N in (8, 16, 32)]
    assert abs(s[1] - s[2]) <= 1e-8
    assert np.allclose(dom.rho(boundary_rule(dom, 0.1, 8).nodes), 0.1)


def test_lp_norm_oracles():
    r = boundary_rule(ball(2), 0.0, 8)
    c = 2.5
    assert lp_norm(np.full(len(r), c), r.weights, 1) == pytest.approx(c * 2 * np.pi ** 2)
    assert lp_norm(r.nodes[:, 0], r.weights, 2) == pytest.approx(np.pi, rel=1e-12)
    assert lp_norm(r.nodes[:, 0], r.weights, np.inf) == pytest.approx(1.0, abs=1e-2)
    with pytest.raises(EmptyDomainError):
        lp_norm([], [], 2)


def test_curve_integral_oracles():
    assert curve_integral(lambda w: np.ones_like(w), 0.5, 1 + 2j) == pytest.approx(0.5 + 2j)
    assert curve_integral(lambda w: w, 0.0, 1.0) == pytest.approx(0.5)

    def arc(t):
        # quarter circle from 1 to i
        th = 0.5 * np.pi * t
        return np.exp(1j * th), 0.5j * np.pi * np.exp(1j * th)

    g = lambda w: 3 * w ** 2 - w  # noqa: E731
    assert curve_integral(g, 1.0, 1j, curve=arc) == pytest.approx(curve_integral(g, 1.0, 1j), abs=1e-8)


def test_shell_oracles():
    eps = 0.5
    dom = ball(2, eps)
    rule = shell_rule(dom, boundary_rule(dom, 0.0, 8))
    vol = shell_integral(dom, lambda z: np.ones(len(z)), rule)
    assert vol == pytest.approx(np.pi ** 2 / 2 * ((1 + eps) ** 2 - 1), rel=1e-10)
    # rho integrated against the radial measure pi^2 d(R^4)/2 with R^2 = 1 + rho
    exact = np.pi ** 2 * (eps ** 3 / 3 + eps ** 2 / 2)
    assert shell_integral(dom, dom.rho, rule) == pytest.approx(exact, rel=1e-4)
    outside = shell_integral(dom, lambda z: np.where(dom.rho(z) > eps, 1.0, 0.0), rule)
    assert outside == 0


def test_dyadic_intervals_cover():
    iv = dyadic_intervals(0.5, 3)
    assert iv[0] == (0.25, 0.5)
    assert iv[-1] == (0.0, 0.0625)
    assert sum(b - a for a, b in iv) == pytest.approx(0.5)


def test_sphere_area_n1():
    assert boundary_rule(ball(1), 0.0, 8).sigma == pytest.approx(sphere_area(1))
