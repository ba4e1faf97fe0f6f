import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holobesov.decomposition import build_decomposition, default_rule, quasiball
from holobesov.errors import ParameterError
from holobesov.functions import conj_z1, pow_singular
from holobesov.geometry import ball
from holobesov.local_approx import (build_grid, ls_best_approx, minimax_best_approx,
                                    piecewise_projection, project, projector_functional,
                                    stability_constant)
from holobesov.quadrature import QuadratureRule, boundary_rule, lp_norm

DOM = ball(2)
XI = np.array([0.6, 0.8j])


@pytest.fixture(scope="module")
def cell():
    return quasiball(DOM, XI, 0.1)


@pytest.fixture(scope="module")
def grids(cell):
    return {m: build_grid(DOM, cell, m) for m in range(3)}


def test_grid_shape(grids):
    assert len(grids[0]) == 1
    g = grids[1]
    assert len(g) == 4
    assert np.max(np.abs(DOM.rho(g.nodes))) <= 1e-10
    d = DOM.quasimetric(g.nodes[:, None, :], g.nodes[None, :, :])
    assert np.min(d[~np.eye(4, dtype=bool)]) >= 0.1 / 10
    assert np.all(DOM.quasimetric(XI, g.nodes) < 2 * 0.1)
    with pytest.raises(ParameterError):
        build_grid(DOM, quasiball(DOM, XI, 0.1), -1)


def test_functional_oracles(grids):
    g = grids[1]
    one = lambda z: np.ones(z.shape[:-1], dtype=complex)  # noqa: E731
    z1 = lambda z: z[..., 0]  # noqa: E731
    for j in range(len(g)):
        assert projector_functional(g, one, j) == pytest.approx(1.0, abs=1e-10)
        assert projector_functional(g, z1, j) == pytest.approx(g.nodes[j, 0], abs=1e-10)


@given(seed=st.integers(0, 10_000), m=st.integers(0, 2))
@settings(max_examples=12, deadline=None)
def test_projector_reproduces_its_space(grids, cell, seed, m):
    rng = np.random.default_rng(seed)
    g = grids[m]
    c = rng.standard_normal(len(g)) + 1j * rng.standard_normal(len(g))
    P = g.basis_poly(c)
    r = project(g, P)
    x = cell.rule.nodes
    assert np.max(np.abs(r.poly(x) - P(x))) <= 1e-7


def test_projector_zero_and_near_best(grids, cell):
    g = grids[1]
    zero = project(g, lambda z: np.zeros(z.shape[:-1], dtype=complex))
    assert np.max(np.abs(zero.poly.coeffs)) <= 1e-12
    f = lambda z: z[..., 0] ** 2  # noqa: E731
    r = project(g, f)
    x, w = cell.rule.nodes, cell.rule.weights
    err = lp_norm(f(x) - r.poly(x), w, 2)
    C = stability_constant(g, 1.0)
    best = ls_best_approx(f, cell, 1).error
    assert np.isfinite(C)
    assert err <= (C + 1) * best


def test_ls_oracles(cell):
    r = boundary_rule(DOM, 0.0, 8)
    b = ls_best_approx(conj_z1, r, 0)
    assert b.error == pytest.approx(np.pi, rel=1e-10)
    assert ls_best_approx(lambda z: z[:, 0] * z[:, 1] + 1, r, 2).error <= 1e-10
    errs = [ls_best_approx(pow_singular(0.5), cell, m).error for m in range(4)]
    assert all(a >= b - 1e-15 for a, b in zip(errs, errs[1:]))


def test_minimax_oracles():
    phi = 2 * np.pi * np.arange(64) / 64
    circle = QuadratureRule(0.0, np.exp(1j * phi)[:, None], np.full(64, 2 * np.pi / 64), (64,))
    b = minimax_best_approx(lambda z: np.conj(z[:, 0]), circle, 0)
    assert b.error == pytest.approx(1.0, abs=1e-8)
    assert minimax_best_approx(lambda z: z[:, 0] ** 2, circle, 3).error <= 1e-12
    f = pow_singular(0.5)
    mm = minimax_best_approx(f, circle, 4)
    ls = ls_best_approx(f, circle, 4)
    assert mm.lower <= mm.error
    # E_inf >= E_2 / sigma^(1/2)
    assert mm.error >= ls.error / np.sqrt(circle.sigma) - 1e-12


def test_piecewise_projection_methods():
    h = 0.25
    dec = build_decomposition(DOM, h, seed=0, rule=default_rule(DOM, h, 40, max_order=64))
    f = pow_singular(1.5)
    ls = piecewise_projection(DOM, dec, f, 1, 2, "ls")
    pr = piecewise_projection(DOM, dec, f, 1, 2, "projector")
    assert 0 < ls <= pr
    with pytest.raises(ParameterError):
        piecewise_projection(DOM, dec, f, 1, 2, "other")
