import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holobesov.besov import dyadic_degrees, global_best_approx
from holobesov.continuation import (CUTOFF, band_index, band_profile, build_global, build_local,
                                    lambda_constant, level_set_constant, poly_from_continuation,
                                    shell_samples, sp_profile)
from holobesov.decomposition import quasiball
from holobesov.errors import IncompleteSequenceError, ParameterError
from holobesov.functions import pow_singular
from holobesov.geometry import ball
from holobesov.polynomials import MultiPoly
from holobesov.quadrature import lp_norm

DOM = ball(2)
Z1 = MultiPoly([[1, 0]], [1.0])


@given(t=st.floats(0, 3))
def test_cutoff_properties(t):
    v = CUTOFF(t)
    assert 0 <= v <= 1
    assert abs(CUTOFF.derivative(t)) <= 8


def test_cutoff_endpoints():
    assert CUTOFF(1.25) == 1 and CUTOFF(1.75) == 0
    h = 1e-6
    t = 1.4
    assert CUTOFF.derivative(t) == pytest.approx((CUTOFF(t + h) - CUTOFF(t - h)) / (2 * h), rel=1e-6)


def test_band_index():
    for m in (1, 2, 5):
        assert band_index(3 * 2.0 ** (-m - 1)) == m


def test_global_polynomial_field():
    F = build_global(DOM, {m: Z1 for m in range(8)}, 6)
    prof = sp_profile(F, 2, [0.01, 0.1, 0.2])
    assert np.all(prof.values == 0)
    z = shell_samples(DOM, 200, np.random.default_rng(0), 0.3, 0.45)
    assert np.max(F.dbar_size(z)) > 0  # the outer cutoff near rho = eps
    outside = 1.6 * np.array([[0.6, 0.8]])
    assert F.value(outside)[0] == 0
    with pytest.raises(IncompleteSequenceError):
        build_global(DOM, {1: Z1, 2: Z1}, 6)
    with pytest.raises(ParameterError):
        sp_profile(F, 2, [0.6])


def test_global_dbar_matches_finite_differences():
    seq = global_best_approx(DOM, pow_singular(1.5), dyadic_degrees(6))
    F = build_global(DOM, dict(enumerate(seq.polys)), 6)
    z = np.array([[0.3 + 0.8j, 0.4 - 0.3j]])
    z = z / np.linalg.norm(z) * np.sqrt(1.05)
    h = 1e-6
    got = F.dbar(z)[0]
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1
        dx = (F.value(z + h * e) - F.value(z - h * e)) / (2 * h)
        dy = (F.value(z + 1j * h * e) - F.value(z - 1j * h * e)) / (2 * h)
        assert got[j] == pytest.approx(0.5 * (dx + 1j * dy)[0], abs=1e-5)


@pytest.fixture(scope="module")
def singular_field():
    f = pow_singular(1.5)
    seq = global_best_approx(DOM, f, dyadic_degrees(6))
    return f, seq, build_global(DOM, dict(enumerate(seq.polys)), 6)


def test_lambda_and_band_ratios(singular_field):
    _, seq, F = singular_field
    assert lambda_constant(F, size=3000) <= 100
    rows = band_profile(F, dict(enumerate(seq.values)), per_band=2)
    assert rows
    assert max(S / ref for _, S, _, ref in rows) <= 100


def test_poly_from_continuation_global(singular_field):
    f, _, F = singular_field
    z0 = np.array([0.0, 1.0 + 0j])
    h = 0.05
    out = poly_from_continuation(F, z0, h, 2)
    b1, b2 = out.budget
    assert b1 >= 0 and b2 >= 0 and np.isfinite(b1 + b2)
    J = quasiball(DOM, z0, h, nz=8, nx=8).rule
    err = lp_norm(f(J.nodes) - out.poly(J.nodes), J.weights, 1) / J.sigma
    assert err <= 10 * (b1 + b2)
    with pytest.raises(ParameterError):
        poly_from_continuation(F, z0, 0.2, 2)


def test_poly_from_continuation_polynomial_input():
    F = build_global(DOM, {m: Z1 for m in range(8)}, 6)
    z0 = np.array([0.6, 0.8j])
    h = 0.05
    out = poly_from_continuation(F, z0, h, 2)
    J = quasiball(DOM, z0, h / 2, nz=8, nx=8).rule.nodes
    assert np.max(np.abs(Z1(J) - out.poly(J))) <= 1e-4


def test_local_field_partition_and_polynomial_input():
    f = lambda z: z[..., 0] + 2 * z[..., 1]  # noqa: E731
    F = build_local(DOM, f, 1, 3)
    z = shell_samples(DOM, 300, np.random.default_rng(1), 2.0 ** -4, 0.3)
    assert np.max(np.abs(F.whitney.partition_sum(z) - 1)) <= 1e-10
    assert np.max(F.dbar_size(z[DOM.rho(z) < 0.25])) <= 1e-6


def test_level_set_constant_small():
    for q in (2, np.inf):
        assert level_set_constant(2, 4, q, trials=4) <= 10
