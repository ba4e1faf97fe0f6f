import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holobesov.errors import OrderTooSmallError, ParameterError, SingularKernelError
from holobesov.geometry import ball, ellipsoid
from holobesov.kernels import (adapted_rule, closed_form_density, delta_chain_constant,
                               global_approximant, global_bound_constants, kernel, kernel_context,
                               local_approximant, local_error_slope, reproduce, richardson_weights,
                               taylor_coefficients)
from holobesov.quadrature import boundary_rule

E1 = np.array([1, 0], dtype=complex)


@pytest.fixture(scope="module")
def ctx():
    return kernel_context(ball(2))


def test_kernel_oracles(ctx):
    assert kernel(ctx, E1, np.zeros(2)) == pytest.approx(1.0)
    assert kernel(ctx, E1, 0.5 * E1) == pytest.approx(4.0)
    with pytest.raises(SingularKernelError):
        kernel(ctx, E1, E1)


@pytest.mark.parametrize("dom", [ball(2), ball(3), ellipsoid((1.0, 2.0), 0.25)])
def test_density_matches_closed_form(dom):
    c = kernel_context(dom)
    r = boundary_rule(dom, 0.0, 6)
    assert np.allclose(c.density(r.nodes[:50]), closed_form_density(dom, r.nodes[:50]), rtol=1e-9)


def test_reproduce_oracles(ctx):
    one = lambda z: np.ones(len(z), dtype=complex)  # noqa: E731
    assert reproduce(ctx, one, np.zeros(2)) == pytest.approx(1.0, abs=1e-6)
    z = np.array([0.3, 0.4j])
    assert reproduce(ctx, lambda x: x[:, 0] ** 2, z) == pytest.approx(0.09, abs=1e-6)
    assert abs(reproduce(ctx, lambda x: np.conj(x[:, 0]), np.zeros(2))) <= 1e-10


@given(a=st.integers(0, 4), b=st.integers(0, 4), seed=st.integers(0, 1000))
@settings(max_examples=15, deadline=None)
def test_reproduce_monomials_ellipsoid(a, b, seed):
    dom = ellipsoid((1.0, 2.0), 0.25)
    c = kernel_context(dom)
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) * 0.2
    f = lambda x: x[:, 0] ** a * x[:, 1] ** b  # noqa: E731
    exact = z[0] ** a * z[1] ** b
    assert abs(reproduce(c, f, z, adapted_rule(c, z)) - exact) <= 1e-6


def test_local_approximant_oracles(ctx):
    z0 = E1
    la0 = local_approximant(ctx, z0, 0, 0.1)
    xi = np.array([[0.0, 1.1]])
    assert np.allclose(la0(xi, z0), ctx.dom.leray_v(xi, z0) ** -2)
    assert taylor_coefficients(2, 1)[1] == -2
    la = local_approximant(ctx, z0, 3, 0.1)
    assert np.allclose(la(xi, z0), kernel(ctx, xi, z0))
    with pytest.raises(ParameterError):
        local_approximant(ctx, z0, 1, 0.2)


def test_local_error_law(ctx):
    for m in (1, 2):
        assert local_error_slope(ctx, m, size=200) >= (m + 1) / 2 - 0.2


def test_delta_chain(ctx):
    assert delta_chain_constant(ctx, size=1000) <= 100


def test_global_surrogate(ctx):
    lam = richardson_weights(2)
    assert np.allclose(lam, [2, -1])
    ga = global_approximant(ctx, 8)
    assert ga.A(0) == pytest.approx(1.0, abs=1e-6)
    c1, c2 = global_bound_constants(ctx, ga, size=5000)
    assert c1 <= 1e3 and c2 <= 1e3
    with pytest.raises(OrderTooSmallError):
        global_approximant(ctx, 2)
    with pytest.raises(ParameterError):
        global_approximant(kernel_context(ellipsoid((1.0, 2.0))), 8)
