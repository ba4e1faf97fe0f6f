import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holobesov.decomposition import build_decomposition, certify, quasiball
from holobesov.errors import DegeneratePointError, ParameterError, ProjectionError
from holobesov.geometry import (ball, comparison_check, ellipsoid, flow_to_level, normal_vector,
                                project_boundary, projection_jacobian, quasiball_measure_ball,
                                random_sphere_points, sphere_area, tangent_frame, unit_normal)

E1 = np.array([1, 0], dtype=complex)
E2 = np.array([0, 1], dtype=complex)


def test_defining_functions():
    b = ball(2)
    assert b.rho(np.array([0.6, 0.8j])) == pytest.approx(0.0, abs=1e-15)
    assert b.rho(np.zeros(2)) == -1.0
    e = ellipsoid((1.0, 4.0))
    assert e.rho(np.array([0, 0.5])) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("eps", [0.9, 0.0, -0.1])
def test_invalid_shell_width(eps):
    with pytest.raises(ParameterError):
        ball(2, eps)


def test_normal_vector_oracles():
    assert np.allclose(normal_vector(ball(2), E1), [1, 0])
    # d rho / d zbar_j = z_j for the ball, so the normal at (0, i) is (0, i)
    assert np.allclose(normal_vector(ball(2), np.array([0, 1j])), [0, 1j])
    assert np.allclose(normal_vector(ellipsoid((1.0, 4.0)), E1), [1, 0])
    with pytest.raises(DegeneratePointError):
        unit_normal(ball(2), np.zeros(2))


def test_project_boundary_oracles():
    b = ball(2)
    assert np.allclose(project_boundary(b, 1.1 * E1), E1)
    z = np.array([0.6 + 0.6j, 0.6])
    z = z * 1.1 / np.linalg.norm(z)
    assert np.allclose(project_boundary(b, z), z / np.linalg.norm(z))
    assert np.allclose(project_boundary(ellipsoid((1.0, 4.0)), 1.05 * E1), E1)
    with pytest.raises(ProjectionError):
        project_boundary(b, np.zeros(2))


@given(seed=st.integers(0, 10_000), t=st.floats(-0.2, 0.2))
@settings(max_examples=30, deadline=None)
def test_flow_and_projection_are_inverse(seed, t):
    dom = ellipsoid((1.0, 2.5), 0.25)
    rng = np.random.default_rng(seed)
    b = random_sphere_points(dom, 5, rng)
    z = flow_to_level(dom, b, t)
    assert np.allclose(dom.rho(z), t, atol=1e-12)
    assert np.allclose(project_boundary(dom, z), b, atol=1e-10)


def test_projection_jacobian_matches_finite_differences():
    dom = ellipsoid((1.0, 3.0), 0.25)
    z = np.array([0.7 + 0.2j, 0.35 - 0.1j])
    psi, dz, dzb = projection_jacobian(dom, z)
    h = 1e-6
    for l in range(2):
        e = np.zeros(2, dtype=complex)
        e[l] = 1
        dx = (project_boundary(dom, z + h * e) - project_boundary(dom, z - h * e)) / (2 * h)
        dy = (project_boundary(dom, z + 1j * h * e) - project_boundary(dom, z - 1j * h * e)) / (2 * h)
        assert np.allclose(dz[:, l], 0.5 * (dx - 1j * dy), atol=1e-6)
        assert np.allclose(dzb[:, l], 0.5 * (dx + 1j * dy), atol=1e-6)


def test_quasimetric_oracles():
    b = ball(2)
    assert b.quasimetric(E1, E1) == 0
    assert b.quasimetric(E1, -E1) == pytest.approx(2.0)
    assert b.quasimetric(E1, E2) == pytest.approx(1.0)


def test_leray_identity():
    dom = ellipsoid((1.0, 2.0, 3.0), 0.2)
    rng = np.random.default_rng(3)
    xi = random_sphere_points(dom, 20, rng)
    z = 0.5 * random_sphere_points(dom, 20, rng)
    v = dom.leray_v(xi, z)
    w = dom.leray_w(xi)
    assert np.allclose(v, np.sum(w * (xi - z), axis=-1))
    assert np.allclose(w, dom.d_rho(xi))


def test_comparison_oracles():
    b = ball(2)
    r, inv = comparison_check(b, 1.1 * E1, E1)
    # v = 1.21 - 1.1 and rho = 0.21 with d(Psi(xi), z) = 0
    assert r == pytest.approx(0.11 / 0.21)
    assert inv == pytest.approx(0.21 / 0.11)
    r, _ = comparison_check(b, E2, E1)
    assert r == pytest.approx(1.0)


def test_tangent_frame_lift_round_trip():
    dom = ellipsoid((1.0, 2.0), 0.25)
    rng = np.random.default_rng(1)
    xi = random_sphere_points(dom, 1, rng)[0]
    fr = tangent_frame(dom, xi)
    assert np.allclose(fr.nu, unit_normal(dom, xi))
    g = rng.standard_normal((10, 2)) + 1j * rng.standard_normal((10, 2))
    z = project_boundary(dom, xi + 0.05 * g)
    zp, x = fr.pr(z)
    back = fr.lift(zp, x)
    assert np.max(np.abs(back - z)) <= 1e-10


def test_sphere_area_and_lens_measure():
    assert sphere_area(2) == pytest.approx(2 * np.pi ** 2)
    assert sphere_area(1) == pytest.approx(2 * np.pi)
    assert quasiball_measure_ball(2, 2.0) == pytest.approx(2 * np.pi ** 2)
    with pytest.raises(ParameterError):
        quasiball_measure_ball(3, 0.1)


def test_quasiball_measure_matches_closed_form():
    b = ball(2)
    # the rule truncates a tensor Gauss rule at the ball indicator, which
    # limits its accuracy to a few percent
    for delta in (0.25, 0.0625, 0.01):
        K = quasiball(b, E1, delta, nz=16, nx=16)
        assert K.sigma == pytest.approx(quasiball_measure_ball(2, delta), rel=3e-2)


def test_decomposition_oracles():
    b = ball(2)
    whole = build_decomposition(b, 4.0)
    assert len(whole) == 1
    d1 = build_decomposition(b, 0.25, seed=1)
    sigma = sphere_area(2)
    assert sigma / (100 * 0.25 ** 2) <= len(d1) <= 100 * sigma / 0.25 ** 2
    d2 = build_decomposition(b, 0.25, seed=2)
    assert not np.array_equal(d1.centers, d2.centers)
    for d in (d1, d2):
        assert certify(d.cells, 0.25)["certified"]
        assert np.bincount(d.labels).sum() == len(d.rule)


def test_quasi_triangle_sampled():
    b = ball(2)
    rng = np.random.default_rng(0)
    z, xi, w = (random_sphere_points(b, 5000, rng) for _ in range(3))
    lhs = b.quasimetric(z, w)
    rhs = b.quasimetric(z, xi) + b.quasimetric(xi, w)
    assert np.all(lhs <= 2.0 * rhs + 1e-12)
