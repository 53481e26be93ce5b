import numpy as np
import pytest
from hypothesis import given, strategies as st

from vortexflow import fields as fl
from vortexflow import lattice as lat
from vortexflow.lattice import TorusGrid

from conftest import random_pair, random_tangent
from oracles import flux_integral, loop_covariant_d, loop_moment, richardson_derivative

seeds = st.integers(0, 2**31)


def test_spec_normalisation():
    spec = fl.ActionSpec([[1, 2]], 3.0, 1)
    assert spec.k == 1 and spec.n == 2
    assert spec.tau.shape == (1,) and spec.degrees.dtype.kind == "i"
    assert spec.min_positive_weight() == 1.0
    assert spec.to_dict() == {"k": 1, "weights": [[1, 2]], "tau": [3.0], "degrees": [1]}


@pytest.mark.parametrize("weights,degrees", [([[0.5]], [0]), ([[1]], [0.3])])
def test_spec_rejects_non_integral(weights, degrees):
    with pytest.raises(ValueError):
        fl.ActionSpec(weights, [1.0], degrees)


def test_properness():
    assert fl.ActionSpec([[1, 1]], [1.0]).is_proper()
    assert not fl.ActionSpec([[1, -1]], [1.0]).is_proper()
    assert fl.ActionSpec([[-1]], [1.0]).is_proper()
    assert not fl.ActionSpec([[1, 0]], [1.0]).is_proper()
    assert fl.ActionSpec([[1, 0], [0, 1]], [1.0, 3.0]).is_proper()
    assert not fl.ActionSpec([[1, 0, -1], [0, 1, -1]], [1.0, 1.0]).is_proper()
    with pytest.raises(ValueError):
        fl.ActionSpec([[1, -1]], [1.0], proper=True)


def test_shape_checks(grid16, u1_spec):
    with pytest.raises(ValueError):
        fl.Connection(grid16, u1_spec, np.zeros((2, 2, 16, 16)))
    with pytest.raises(ValueError):
        fl.Section(grid16, u1_spec, np.zeros((1, 8, 16)))
    with pytest.raises(ValueError):
        fl.ComplexGauge(np.zeros((1, 4, 4)), np.zeros((1, 4, 5)))


@pytest.mark.parametrize("degrees", [[1, 0], [2, -1], [0, 0]])
def test_covariant_d_and_moment_match_loops(degrees, rng):
    g = TorusGrid(6, 5, 1.2, 0.9)
    spec = fl.ActionSpec([[1, 1], [0, 2]], [3.0, 1.0], degrees)
    A, u = random_pair(g, spec, rng)
    ref = loop_covariant_d(A.total, u.u, spec.weights, spec.seam_phase(g), g.hx, g.hy)
    np.testing.assert_allclose(fl.covariant_d(A, u), ref, atol=1e-12)
    np.testing.assert_allclose(fl.moment(u), loop_moment(u.u, spec.weights, spec.tau), atol=1e-12)


@given(seeds, st.integers(-3, 3))
def test_flux_is_quantised(seed, d):
    g = TorusGrid(8, 6, 1.7, 0.6)
    spec = fl.ActionSpec([[1]], [1.0], [d])
    A, _ = random_pair(g, spec, np.random.default_rng(seed))
    assert abs(flux_integral(fl.curvature(A), g.cell)[0] - 2 * np.pi * d) < 1e-10
    assert abs(flux_integral(fl.star_curvature(A), g.cell)[0] - 2 * np.pi * d) < 1e-10


def test_background_connection_has_constant_curvature(rect_grid):
    spec = fl.ActionSpec([[1]], [1.0], [2])
    F = fl.curvature(fl.Connection(rect_grid, spec))
    np.testing.assert_allclose(F, 2 * np.pi * 2 / rect_grid.volume, rtol=1e-12)


@given(seeds)
def test_unitary_gauge_invariance(seed):
    r = np.random.default_rng(seed)
    g = TorusGrid(7, 6, 1.0, 1.4)
    spec = fl.ActionSpec([[1, 2], [1, 0]], [2.0, 1.0], [1, 1])
    A, u = random_pair(g, spec, r)
    theta = r.normal(size=(spec.k,) + g.shape)
    B, v = fl.apply_unitary_gauge(theta, A, u)
    np.testing.assert_allclose(fl.curvature(B), fl.curvature(A), atol=1e-10)
    np.testing.assert_allclose(np.abs(v.u), np.abs(u.u), atol=1e-12)
    np.testing.assert_allclose(np.abs(fl.covariant_d(B, v)), np.abs(fl.covariant_d(A, u)), atol=1e-9)
    np.testing.assert_allclose(fl.moment_residual(B, v), fl.moment_residual(A, u), atol=1e-10)


@given(seeds)
def test_complex_gauge_is_a_group_action(seed):
    r = np.random.default_rng(seed)
    g = TorusGrid(6, 6)
    spec = fl.ActionSpec([[1, -1]], [1.0], [1])
    A, u = random_pair(g, spec, r)
    g1 = fl.ComplexGauge(0.3 * r.normal(size=(1, 6, 6)), r.normal(size=(1, 6, 6)))
    g2 = fl.ComplexGauge(0.3 * r.normal(size=(1, 6, 6)), r.normal(size=(1, 6, 6)))
    B1, v1 = fl.apply_complex_gauge(g1, *fl.apply_complex_gauge(g2, A, u))
    B2, v2 = fl.apply_complex_gauge(g1 @ g2, A, u)
    np.testing.assert_allclose(B1.a, B2.a, atol=1e-12)
    np.testing.assert_allclose(v1.u, v2.u, rtol=1e-12)
    B3, v3 = fl.apply_complex_gauge(g1.inverse(), *fl.apply_complex_gauge(g1, A, u))
    np.testing.assert_allclose(B3.a, A.a, atol=1e-12)
    np.testing.assert_allclose(v3.u, u.u, rtol=1e-12)
    ident = fl.ComplexGauge.identity(g, 1)
    B4, v4 = fl.apply_complex_gauge(ident, A, u)
    assert np.array_equal(B4.a, A.a) and np.array_equal(v4.u, u.u)


def test_infinitesimal_actions_are_derivatives_of_the_group_action(grid16, t2_spec, rng):
    A, u = random_pair(grid16, t2_spec, rng)
    xi = rng.normal(size=(2,) + grid16.shape)
    real = fl.infinitesimal_action(A, u, xi)
    cplx = fl.complex_infinitesimal_action(A, u, xi)

    def curve(kind, t, part):
        gauge = fl.ComplexGauge(np.zeros_like(xi), t * xi) if kind == "real" else fl.ComplexGauge(t * xi)
        B, v = fl.apply_complex_gauge(gauge, A, u)
        return B.a if part == 0 else v.u

    for kind, tangent in (("real", real), ("complex", cplx)):
        for part in (0, 1):
            fd = richardson_derivative(lambda t: curve(kind, t, part))
            np.testing.assert_allclose(fd, tangent[part], atol=1e-7 * (1 + np.abs(tangent[part]).max()))
    # J L xi: the complex generator is i times the real one on the section
    np.testing.assert_allclose(cplx[1], 1j * real[1], atol=1e-14)


def test_operator_adjoints(grid16, t2_spec, rng):
    g = grid16
    A, u = random_pair(g, t2_spec, rng)
    v = random_tangent(g, t2_spec, rng)
    w = rng.normal(size=(2, 2) + g.shape) + 1j * rng.normal(size=(2, 2) + g.shape)
    lhs = lat.inner(fl.covariant_d(A, u.with_values(v[1])), w, g)
    rhs = lat.inner(v[1], fl.covariant_d_adjoint(A, u, w), g)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)
    xi = rng.normal(size=(2,) + g.shape)
    La = fl.infinitesimal_action(A, u, xi)
    lhs = lat.inner(La[0], v[0], g) + lat.inner(La[1], v[1], g)
    rhs = lat.inner(xi, fl.infinitesimal_action_adjoint(A, u, v), g)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_moment_map_identity(grid16, t2_spec, rng):
    # d<Phi, xi>(v) = omega(L xi, v) for every xi and tangent v
    A, u = random_pair(grid16, t2_spec, rng)
    xi = rng.normal(size=(2,) + grid16.shape)
    v = random_tangent(grid16, t2_spec, rng)

    def pair_value(t):
        B = A.with_links(A.a + t * v[0])
        w = u.with_values(u.u + t * v[1])
        return lat.inner(fl.moment_residual(B, w), xi, grid16)

    fd = richardson_derivative(pair_value)
    an = fl.omega_pairing(A, u, xi, v)
    assert abs(fd - an) <= 1e-9 * abs(an)


def test_centered_difference_is_average_of_one_sided(grid16, u1_spec, rng):
    A, u = random_pair(grid16, u1_spec, rng)
    fwd = fl.covariant_d(A, u)
    # backward difference = conj-transported forward difference of the left neighbour
    dc = fl.centered_covariant_d(A, u)
    assert dc.shape == fwd.shape
    # on a constant section with trivial bundle and zero links both vanish
    spec0 = fl.ActionSpec([[1]], [1.0], [0])
    c = fl.Section(grid16, spec0, np.full((1, 16, 16), 2 + 1j))
    assert np.abs(fl.centered_covariant_d(fl.Connection(grid16, spec0), c)).max() < 1e-13


@pytest.mark.parametrize("degree", [1, 2])
def test_theta_section_is_holomorphic_to_second_order(degree):
    res = []
    for n in (16, 32, 64):
        g = TorusGrid(n, n)
        spec = fl.ActionSpec([[1]], [1.0], [degree])
        u = fl.theta_section(g, spec, coeffs=[np.ones(degree)])
        A = fl.Connection(g, spec)
        res.append(lat.norm(fl.dbar_residual(A, u), g) / lat.norm(fl.centered_covariant_d(A, u), g))
    assert res[0] / res[1] > 3.5 and res[1] / res[2] > 3.5


def test_theta_section_zero_count():
    # a degree-2 section has 2 zeros: winding of the phase around the boundary
    g = TorusGrid(64, 64)
    spec = fl.ActionSpec([[1]], [1.0], [2])
    u = fl.theta_section(g, spec, coeffs=[[1.0, 0.4 + 0.2j]]).u[0]
    A = fl.Connection(g, spec)
    U = fl._link_phases(A)[0]
    # gauge-covariant winding: sum the arguments of transported neighbour ratios per plaquette
    nxt_x = fl._shift(u[None], spec.seam_phase(g), 1, -2)[0] * U[0]
    nxt_y = fl._shift(u[None], spec.seam_phase(g), 1, -1)[0] * U[1]
    phase_x = np.angle(nxt_x / u)
    phase_y = np.angle(nxt_y / u)
    total = np.sum(phase_x) + np.sum(phase_y)
    flux = flux_integral(fl.curvature(A), g.cell)[0]
    # sum over all links of covariant phase jumps telescopes to zero; winding = flux / 2 pi
    assert abs(total) < 1e-6
    assert round(flux / (2 * np.pi)) == 2


def test_negative_degree_gives_zero_section(grid16):
    spec = fl.ActionSpec([[1, -1]], [1.0], [1])
    u = fl.theta_section(grid16, spec, rng=np.random.default_rng(0))
    assert np.all(u.u[1] == 0) and np.abs(u.u[0]).max() > 0


def test_holomorphic_pair_is_deterministic(grid16, u1_spec):
    A1, u1 = fl.holomorphic_pair(grid16, u1_spec, np.random.default_rng(7))
    A2, u2 = fl.holomorphic_pair(grid16, u1_spec, np.random.default_rng(7))
    assert np.array_equal(A1.a, A2.a) and np.array_equal(u1.u, u2.u)


def test_smooth_random_field_rms(grid16, rng):
    f = fl.smooth_random_field(grid16, (3,), rng, modes=2, amplitude=0.7)
    assert f.shape == (3, 16, 16)
    np.testing.assert_allclose(np.sqrt(np.mean(f**2, axis=(-2, -1))), 0.7, rtol=1e-12)
