import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from vortexflow import lattice as lat
from vortexflow.exceptions import NonZeroMean
from vortexflow.lattice import TorusGrid

from oracles import dense, loop_d0, loop_d1

sizes = st.integers(min_value=4, max_value=9)
lengths = st.floats(min_value=0.3, max_value=3.0)


@st.composite
def grid_and_seed(draw):
    return TorusGrid(draw(sizes), draw(sizes), draw(lengths), draw(lengths)), draw(st.integers(0, 2**31))


def test_grid_geometry():
    g = TorusGrid(8, 4, 2.0, 1.0)
    assert g.hx == g.hy == 0.25
    assert g.volume == 2.0 and g.cell == 0.0625
    assert g.shape == (8, 4)
    X, Y = g.mesh()
    assert X.shape == (8, 4) and X[3, 0] == 0.75 and Y[0, 3] == 0.75
    assert g.to_dict() == {"nx": 8, "ny": 4, "lx": 2.0, "ly": 1.0}


@pytest.mark.parametrize("args", [(3, 8), (8, 2), (8, 8, -1.0), (8, 8, 1.0, 0.0), (4.5, 8)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ValueError):
        TorusGrid(*args)


def test_d0_d1_match_loop_oracles(rect_grid, rng):
    g = rect_grid
    f = rng.normal(size=g.shape)
    a = rng.normal(size=(2,) + g.shape)
    np.testing.assert_allclose(lat.d0(f, g), loop_d0(f, g.hx, g.hy), atol=1e-12)
    np.testing.assert_allclose(lat.d1(a, g), loop_d1(a, g.hx, g.hy), atol=1e-12)


def test_d1_d0_is_exactly_zero_on_integer_fields():
    g = TorusGrid(16, 16)
    f = np.random.default_rng(0).integers(-1000, 1000, size=g.shape).astype(float)
    assert np.all(lat.d1(lat.d0(f, g), g) == 0.0)


@given(grid_and_seed())
def test_d1_d0_vanishes(gs):
    g, seed = gs
    f = np.random.default_rng(seed).normal(size=(2,) + g.shape)
    scale = np.abs(f).max() / (g.hx * g.hy)
    assert np.abs(lat.d1(lat.d0(f, g), g)).max() <= 1e-13 * scale


def test_codifferentials_are_matrix_adjoints(rect_grid):
    g = rect_grid
    D0 = dense(lambda f: lat.d0(f, g), g.shape)
    C0 = dense(lambda a: lat.codiff(a, g), (2,) + g.shape)
    np.testing.assert_allclose(C0, D0.T, atol=1e-12)
    D1 = dense(lambda a: lat.d1(a, g), (2,) + g.shape)
    C1 = dense(lambda p: lat.codiff2(p, g), g.shape)
    np.testing.assert_allclose(C1, D1.T, atol=1e-12)
    P = dense(lat.plaquette_to_site, g.shape)
    S = dense(lat.site_to_plaquette, g.shape)
    np.testing.assert_allclose(S, P.T, atol=1e-15)


@given(grid_and_seed())
def test_adjoint_identities(gs):
    g, seed = gs
    r = np.random.default_rng(seed)
    f, p = r.normal(size=g.shape), r.normal(size=g.shape)
    a = r.normal(size=(2,) + g.shape)
    lhs = lat.inner(lat.d0(f, g), a, g)
    rhs = lat.inner(f, lat.codiff(a, g), g)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs)) * max(1, 1 / g.hx, 1 / g.hy)
    lhs = lat.inner(lat.d1(a, g), p, g)
    rhs = lat.inner(a, lat.codiff2(p, g), g)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs)) * max(1, 1 / g.hx, 1 / g.hy)


def test_laplacian_symbol_matches_operator(rect_grid, rng):
    g = rect_grid
    f = rng.normal(size=g.shape)
    np.testing.assert_allclose(lat.spectral_apply(f, g.laplacian_symbol), lat.laplacian(f, g), atol=1e-10)
    np.testing.assert_allclose(lat.spectral_apply(f, g.average_symbol),
                               lat.plaquette_to_site(lat.site_to_plaquette(f)), atol=1e-13)


def test_laplacian_is_positive_with_constant_kernel(rect_grid, rng):
    g = rect_grid
    f = rng.normal(size=g.shape)
    assert lat.inner(f, lat.laplacian(f, g), g) > 0
    assert np.abs(lat.laplacian(np.ones(g.shape), g)).max() == 0.0
    assert np.all(g.laplacian_symbol >= 0) and g.laplacian_symbol[0, 0] == 0


def test_poisson_roundtrip_and_mean_check(rect_grid, rng):
    g = rect_grid
    phi = rng.normal(size=(3,) + g.shape)
    phi -= phi.mean(axis=(-2, -1), keepdims=True)
    back = lat.solve_poisson(lat.laplacian(phi, g), g)
    np.testing.assert_allclose(back, phi, atol=1e-10)
    with pytest.raises(NonZeroMean):
        lat.solve_poisson(np.ones(g.shape), g)


def test_plaquette_average_preserves_integral(rng):
    p = rng.normal(size=(5, 7))
    assert abs(lat.plaquette_to_site(p).sum() - p.sum()) < 1e-12
    assert abs(lat.site_to_plaquette(p).sum() - p.sum()) < 1e-12


@given(arrays(np.float64, (6, 5), elements=st.floats(-1e3, 1e3)))
def test_norm_is_scaled_euclidean(f):
    g = TorusGrid(6, 5, 2.0, 3.0)
    assert np.isclose(lat.norm(f, g), np.linalg.norm(f) * np.sqrt(g.cell), rtol=1e-12, atol=1e-300)
