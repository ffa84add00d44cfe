import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vbflow.spectral import (
    Grid,
    SpectralError,
    SpectralField,
    VectorField,
    dealias,
    divergence,
    gradient,
    h1_norm,
    inner_product,
    laplacian,
    leray_project,
    norm,
    transform_forward,
    truncate,
    vector_inner_product,
)

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    return transform_forward(rng.standard_normal((grid.N, grid.N)), grid)


def random_vector(grid, seed):
    rng = np.random.default_rng(seed)
    return VectorField.from_physical(rng.standard_normal((grid.N, grid.N)), rng.standard_normal((grid.N, grid.N)), grid)


def mode(grid, kx, ky, kind=np.cos):
    X, Y = grid.coords
    return transform_forward(kind(kx * X + ky * Y), grid)


# ---------------------------------------------------------------- grid


@pytest.mark.parametrize("N", [6, 7, 9, 0])
def test_grid_rejects_bad_sizes(N):
    with pytest.raises(SpectralError):
        Grid(N)


def test_grid_rejects_bad_length():
    with pytest.raises(SpectralError, match="box_length"):
        Grid(8, -1.0)


def test_grid_coordinates():
    g = Grid(8, 4.0)
    X, Y = g.coords
    assert g.dimension == 2
    assert X[3, 0] == pytest.approx(3 * 4.0 / 8)
    assert Y[0, 5] == pytest.approx(5 * 4.0 / 8)


# ---------------------------------------------------------------- transforms


def test_constant_field_has_only_mean_mode():
    g = Grid(16)
    f = transform_forward(np.full((16, 16), 2.5), g)
    assert f.coeffs[0, 0] == pytest.approx(2.5)
    c = f.coeffs.copy()
    c[0, 0] = 0
    assert np.max(np.abs(c)) < 1e-15


def test_sin_x_has_two_modes():
    g = Grid(16)
    f = mode(g, 1, 0, np.sin)
    nz = np.argwhere(np.abs(f.coeffs) > 1e-14)
    assert sorted(map(tuple, nz)) == [(1, 0), (15, 0)]
    assert f.coeffs[1, 0] == pytest.approx(-0.5j)


def test_non_finite_input_rejected():
    g = Grid(8)
    a = np.zeros((8, 8))
    a[2, 3] = np.nan
    with pytest.raises(SpectralError, match=r"\(2, 3\)"):
        transform_forward(a, g)


def test_wrong_shape_rejected():
    with pytest.raises(SpectralError, match="shape"):
        transform_forward(np.zeros((8, 9)), Grid(8))


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_round_trip_and_parseval(seed):
    g = Grid(16)
    vals = np.random.default_rng(seed).standard_normal((16, 16))
    f = transform_forward(vals, g)
    assert np.max(np.abs(f.values - vals)) <= 1e-12 * np.max(np.abs(vals))
    lhs = np.sum(vals**2) / 16**2
    rhs = np.sum(np.abs(f.coeffs) ** 2)
    assert abs(lhs - rhs) <= 1e-12 * lhs


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_hermitian_symmetry(seed):
    g = Grid(12)
    c = random_field(g, seed).coeffs
    flipped = np.conj(np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1)))
    assert np.max(np.abs(c - flipped)) <= 1e-14


def test_fields_are_immutable():
    f = random_field(Grid(8), 0)
    with pytest.raises(ValueError):
        f.coeffs[0, 0] = 1.0


# ---------------------------------------------------------------- calculus


def test_gradient_of_constant_is_zero():
    g = Grid(8)
    d = gradient(SpectralField.constant(g, 3.0))
    assert np.max(np.abs(d.x.values)) == 0 and np.max(np.abs(d.y.values)) == 0


def test_gradient_of_sin_x():
    g = Grid(16)
    X, _ = g.coords
    d = gradient(mode(g, 1, 0, np.sin))
    assert np.allclose(d.x.values, np.cos(X), atol=1e-13)
    assert np.allclose(d.y.values, 0.0, atol=1e-13)


def test_gradient_of_product_mode():
    g = Grid(16)
    X, Y = g.coords
    f = transform_forward(np.sin(2 * X) * np.cos(3 * Y), g)
    d = gradient(f)
    assert np.allclose(d.x.values, 2 * np.cos(2 * X) * np.cos(3 * Y), atol=1e-12)
    assert np.allclose(d.y.values, -3 * np.sin(2 * X) * np.sin(3 * Y), atol=1e-12)


def test_gradient_respects_box_length():
    g = Grid(16, L=4.0)
    X, _ = g.coords
    k = 2 * np.pi / 4.0
    d = gradient(transform_forward(np.sin(k * X), g))
    assert np.allclose(d.x.values, k * np.cos(k * X), atol=1e-12)


def test_laplacian_examples():
    g = Grid(16)
    X, Y = g.coords
    assert np.max(np.abs(laplacian(SpectralField.constant(g, 1.0)).values)) == 0
    assert np.allclose(laplacian(mode(g, 1, 0, np.sin)).values, -np.sin(X), atol=1e-13)
    f = transform_forward(np.sin(2 * X) * np.cos(3 * Y), g)
    assert np.allclose(laplacian(f).values, -13 * f.values, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=seeds, m=st.integers(0, 7))
def test_derivatives_commute_with_truncation(seed, m):
    g = Grid(16)
    f = random_field(g, seed)
    a = gradient(truncate(f, m))
    b = gradient(f)
    assert np.max(np.abs(a.x.coeffs - truncate(b.x, m).coeffs)) <= 1e-14
    assert np.max(np.abs(laplacian(truncate(f, m)).coeffs - truncate(laplacian(f), m).coeffs)) <= 1e-12


# ---------------------------------------------------------------- Leray


def test_leray_annihilates_gradients():
    g = Grid(16)
    X, Y = g.coords
    u = VectorField.from_physical(np.cos(X + Y), np.cos(X + Y), g)
    assert np.max(np.abs(leray_project(u).x.values)) < 1e-14


def test_leray_keeps_shear_flow():
    g = Grid(16)
    _, Y = g.coords
    u = VectorField.from_physical(np.sin(Y), np.zeros_like(Y), g)
    p = leray_project(u)
    assert np.max(np.abs(p.x.coeffs - u.x.coeffs)) < 1e-15


@settings(max_examples=20, deadline=None)
@given(seed=seeds, s2=seeds)
def test_leray_is_a_solenoidal_orthogonal_projection(seed, s2):
    g = Grid(16)
    u, w = random_vector(g, seed), random_vector(g, s2)
    p = leray_project(u)
    pp = leray_project(p)
    assert np.max(np.abs(pp.x.coeffs - p.x.coeffs)) <= 1e-12
    assert p.max_divergence() <= 1e-10 * u.max_gradient()
    assert p.is_solenoidal()
    lhs = vector_inner_product(leray_project(u), w)
    rhs = vector_inner_product(u, leray_project(w))
    assert abs(lhs - rhs) <= 1e-10 * (norm(u) * norm(w))


# ---------------------------------------------------------------- truncation and dealiasing


def test_truncate_examples():
    g = Grid(16)
    c = np.zeros((16, 16), complex)
    c[1, 0] = c[-1, 0] = 0.5
    f1 = SpectralField(g, c)
    assert np.array_equal(truncate(f1, 4).coeffs, f1.coeffs)
    assert np.max(np.abs(truncate(mode(g, 5, 0), 4).coeffs)) < 1e-15


def test_truncate_rejects_large_cutoff():
    with pytest.raises(SpectralError, match="too large"):
        truncate(SpectralField.zeros(Grid(16)), 8)


@settings(max_examples=25, deadline=None)
@given(seed=seeds, m=st.integers(0, 7))
def test_truncate_is_norm_nonincreasing_projection(seed, m):
    g = Grid(16)
    f = random_field(g, seed)
    t = truncate(f, m)
    assert np.array_equal(truncate(t, m).coeffs, t.coeffs)
    assert norm(t) <= norm(f) * (1 + 1e-14)
    assert h1_norm(t) <= h1_norm(f) * (1 + 1e-14)


def test_dealias_examples():
    g = Grid(12)
    assert np.max(np.abs(dealias(mode(g, 5, 0)).coeffs)) < 1e-15
    c = np.zeros((12, 12), complex)
    c[3, 3] = c[-3, -3] = 0.5
    kept = SpectralField(g, c)
    assert np.array_equal(dealias(kept).coeffs, kept.coeffs)
    f = random_field(g, 3)
    assert np.array_equal(dealias(dealias(f)).coeffs, dealias(f).coeffs)


# ---------------------------------------------------------------- inner product


def test_inner_product_examples():
    g = Grid(16)
    s, c = mode(g, 1, 0, np.sin), mode(g, 1, 0, np.cos)
    one = SpectralField.constant(g, 1.0)
    assert inner_product(s, s) == pytest.approx(2 * np.pi**2, rel=1e-14)
    assert abs(inner_product(s, c)) < 1e-14
    assert inner_product(one, one) == pytest.approx((2 * np.pi) ** 2, rel=1e-14)


def test_inner_product_grid_mismatch():
    with pytest.raises(SpectralError, match="mismatch"):
        inner_product(SpectralField.zeros(Grid(8)), SpectralField.zeros(Grid(10)))


@settings(max_examples=20, deadline=None)
@given(seed=seeds, s2=seeds)
def test_inner_product_matches_quadrature(seed, s2):
    g = Grid(16)
    f, h = random_field(g, seed), random_field(g, s2)
    quad = g.quadrature(f.values * h.values)
    assert abs(inner_product(f, h) - quad) <= 1e-12 * max(1.0, abs(quad), norm(f) * norm(h))
    assert inner_product(f, h) == pytest.approx(inner_product(h, f), rel=1e-14, abs=1e-14)


def test_divergence_of_curl_is_zero():
    g = Grid(16)
    psi = random_field(g, 5)
    d = gradient(psi)
    v = VectorField((d.y, -d.x))
    assert np.max(np.abs(divergence(v).values)) < 1e-12
