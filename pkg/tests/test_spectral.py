import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mslab.spectral import (
    GridError,
    SpectralField,
    apply_multiplier,
    band_limited_random,
    derivative_symbols,
    divergence,
    gradient,
    laplacian,
    make_grid,
    parseval_sums,
    poisson_extend,
)


def test_grid_wavenumbers_integer_on_2pi():
    g = make_grid(1, 2 * np.pi, 8)
    assert np.allclose(g.wavenumbers, [0, 1, 2, 3, -4, -3, -2, -1], atol=1e-14)
    assert np.count_nonzero(g.wavenumbers == 0) == 1


def test_grid_2d_shape_and_range():
    g = make_grid(2, 2 * np.pi, 16)
    assert g.shape == (16, 16)
    j = np.rint(g.wavenumbers).astype(int)
    assert j.min() == -8 and j.max() == 7


def test_kmin_arithmetic():
    g = make_grid(1, 100.0, 4096)
    assert g.k_min == pytest.approx(2 * np.pi / 100)
    assert g.dx * g.n == 100.0


@pytest.mark.parametrize("n", [1000, 6, 4, 0, 12])
def test_reject_bad_n(n):
    with pytest.raises(GridError, match="power of two"):
        make_grid(1, 1.0, n)


@pytest.mark.parametrize("L", [0.0, -1.0])
def test_reject_bad_length(L):
    with pytest.raises(GridError):
        make_grid(1, L, 16)


def test_reject_bad_dim():
    with pytest.raises(GridError):
        make_grid(3, 1.0, 16)


def test_round_trip_and_realness():
    rng = np.random.default_rng(1)
    for dim in (1, 2):
        g = make_grid(dim, 3.0, 32)
        v = rng.standard_normal(g.shape)
        f = SpectralField(g, values=v)
        back = g.inverse(f.coefficients)
        assert np.max(np.abs(back - v)) / np.max(np.abs(v)) <= 1e-12
        full = f.full_coefficients()
        flipped = np.conj(np.roll(np.flip(full, axis=tuple(range(dim))), 1, axis=tuple(range(dim))))
        assert np.max(np.abs(full - flipped)) <= 1e-12


def test_abs_grad_on_cosine():
    g = make_grid(1, 2 * np.pi, 64)
    f = SpectralField.from_function(g, lambda x: np.cos(5 * x))
    out = apply_multiplier(f, 1.0).values
    assert np.max(np.abs(out - 5 * np.cos(5 * g.coordinates[0]))) <= 5e-12


def test_multiplier_kills_constant():
    g = make_grid(2, 1.0, 16)
    one = SpectralField(g, values=np.ones(g.shape))
    assert np.all(np.abs(apply_multiplier(one, 0.5).values) <= 1e-15)
    assert np.allclose(apply_multiplier(one, 0.0).values, 1.0)


def test_multiplier_rejects_alpha_below_minus_one():
    g = make_grid(1, 1.0, 16)
    with pytest.raises(ValueError):
        apply_multiplier(SpectralField.zeros(g), -1.5)


def test_half_composition_matches_single():
    g = make_grid(2, 5.0, 32)
    f = band_limited_random(g, np.random.default_rng(3), 6)
    twice = apply_multiplier(apply_multiplier(f, 0.5), 0.5).values
    once = apply_multiplier(f, 1.0).values
    assert np.max(np.abs(twice - once)) <= 1e-12 * max(1.0, np.max(np.abs(once)))


@pytest.mark.parametrize("a", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("b", [0.5, 1.0, 1.5])
def test_multiplier_semigroup(a, b):
    g = make_grid(1, 7.0, 64)
    f = band_limited_random(g, np.random.default_rng(11), 10)
    lhs = apply_multiplier(apply_multiplier(f, a), b).values
    rhs = apply_multiplier(f, a + b).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(rhs))


def test_gradient_and_laplacian():
    g = make_grid(1, 2 * np.pi, 32)
    x = g.coordinates[0]
    (dx,) = gradient(SpectralField(g, values=np.sin(x)))
    assert np.max(np.abs(dx.values - np.cos(x))) <= 1e-12
    lap = laplacian(SpectralField(g, values=np.cos(2 * x)))
    assert np.max(np.abs(lap.values + 4 * np.cos(2 * x))) <= 1e-12
    (c,) = gradient(SpectralField(g, values=np.full(g.shape, 3.0)))
    assert np.max(np.abs(c.values)) == 0.0


def test_gradient_zeroes_nyquist():
    g = make_grid(2, 1.0, 16)
    for s, m in zip(derivative_symbols(g), g.nyquist_masks):
        assert np.all(s[m] == 0)


def test_laplacian_has_zero_mean():
    g = make_grid(2, 3.0, 32)
    f = SpectralField(g, values=np.random.default_rng(0).standard_normal(g.shape))
    assert abs(laplacian(f).mean()) <= 1e-12
    assert abs(divergence(gradient(f)).mean()) <= 1e-12


def test_poisson_extend_mode_and_identity():
    g = make_grid(1, 2 * np.pi, 32)
    x = g.coordinates[0]
    f = SpectralField(g, values=np.cos(3 * x))
    assert np.max(np.abs(poisson_extend(f, 0.4).values - np.exp(-1.2) * np.cos(3 * x))) <= 1e-14
    assert np.max(np.abs(poisson_extend(f, 0.0).values - f.values)) <= 1e-15
    with pytest.raises(ValueError):
        poisson_extend(f, -0.1)


def test_poisson_normal_derivative_richardson():
    g = make_grid(1, 2 * np.pi, 64)
    f = band_limited_random(g, np.random.default_rng(5), 5)
    target = -apply_multiplier(f, 1.0).values
    zs = [0.1 / 2**i for i in range(8)]
    table = [(poisson_extend(f, z).values - f.values) / z for z in zs]
    for m in range(1, len(zs)):
        table = [(2**m * table[i + 1] - table[i]) / (2**m - 1) for i in range(len(table) - 1)]
    assert np.max(np.abs(table[0] - target)) <= 1e-10 * np.max(np.abs(target))


def test_poisson_kernel_mass():
    g = make_grid(2, 4.0, 16)
    one = SpectralField(g, values=np.ones(g.shape))
    for z in (0.0, 0.5, 3.0, 50.0):
        assert np.allclose(poisson_extend(one, z).values, 1.0, atol=1e-15)


def test_poisson_semigroup():
    g = make_grid(2, 3.0, 32)
    f = band_limited_random(g, np.random.default_rng(9), 8)
    a = poisson_extend(poisson_extend(f, 0.3), 0.7).values
    b = poisson_extend(f, 1.0).values
    assert np.max(np.abs(a - b)) <= 1e-12


def test_parseval_hundred_fields():
    rng = np.random.default_rng(42)
    for i in range(100):
        dim = 1 + i % 2
        g = make_grid(dim, 1.0 + i * 0.1, 16 if dim == 2 else 64)
        lhs, rhs = parseval_sums(SpectralField(g, values=rng.standard_normal(g.shape)))
        assert abs(lhs - rhs) <= 1e-10 * lhs


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2]), st.floats(0.5, 50.0))
def test_round_trip_property(seed, dim, L):
    g = make_grid(dim, L, 16)
    v = np.random.default_rng(seed).standard_normal(g.shape)
    back = SpectralField(g, coefficients=SpectralField(g, values=v).coefficients).values
    assert np.max(np.abs(back - v)) <= 1e-12 * max(1.0, np.max(np.abs(v)))
