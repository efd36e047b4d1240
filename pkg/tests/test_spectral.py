import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iskak.spectral import (
    Multiplier,
    PeriodicGrid,
    RealField,
    apply_multiplier,
    dealiased_product,
    deriv,
    field_from_function,
    hs_norm,
    integrate,
    l2_norm,
)

from conftest import random_band_limited


class TestGrid:
    def test_basic_layout(self):
        g = PeriodicGrid(64)
        assert g.spacing * g.n_points == pytest.approx(g.length, rel=1e-15)
        assert g.nodes[0] == 0.0
        assert g.wavenumbers[1] == pytest.approx(1.0)

    def test_wavenumbers_odd_symmetric_apart_from_nyquist(self):
        g = PeriodicGrid(32)
        k = g.wavenumbers
        for j in range(1, 16):
            assert k[j] == -k[-j]
        assert k[16] == -16.0  # Nyquist carries the negative convention

    @pytest.mark.parametrize("n", [6, 9, 0, -8])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError):
            PeriodicGrid(n)

    def test_rejects_bad_length(self):
        with pytest.raises(ValueError):
            PeriodicGrid(16, 0.0)


class TestDeriv:
    def test_sin_to_cos(self, grid64):
        f = field_from_function(grid64, np.sin)
        assert np.abs(deriv(f, 1).values - np.cos(grid64.nodes)).max() <= 1e-12

    def test_constant_derivative_vanishes(self, grid64):
        f = RealField(grid64, np.full(64, 3.7))
        for order in (1, 2, 3):
            assert np.abs(deriv(f, order).values).max() <= 1e-12

    def test_second_derivative_eigenfunction(self, grid64):
        f = field_from_function(grid64, lambda x: np.cos(3 * x))
        assert np.abs(deriv(f, 2).values + 9 * f.values).max() <= 1e-11

    def test_order_two_equals_twice_order_one(self, grid64):
        rng = np.random.default_rng(7)
        f = random_band_limited(rng, grid64)
        twice = deriv(deriv(f, 1), 1)
        assert np.abs(deriv(f, 2).values - twice.values).max() <= 1e-10

    def test_rejects_order_zero(self, grid64):
        f = field_from_function(grid64, np.sin)
        with pytest.raises(ValueError):
            deriv(f, 0)


class TestMultiplier:
    def test_minus_laplacian_eigenvalue(self, grid64):
        m = Multiplier.from_symbol(grid64, lambda k: k**2)
        f = field_from_function(grid64, lambda x: np.cos(2 * x))
        assert np.abs(apply_multiplier(m, f).values - 4 * f.values).max() <= 1e-12

    def test_identity_symbol(self, grid64):
        m = Multiplier.from_symbol(grid64, lambda k: np.ones_like(k))
        rng = np.random.default_rng(0)
        f = random_band_limited(rng, grid64)
        assert np.abs(apply_multiplier(m, f).values - f.values).max() <= 1e-13

    def test_rational_symbol_value(self, grid64):
        # (1 + k^2/15)/(1 + 2 k^2/5) at k = 1 is 16/21
        m = Multiplier.from_symbol(grid64, lambda k: (1 + k**2 / 15) / (1 + 0.4 * k**2))
        f = field_from_function(grid64, np.cos)
        expected = (16.0 / 21.0) * np.cos(grid64.nodes)
        assert np.abs(apply_multiplier(m, f).values - expected).max() <= 1e-13

    def test_zero_symbol_gives_zero_field(self, grid64):
        m = Multiplier.from_symbol(grid64, np.zeros_like)
        rng = np.random.default_rng(1)
        f = random_band_limited(rng, grid64)
        assert np.abs(apply_multiplier(m, f).values).max() == 0.0

    def test_linearity(self, grid64):
        m = Multiplier.from_symbol(grid64, lambda k: 1.0 / (1.0 + k**2))
        rng = np.random.default_rng(2)
        f = random_band_limited(rng, grid64)
        g = random_band_limited(rng, grid64)
        lhs = apply_multiplier(m, RealField(grid64, 2.0 * f.values - 3.0 * g.values))
        rhs = 2.0 * apply_multiplier(m, f) - 3.0 * apply_multiplier(m, g)
        assert np.abs(lhs.values - rhs.values).max() <= 1e-12

    def test_grid_mismatch_rejected(self, grid64):
        other = PeriodicGrid(128)
        m = Multiplier.from_symbol(other, lambda k: k**2)
        f = field_from_function(grid64, np.sin)
        with pytest.raises(ValueError):
            apply_multiplier(m, f)


class TestDealiasedProduct:
    def test_resolved_quadratic_exact(self, grid64):
        f = field_from_function(grid64, np.cos)
        fg = dealiased_product(f, f)
        expected = 0.5 * (1.0 + np.cos(2 * grid64.nodes))
        assert np.abs(fg.values - expected).max() <= 1e-12

    def test_zero_factor(self, grid64):
        f = field_from_function(grid64, np.cos)
        z = RealField(grid64, np.zeros(64))
        assert np.abs(dealiased_product(f, z).values).max() == 0.0

    def test_high_mode_truncated(self, grid64):
        # cos(20x)^2 = 1/2 + cos(40x)/2; mode 40 is beyond the cutoff (21)
        f = field_from_function(grid64, lambda x: np.cos(20 * x))
        fg = dealiased_product(f, f)
        assert np.abs(fg.values - 0.5).max() <= 1e-12

    def test_commutative(self, grid64):
        rng = np.random.default_rng(3)
        f = random_band_limited(rng, grid64, modes=25)
        g = random_band_limited(rng, grid64, modes=25)
        assert np.abs(dealiased_product(f, g).values
                      - dealiased_product(g, f).values).max() <= 1e-14


class TestNormsAndIntegrals:
    def test_integrate_cos_vanishes(self, grid64):
        assert abs(integrate(field_from_function(grid64, np.cos))) <= 1e-13

    def test_l2_of_cos(self, grid64):
        assert l2_norm(field_from_function(grid64, np.cos)) == pytest.approx(
            np.sqrt(np.pi), abs=1e-12)

    def test_h1_of_cos(self, grid64):
        f = field_from_function(grid64, np.cos)
        assert hs_norm(f, 1.0) == pytest.approx(np.sqrt(2 * np.pi), abs=1e-12)

    def test_hs_zero_is_l2(self, grid64):
        rng = np.random.default_rng(4)
        f = random_band_limited(rng, grid64)
        assert hs_norm(f, 0.0) == pytest.approx(l2_norm(f), rel=1e-12)

    def test_rejects_negative_order(self, grid64):
        f = field_from_function(grid64, np.cos)
        with pytest.raises(ValueError):
            hs_norm(f, -1.0)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_parseval(seed):
    grid = PeriodicGrid(64)
    rng = np.random.default_rng(seed)
    f = RealField(grid, rng.standard_normal(64))
    physical = l2_norm(f)
    spectral = hs_norm(f, 0.0)
    assert abs(physical - spectral) <= 1e-12 * max(1.0, physical)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_derivative_has_zero_mean(seed):
    grid = PeriodicGrid(64)
    rng = np.random.default_rng(seed)
    f = RealField(grid, rng.standard_normal(64))
    assert abs(integrate(deriv(f, 1))) <= 1e-12


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_multiplier_commutes_with_derivative(seed):
    grid = PeriodicGrid(64)
    rng = np.random.default_rng(seed)
    f = random_band_limited(rng, grid, modes=15)
    m = Multiplier.from_symbol(grid, lambda k: 1.0 / (1.0 + 0.3 * k**2))
    lhs = deriv(apply_multiplier(m, f), 1)
    rhs = apply_multiplier(m, deriv(f, 1))
    assert np.abs(lhs.values - rhs.values).max() <= 1e-11


def test_roundtrip_precision(grid128):
    rng = np.random.default_rng(11)
    f = RealField(grid128, rng.standard_normal(128))
    back = np.fft.irfft(np.fft.rfft(f.values), n=128)
    assert np.abs(back - f.values).max() <= 1e-12 * np.abs(f.values).max()
