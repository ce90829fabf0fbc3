import numpy as np
import pytest

from conftest import gaussian, random_field
from gpscatter.operators import SymbolId
from gpscatter.spectral import (
    PHYSICAL,
    SPECTRAL,
    Field,
    Multiplier,
    ZeroModeError,
    apply_multiplier,
    besov_norm,
    dealias,
    dyadic_partition,
    gradient,
    lp_norm,
    make_grid,
    sobolev_norm,
    to_physical,
    to_spectral,
)


class TestGrid:
    def test_unit_lattice(self):
        g = make_grid(2, 8, 2 * np.pi)
        assert sorted(np.rint(g.frequencies).astype(int)) == list(range(-4, 4))

    def test_frequency_step(self):
        g = make_grid(3, 16, 10.0)
        assert g.dk == pytest.approx(0.6283185, abs=1e-7)
        assert g.h == pytest.approx(10.0 / 16)

    @pytest.mark.parametrize("args", [(2, 7, 1.0), (4, 8, 1.0), (2, 8, 0.0), (1, 8, 1.0), (2, 6, 1.0)])
    def test_rejects_bad_arguments(self, args):
        with pytest.raises(ValueError):
            make_grid(*args)

    def test_lattice_symmetric_except_nyquist(self):
        g = make_grid(2, 16, 3.0)
        f = np.sort(g.frequencies)
        assert f[0] == pytest.approx(-8 * g.dk)
        assert np.allclose(f[1:], -f[1:][::-1])

    def test_reflect_is_involution(self, grid2, rng):
        a = rng.standard_normal(grid2.shape)
        assert np.array_equal(grid2.reflect(grid2.reflect(a)), a)
        k = grid2.kvec[0] * np.ones(grid2.shape)
        r = grid2.reflect(k)
        rows = np.arange(grid2.n) != grid2.n // 2
        assert np.allclose(r[rows], -k[rows])


class TestTransforms:
    def test_constant_goes_to_zero_mode(self, grid2):
        g = to_spectral(Field(grid2, 3.0 * np.ones(grid2.shape, complex)))
        assert abs(g.values.flat[0]) == pytest.approx(3.0 * grid2.volume)
        assert np.abs(g.values).ravel()[1:].max() < 1e-9

    def test_plane_wave_single_coefficient(self, grid2):
        kx = grid2.frequencies[3]
        f = Field(grid2, np.exp(1j * kx * grid2.coords[0]) * np.ones(grid2.shape))
        g = np.abs(f.spectral().values)
        assert np.argmax(g) == np.ravel_multi_index((3, 0), grid2.shape)
        assert np.sort(g.ravel())[-2] < 1e-9 * g.max()

    def test_round_trip(self, grid2, grid3, rng):
        for g in (grid2, grid3):
            f = random_field(g, rng)
            back = to_physical(to_spectral(f))
            assert np.abs(back.values - f.values).max() <= 1e-12 * np.abs(f.values).max()

    def test_parseval(self, grid2, grid3, rng):
        for g in (grid2, grid3):
            f = random_field(g, rng)
            lhs = lp_norm(f, 2)
            rhs = np.sqrt(np.sum(np.abs(f.spectral().values) ** 2) / g.volume)
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_wrong_representation_rejected(self, grid2):
        f = Field.zeros(grid2)
        with pytest.raises(ValueError):
            to_physical(f)
        with pytest.raises(ValueError):
            to_spectral(f.spectral())

    def test_continuum_transform_of_gaussian(self):
        g = make_grid(2, 128, 40.0)
        f = gaussian(g, width=1.0)
        expected = 2 * np.pi * np.exp(-(g.kabs**2) / 2)
        assert np.abs(f.spectral().values - expected).max() < 1e-10


class TestMultipliers:
    def test_P_plus_Q_identity(self, grid2, rng):
        f = random_field(grid2, rng)
        s = apply_multiplier(f, SymbolId.P) + apply_multiplier(f, SymbolId.Q)
        assert np.abs(s.values - f.values).max() <= 1e-12 * np.abs(f.values).max()

    def test_U_twice_is_Q(self, grid2, rng):
        f = random_field(grid2, rng)
        a = apply_multiplier(apply_multiplier(f, SymbolId.U), SymbolId.U)
        b = apply_multiplier(f, SymbolId.Q)
        assert np.abs(a.values - b.values).max() <= 1e-12 * np.abs(b.values).max()

    def test_H_on_unit_plane_wave(self):
        g = make_grid(2, 16, 2 * np.pi)
        f = Field(g, np.exp(1j * g.coords[0]) * np.ones(g.shape))
        out = apply_multiplier(f, SymbolId.H)
        assert np.allclose(out.values, np.sqrt(3.0) * f.values, atol=1e-12)
        assert np.sqrt(3.0) == pytest.approx(1.7320508, abs=1e-7)

    def test_representation_preserved(self, grid2, rng):
        f = random_field(grid2, rng)
        assert apply_multiplier(f, SymbolId.P).representation == PHYSICAL
        assert apply_multiplier(f.spectral(), SymbolId.P).representation == SPECTRAL

    def test_commutative_algebra(self, grid2, rng):
        f = random_field(grid2, rng)
        a = apply_multiplier(apply_multiplier(f, SymbolId.P), SymbolId.H)
        b = apply_multiplier(apply_multiplier(f, SymbolId.H), SymbolId.P)
        assert np.abs(a.values - b.values).max() <= 1e-12 * np.abs(a.values).max()

    def test_singular_zero_mode_policy(self, grid2):
        f = Field(grid2, np.ones(grid2.shape, complex))
        out = apply_multiplier(f, SymbolId.Uinv)
        assert np.abs(out.values).max() < 1e-12
        assert abs(out.dropped_zero_mode) == pytest.approx(grid2.volume)
        with pytest.raises(ZeroModeError):
            apply_multiplier(f, SymbolId.Uinv, zero_mode="reject")

    def test_callable_and_array_symbols(self, grid2, rng):
        f = random_field(grid2, rng)
        a = apply_multiplier(f, lambda r: 2.0 / (2.0 + r * r))
        b = apply_multiplier(f, SymbolId.P)
        c = apply_multiplier(f, Multiplier(lambda r: 2.0 / (2.0 + r * r)).on(grid2))
        assert np.allclose(a.values, b.values, atol=1e-13)
        assert np.allclose(c.values, b.values, atol=1e-13)


class TestDealias:
    def test_low_band_unchanged(self, grid2):
        f = Field(grid2, np.exp(1j * grid2.frequencies[2] * grid2.coords[1]) * np.ones(grid2.shape))
        assert np.allclose(dealias(f).values, f.values, atol=1e-13)

    def test_nyquist_removed(self):
        g = make_grid(2, 16, 2 * np.pi)
        f = Field(g, np.cos(8 * g.coords[0]) * np.ones(g.shape, complex))
        assert np.abs(dealias(f).values).max() < 1e-13

    def test_idempotent(self, grid2, rng):
        d = dealias(random_field(grid2, rng).spectral())
        assert np.array_equal(dealias(d).values, d.values)


class TestNorms:
    def test_constant_l2(self, grid2):
        f = Field(grid2, 2.0 * np.ones(grid2.shape, complex))
        assert lp_norm(f, 2) == pytest.approx(2.0 * np.sqrt(grid2.volume), rel=1e-12)

    def test_plane_wave_sup(self, grid2):
        f = Field(grid2, np.exp(1j * grid2.frequencies[5] * grid2.coords[0]) * np.ones(grid2.shape))
        assert lp_norm(f, np.inf) == pytest.approx(1.0, rel=1e-12)

    def test_gaussian_l2(self):
        g = make_grid(2, 256, 40.0)
        assert lp_norm(gaussian(g, width=1.0), 2) == pytest.approx(1.772454, abs=1e-6)

    def test_p_below_one_rejected(self, grid2):
        with pytest.raises(ValueError):
            lp_norm(Field.zeros(grid2), 0.5)

    def test_sobolev_s0_is_l2(self, grid2, rng):
        f = random_field(grid2, rng)
        assert sobolev_norm(f, 0.0) == pytest.approx(lp_norm(f, 2), rel=1e-12)

    def test_unit_plane_wave_homogeneous(self):
        g = make_grid(2, 16, 2 * np.pi)
        f = Field(g, np.exp(1j * g.coords[0]) * np.ones(g.shape))
        assert sobolev_norm(f, 1.0, True) == pytest.approx(sobolev_norm(f, 0.0, True), rel=1e-12)

    def test_gaussian_hdot1(self):
        g = make_grid(2, 128, 40.0)
        # |grad e^{-|x|^2/2}|^2 integrates to pi in 2D
        assert sobolev_norm(gaussian(g, width=1.0), 1.0, True) == pytest.approx(np.sqrt(np.pi), rel=1e-6)

    def test_gradient_of_plane_wave(self, grid2):
        k = grid2.frequencies[4]
        f = Field(grid2, np.exp(1j * k * grid2.coords[0]) * np.ones(grid2.shape))
        gx, gy = gradient(f)
        assert np.allclose(gx.values, 1j * k * f.values, atol=1e-12)
        assert np.abs(gy.values).max() < 1e-12


class TestBesov:
    def test_partition_of_unity(self, grid2, grid3):
        for g in (grid2, grid3):
            p = dyadic_partition(g)
            s = p.blocks.sum(axis=0)
            s.flat[0] = 1.0
            assert np.abs(s - 1).max() < 1e-12

    def test_block_support(self, grid2):
        p = dyadic_partition(grid2)
        r = grid2.kabs
        for i, j in enumerate(p.indices):
            live = p.blocks[i] > 0
            assert r[live].min() >= 2.0 ** (j - 1) * (1 - 1e-12)
            assert r[live].max() <= 2.0 ** (j + 1) * (1 + 1e-12)

    def test_zero_field(self, grid2):
        assert besov_norm(Field.zeros(grid2), 1.0, 1.0, 1.0) == 0.0

    def test_single_block_field(self):
        g = make_grid(2, 64, 2 * np.pi * 8)
        f = Field(g, np.exp(1j * g.frequencies[16] * g.coords[0]) * np.ones(g.shape))  # |xi| = 2, a block centre
        direct = 2.0 * lp_norm(f, 2)
        assert besov_norm(f, 1.0, 2.0, 2.0) == pytest.approx(direct, rel=0.05)

    def test_b022_matches_l2(self):
        g = make_grid(2, 128, 40.0)
        f = gaussian(g, width=1.0)
        assert besov_norm(f, 0.0, 2.0, 2.0) == pytest.approx(sobolev_norm(f, 0.0, True), rel=1e-2)

    def test_linear_in_amplitude(self):
        g = make_grid(2, 64, 32.0)
        a = besov_norm(gaussian(g, 1.0, 2.0), 1.0, 1.0, 1.0)
        b = besov_norm(gaussian(g, 3.0, 2.0), 1.0, 1.0, 1.0)
        assert b == pytest.approx(3 * a, rel=1e-12)
