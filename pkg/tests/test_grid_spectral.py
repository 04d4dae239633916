"""Lattice and spectral-calculus invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjlab import Field, TorusGrid
from hjlab.spaces import lp_norm
from hjlab.spectral import (
    divergence,
    gradient,
    heat_mollify,
    laplacian,
    random_trig_polynomial,
    shift,
)


def grid1(n=32):
    return TorusGrid(1, n, 1.0, 4)


def rand_field(grid, seed=0, max_mode=5):
    rng = np.random.Generator(np.random.Philox(seed))
    return random_trig_polynomial(grid, max_mode, rng)


class TestTorusGrid:
    def test_dx_times_n_is_one(self):
        for n in (8, 32, 256):
            g = TorusGrid(1, n, 1.0, 4)
            assert g.dx * g.n == 1.0

    @pytest.mark.parametrize("bad", [dict(d=4), dict(n=12), dict(n=4), dict(T=0.0), dict(nt=0)])
    def test_invalid_grids_rejected(self, bad):
        kw = dict(d=1, n=32, T=1.0, nt=4)
        kw.update(bad)
        with pytest.raises(ValueError):
            TorusGrid(**kw)

    def test_refined(self):
        g = TorusGrid(2, 16, 0.5, 10).refined()
        assert (g.n, g.nt, g.T) == (32, 40, 0.5)


class TestField:
    def test_rejects_non_finite(self):
        g = grid1()
        vals = np.zeros(g.shape)
        vals[3] = np.nan
        with pytest.raises(ValueError):
            Field(g, vals)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            Field(grid1(), np.zeros(7))

    def test_immutable(self):
        u = Field.constant(grid1(), 2.0)
        with pytest.raises(ValueError):
            u.values[0] = 1.0


class TestGradient:
    def test_single_mode_d1(self):
        g = TorusGrid(1, 32, 1.0, 4)
        u = Field.from_function(g, lambda x: np.cos(2 * np.pi * x))
        du = gradient(u)
        exact = -2 * np.pi * np.sin(2 * np.pi * g.axis)
        assert np.max(np.abs(du.values[0] - exact)) <= 1e-10

    def test_constant_field(self):
        du = gradient(Field.constant(grid1(), 5.0))
        assert np.max(np.abs(du.values)) == 0.0

    def test_tensor_mode_d2(self):
        g = TorusGrid(2, 32, 1.0, 4)
        u = Field.from_function(g, lambda x, y: np.sin(4 * np.pi * x) * np.cos(2 * np.pi * y))
        du = gradient(u)
        X, Y = np.meshgrid(g.axis, g.axis, indexing="ij")
        gx = 4 * np.pi * np.cos(4 * np.pi * X) * np.cos(2 * np.pi * Y)
        gy = -2 * np.pi * np.sin(4 * np.pi * X) * np.sin(2 * np.pi * Y)
        assert np.max(np.abs(du.values[0] - gx)) <= 1e-10
        assert np.max(np.abs(du.values[1] - gy)) <= 1e-10

    def test_components_have_zero_mean(self):
        du = gradient(rand_field(grid1(64), seed=3, max_mode=10))
        for c in range(1):
            assert abs(du.values[c].mean()) <= 1e-12


class TestLaplacian:
    def test_single_mode(self):
        g = TorusGrid(1, 32, 1.0, 4)
        u = Field.from_function(g, lambda x: np.cos(2 * np.pi * x))
        lap = laplacian(u)
        assert np.max(np.abs(lap.values + 4 * np.pi**2 * u.values)) <= 1e-10

    def test_constant(self):
        assert np.max(np.abs(laplacian(Field.constant(grid1(), 3.0)).values)) == 0.0

    def test_finite_difference_oracle(self):
        # second-order centered differences converge at O(dx^2) to the
        # spectral value on a fixed random trig polynomial of max mode 5
        errs = []
        for n in (32, 64):
            g = TorusGrid(1, n, 1.0, 4)
            rng = np.random.Generator(np.random.Philox(11))
            hat = np.zeros(g.spectral_shape, dtype=complex)
            modes = np.arange(1, 6)
            hat[modes] = (rng.standard_normal(5) + 1j * rng.standard_normal(5)) * n
            u = Field(g, np.fft.irfft(hat, n=n))
            lap = laplacian(u).values
            v = u.values
            fd = (np.roll(v, -1) - 2 * v + np.roll(v, 1)) / g.dx**2
            errs.append(np.max(np.abs(lap - fd)))
        assert errs[0] > 0
        assert errs[1] <= errs[0] / 3.0  # at least ~O(dx^2) decay

    def test_laplacian_equals_div_grad(self):
        g = TorusGrid(2, 32, 1.0, 4)
        u = rand_field(g, seed=5, max_mode=5)
        lap = laplacian(u).values
        dg = divergence(gradient(u)).values
        assert np.max(np.abs(lap - dg)) <= 1e-10

    def test_zero_mean(self):
        lap = laplacian(rand_field(grid1(64), seed=9, max_mode=8))
        assert abs(lap.values.mean()) <= 1e-12


class TestHeatMollify:
    def test_single_mode_decay(self):
        g = TorusGrid(1, 32, 1.0, 4)
        u = Field.from_function(g, lambda x: np.cos(2 * np.pi * x))
        out = heat_mollify(u, 1.0)
        assert np.max(np.abs(out.values - np.exp(-4 * np.pi**2) * u.values)) <= 1e-12

    def test_zero_time_is_identity(self):
        u = rand_field(grid1(), seed=1)
        assert heat_mollify(u, 0.0) is u

    def test_mean_preserved(self):
        u = rand_field(grid1(64), seed=2, max_mode=9)
        shifted = Field(u.grid, u.values + 0.37)
        out = heat_mollify(shifted, 0.3)
        assert abs(out.mean() - shifted.mean()) <= 1e-12

    def test_semigroup(self):
        u = rand_field(grid1(64), seed=4, max_mode=9)
        a = heat_mollify(u, 0.7)
        b = heat_mollify(heat_mollify(u, 0.3), 0.4)
        assert np.max(np.abs(a.values - b.values)) <= 1e-12

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            heat_mollify(rand_field(grid1()), -0.1)


class TestShift:
    def test_zero_offset_identity(self):
        u = rand_field(grid1(), seed=6)
        assert np.array_equal(shift(u, (0.0,)).values, u.values)

    def test_full_period_identity(self):
        u = rand_field(grid1(), seed=7)
        assert np.array_equal(shift(u, (1.0,)).values, u.values)

    def test_non_lattice_offset_rejected(self):
        with pytest.raises(ValueError):
            shift(rand_field(grid1(32)), (0.013,))

    @settings(max_examples=25, deadline=None)
    @given(cells=st.integers(min_value=-64, max_value=64), p=st.sampled_from([1.0, 2.0, np.inf]))
    def test_norm_invariance(self, cells, p):
        g = TorusGrid(1, 64, 1.0, 4)
        u = rand_field(g, seed=8, max_mode=12)
        moved = shift(u, (cells * g.dx,))
        assert abs(lp_norm(moved, p) - lp_norm(u, p)) <= 1e-12

    def test_shift_semantics(self):
        # shift(u, xi)(x) = u(x - xi)
        g = TorusGrid(1, 32, 1.0, 4)
        u = Field.from_function(g, lambda x: np.sin(2 * np.pi * x))
        out = shift(u, (3 * g.dx,))
        expected = np.sin(2 * np.pi * (g.axis - 3 * g.dx))
        assert np.max(np.abs(out.values - expected)) <= 1e-12
