"""HJ march: exactness, oracles, regularized companion, bump family, blow-up."""

import math

import numpy as np
import pytest

from hjlab import (
    BlowUpError,
    Field,
    HamiltonianSpec,
    HJProblem,
    SpaceTimeField,
    TorusGrid,
    make_singular_f,
    manufacture_rhs,
    solve_hj,
    solve_regularized,
    truncate,
)
from hjlab.spaces import lq_spacetime_norm
from hjlab.spectral import forward, heat_mollify, inverse

TWO_PI = 2.0 * np.pi


def setup(n=64, nt=1024, T=0.25, gamma=1.5, d=1):
    g = TorusGrid(d, n, T, nt)
    return g, HamiltonianSpec.isotropic(g, gamma)


class TestStationaryZero:
    def test_zero_solution_zero_residual(self):
        g, spec = setup()
        # f = H(x, 0) vanishes identically for this family
        f = SpaceTimeField.constant(g, 0.0)
        sol = solve_hj(HJProblem(g, spec, f, Field.constant(g, 0.0)), g.nt)
        assert np.max(np.abs(sol.u.values)) == 0.0
        assert sol.residual <= 1e-10


class TestManufactured:
    def test_round_trip_spec_example(self):
        # e^{-t} sin(2 pi x), gamma = 1.5, unit amplitude
        g = TorusGrid(1, 64, 0.5, 4096)
        spec = HamiltonianSpec.isotropic(g, 1.5)
        u_star = SpaceTimeField.from_function(g, lambda t, x: math.exp(-t) * np.sin(TWO_PI * x))
        f = manufacture_rhs(u_star, spec)
        sol = solve_hj(HJProblem(g, spec, f, u_star.initial()), g.nt)
        assert np.max(np.abs(sol.u.values - u_star.values)) <= 1e-6

    def test_zero_solution_rhs_is_h_of_zero(self):
        g, spec = setup()
        f = manufacture_rhs(SpaceTimeField.constant(g, 0.0), spec)
        assert np.max(np.abs(f.values)) == 0.0  # H(x,0) = 0 for this family

    def test_small_h_isolates_nonlinearity(self):
        # static u*: the discrete time derivative vanishes identically and
        # f + Lap(u*) is exactly the eps |Du*|^gamma contribution
        g = TorusGrid(1, 64, 0.25, 64)
        eps = 1e-6
        spec = HamiltonianSpec.isotropic(g, 1.5, h0=eps)
        u_star = SpaceTimeField.from_function(g, lambda t, x: np.cos(TWO_PI * x) * np.ones(g.shape))
        f = manufacture_rhs(u_star, spec)
        lap = -((TWO_PI) ** 2) * np.cos(TWO_PI * g.axis)
        residue = np.max(np.abs(f.values - (-lap)[None, :]))
        assert residue <= eps * (TWO_PI) ** 1.5 * 1.001
        assert residue >= eps * (TWO_PI) ** 1.5 * 0.5  # the eps term is really there

    def test_kpz_flip_symmetry(self):
        # solving the repulsive variant and negating equals solving the
        # flipped-Hamiltonian problem (b -> -b leaves H(x,-p) in the family)
        g = TorusGrid(1, 64, 0.25, 1024)
        spec = HamiltonianSpec.cosine(g, 2.0, h0=1.0, variation=0.3, drift=0.2)
        flipped = HamiltonianSpec.cosine(g, 2.0, h0=1.0, variation=0.3, drift=-0.2)
        f = SpaceTimeField.from_function(
            g, lambda t, x: 0.4 * np.cos(TWO_PI * x) * math.exp(-t)
        )
        v0 = Field.from_function(g, lambda x: 0.2 * np.sin(TWO_PI * x))
        sol_v = solve_hj(HJProblem(g, spec, f, v0, kpz_flip=True), g.nt)
        neg_u0 = Field(g, -v0.values)
        sol_u = solve_hj(HJProblem(g, flipped, f, neg_u0), g.nt)
        assert np.max(np.abs(-sol_v.u.values - sol_u.u.values)) <= 1e-10


class TestComparison:
    def test_min_nondecreasing_for_nonnegative_f(self):
        g, spec = setup(nt=2048)
        f = SpaceTimeField.from_function(
            g, lambda t, x: 0.5 * (1.0 + np.cos(TWO_PI * x)) * np.ones(g.shape)
        )
        u0 = Field.from_function(g, lambda x: 0.3 * np.sin(TWO_PI * x))
        sol = solve_hj(HJProblem(g, spec, f, u0), g.nt)
        mins = sol.u.values.min(axis=1)
        assert np.all(np.diff(mins) >= -1e-6)


class TestTruncate:
    def test_inactive_level(self):
        g, _ = setup(nt=8)
        f = SpaceTimeField.from_function(g, lambda t, x: np.sin(TWO_PI * x) * np.ones(g.shape))
        out = truncate(f, 10.0)
        assert np.array_equal(out.values, f.values)

    def test_constant_clamped(self):
        g, _ = setup(nt=8)
        f = SpaceTimeField.constant(g, 10.0)
        assert np.all(truncate(f, 3.0).values == 3.0)

    def test_sup_bounded_by_level(self):
        g, _ = setup(nt=8)
        rng = np.random.Generator(np.random.Philox(2))
        f = SpaceTimeField(g, rng.normal(scale=5.0, size=(g.nt + 1,) + g.shape))
        assert np.max(np.abs(truncate(f, 2.5).values)) <= 2.5

    def test_level_positive(self):
        g, _ = setup(nt=8)
        with pytest.raises(ValueError):
            truncate(SpaceTimeField.constant(g, 1.0), 0.0)


class TestRegularized:
    def test_huge_level_matches_plain_solve(self):
        g, spec = setup(nt=512)
        f = SpaceTimeField.from_function(
            g, lambda t, x: 0.8 * np.cos(TWO_PI * x) * np.ones(g.shape)
        )
        u0 = Field.from_function(g, lambda x: 0.2 * np.cos(TWO_PI * x))
        problem = HJProblem(g, spec, f, u0)
        plain = solve_hj(problem, g.nt)
        # k so large that truncation is inactive and heat-mollification
        # at time 1/k is below the comparison tolerance
        reg = solve_regularized(problem, 1e12, g.nt)
        assert np.max(np.abs(plain.u.values - reg.u.values)) <= 1e-10

    def test_initial_slice_is_mollified_mode(self):
        g, spec = setup(nt=256)
        u0 = Field.from_function(g, lambda x: np.cos(TWO_PI * x))
        f = SpaceTimeField.constant(g, 0.0)
        reg = solve_regularized(HJProblem(g, spec, f, u0), 10.0, g.nt)
        expected = math.exp(-4.0 * math.pi**2 / 10.0) * u0.values
        assert np.max(np.abs(reg.u.values[0] - expected)) <= 1e-12

    def test_truncation_smooths_rough_forcing(self):
        g, spec = setup(n=64, nt=1024)
        f = make_singular_f(g, 1.0, (0.5,), g.T / 2, 0.08, 0.01)
        u0 = Field.constant(g, 0.0)
        problem = HJProblem(g, spec, f, u0)
        plain = solve_hj(problem, g.nt)
        reg = solve_regularized(problem, 1.0, g.nt)
        assert np.max(np.abs(reg.u.values)) < np.max(np.abs(plain.u.values))

    def test_requires_field_rhs(self):
        g, spec = setup(nt=8)
        problem = HJProblem(g, spec, lambda t: np.zeros(g.shape), Field.constant(g, 0.0))
        with pytest.raises(ValueError):
            solve_regularized(problem, 1.0, g.nt)


class TestSingularFamily:
    def test_target_norm_stable_under_halving(self):
        g = TorusGrid(1, 128, 0.25, 1024)
        prev = None
        for sigma in (0.16, 0.08, 0.04):
            f = make_singular_f(g, 2.0, (0.5,), 0.125, sigma)
            norm = lq_spacetime_norm(f, 2.0)
            if prev is not None:
                assert abs(norm - prev) / prev <= 0.05
            prev = norm

    def test_sup_is_exact_scaling(self):
        g = TorusGrid(1, 64, 0.25, 256)
        # center on a lattice point in x and on a slice in t
        f = make_singular_f(g, 2.0, (0.5,), 0.125, 0.1)
        assert np.max(np.abs(f.values)) == pytest.approx(0.1 ** (-1.5), rel=1e-12)

    def test_higher_norms_diverge_at_scaling_rate(self):
        g = TorusGrid(1, 256, 0.25, 2048)
        s, s2 = 2.0, 4.0
        rate = []
        for sigma in (0.08, 0.04):
            f = make_singular_f(g, s, (0.5,), 0.125, sigma)
            rate.append(lq_spacetime_norm(f, s2))
        expected = 2.0 ** ((g.d + 2) * (1 / s - 1 / s2))
        assert rate[1] / rate[0] == pytest.approx(expected, rel=0.05)


class TestController:
    def test_blow_up_on_gradient_spike(self):
        g, spec = setup(n=32, nt=256, gamma=2.0)
        u0 = Field.from_function(g, lambda x: 0.05 * np.sin(TWO_PI * x))

        def spiking(t):
            base = np.zeros(g.shape)
            if t >= 0.1:
                base = 1e7 * np.sin(TWO_PI * g.x[0])
            return base

        with pytest.raises(BlowUpError):
            solve_hj(HJProblem(g, spec, spiking, u0), g.nt)

    def test_substep_restart_keeps_cadence(self):
        # a too-coarse nt for the gradient scale must refine internally but
        # return the requested number of slices
        g = TorusGrid(1, 64, 0.25, 64)
        spec = HamiltonianSpec.isotropic(g, 3.0)
        u0 = Field.from_function(g, lambda x: 0.5 * np.sin(TWO_PI * x))
        sol = solve_hj(HJProblem(g, spec, None, u0), g.nt)
        assert sol.substeps > 1
        assert len(sol.u) == g.nt + 1

    def test_store_every_divides(self):
        g, spec = setup(nt=10)
        with pytest.raises(ValueError):
            solve_hj(HJProblem(g, spec, None, Field.constant(g, 0.0)), g.nt, store_every=3)


class TestConvergenceOrder:
    def test_manufactured_refinement_ratio(self):
        errs = []
        for n, nt in ((32, 256), (64, 1024)):
            g = TorusGrid(1, n, 0.25, nt)
            spec = HamiltonianSpec.isotropic(g, 2.0)
            u_star = SpaceTimeField.from_function(
                g, lambda t, x: 0.5 * math.exp(-t) * np.sin(TWO_PI * x)
            )
            f = manufacture_rhs(u_star, spec)
            sol = solve_hj(HJProblem(g, spec, f, u_star.initial()), g.nt)
            errs.append(np.max(np.abs(sol.u.values - u_star.values)))
        assert errs[0] / errs[1] >= 3.0
