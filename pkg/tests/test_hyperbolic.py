"""Tests for the membrane solution operator"""
import math
from unittest import TestCase

import numpy as np

from squeeze_film.const import NORM_H1
from squeeze_film.errors import (
    ConfigurationError,
    HorizonTooLargeError,
    QuenchImminentError,
)
from squeeze_film.grid import Field, TrajectoryPath, embedding_constant, sobolev_norm
from squeeze_film.hyperbolic import (
    GAP_SLACK,
    HyperbolicInit,
    PhysicalConstants,
    PicardSettings,
    contraction_ratios,
    delta_o,
    estimate_L_G,
    frechet_W,
    g_reaction,
    gap_constants,
    horizon_T0,
    lipschitz_W,
    lipschitz_W2,
    solve_wave_picard,
)
from squeeze_film.wave import apply_semigroup, state_norms

from .helpers import BALANCED, equilibrium_init, make_basis, perturbed_fields
from .mixins.paths import PathAssertions
from .mixins.report import ReportableTests


class TestPhysicalConstants(TestCase):
    def test_balanced_load(self):
        c = PhysicalConstants(0.5, 2.0, 3.0, 0.5)
        self.assertAlmostEqual(c.balanced_beta_F, 2.0 * 2.0 * 0.25)

    def test_boundary_values_must_be_positive(self):
        with self.assertRaises(ConfigurationError) as e:
            PhysicalConstants(1.0, 1.0, 0.0, 1.0)
        self.assertEqual(e.exception.field, "physics.theta1")

    def test_loads_must_not_be_negative(self):
        with self.assertRaises(ConfigurationError) as e:
            PhysicalConstants(-1.0, 1.0, 2.0, 1.0)
        self.assertEqual(e.exception.field, "physics.beta_F")

    def test_loads_must_be_finite(self):
        with self.assertRaises(ConfigurationError):
            PhysicalConstants(math.nan, 1.0, 2.0, 1.0)

    def test_zero_loads_are_accepted(self):
        self.assertEqual(PhysicalConstants(0.0, 0.0, 1.0, 1.0).balanced_beta_F, 0.0)


class TestGapConstants(TestCase):
    def test_gap_constant_relations(self):
        const = gap_constants(0.9, 1.3, 0.48, 2.0)
        self.assertAlmostEqual(const.C_tilde, 0.9 / 0.96 + 1.3)
        self.assertAlmostEqual(const.C2, 2 * const.C1**3)
        self.assertAlmostEqual(const.C3, 3 * const.C1**4)
        self.assertAlmostEqual(const.L_G, 2.0 * const.C2)

    def test_contraction_ratios_skip_settled_steps(self):
        ratios = contraction_ratios([1.0, 0.5, 0.1, 1e-12, 1e-13], 1e-10)
        self.assertEqual(len(ratios), 3)
        self.assertAlmostEqual(ratios[0], 0.5)
        self.assertAlmostEqual(ratios[1], 0.2)
        self.assertEqual(contraction_ratios([1.0], 0.0), [])

    def test_lipschitz_W(self):
        self.assertAlmostEqual(lipschitz_W(0.1, 1.0, 2.0, 3.0), 0.3 * math.exp(0.2))
        self.assertEqual(lipschitz_W(0.1, 1.0, 2.0, 0.0), 0.0)

    def test_lipschitz_W2_dominates_velocity_term(self):
        L_W = 0.5
        value = lipschitz_W2(L_W, 1.0, 0.5, 0.0)
        self.assertGreaterEqual(value, 2 * L_W)

    def test_reaction_at_balance_vanishes(self):
        self.assertAlmostEqual(float(g_reaction(np.zeros(1), BALANCED)[0]), 0.0)

    def test_reaction_refuses_touchdown(self):
        w_tilde = np.zeros(5)
        w_tilde[3] = -BALANCED.theta2
        with self.assertRaises(QuenchImminentError) as e:
            g_reaction(w_tilde, BALANCED)
        self.assertEqual(e.exception.node, 3)

    def test_radius_must_fit_in_ball(self):
        with self.assertRaises(ConfigurationError) as e:
            PicardSettings(1.0).check(kappa=1.0, c_emb=0.5)
        self.assertEqual(e.exception.field, "picard.radius")
        PicardSettings(0.5).check(kappa=1.0, c_emb=0.5)

    def test_initial_gap_must_be_positive(self):
        basis = make_basis(15)
        grid = basis.grid
        with self.assertRaises(ConfigurationError):
            HyperbolicInit(
                Field(grid, np.zeros(grid.n_nodes)),
                Field(grid, np.full(grid.n_nodes, -1.0), 1.0),
            )


class TestHorizon(TestCase):
    def test_smallest_term_is_active(self):
        basis = make_basis(15)
        init = equilibrium_init(basis.grid)
        c_emb = embedding_constant(basis)
        settings = PicardSettings(0.25 * init.kappa / c_emb)
        horizon = horizon_T0(BALANCED, init, settings, 1.0, 4.0, 10.0, c_emb)
        self.assertEqual(horizon.value, min(horizon.terms.values()))
        self.assertEqual(horizon.terms[horizon.active], horizon.value)
        self.assertAlmostEqual(horizon.terms["lipschitz"], 1 / 8)

    def test_equilibrium_horizon(self):
        basis = make_basis(15)
        init = equilibrium_init(basis.grid)
        c_emb = embedding_constant(basis)
        settings = PicardSettings(0.25 * init.kappa / c_emb)
        L_G = estimate_L_G(init, settings, BALANCED, c_emb)
        d_o = delta_o(init, settings, basis)
        horizon = horizon_T0(BALANCED, init, settings, 1.0, L_G, d_o, c_emb)
        self.assertGreater(L_G, 0.0)
        self.assertAlmostEqual(horizon.value, min(d_o, 1 / (2 * (L_G + 1))))
        self.assertAlmostEqual(horizon.terms["growth"], 1 / (2 * (L_G + 1)))
        self.assertEqual(horizon.active, "growth")

    def test_L_G_scales_with_load(self):
        basis = make_basis(15)
        init = equilibrium_init(basis.grid)
        c_emb = embedding_constant(basis)
        settings = PicardSettings(0.25 * init.kappa / c_emb)
        double = PhysicalConstants(2.0, 1.0, 2.0, 1.0)
        unloaded = PhysicalConstants(0.0, 1.0, 2.0, 1.0)
        single = estimate_L_G(init, settings, BALANCED, c_emb)
        w0_h1 = sobolev_norm(init.w0, NORM_H1)
        expected = gap_constants(init.kappa, w0_h1, c_emb, 1.0).L_G
        self.assertAlmostEqual(single, expected)
        self.assertAlmostEqual(estimate_L_G(init, settings, double, c_emb), 2 * single)
        self.assertEqual(estimate_L_G(init, settings, unloaded, c_emb), 0.0)

    def test_delta_o_at_rest_is_the_full_window(self):
        basis = make_basis(15)
        init = equilibrium_init(basis.grid)
        settings = PicardSettings(0.1)
        self.assertEqual(delta_o(init, settings, basis), 2.0)

    def test_delta_o_keeps_the_orbit_in_the_half_ball(self):
        basis = make_basis(31)
        _, v0, w0 = perturbed_fields(basis.grid, np.random.default_rng(11))
        init = HyperbolicInit(v0, w0)
        settings = PicardSettings(1e-3)
        delta = delta_o(init, settings, basis)
        self.assertGreater(delta, 0.0)
        self.assertLess(delta, 2.0)
        start = init.state
        moved = apply_semigroup(delta, start, basis)
        distance = float(
            state_norms(moved.v - start.v, moved.w_tilde - start.w_tilde, basis.grid)
        )
        self.assertLessEqual(distance, settings.radius / 2 + 1e-12)

    def test_no_lipschitz_limit_without_load(self):
        basis = make_basis(15)
        init = equilibrium_init(basis.grid)
        c_emb = embedding_constant(basis)
        settings = PicardSettings(0.25 * init.kappa / c_emb)
        horizon = horizon_T0(BALANCED, init, settings, 1.0, 0.0, 10.0, c_emb)
        self.assertEqual(horizon.terms["lipschitz"], math.inf)


class TestWavePicard(PathAssertions, ReportableTests, TestCase):
    def setUp(self):
        self.basis = make_basis(31)
        self.grid = self.basis.grid
        self.c_emb = embedding_constant(self.basis)
        self.u0, v0, w0 = perturbed_fields(self.grid, np.random.default_rng(2))
        self.init = HyperbolicInit(v0, w0)
        self.settings = PicardSettings(0.25 * self.init.kappa / self.c_emb)
        self.solution = solve_wave_picard(
            TrajectoryPath.constant(self.u0, 0.05, 32),
            self.init,
            BALANCED,
            self.settings,
            self.basis,
        )
        self.setUpReportable(
            self.solution,
            ["iterations", "final_ratio", "ratios", "distances", "min_gap"],
        )

    def test_equilibrium_stays_at_rest(self):
        grid = self.grid
        init = equilibrium_init(grid)
        u = Field(grid, np.full(grid.n_nodes, BALANCED.theta1), BALANCED.theta1)
        solution = solve_wave_picard(
            TrajectoryPath.constant(u, 0.1, 16),
            init,
            BALANCED,
            self.settings,
            self.basis,
        )
        self.assertEqual(solution.iterations, 1)
        rest = np.zeros((17, grid.n_nodes))
        self.assertValuesClose(solution.path.w_tilde.values, rest, 1e-14)
        self.assertValuesClose(solution.path.v.values, rest, 1e-14)
        self.assertEqual(solution.min_gap, BALANCED.theta2)

    def test_converges_with_contraction(self):
        self.assertLess(self.solution.final_ratio, 0.55)
        self.assertLessEqual(self.solution.iterations, 30)
        self.assertLess(self.solution.distances[-1], self.settings.tol)

    def test_gap_lower_bound(self):
        self.assertGreaterEqual(self.solution.min_gap, self.init.kappa / 2 - GAP_SLACK)

    def test_starts_from_initial_data(self):
        self.assertValuesClose(
            self.solution.path.w_tilde.values[0], self.init.w0_tilde, 1e-12
        )
        v = self.solution.path.v.values
        self.assertValuesClose(v[0], self.init.v0.values, 1e-12)

    def test_horizon_too_large_is_refused(self):
        grid = self.grid
        c = PhysicalConstants(10.0, 1.0, 1.0, 1.0)
        init = equilibrium_init(grid, c)
        u = Field(grid, np.ones(grid.n_nodes), 1.0)
        with self.assertRaises(HorizonTooLargeError):
            solve_wave_picard(
                TrajectoryPath.constant(u, 1.0, 32), init, c, self.settings, self.basis
            )

    def test_frechet_derivative_is_exact_without_load(self):
        """Without electrostatic load the membrane is linear in the pressure."""
        c = PhysicalConstants(0.0, 1.0, 2.0, 1.0)
        q = 0.01 * np.outer(
            np.linspace(0.0, 1.0, 33), np.sin(2 * np.pi * self.grid.nodes)
        )
        u_path = TrajectoryPath.constant(self.u0, 0.05, 32)
        shifted = TrajectoryPath(self.grid, 0.05, u_path.values + q, c.theta1)
        base = solve_wave_picard(u_path, self.init, c, self.settings, self.basis)
        moved = solve_wave_picard(shifted, self.init, c, self.settings, self.basis)
        vq, wq = frechet_W(TrajectoryPath(self.grid, 0.05, q), base, c, self.basis)
        self.assertValuesClose(
            wq.values,
            moved.path.w_tilde.values - base.path.w_tilde.values,
            1e-10,
        )
        self.assertValuesClose(
            vq.values, moved.path.v.values - base.path.v.values, 1e-10
        )
        self.assertValuesClose(wq.values[0], np.zeros(self.grid.n_nodes), 0.0)
