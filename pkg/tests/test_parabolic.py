"""Tests for the linearized Reynolds operator and the coupled solver"""
import math
from dataclasses import replace
from unittest import TestCase, mock

import numpy as np

from squeeze_film.const import RADIUS_FRACTION
from squeeze_film.diagnostics import field_difference
from squeeze_film.errors import (
    ConfigurationError,
    IterationError,
    QuenchImminentError,
)
from squeeze_film.grid import (
    Field,
    band_limited_field,
    build_grid,
    embedding_constant,
)
from squeeze_film.helpers.config import SolverConfig
from squeeze_film.helpers.scenario_config import get_scenario
from squeeze_film.hyperbolic import Horizon, PhysicalConstants
from squeeze_film.oracle import mol_solve
from squeeze_film.parabolic import (
    CONTRACTION_TARGET,
    M0,
    CoupledProblem,
    HorizonReport,
    analytic_step,
    assemble_linearization,
    compatibility_field,
    coupled_horizon,
    exponential_weights,
    frechet_F,
    gamma_fixed_point,
    garding_constants,
    graph_norm_constant,
    horizon_T0_star,
    largest_contractive_horizon,
    linear_duhamel,
    maximal_regularity_probe,
    nonlinearity_lipschitz,
    operator_norm_H2_L2,
    propagator,
    reynolds_rhs,
    sector_report,
    semigroup_norm,
    solve_coupled,
)

from .const import EQUILIBRIUM_CONFIG
from .helpers import BALANCED, perturbed_fields
from .mixins.paths import PathAssertions
from .mixins.report import ReportableTests


def uniform_fields(grid, c=BALANCED):
    return (
        Field(grid, np.full(grid.n_nodes, c.theta1), c.theta1),
        Field(grid, np.zeros(grid.n_nodes)),
        Field(grid, np.full(grid.n_nodes, c.theta2), c.theta2),
    )


def laplacian(grid):
    n = grid.n_nodes
    matrix = -2 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)
    return matrix / grid.spacing**2


class TestLinearization(PathAssertions, TestCase):
    def setUp(self):
        self.grid = build_grid(1.0, 15)
        self.u0, self.v0, self.w0 = uniform_fields(self.grid)
        self.P = assemble_linearization(self.u0, self.v0, self.w0, self.grid)

    def test_uniform_state_gives_scaled_laplacian(self):
        expected = BALANCED.theta1 * BALANCED.theta2**2 * laplacian(self.grid)
        self.assertValuesClose(self.P.matrix, expected, 1e-9)

    def test_uniform_state_is_dissipative(self):
        self.assertLess(float(np.max(self.P.eigenvalues.real)), 0.0)

    def test_nonpositive_pressure_is_rejected(self):
        u0 = Field(self.grid, np.full(self.grid.n_nodes, -1.0), 2.0)
        with self.assertRaises(ConfigurationError) as e:
            assemble_linearization(u0, self.v0, self.w0, self.grid)
        self.assertEqual(e.exception.field, "init.u0")

    def test_garding_on_uniform_state(self):
        report = garding_constants(self.P, self.u0, self.w0)
        self.assertEqual(report.K2, 0.0)
        self.assertAlmostEqual(report.K, 2.0)
        self.assertEqual(report.K_o, 0.0)
        self.assertAlmostEqual(report.min_form_ratio, 2.0, places=9)
        self.assertTrue(report.passed)

    def test_garding_on_perturbed_state(self):
        u0, v0, w0 = perturbed_fields(self.grid, np.random.default_rng(4))
        P = assemble_linearization(u0, v0, w0, self.grid)
        report = garding_constants(P, u0, w0, np.random.default_rng(5))
        self.assertGreater(report.K, 0.0)
        self.assertEqual(report.violations, 0)
        self.assertGreater(report.K2, 0.0)

    def test_semigroup_on_discrete_mode(self):
        shape = np.sin(np.pi * self.grid.nodes)
        h = self.grid.spacing
        rate = -2 * 4 / h**2 * np.sin(np.pi * h / 2) ** 2
        moved = analytic_step(self.P, 0.01, Field(self.grid, shape))
        self.assertValuesClose(moved.values, np.exp(0.01 * rate) * shape, 1e-10)

    def test_semigroup_refuses_negative_time(self):
        with self.assertRaises(ConfigurationError):
            analytic_step(self.P, -0.1, Field(self.grid, np.zeros(15)))

    def test_exponential_trapezoid_is_exact_for_constant_forcing(self):
        rng = np.random.default_rng(6)
        u0 = rng.standard_normal(self.grid.n_nodes)
        forcing = np.sin(2 * np.pi * self.grid.nodes)
        horizon, n_steps = 0.02, 8
        weights = exponential_weights(self.P, horizon / n_steps)
        path = linear_duhamel(weights, u0, np.tile(forcing, (n_steps + 1, 1)))
        E = propagator(self.P, horizon)
        exact = E @ u0 + np.linalg.solve(self.P.matrix, (E - np.eye(15)) @ forcing)
        self.assertValuesClose(path[-1], exact, 1e-10)
        self.assertValuesClose(path[0], u0, 0.0)

    def test_reynolds_rhs_vanishes_at_rest(self):
        zero = Field(self.grid, np.zeros(15))
        rhs = reynolds_rhs(zero, self.v0, self.w0, BALANCED, self.grid)
        self.assertValuesClose(rhs.values, np.zeros(15), 1e-14)

    def test_reynolds_rhs_refuses_collapsed_gap(self):
        gap = np.ones(15)
        gap[7] = 1e-3
        with self.assertRaises(QuenchImminentError) as e:
            reynolds_rhs(
                Field(self.grid, np.zeros(15)),
                self.v0,
                Field(self.grid, gap, 1.0),
                BALANCED,
                self.grid,
                floor=0.01,
            )
        self.assertEqual(e.exception.node, 7)

    def test_reynolds_rhs_floor_defaults_to_half_the_edge_gap(self):
        zero = Field(self.grid, np.zeros(15))
        gap = np.ones(15)
        gap[4] = 0.45
        with self.assertRaises(QuenchImminentError) as e:
            reynolds_rhs(zero, self.v0, Field(self.grid, gap, 1.0), BALANCED, self.grid)
        self.assertEqual(e.exception.node, 4)
        gap[4] = 0.55
        rhs = reynolds_rhs(zero, self.v0, Field(self.grid, gap, 1.0), BALANCED, self.grid)
        self.assertTrue(np.all(np.isfinite(rhs.values)))

    def test_compatibility_field_of_uniform_pressure(self):
        values = compatibility_field(self.u0, self.w0, self.grid)
        self.assertValuesClose(values, np.zeros(15), 1e-12)


class TestOperatorDiagnostics(PathAssertions, TestCase):
    def setUp(self):
        self.grid = build_grid(1.0, 15)
        self.P = assemble_linearization(*uniform_fields(self.grid), self.grid)
        h = self.grid.spacing
        k = np.arange(1, 16)
        self.lam = (k * np.pi) ** 2
        self.mu = -2 * 4 / h**2 * np.sin(k * np.pi * h / 2) ** 2

    def test_symmetric_operator_has_unit_sector_constant(self):
        report = sector_report(self.P)
        self.assertAlmostEqual(report.omega, self.mu[0], places=6)
        self.assertAlmostEqual(report.M, 1.0, places=6)

    def test_h2_to_l2_norm_is_a_modal_maximum(self):
        expected = np.max(np.abs(self.mu) / np.sqrt(1 + self.lam + self.lam**2))
        self.assertAlmostEqual(operator_norm_H2_L2(self.P), expected, places=6)

    def test_graph_norm_constant_bounds_both_ratios(self):
        report = graph_norm_constant(self.P, np.random.default_rng(8), n_probes=20)
        self.assertGreater(report.lower, 0.0)
        self.assertLessEqual(report.lower, report.upper)
        self.assertGreaterEqual(report.gamma0, report.upper)
        self.assertGreaterEqual(report.gamma0, 1 / report.lower)

    def test_maximal_regularity_ratio_is_finite(self):
        ratio = maximal_regularity_probe(
            self.P, 0.1, 20, 0.5, np.random.default_rng(9), n_probes=2
        )
        self.assertGreater(ratio, 0.0)
        self.assertTrue(math.isfinite(ratio))

    def test_frechet_F_matches_difference_quotient(self):
        grid = build_grid(1.0, 31)
        rng = np.random.default_rng(10)

        def sample(scale):
            return scale * band_limited_field(grid, rng, 5)

        u, q, v, vq, wq = sample(0.02), sample(1.0), sample(0.01), sample(1.0), sample(1.0)
        w = 1 + sample(0.02)

        def F(eps):
            return reynolds_rhs(
                Field(grid, u + eps * q),
                Field(grid, v + eps * vq),
                Field(grid, w + eps * wq, 1.0),
                BALANCED,
                grid,
            ).values

        eps = 1e-6
        quotient = (F(eps) - F(-eps)) / (2 * eps)
        derivative = frechet_F(u, q, v, w, vq, wq, BALANCED, grid)
        scale = max(1.0, float(np.max(np.abs(derivative))))
        self.assertValuesClose(derivative, quotient, 1e-6 * scale)


class TestReynoldsDiscretization(PathAssertions, TestCase):
    def test_peak_of_a_sine_pressure(self):
        grid = build_grid(1.0, 127)
        c = PhysicalConstants(0.0, 0.0, 1.0, 1.0)
        u = Field(grid, np.sin(np.pi * grid.nodes))
        v = Field(grid, np.zeros(127))
        w = Field(grid, np.ones(127), 1.0)
        rhs = reynolds_rhs(u, v, w, c, grid).values
        self.assertAlmostEqual(grid.nodes[63], 0.5)
        cosine = math.cos(math.pi * grid.spacing)
        stencil = (3 + cosine) * (cosine - 1) / grid.spacing**2
        self.assertAlmostEqual(rhs[63], stencil, places=7)
        self.assertAlmostEqual(rhs[63], -2 * math.pi**2, delta=5e-3)

    def test_linearization_matches_the_continuous_operator(self):
        errors = []
        for n in (31, 63):
            grid = build_grid(1.0, n)
            x = grid.nodes
            s1, c1 = np.sin(np.pi * x), np.cos(np.pi * x)
            u, du, ddu = 2 + 0.2 * s1, 0.2 * np.pi * c1, -0.2 * np.pi**2 * s1
            w = 1 + 0.1 * np.sin(2 * np.pi * x)
            dw = 0.2 * np.pi * np.cos(2 * np.pi * x)
            v = 0.05 * s1
            psi = np.sin(3 * np.pi * x)
            dpsi, ddpsi = 3 * np.pi * np.cos(3 * np.pi * x), -9 * np.pi**2 * psi
            a, da = w**3 * u, 3 * w**2 * dw * u + w**3 * du
            b, db = w**3 * du, 3 * w**2 * dw * du + w**3 * ddu
            exact = (da * dpsi + a * ddpsi + db * psi + b * dpsi) / w - v * psi / w
            P = assemble_linearization(
                Field(grid, u, 2.0), Field(grid, v), Field(grid, w, 1.0), grid
            )
            errors.append(float(np.max(np.abs(P.matrix @ psi - exact))))
        self.assertGreater(errors[0] / errors[1], 3.0)
        self.assertLess(errors[0] / errors[1], 5.0)

    def test_linearization_is_the_derivative_of_the_rhs(self):
        grid = build_grid(1.0, 63)
        u0, v0, w0 = perturbed_fields(grid, np.random.default_rng(13))
        P = assemble_linearization(u0, v0, w0, grid)
        q = band_limited_field(grid, np.random.default_rng(14), 6)
        base = u0.values - BALANCED.theta1

        def F(eps):
            moved = Field(grid, base + eps * q)
            return reynolds_rhs(moved, v0, w0, BALANCED, grid).values

        errors = [
            float(np.max(np.abs((F(eps) - F(0.0)) / eps - P.matrix @ q)))
            for eps in (1e-2, 1e-3)
        ]
        self.assertAlmostEqual(errors[0] / errors[1], 10.0, delta=0.5)


class TestAnalyticSemigroup(PathAssertions, TestCase):
    def test_heat_mode_decay_factor(self):
        grid = build_grid(1.0, 127)
        unit = PhysicalConstants(0.0, 0.0, 1.0, 1.0)
        P = assemble_linearization(*uniform_fields(grid, unit), grid)
        shape = np.sin(np.pi * grid.nodes)
        moved = analytic_step(P, 0.1, Field(grid, shape))
        factor = moved.values[63] / shape[63]
        rate = -4 / grid.spacing**2 * math.sin(math.pi * grid.spacing / 2) ** 2
        self.assertAlmostEqual(factor, math.exp(0.1 * rate), places=10)
        self.assertAlmostEqual(factor, math.exp(-(math.pi**2) * 0.1), delta=2e-4)

    def test_semigroup_law(self):
        grid = build_grid(1.0, 31)
        P = assemble_linearization(
            *perturbed_fields(grid, np.random.default_rng(15)), grid
        )
        f = Field(grid, band_limited_field(grid, np.random.default_rng(16), 6))
        once = analytic_step(P, 0.03, f)
        twice = analytic_step(P, 0.01, analytic_step(P, 0.02, f))
        scale = float(np.max(np.abs(once.values)))
        self.assertValuesClose(twice.values, once.values, 1e-9 * scale)

    def test_norm_is_held_against_the_bound(self):
        grid = build_grid(1.0, 15)
        P = assemble_linearization(*uniform_fields(grid), grid)
        h = grid.spacing
        rate = -2 * 4 / h**2 * math.sin(math.pi * h / 2) ** 2
        self.assertAlmostEqual(semigroup_norm(P, 0.01), math.exp(0.01 * rate))
        self.assertLessEqual(semigroup_norm(P, 0.01), M0)
        f = Field(grid, np.sin(np.pi * grid.nodes))
        with self.assertLogs("squeeze_film.parabolic", "DEBUG") as logs:
            analytic_step(P, 0.01, f)
        self.assertTrue(any("within M0" in line for line in logs.output))
        with self.assertLogs("squeeze_film.parabolic", "WARNING") as logs:
            analytic_step(P, 0.01, f, bound=0.5)
        self.assertTrue(any("exceeds M0" in line for line in logs.output))


class TestHorizons(TestCase):
    def test_T1_is_the_smallest_horizon(self):
        report = HorizonReport(Horizon(0.3, "growth", {}), 0.2, 0.5)
        self.assertEqual(report.T1, 0.2)
        self.assertEqual(report.active, "T0_star")

    def test_T0_star_without_growth(self):
        problem = CoupledProblem.from_config(SolverConfig(EQUILIBRIUM_CONFIG))
        self.assertEqual(horizon_T0_star(problem, 1.0, 1.0, 0.0, 1.0, 1.0), math.inf)

    def test_T0_star_shrinks_with_constants(self):
        problem = CoupledProblem.from_config(SolverConfig(EQUILIBRIUM_CONFIG))
        small = horizon_T0_star(problem, 1.0, 1.0, 1.0, 1.0, 1.0)
        large = horizon_T0_star(problem, 10.0, 1.0, 1.0, 1.0, 1.0)
        self.assertGreater(small, large)

    def test_nonlinearity_lipschitz_grows_with_L_W(self):
        low = nonlinearity_lipschitz(0.48, 1.0, 1.0, 2.0, 0.0, 0.1)
        high = nonlinearity_lipschitz(0.48, 1.0, 1.0, 2.0, 0.0, 1.0)
        self.assertGreater(high, low)


class TestCoupledProblem(TestCase):
    def setUp(self):
        self.problem = CoupledProblem.from_config(SolverConfig(EQUILIBRIUM_CONFIG))

    def test_default_radius(self):
        c_emb = embedding_constant(self.problem.basis)
        expected = RADIUS_FRACTION * self.problem.kappa / (2 * c_emb)
        self.assertAlmostEqual(self.problem.radius, expected)

    def test_time_grid(self):
        self.assertEqual(self.problem.times.size, 11)
        self.assertAlmostEqual(self.problem.dt, 0.001)

    def test_pressure_trace_must_match(self):
        u0 = Field(self.problem.grid, np.full(15, 3.0), 3.0)
        with self.assertRaises(ConfigurationError) as e:
            replace(self.problem, u0=u0)
        self.assertEqual(e.exception.field, "init.u0")

    def test_radius_outside_ball_is_rejected(self):
        with self.assertRaises(ConfigurationError) as e:
            replace(self.problem, radius=10.0)
        self.assertEqual(e.exception.field, "picard.radius")


class TestCoupledEquilibrium(PathAssertions, ReportableTests, TestCase):
    def setUp(self):
        self.cfg = SolverConfig(EQUILIBRIUM_CONFIG)
        self.solution = solve_coupled(
            CoupledProblem.from_config(self.cfg), certify=False
        )
        self.setUpReportable(
            self.solution,
            [
                "iterations",
                "final_ratio",
                "ratios",
                "distances",
                "min_gap",
                "min_u",
                "horizons",
                "garding",
                "wave",
            ],
        )

    def test_rest_state_is_stationary(self):
        self.assertEqual(self.solution.iterations, 1)
        self.assertValuesClose(
            self.solution.u_path.values, np.full((11, 15), self.cfg.theta1), 1e-12
        )
        self.assertValuesClose(
            self.solution.w_path.values, np.full((11, 15), self.cfg.theta2), 1e-12
        )
        self.assertEqual(self.solution.min_u, self.cfg.theta1)
        self.assertIsNone(self.solution.horizons)

    def test_certified_horizons_are_reported(self):
        solution = gamma_fixed_point(self.cfg)
        horizons = solution.horizons
        self.assertGreater(horizons.T1, 0.0)
        self.assertEqual(
            horizons.T1,
            min(horizons.T0.value, horizons.T0_star, horizons.delta_star),
        )
        self.assertEqual(horizons.delta_star, self.cfg.horizon)
        self.assertIn("L_B", horizons.constants)
        self.assertLessEqual(horizons.constants["semigroup_norm"], M0)


class TestContractiveHorizon(TestCase):
    def setUp(self):
        self.problem = CoupledProblem.from_config(SolverConfig(EQUILIBRIUM_CONFIG))

    def test_certified_horizon_is_below_the_contractive_one(self):
        certified = coupled_horizon(self.problem, np.random.default_rng(0)).T0_star
        found = largest_contractive_horizon(self.problem, np.random.default_rng(1))
        self.assertLessEqual(found.ratio, CONTRACTION_TARGET)
        self.assertGreaterEqual(found.horizon, self.problem.horizon)
        self.assertGreater(found.upper, found.horizon)
        self.assertEqual(found.evaluations[found.horizon], found.ratio)
        self.assertLessEqual(certified, found.horizon)

    @mock.patch("squeeze_film.parabolic.solve_coupled")
    def test_bisects_between_doublings(self, solve):
        solve.side_effect = lambda trial, certify, start: mock.MagicMock(
            final_ratio=trial.horizon * 10
        )
        found = largest_contractive_horizon(self.problem, rel_tol=0.01)
        self.assertLessEqual(found.horizon, 0.05 + 1e-12)
        self.assertGreater(found.horizon, 0.05 * 0.99)
        self.assertGreater(found.upper, 0.05 - 1e-12)
        self.assertLessEqual(found.upper - found.horizon, 0.01 * found.horizon)
        first = solve.call_args_list[0]
        self.assertEqual(first.args[0].horizon, self.problem.horizon)
        self.assertFalse(first.kwargs["certify"])
        start = first.kwargs["start"]
        self.assertEqual(start.shape, (11, 15))
        self.assertTrue(np.array_equal(start[0], self.problem.u0_tilde))

    @mock.patch("squeeze_film.parabolic.solve_coupled")
    def test_solver_failure_counts_as_no_contraction(self, solve):
        def outcome(trial, certify, start):
            if trial.horizon > 0.03:
                raise IterationError("stalled", [0.9])
            return mock.MagicMock(final_ratio=0.1)

        solve.side_effect = outcome
        found = largest_contractive_horizon(self.problem)
        self.assertLessEqual(found.horizon, 0.03 + 1e-12)
        self.assertEqual(found.evaluations[0.04], math.inf)

    @mock.patch("squeeze_film.parabolic.solve_coupled")
    def test_no_contraction_anywhere_is_an_error(self, solve):
        solve.side_effect = lambda trial, certify, start: mock.MagicMock(
            final_ratio=0.9
        )
        with self.assertRaises(IterationError) as e:
            largest_contractive_horizon(self.problem, max_bisections=4)
        self.assertEqual(e.exception.ratios, [0.9] * 5)


SMALL_DATA = ("small_data_1", "small_data_2", "small_data_3", "mode_perturbation")


class TestCoupledSmallData(PathAssertions, TestCase):
    @classmethod
    def setUpClass(cls):
        cls.runs = {}
        for name in SMALL_DATA:
            cfg = get_scenario(name)
            cls.runs[name] = (cfg, gamma_fixed_point(cfg, certify=False))

    def test_agrees_with_method_of_lines(self):
        for name, (cfg, solution) in self.runs.items():
            with self.subTest(scenario=name):
                oracle = mol_solve(cfg)
                self.assertIsNone(oracle.quench)
                paths = (solution.u_path, solution.v_path, solution.w_path)
                for field, a, b in zip("uvw", paths, oracle):
                    self.assertLessEqual(
                        field_difference(a, b), 2e-3, f"{field} differs from the oracle"
                    )
                self.assertPositive(solution.u_path.values)
                self.assertPositive(solution.w_path.values)

    def test_gamma_iteration_converges_in_h2(self):
        for name, (cfg, solution) in self.runs.items():
            with self.subTest(scenario=name):
                self.assertLessEqual(solution.iterations, 30)
                self.assertLess(solution.distances[-1], cfg.gamma_tol)
                self.assertLess(solution.final_ratio, 0.55)

    def test_gap_stays_in_the_half_ball(self):
        for name, (cfg, solution) in self.runs.items():
            with self.subTest(scenario=name):
                kappa = CoupledProblem.from_config(cfg).kappa
                self.assertGreaterEqual(solution.min_gap, kappa / 2)
