"""Tests for the verification harness"""
import json
import math
from unittest import TestCase
from unittest.mock import MagicMock

import pytest

from squeeze_film.const import SUITES
from squeeze_film.errors import ConfigurationError, IterationError
from squeeze_film.helpers.config import SolverConfig
from squeeze_film.verify import (
    COVERAGE,
    CheckRecord,
    VerificationReport,
    VerifyContext,
    _run_check,
    async_run_suite,
    check_rng,
    run_suite,
    suite_checks,
)

from .const import EQUILIBRIUM_CONFIG


class TestCheckRecord(TestCase):
    def test_nan_never_passes(self):
        self.assertFalse(CheckRecord.compare("x", math.nan, 1.0).passed)
        self.assertFalse(CheckRecord.compare("x", math.nan, 1.0, sense=">=").passed)

    def test_slack_widens_bound(self):
        self.assertFalse(CheckRecord.compare("x", 1.05, 1.0).passed)
        self.assertTrue(CheckRecord.compare("x", 1.05, 1.0, slack=0.1).passed)
        self.assertTrue(CheckRecord.compare("x", 0.95, 1.0, 0.1, ">=").passed)
        self.assertFalse(CheckRecord.compare("x", 0.85, 1.0, 0.1, ">=").passed)

    def test_strict_senses(self):
        self.assertFalse(CheckRecord.compare("x", 1.0, 1.0, sense="<").passed)
        self.assertTrue(CheckRecord.compare("x", 1.0, 1.0, sense="<=").passed)
        self.assertFalse(CheckRecord.compare("x", 1.0, 1.0, sense=">").passed)
        self.assertTrue(CheckRecord.compare("x", 2.0, 1.0, sense=">").passed)

    def test_as_dict(self):
        data = CheckRecord.compare("x", 1.0, 2.0, mesh_levels=[15, 31]).as_dict()
        self.assertEqual(data["mesh_levels"], [15, 31])
        self.assertTrue(data["passed"])


class TestReport(TestCase):
    def setUp(self):
        self.report = VerificationReport(
            "semigroup",
            [
                CheckRecord.compare("zeta", 1.0, 2.0),
                CheckRecord.compare("alpha", 3.0, 2.0),
            ],
        )

    def test_checks_are_sorted(self):
        self.assertEqual([r.name for r in self.report.checks], ["alpha", "zeta"])

    def test_failures(self):
        self.assertFalse(self.report.passed)
        self.assertEqual([r.name for r in self.report.failures], ["alpha"])

    def test_table(self):
        lines = self.report.table().splitlines()
        self.assertEqual(len(lines), 4)
        self.assertTrue(lines[1].startswith("alpha"))
        self.assertTrue(lines[1].endswith("FAIL"))
        self.assertEqual(lines[-1], "semigroup: 1/2 passed")

    def test_json(self):
        data = json.loads(self.report.to_json())
        self.assertEqual(data["failures"], 1)
        self.assertFalse(data["passed"])
        self.assertEqual(data["checks"][0]["name"], "alpha")


class TestRegistry(TestCase):
    def test_every_invariant_belongs_to_one_suite(self):
        self.assertTrue(COVERAGE)
        for invariant, suites in COVERAGE.items():
            self.assertEqual(len(suites), 1, f"{invariant} is checked by {suites}")
            self.assertIn(suites[0], SUITES)

    def test_every_suite_has_checks(self):
        for suite in SUITES:
            self.assertTrue(suite_checks(suite), f"{suite} has no checks")

    def test_rng_depends_on_seed_and_name(self):
        a = check_rng(3, "check_a").random(4)
        self.assertListEqual(list(a), list(check_rng(3, "check_a").random(4)))
        self.assertNotEqual(list(a), list(check_rng(3, "check_b").random(4)))
        self.assertNotEqual(list(a), list(check_rng(4, "check_a").random(4)))

    def test_solver_failure_becomes_a_failed_record(self):
        def exploding_check(ctx, rng):
            raise IterationError("did not converge", [0.9, 0.95])

        records = _run_check(exploding_check, MagicMock(), 0)
        self.assertEqual(len(records), 1)
        self.assertEqual(records[0].name, "exploding_check")
        self.assertFalse(records[0].passed)
        self.assertTrue(math.isnan(records[0].measured))

    def test_check_receives_context_and_rng(self):
        seen = MagicMock(return_value=[])
        seen.__name__ = "seen_check"
        ctx = VerifyContext(SolverConfig(EQUILIBRIUM_CONFIG))
        self.assertEqual(_run_check(seen, ctx, 5), [])
        passed_ctx, rng = seen.call_args.args
        self.assertIs(passed_ctx, ctx)
        self.assertEqual(rng.random(), check_rng(5, "seen_check").random())


class TestSuites(TestCase):
    def setUp(self):
        self.cfg = SolverConfig(EQUILIBRIUM_CONFIG)

    def test_unknown_suite(self):
        with self.assertRaises(ConfigurationError) as e:
            run_suite("bogus", self.cfg)
        self.assertEqual(e.exception.field, "suite")

    def test_semigroup_suite_passes(self):
        report = run_suite("semigroup", self.cfg)
        self.assertTrue(report.passed, report.table())
        names = {r.name for r in report.checks}
        self.assertIn("semigroup.isometry", names)
        self.assertEqual(report.fingerprint["suite"], "semigroup")
        self.assertEqual(report.fingerprint["config_sha256"], self.cfg.sha256)

    def test_results_do_not_depend_on_workers(self):
        serial = run_suite("appendixA", self.cfg, workers=1)
        parallel = run_suite("appendixA", self.cfg, workers=4)
        self.assertEqual(serial.to_json(), parallel.to_json())


class TestSuiteOutcomes(TestCase):
    """Every suite on the default configuration."""

    def assertSuitePasses(self, suite):
        report = run_suite(suite, SolverConfig())
        self.assertTrue(report.passed, report.table())
        self.assertGreaterEqual(len(report.checks), len(suite_checks(suite)))
        return report

    def test_hyperbolic_suite(self):
        self.assertSuitePasses("hyperbolic")

    def test_frechet_suite(self):
        self.assertSuitePasses("frechet")

    def test_parabolic_suite(self):
        self.assertSuitePasses("parabolic")

    def test_coupled_suite(self):
        report = self.assertSuitePasses("coupled")
        names = {r.name for r in report.checks}
        self.assertIn("coupled.certified_horizon", names)
        self.assertIn("oracle.agreement.u", names)

    def test_steady_suite(self):
        self.assertSuitePasses("steady")


@pytest.mark.asyncio
async def test_async_suite_reports_every_check():
    cfg = SolverConfig(EQUILIBRIUM_CONFIG)
    report = await async_run_suite("semigroup", cfg, workers=2)
    assert len(report.checks) >= len(suite_checks("semigroup"))
    assert report.suite == "semigroup"
