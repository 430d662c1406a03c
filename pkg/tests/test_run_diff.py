"""Tests for the run comparison script"""
from contextlib import redirect_stderr, redirect_stdout
import io
import os
from tempfile import TemporaryDirectory
from unittest import TestCase

import numpy as np

from squeeze_film.grid import TrajectoryPath, build_grid, path_to_csv
from util.run_diff import compare_runs, main


class TestRunDiff(TestCase):
    def setUp(self):
        self.folder = TemporaryDirectory()
        self.grid = build_grid(1.0, 7)
        root = self.folder.name
        self.first = os.path.join(root, "first")
        self.second = os.path.join(root, "second")
        values = np.ones((5, 7))
        self.write(self.first, "oracle/u.csv", values)
        self.write(self.first, "oracle/w.csv", values)
        self.write(self.second, "oracle/u.csv", values + 0.25)

    def tearDown(self):
        self.folder.cleanup()

    def write(self, run, name, values):
        fname = os.path.join(run, name)
        os.makedirs(os.path.dirname(fname), exist_ok=True)
        path_to_csv(TrajectoryPath(self.grid, 0.1, values), fname)

    def test_common_files_are_compared(self):
        diffs = compare_runs(self.first, self.second)
        self.assertEqual(list(diffs), ["oracle/u.csv"])
        self.assertAlmostEqual(diffs["oracle/u.csv"], 0.25 / 1.25)

    def test_identical_runs(self):
        diffs = compare_runs(self.first, self.first)
        self.assertEqual(diffs, {"oracle/u.csv": 0.0, "oracle/w.csv": 0.0})

    def test_main(self):
        out = io.StringIO()
        with redirect_stdout(out):
            self.assertEqual(main([self.first, self.second]), 0)
        self.assertIn("oracle/u.csv: 2.000e-01", out.getvalue())

    def test_main_errors(self):
        with redirect_stderr(io.StringIO()):
            self.assertEqual(main([self.first]), 2)
            empty = os.path.join(self.folder.name, "empty")
            os.makedirs(empty)
            self.assertEqual(main([self.first, empty]), 1)
