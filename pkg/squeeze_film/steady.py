"""
Steady membrane deflection w'' = β_F/w², w = 1 on the boundary, and the
pull-in threshold beyond which it has no solution.
"""
from __future__ import annotations

import asyncio
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
import logging
import math

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError
from .grid import Field, Grid1D

_LOGGER = logging.getLogger(__name__)

MIN_CONTINUATION_STEP = 1e-6
MIN_DAMPING = 1 / 1024
DEFAULT_TOL = 1e-10
DEFAULT_MAX_NEWTON = 50


@dataclass
class SteadyResult:
    """Outcome of a steady solve; solution is None when no solution was found."""

    beta_F: float
    solution: Field | None
    newton_iters: int
    residual: float
    min_w: float

    @property
    def solvable(self):
        return self.solution is not None

    def as_dict(self):
        return {
            "beta_F": self.beta_F,
            "solvable": self.solvable,
            "newton_iters": self.newton_iters,
            "residual": self.residual,
            "min_w": self.min_w,
        }


@dataclass
class PullinResult:
    estimate: float
    bracket: tuple
    upper_bound: float
    evaluations: list = field(default_factory=list)
    monotone: bool = True

    @property
    def width(self):
        return self.bracket[1] - self.bracket[0]

    def as_dict(self):
        return {
            "estimate": self.estimate,
            "bracket": list(self.bracket),
            "upper_bound": self.upper_bound,
            "monotone": self.monotone,
            "evaluations": [list(e) for e in self.evaluations],
        }


def pullin_upper_bound(length):
    """4μ₀/27 with μ₀ = (π/L)² the principal Dirichlet eigenvalue."""
    return 4 * (math.pi / length) ** 2 / 27


def _residual(w, beta_F, grid: Grid1D):
    full = grid.pad(w, 1.0)
    second = (full[2:] - 2 * full[1:-1] + full[:-2]) / grid.spacing**2
    return second - beta_F / w**2


def _newton(w, beta_F, grid: Grid1D, tol, max_newton):
    """Damped Newton; returns (w, iterations, residual) or None on failure."""
    h2 = grid.spacing**2
    n = grid.n_nodes
    r = _residual(w, beta_F, grid)
    size = float(np.max(np.abs(r)))
    for iteration in range(max_newton + 1):
        if size <= tol * (1 + beta_F):
            return w, iteration, size
        if iteration == max_newton:
            break
        bands = np.zeros((3, n))
        bands[0, 1:] = 1 / h2
        bands[1] = -2 / h2 + 2 * beta_F / w**3
        bands[2, :-1] = 1 / h2
        try:
            step = solve_banded((1, 1), bands, -r)
        except (ValueError, np.linalg.LinAlgError):
            return None
        damping = 1.0
        while damping >= MIN_DAMPING:
            trial = w + damping * step
            if trial.min() > 0:
                trial_r = _residual(trial, beta_F, grid)
                trial_size = float(np.max(np.abs(trial_r)))
                if trial_size < size or trial_size <= tol * (1 + beta_F):
                    w, r, size = trial, trial_r, trial_size
                    break
            damping /= 2
        else:
            return None
    return None


def steady_membrane(
    beta_F,
    grid: Grid1D,
    tol=DEFAULT_TOL,
    max_newton=DEFAULT_MAX_NEWTON,
    start=None,
):
    """
    Solve the steady membrane equation on the maximal branch.

    Continuation runs from start = (beta, w) (default β_F = 0, w ≡ 1) towards
    beta_F, halving the load step whenever Newton fails; the load is declared
    unsolvable once the step drops below MIN_CONTINUATION_STEP.
    """
    if not isinstance(beta_F, (int, float)) or not math.isfinite(beta_F) or beta_F < 0:
        raise ConfigurationError(
            f"must be a nonnegative number, got {beta_F!r}", "beta_F"
        )
    beta, w = start if start is not None else (0.0, np.ones(grid.n_nodes))
    if beta > beta_F:
        beta, w = 0.0, np.ones(grid.n_nodes)
    w = np.array(w, dtype=float)
    step = beta_F - beta
    total_iters = 0
    last_residual = float(np.max(np.abs(_residual(w, beta, grid))))

    while True:
        target = beta_F if step >= beta_F - beta else beta + step
        found = _newton(w, target, grid, tol, max_newton)
        if found is None:
            step /= 2
            if step < MIN_CONTINUATION_STEP:
                _LOGGER.debug("Continuation stalled at beta_F = %.9g", beta)
                break
            continue
        w, iters, last_residual = found
        total_iters += iters
        beta = target
        if beta == beta_F:
            return SteadyResult(
                beta_F, Field(grid, w, 1.0), total_iters, last_residual, float(w.min())
            )
        step = beta_F - beta

    return SteadyResult(beta_F, None, total_iters, last_residual, float(w.min()))


def pullin_threshold(
    grid: Grid1D, bracket_tol=1e-3, tol=DEFAULT_TOL, max_newton=DEFAULT_MAX_NEWTON
):
    """
    Bisection on β_F over (0, 4μ₀/27) with solvability as the predicate.

    Every evaluation continues from the largest solvable load found so far.
    """
    if not bracket_tol > 0:
        raise ConfigurationError(f"must be positive, got {bracket_tol}", "tol")
    upper = pullin_upper_bound(grid.length)
    lo, hi = 0.0, upper
    lo_state = (0.0, np.ones(grid.n_nodes))
    evaluations = [(0.0, True)]

    top = steady_membrane(hi, grid, tol, max_newton, start=lo_state)
    evaluations.append((hi, top.solvable))
    if top.solvable:
        _LOGGER.warning("Steady solution found at the upper bound %.6g", hi)

    while hi - lo > bracket_tol:
        mid = (lo + hi) / 2
        result = steady_membrane(mid, grid, tol, max_newton, start=lo_state)
        evaluations.append((mid, result.solvable))
        if result.solvable:
            lo = mid
            lo_state = (mid, result.solution.values)
        else:
            hi = mid
        _LOGGER.debug("Pull-in bracket [%.9g, %.9g]", lo, hi)

    solvable = [b for b, ok in evaluations if ok]
    unsolvable = [b for b, ok in evaluations if not ok]
    monotone = not (solvable and unsolvable and max(solvable) > min(unsolvable))
    if not monotone:
        _LOGGER.warning(
            "Solvability is not monotone in beta_F: solvable at %.6g, not at %.6g",
            max(solvable),
            min(unsolvable),
        )
    return PullinResult((lo + hi) / 2, (lo, hi), upper, evaluations, monotone)


async def async_sweep_steady(
    betas, grid: Grid1D, tol=DEFAULT_TOL, max_newton=DEFAULT_MAX_NEWTON, workers=None
):
    """Independent steady solves for a list of loads, in input order."""
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=workers) as executor:
        jobs = [
            loop.run_in_executor(
                executor, partial(steady_membrane, float(b), grid, tol, max_newton)
            )
            for b in betas
        ]
        return list(await asyncio.gather(*jobs))


def parse_sweep(text):
    """Parse LO:HI:N into N evenly spaced loads."""
    try:
        lo, hi, count = text.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise ConfigurationError(f"expected LO:HI:N, got {text!r}", "sweep")
    if count < 1 or lo < 0 or hi < lo:
        raise ConfigurationError(f"invalid range {text!r}", "sweep")
    return np.linspace(lo, hi, count)
