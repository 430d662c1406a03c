"""
Verification suites.

Each check measures a quantity, compares it with a bound and returns one or
more CheckRecords. Checks register themselves against a suite together with
the invariants they cover; COVERAGE maps every invariant to its suites.
"""
from __future__ import annotations

import asyncio
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from hashlib import sha256
import logging
import math
import operator
from typing import NamedTuple

import numpy as np

from .const import (
    CONF_LENGTH,
    CONF_MODES,
    CONF_NODES,
    NORM_H1,
    NORM_H2,
    NORM_L2,
    RADIUS_FRACTION,
    SUITE_ALL,
    SUITE_APPENDIX,
    SUITE_COUPLED,
    SUITE_FRECHET,
    SUITE_HYPERBOLIC,
    SUITE_PARABOLIC,
    SUITE_SEMIGROUP,
    SUITE_STEADY,
    SUITES,
)
from .diagnostics import field_difference, package_version, to_json
from .errors import ConfigurationError, SolverError
from .grid import (
    Field,
    TrajectoryPath,
    _norms,
    band_limited_field,
    build_grid,
    embedding_constant,
    holder_fit,
    holder_norm,
    modal_l2_norm,
    sine_derivative,
    sine_eigenbasis,
    sobolev_norm,
)
from .helpers.config import initial_fields
from .helpers.scenario_config import get_scenario
from .hyperbolic import (
    GAP_SLACK,
    HyperbolicInit,
    PhysicalConstants,
    PicardSettings,
    gap_constants,
    delta_o,
    estimate_L_G,
    frechet_W,
    g_reaction,
    horizon_T0,
    lipschitz_W,
    solve_wave_picard,
)
from .oracle import flux_balance_residual, integrate_mol, mol_solve
from .parabolic import (
    CONTRACTION_TARGET,
    M0,
    CoupledProblem,
    _reynolds,
    assemble_linearization,
    coupled_horizon,
    garding_constants,
    gamma_fixed_point,
    graph_norm_constant,
    holder_probe_path,
    largest_contractive_horizon,
    sector_report,
    solve_coupled,
    triple_increments,
)
from .steady import pullin_threshold, pullin_upper_bound, steady_membrane
from .wave import (
    WavePath,
    WaveState,
    apply_semigroup,
    duhamel,
    state_norm,
    state_norms,
)

_LOGGER = logging.getLogger(__name__)

SENSES = {
    "<=": operator.le,
    ">=": operator.ge,
    "<": operator.lt,
    ">": operator.gt,
}

CONTRACTION_LIMIT = 0.55
MAX_ITERATIONS = 30
HOLDER_MARGIN = 0.1
MESH_DRIFT = 0.2
GROUP_TOL = 1e-10
N_STATES = 100
N_PAIRS = 50
N_CONFIGS = 3
N_GARDING_SETS = 5
GENERIC_AMPLITUDE = 0.05
WAVE_STEPS = 32
SEMIGROUP_TIMES = (0.1, 1.0, 10.0)
HOLDER_EXPONENTS = (0.25, 0.5, 0.75)

FRECHET_HORIZON = 0.25
FRECHET_STEPS = 64
FRECHET_TOL = 1e-13
FRECHET_DIRECTION = 3.0
FD_STEPS = np.geomspace(1e-2, 1e-4, 7)

PARABOLIC_HORIZON = 0.01
PARABOLIC_STEPS = 32
COUPLED_STEPS = 16
AGREEMENT_TOL = 2e-3
AGREEMENT_SCENARIOS = ("small_data_1", "small_data_2", "small_data_3")
CONVERGENCE_LEVELS = (15, 31, 63)
CONVERGENCE_REFERENCE = 255
CONVERGENCE_PROFILE = "mode:1:0.01"
QUENCH_SCENARIO = "quench_pinned"
QUENCH_WINDOW = (0.25, 0.6)

_CHECKS = {suite: [] for suite in SUITES}
COVERAGE = {}


@dataclass(frozen=True)
class CheckRecord:
    """One measured quantity and the bound it was held against."""

    name: str
    measured: float
    bound: float
    passed: bool
    slack: float = 0.0
    sense: str = "<="
    mesh_levels: tuple = ()

    @classmethod
    def compare(cls, name, measured, bound, slack=0.0, sense="<=", mesh_levels=()):
        """Build a record; NaN measurements never pass."""
        measured, bound = float(measured), float(bound)
        margin = slack * abs(bound)
        allowed = bound + margin if "<" in sense else bound - margin
        passed = bool(SENSES[sense](measured, allowed))
        if not passed:
            _LOGGER.warning(
                "Check %s failed: %.6g %s %.6g", name, measured, sense, bound
            )
        return cls(name, measured, bound, passed, slack, sense, tuple(mesh_levels))

    def as_dict(self):
        return {
            "name": self.name,
            "measured": self.measured,
            "bound": self.bound,
            "passed": self.passed,
            "slack": self.slack,
            "sense": self.sense,
            "mesh_levels": list(self.mesh_levels),
        }


@dataclass
class VerificationReport:
    suite: str
    checks: list
    fingerprint: dict = field(default_factory=dict)

    def __post_init__(self):
        self.checks = sorted(self.checks, key=lambda r: r.name)

    @property
    def passed(self):
        return all(r.passed for r in self.checks)

    @property
    def failures(self):
        return [r for r in self.checks if not r.passed]

    def as_dict(self):
        return {
            "suite": self.suite,
            "passed": self.passed,
            "failures": len(self.failures),
            "fingerprint": self.fingerprint,
            "checks": [r.as_dict() for r in self.checks],
        }

    def to_json(self):
        return to_json(self.as_dict())

    def table(self):
        """Plain-text table, one line per check."""
        width = max([len(r.name) for r in self.checks] + [5])
        lines = [f"{'check':<{width}}  {'measured':>14}     {'bound':<14}  result"]
        for r in self.checks:
            lines.append(
                f"{r.name:<{width}}  {r.measured:>14.6g}  {r.sense:>2} "
                f"{r.bound:<14.6g}  {'pass' if r.passed else 'FAIL'}"
            )
        lines.append(
            f"{self.suite}: {len(self.checks) - len(self.failures)}"
            f"/{len(self.checks)} passed"
        )
        return "\n".join(lines)


def check(suite, *invariants):
    """Register a check function under a suite and the invariants it covers."""

    def decorator(func):
        _CHECKS[suite].append(func)
        for invariant in invariants:
            COVERAGE.setdefault(invariant, []).append(suite)
        return func

    return decorator


def suite_checks(suite):
    return list(_CHECKS[suite])


def check_rng(seed, name):
    """Generator seeded from (seed, check name), independent of scheduling."""
    digest = int(sha256(name.encode("utf-8")).hexdigest()[:16], 16)
    return np.random.default_rng(np.random.SeedSequence([seed, digest]))


@dataclass(frozen=True, eq=False)
class VerifyContext:
    cfg: object

    @property
    def constants(self):
        return self.cfg.constants

    @cached_property
    def basis(self):
        return self.cfg.basis

    @property
    def grid(self):
        return self.basis.grid

    @property
    def n_active(self):
        return max(1, self.cfg.n_modes // 4)

    def mesh(self, factor):
        """Basis on a grid with (n_nodes + 1)·factor - 1 nodes."""
        if factor == 1:
            return self.basis
        grid = build_grid(self.cfg.length, (self.cfg.n_nodes + 1) * factor - 1)
        return sine_eigenbasis(grid, min(grid.n_nodes, self.cfg.n_modes * factor))


def _seed(rng):
    return int(rng.integers(2**32))


def _probe(grid, rng, n_active):
    g = band_limited_field(grid, rng, n_active)
    return g / float(np.max(np.abs(g)))


def _generic_fields(basis, seed, c: PhysicalConstants, n_active, amplitude=None):
    """
    Smooth data near (θ₁, 0, θ₂); a seed gives the same functions on any grid.
    """
    amplitude = GENERIC_AMPLITUDE if amplitude is None else amplitude
    rng = np.random.default_rng(seed)
    grid = basis.grid
    u0 = Field(grid, c.theta1 * (1 + amplitude * _probe(grid, rng, n_active)), c.theta1)
    v0 = Field(grid, c.theta2 * amplitude * _probe(grid, rng, n_active))
    w0 = Field(grid, c.theta2 * (1 + amplitude * _probe(grid, rng, n_active)), c.theta2)
    return u0, v0, w0


def _scaled(grid, rng, n_active, size, order=NORM_H2):
    g = band_limited_field(grid, rng, n_active)
    return g * size / float(_norms(g, grid, order))


def _kinked(times, rng, alpha):
    """|t - t*|^α normalised to at most 1."""
    horizon = times[-1]
    kink = rng.uniform(0, horizon)
    return (np.abs(times - kink) / horizon) ** alpha


class WaveSetup(NamedTuple):
    u0: Field
    init: HyperbolicInit
    settings: PicardSettings
    c_emb: float
    L_G: float
    T0: float


def _wave_setup(ctx, basis, seed, tol=None, max_iter=None):
    c = ctx.constants
    u0, v0, w0 = _generic_fields(basis, seed, c, ctx.n_active)
    init = HyperbolicInit(v0, w0)
    c_emb = embedding_constant(basis)
    settings = PicardSettings(
        RADIUS_FRACTION * init.kappa / (2 * c_emb),
        tol or ctx.cfg.picard_tol,
        max_iter or ctx.cfg.max_iter,
    )
    L_G = estimate_L_G(init, settings, c, c_emb)
    T0 = horizon_T0(
        c,
        init,
        settings,
        M0,
        L_G,
        delta_o(init, settings, basis),
        c_emb,
        u0.values - c.theta1,
    )
    return WaveSetup(u0, init, settings, c_emb, L_G, T0.value)


def _pressure(u0: Field, times, deviation):
    """Pressure path u₀ + deviation(t)."""
    return TrajectoryPath(u0.grid, times[-1], u0.values + deviation, u0.boundary)


def _coupled_problem(ctx, basis, seed, horizon, n_steps):
    cfg = ctx.cfg
    u0, v0, w0 = _generic_fields(basis, seed, ctx.constants, ctx.n_active)
    return CoupledProblem(
        ctx.constants,
        basis,
        u0,
        v0,
        w0,
        horizon,
        n_steps,
        cfg.alpha,
        None,
        cfg.picard_tol,
        cfg.gamma_tol,
        cfg.max_iter,
    )


def _drift(coarse, fine):
    return abs(fine - coarse) / abs(coarse) if coarse else math.inf


def _levels(ctx, *factors):
    return tuple((ctx.cfg.n_nodes + 1) * f - 1 for f in factors)


# Grid


@check(SUITE_APPENDIX, "grid.parseval", "grid.round_trip", "grid.norm_ordering")
def check_grid_norms(ctx, rng):
    grid, basis = ctx.grid, ctx.basis
    parseval = round_trip = ordering = 0.0
    for _ in range(N_STATES):
        f = Field(grid, band_limited_field(grid, rng, ctx.n_active))
        trapezoid = sobolev_norm(f)
        parseval = max(parseval, abs(modal_l2_norm(f) - trapezoid) / trapezoid)
        back = basis.from_modes(basis.to_modes(f.values))
        round_trip = max(
            round_trip,
            float(np.max(np.abs(back - f.values)) / np.max(np.abs(f.values))),
        )
        l2, h1, h2 = (sobolev_norm(f, order) for order in (NORM_L2, NORM_H1, NORM_H2))
        ordering = max(ordering, l2 - h1, h1 - h2)
    eps = np.finfo(float).eps
    return [
        CheckRecord.compare("grid.parseval", parseval, 10 * eps * grid.n_nodes),
        CheckRecord.compare("grid.round_trip", round_trip, 1e-12),
        CheckRecord.compare("grid.norm_ordering", ordering, 0.0),
    ]


@check(SUITE_APPENDIX, "grid.algebra")
def check_algebra(ctx, rng):
    """‖fg‖_H1 ≤ C_alg‖f‖_H1‖g‖_H1 with C_alg fixed on the coarse mesh."""
    seed = _seed(rng)
    worst = []
    for factor in (1, 2):
        grid = ctx.mesh(factor).grid
        local = np.random.default_rng(seed)
        ratios = []
        for _ in range(N_PAIRS):
            f = Field(grid, band_limited_field(grid, local, ctx.n_active))
            g = Field(grid, band_limited_field(grid, local, ctx.n_active))
            fg = Field(grid, f.values * g.values)
            ratios.append(
                sobolev_norm(fg, NORM_H1)
                / (sobolev_norm(f, NORM_H1) * sobolev_norm(g, NORM_H1))
            )
        worst.append(max(ratios))
    c_alg = (1 + MESH_DRIFT) * worst[0]
    return [
        CheckRecord.compare(
            "grid.algebra", worst[1], c_alg, mesh_levels=_levels(ctx, 1, 2)
        )
    ]


@check(SUITE_APPENDIX, "grid.embedding")
def check_embedding(ctx, rng):
    constants = [embedding_constant(ctx.mesh(f)) for f in (1, 2)]
    grid = ctx.grid
    worst = 0.0
    for _ in range(N_STATES):
        f = Field(grid, band_limited_field(grid, rng, ctx.n_active))
        worst = max(worst, float(np.max(np.abs(f.values))) / sobolev_norm(f, NORM_H1))
    return [
        CheckRecord.compare("grid.embedding", worst, constants[0], slack=1e-12),
        CheckRecord.compare(
            "grid.embedding.refinement",
            _drift(*constants),
            0.05,
            mesh_levels=_levels(ctx, 1, 2),
        ),
    ]


@check(
    SUITE_APPENDIX,
    "gap.C1",
    "gap.C2",
    "gap.C3",
    "gap.L_G",
    "gap.lower_bound",
)
def check_gap_constants(ctx, rng):
    """Random-pair suprema over the ball ‖w - w₀‖_H1 ≤ κ/(2C) vs formulas."""
    c, basis = ctx.constants, ctx.basis
    grid = basis.grid
    _, _, w0 = _generic_fields(basis, _seed(rng), c, ctx.n_active)
    kappa = float(min(w0.values.min(), w0.boundary))
    c_emb = embedding_constant(basis)
    ball = kappa / (2 * c_emb)
    const = gap_constants(kappa, sobolev_norm(w0, NORM_H1), c_emb, c.beta_F)

    def point():
        radius = ball * rng.uniform(0.5, 1.0)
        return w0.values + _scaled(grid, rng, ctx.n_active, radius, NORM_H1)

    def h1(values, boundary):
        return sobolev_norm(Field(grid, values, boundary), NORM_H1)

    inverse = c2 = c3 = lg = 0.0
    lowest = math.inf
    t2 = c.theta2
    for _ in range(N_PAIRS):
        w1, w2 = point(), point()
        lowest = min(lowest, w1.min() - kappa / 2, w2.min() - kappa / 2)
        inverse = max(inverse, h1(1 / w1, 1 / t2))
        step = h1(w1 - w2, 0.0)
        c2 = max(c2, h1(1 / w1**2 - 1 / w2**2, 0.0) / step)
        c3 = max(c3, h1(1 / w1**3 - 1 / w2**3, 0.0) / step)
        g1 = g_reaction(w1 - t2, c)
        g2 = g_reaction(w2 - t2, c)
        lg = max(lg, h1(g1 - g2, 0.0) / step)
    return [
        CheckRecord.compare("gap.C1", inverse, const.C1),
        CheckRecord.compare("gap.C2", c2, const.C2),
        CheckRecord.compare("gap.C3", c3, const.C3),
        CheckRecord.compare("gap.L_G", lg, const.L_G, slack=1e-12),
        CheckRecord.compare("gap.lower_bound", lowest, -GAP_SLACK, sense=">="),
    ]


# Wave group


def _random_state(basis, rng, n_active):
    grid = basis.grid
    return WaveState(
        grid,
        band_limited_field(grid, rng, n_active),
        band_limited_field(grid, rng, n_active),
    )


def _state_distance(a: WaveState, b: WaveState):
    return float(state_norms(a.v - b.v, a.w_tilde - b.w_tilde, a.grid))


@check(
    SUITE_SEMIGROUP, "semigroup.isometry", "semigroup.group_law", "semigroup.inverse"
)
def check_wave_group(ctx, rng):
    basis = ctx.basis
    isometry = law = inverse = 0.0
    for _ in range(N_STATES):
        s = _random_state(basis, rng, ctx.n_active)
        size = state_norm(s)
        for t in SEMIGROUP_TIMES:
            moved = apply_semigroup(t, s, basis)
            isometry = max(isometry, abs(state_norm(moved) - size) / size)
            back = apply_semigroup(-t, moved, basis)
            inverse = max(inverse, _state_distance(back, s) / size)
        t1, t2 = (float(t) for t in rng.choice(SEMIGROUP_TIMES, 2))
        composed = apply_semigroup(t1, apply_semigroup(t2, s, basis), basis)
        direct = apply_semigroup(t1 + t2, s, basis)
        law = max(law, _state_distance(composed, direct) / size)
    return [
        CheckRecord.compare("semigroup.isometry", isometry, GROUP_TOL),
        CheckRecord.compare("semigroup.group_law", law, GROUP_TOL),
        CheckRecord.compare("semigroup.inverse", inverse, GROUP_TOL),
    ]


@check(SUITE_SEMIGROUP, "semigroup.duhamel")
def check_duhamel_single_mode(ctx, rng):
    """Forcing sin(ω₁s)φ_k from rest against the closed-form modal solution."""
    basis = ctx.basis
    grid = basis.grid
    horizon, n_steps = 0.1, 512
    t = np.linspace(0.0, horizon, n_steps + 1)
    omega = basis.frequencies
    drive = omega[0]
    records = []
    for k in range(min(2, basis.n_modes)):
        forcing = np.sin(drive * t)[:, None] * basis.mode_shapes[k]
        forcing = TrajectoryPath(grid, horizon, forcing)
        path = duhamel(WaveState.zero(grid), forcing, basis)
        w_k = basis.to_modes(path.w_tilde.values)[:, k]
        v_k = basis.to_modes(path.v.values)[:, k]
        if k == 0:
            w_exact = np.sin(drive * t) - drive * t * np.cos(drive * t)
            w_exact /= 2 * drive**2
            v_exact = t * np.sin(drive * t) / 2
            name = "semigroup.duhamel.resonant"
        else:
            wk = omega[k]
            w_exact = np.sin(drive * t) - drive / wk * np.sin(wk * t)
            w_exact /= wk**2 - drive**2
            v_exact = drive * (np.cos(drive * t) - np.cos(wk * t)) / (wk**2 - drive**2)
            name = "semigroup.duhamel.nonresonant"
        error = max(np.max(np.abs(w_k - w_exact)), np.max(np.abs(v_k - v_exact)))
        records.append(CheckRecord.compare(name, error, 1e-8))
    return records


@check(SUITE_SEMIGROUP, "semigroup.constant_forcing")
def check_constant_forcing(ctx, rng):
    """Unit forcing from rest: w(1/2, 1/4) = 1/32 before the boundary is felt."""
    grid = build_grid(1.0, 2047)
    basis = sine_eigenbasis(grid, 1024)
    forcing = TrajectoryPath(grid, 0.25, np.ones((513, grid.n_nodes)))
    path = duhamel(WaveState.zero(grid), forcing, basis)
    centre = int(np.argmin(np.abs(grid.nodes - 0.5)))
    value = float(path.w_tilde.values[-1, centre])
    return [
        CheckRecord.compare("semigroup.constant_forcing", abs(value - 0.03125), 1e-3)
    ]


# Hyperbolic solver


@check(SUITE_HYPERBOLIC, "hyperbolic.contraction", "hyperbolic.lower_bound")
def check_wave_contraction(ctx, rng):
    c, basis = ctx.constants, ctx.basis
    ratios, iterations, margins = [], [], []
    for _ in range(N_CONFIGS):
        setup = _wave_setup(ctx, basis, _seed(rng))
        u_path = TrajectoryPath.constant(setup.u0, setup.T0 / 2, WAVE_STEPS)
        solved = solve_wave_picard(u_path, setup.init, c, setup.settings, basis)
        ratios.append(solved.final_ratio)
        iterations.append(solved.iterations)
        margins.append(solved.min_gap - setup.init.kappa / 2)
    return [
        CheckRecord.compare("hyperbolic.contraction", max(ratios), CONTRACTION_LIMIT),
        CheckRecord.compare("hyperbolic.iterations", max(iterations), MAX_ITERATIONS),
        CheckRecord.compare(
            "hyperbolic.lower_bound", min(margins), -GAP_SLACK, sense=">="
        ),
    ]


@check(SUITE_HYPERBOLIC, "hyperbolic.operator_lipschitz")
def check_wave_lipschitz(ctx, rng):
    c, basis = ctx.constants, ctx.basis
    grid = basis.grid
    setup = _wave_setup(ctx, basis, _seed(rng))
    times = np.linspace(0.0, setup.T0 / 2, WAVE_STEPS + 1)
    size = setup.settings.radius / 4
    L_W = lipschitz_W(setup.T0, M0, setup.L_G, c.beta_p)
    worst = 0.0
    for _ in range(N_PAIRS):
        paths = [
            _pressure(
                setup.u0,
                times,
                _kinked(times, rng, 0.5)[:, None]
                * _scaled(grid, rng, ctx.n_active, size),
            )
            for _ in range(2)
        ]
        solved = [
            solve_wave_picard(p, setup.init, c, setup.settings, basis).path
            for p in paths
        ]
        spread = paths[0].sup_distance(paths[1], NORM_H2)
        if spread > 0:
            worst = max(worst, solved[0].sup_distance(solved[1]) / spread)
    return [CheckRecord.compare("hyperbolic.operator_lipschitz", worst, L_W)]


@check(
    SUITE_HYPERBOLIC, "hyperbolic.lipschitz_in_time", "hyperbolic.holder_propagation"
)
def check_wave_time_regularity(ctx, rng):
    c, basis = ctx.constants, ctx.basis
    grid = basis.grid
    setup = _wave_setup(ctx, basis, _seed(rng))
    times = np.linspace(0.0, setup.T0 / 2, WAVE_STEPS + 1)
    g = _scaled(grid, rng, ctx.n_active, setup.settings.radius / 4)

    def fitted(profile):
        u_path = _pressure(setup.u0, times, profile[:, None] * g)
        solved = solve_wave_picard(u_path, setup.init, c, setup.settings, basis)
        return holder_fit(solved.path).alpha

    records = [
        CheckRecord.compare(
            "hyperbolic.lipschitz_in_time", fitted(times / times[-1]), 0.95, sense=">="
        )
    ]
    for alpha in HOLDER_EXPONENTS:
        records.append(
            CheckRecord.compare(
                f"hyperbolic.holder_propagation[{alpha}]",
                fitted(_kinked(times, rng, alpha)),
                alpha - HOLDER_MARGIN,
                sense=">=",
            )
        )
    return records


# Fréchet derivative of the wave operator


def _frechet_setup(ctx, basis, seed):
    c = ctx.constants
    u0, v0, w0 = _generic_fields(basis, seed, c, ctx.n_active)
    init = HyperbolicInit(v0, w0)
    radius = RADIUS_FRACTION * init.kappa / (2 * embedding_constant(basis))
    settings = PicardSettings(radius, FRECHET_TOL, 4 * ctx.cfg.max_iter)
    times = np.linspace(0.0, FRECHET_HORIZON, FRECHET_STEPS + 1)
    return u0, init, settings, times


@check(SUITE_FRECHET, "frechet.consistency", "frechet.zero_at_start")
def check_frechet_consistency(ctx, rng):
    """Difference quotients of W against W'(u)q as h runs from 1e-2 to 1e-4."""
    c, basis = ctx.constants, ctx.basis
    grid = basis.grid
    u0, init, settings, times = _frechet_setup(ctx, basis, _seed(rng))
    u_path = TrajectoryPath.constant(u0, FRECHET_HORIZON, FRECHET_STEPS)
    q = (
        np.cos(np.pi * times / FRECHET_HORIZON)[:, None]
        * FRECHET_DIRECTION
        * _probe(grid, rng, ctx.n_active)
    )
    base = solve_wave_picard(u_path, init, c, settings, basis)
    q_path = TrajectoryPath(grid, FRECHET_HORIZON, q)
    vq, wq = frechet_W(q_path, base, c, basis, tol=1e-14)
    errors = []
    for h in FD_STEPS:
        moved = solve_wave_picard(
            _pressure(u0, times, h * q), init, c, settings, basis
        ).path
        dv = (moved.v.values - base.path.v.values) / h - vq.values
        dw = (moved.w_tilde.values - base.path.w_tilde.values) / h - wq.values
        errors.append(float(np.max(state_norms(dv, dw, grid))))
    order = float(np.polyfit(np.log(FD_STEPS), np.log(errors), 1)[0])
    start = float(max(np.abs(vq.values[0]).max(), np.abs(wq.values[0]).max()))
    return [
        CheckRecord.compare("frechet.consistency.order", order, 0.8, sense=">="),
        CheckRecord.compare("frechet.consistency.order_upper", order, 1.2),
        CheckRecord.compare("frechet.zero_at_start", start, 1e-12),
    ]


@check(SUITE_FRECHET, "frechet.lipschitz")
def check_frechet_lipschitz(ctx, rng):
    """sup‖W'(u₁)q - W'(u₂)q‖ / sup‖u₁ - u₂‖_H2 on two meshes."""
    c = ctx.constants
    seed = _seed(rng)
    worst = []
    for factor in (1, 2):
        basis = ctx.mesh(factor)
        grid = basis.grid
        local = np.random.default_rng(seed)
        u0, init, settings, times = _frechet_setup(ctx, basis, _seed(local))
        q_path = TrajectoryPath(
            grid,
            FRECHET_HORIZON,
            np.ones((times.size, 1)) * _probe(grid, local, ctx.n_active),
        )
        ratio = 0.0
        for _ in range(N_CONFIGS):
            paths = [
                _pressure(
                    u0,
                    times,
                    (times / FRECHET_HORIZON)[:, None]
                    * _scaled(grid, local, ctx.n_active, settings.radius / 4),
                )
                for _ in range(2)
            ]
            derivatives = []
            for p in paths:
                solved = solve_wave_picard(p, init, c, settings, basis)
                vq, wq = frechet_W(q_path, solved, c, basis)
                derivatives.append(WavePath(vq, wq))
            spread = paths[0].sup_distance(paths[1], NORM_H2)
            ratio = max(ratio, derivatives[0].sup_distance(derivatives[1]) / spread)
        worst.append(ratio)
    return [
        CheckRecord.compare(
            "frechet.lipschitz",
            worst[1],
            (1 + MESH_DRIFT) * worst[0],
            mesh_levels=_levels(ctx, 1, 2),
        )
    ]


@check(SUITE_FRECHET, "frechet.holder")
def check_frechet_holder(ctx, rng):
    c, basis = ctx.constants, ctx.basis
    grid = basis.grid
    u0, init, settings, times = _frechet_setup(ctx, basis, _seed(rng))
    u_path = TrajectoryPath.constant(u0, FRECHET_HORIZON, FRECHET_STEPS)
    solved = solve_wave_picard(u_path, init, c, settings, basis)
    records = []
    for alpha in HOLDER_EXPONENTS:
        q = _kinked(times, rng, alpha)[:, None] * _probe(grid, rng, ctx.n_active)
        q_path = TrajectoryPath(grid, FRECHET_HORIZON, q)
        vq, wq = frechet_W(q_path, solved, c, basis)
        records.append(
            CheckRecord.compare(
                f"frechet.holder[{alpha}]",
                holder_fit(WavePath(vq, wq)).alpha,
                alpha - HOLDER_MARGIN,
                sense=">=",
            )
        )
    return records


# Linearized Reynolds operator


@check(SUITE_PARABOLIC, "parabolic.garding")
def check_garding(ctx, rng):
    c, grid = ctx.constants, ctx.grid
    K, violations = [], 0
    for _ in range(N_GARDING_SETS):
        u0, v0, w0 = _generic_fields(ctx.basis, _seed(rng), c, ctx.n_active)
        P = assemble_linearization(u0, v0, w0, grid)
        report = garding_constants(P, u0, w0, rng, n_probes=N_STATES)
        K.append(report.K)
        violations += report.violations

    u0 = Field(grid, np.full(grid.n_nodes, 2.0), 2.0)
    w0 = Field(grid, np.ones(grid.n_nodes), 1.0)
    P = assemble_linearization(u0, Field(grid, np.zeros(grid.n_nodes)), w0, grid)
    uniform = garding_constants(P, u0, w0, rng, n_probes=N_STATES)
    return [
        CheckRecord.compare("parabolic.garding.K", min(K), 0.0, sense=">"),
        CheckRecord.compare("parabolic.garding.violations", violations, 0),
        CheckRecord.compare("parabolic.garding.uniform_K", abs(uniform.K - 2.0), 1e-12),
        CheckRecord.compare(
            "parabolic.garding.uniform_form", abs(uniform.min_form_ratio - 2.0), 1e-10
        ),
    ]


def _spectral_bound(u0: Field, v0: Field, w0: Field):
    """(‖b‖²/(4 min a) + ‖v₀‖∞)/κ, a = w₀³u₀ and b = w₀³u₀'."""
    grid = u0.grid
    a = w0.full_values**3 * u0.full_values
    b = w0.full_values**3 * sine_derivative(u0.values - u0.boundary, grid)
    kappa = float(min(w0.values.min(), w0.boundary))
    drift = float(np.max(b**2)) / (4 * float(a.min()))
    return (drift + float(np.abs(v0.values).max())) / kappa


@check(SUITE_PARABOLIC, "parabolic.sector")
def check_sector(ctx, rng):
    seed = _seed(rng)
    reports, bound = [], None
    for factor in (1, 2):
        basis = ctx.mesh(factor)
        u0, v0, w0 = _generic_fields(basis, seed, ctx.constants, ctx.n_active)
        reports.append(sector_report(assemble_linearization(u0, v0, w0, basis.grid)))
        bound = bound if bound is not None else _spectral_bound(u0, v0, w0)
    levels = _levels(ctx, 1, 2)
    return [
        CheckRecord.compare("parabolic.sector.omega", reports[0].omega, bound),
        CheckRecord.compare(
            "parabolic.sector.M",
            _drift(reports[0].M, reports[1].M),
            MESH_DRIFT,
            mesh_levels=levels,
        ),
    ]


@check(SUITE_PARABOLIC, "parabolic.graph_norm")
def check_graph_norm(ctx, rng):
    seed = _seed(rng)
    reports = []
    for factor in (1, 2):
        basis = ctx.mesh(factor)
        u0, v0, w0 = _generic_fields(basis, seed, ctx.constants, ctx.n_active)
        P = assemble_linearization(u0, v0, w0, basis.grid)
        reports.append(graph_norm_constant(P, np.random.default_rng(seed), N_STATES))
    return [
        CheckRecord.compare(
            "parabolic.graph_norm.lower", reports[0].lower, 0.0, sense=">"
        ),
        CheckRecord.compare(
            "parabolic.graph_norm",
            _drift(reports[0].gamma0, reports[1].gamma0),
            MESH_DRIFT,
            mesh_levels=_levels(ctx, 1, 2),
        ),
    ]


@check(SUITE_PARABOLIC, "parabolic.f_increment")
def check_f_increment(ctx, rng):
    """Cᵅ-in-time size of F(ũ) along a Hölder pressure path, on two meshes."""
    c = ctx.constants
    seed = _seed(rng)
    sizes = []
    for factor in (1, 2):
        basis = ctx.mesh(factor)
        local = np.random.default_rng(seed)
        problem = _coupled_problem(
            ctx, basis, _seed(local), PARABOLIC_HORIZON, PARABOLIC_STEPS
        )
        probe = holder_probe_path(problem, local)
        u_tilde = problem.u0_tilde + problem.radius / 4 * probe
        wave = solve_wave_picard(
            problem.u_path(u_tilde),
            problem.hyperbolic_init,
            c,
            problem.picard_settings,
            basis,
        )
        gap = wave.path.w_tilde.values + c.theta2
        F = _reynolds(u_tilde, wave.path.v.values, gap, c, basis.grid)
        sizes.append(
            holder_norm(TrajectoryPath(basis.grid, problem.horizon, F), problem.alpha)
        )
    return [
        CheckRecord.compare(
            "parabolic.f_increment",
            _drift(*sizes),
            MESH_DRIFT,
            mesh_levels=_levels(ctx, 1, 2),
        )
    ]


@check(SUITE_PARABOLIC, "parabolic.linearization_error")
def check_linearization_error(ctx, rng):
    c = ctx.constants
    problem = _coupled_problem(
        ctx, ctx.basis, _seed(rng), PARABOLIC_HORIZON, PARABOLIC_STEPS
    )
    u_tilde = np.tile(problem.u0_tilde, (problem.n_steps + 1, 1))
    wave = solve_wave_picard(
        problem.u_path(u_tilde),
        problem.hyperbolic_init,
        c,
        problem.picard_settings,
        problem.basis,
    )
    result = triple_increments(problem, wave, u_tilde, holder_probe_path(problem, rng))
    return [
        CheckRecord.compare(
            "parabolic.linearization_error",
            result.estimate.alpha,
            problem.alpha - HOLDER_MARGIN,
            sense=">=",
        )
    ]


# Coupled system and oracle


@check(SUITE_COUPLED, "coupled.contraction")
def check_coupled_contraction(ctx, rng):
    """Γ iteration at half the certified horizon T₁."""
    problem = _coupled_problem(
        ctx, ctx.basis, _seed(rng), PARABOLIC_HORIZON, COUPLED_STEPS
    )
    horizons = coupled_horizon(problem, rng)
    half = replace(problem, horizon=horizons.T1 / 2)
    solution = solve_coupled(half, certify=False)
    return [
        CheckRecord.compare("coupled.T1", horizons.T1, 0.0, sense=">"),
        CheckRecord.compare(
            "coupled.contraction", solution.final_ratio, CONTRACTION_LIMIT
        ),
        CheckRecord.compare("coupled.iterations", solution.iterations, MAX_ITERATIONS),
    ]


@check(SUITE_COUPLED, "coupled.certified_horizon")
def check_certified_horizon(ctx, rng):
    """Certified T₀* at rest against the largest T on which Γ contracts by 1/2."""
    cfg, c = ctx.cfg, ctx.constants
    balanced = PhysicalConstants(c.balanced_beta_F, c.beta_p, c.theta1, c.theta2)
    grid = ctx.grid
    u0, v0, w0 = initial_fields("equilibrium", grid, c.theta1, c.theta2)
    problem = CoupledProblem(
        balanced,
        ctx.basis,
        u0,
        v0,
        w0,
        PARABOLIC_HORIZON,
        COUPLED_STEPS,
        cfg.alpha,
        None,
        cfg.picard_tol,
        cfg.gamma_tol,
        cfg.max_iter,
    )
    certified = coupled_horizon(problem, rng).T0_star
    measured = largest_contractive_horizon(problem, rng)
    return [
        CheckRecord.compare(
            "coupled.certified_horizon", certified, measured.horizon, sense="<="
        ),
        CheckRecord.compare(
            "coupled.certified_horizon.ratio", measured.ratio, CONTRACTION_TARGET
        ),
    ]


@check(SUITE_COUPLED, "coupled.holder_output", "coupled.positivity")
def check_coupled_solution(ctx, rng):
    problem = _coupled_problem(
        ctx, ctx.basis, _seed(rng), PARABOLIC_HORIZON, PARABOLIC_STEPS
    )
    solution = solve_coupled(problem, certify=False)
    fit = holder_fit(solution.u_path, NORM_H2)
    return [
        CheckRecord.compare(
            "coupled.holder_output",
            fit.alpha,
            problem.alpha - HOLDER_MARGIN,
            sense=">=",
        ),
        CheckRecord.compare("coupled.positivity.u", solution.min_u, 0.0, sense=">"),
        CheckRecord.compare(
            "coupled.positivity.w",
            solution.min_gap - problem.kappa / 2,
            -GAP_SLACK,
            sense=">=",
        ),
    ]


@check(SUITE_COUPLED, "oracle.agreement", "oracle.positivity")
def check_oracle_agreement(ctx, rng):
    worst = {name: 0.0 for name in ("u", "v", "w")}
    lowest = math.inf
    for scenario in AGREEMENT_SCENARIOS:
        cfg = get_scenario(scenario)
        primary = gamma_fixed_point(cfg, certify=False)
        oracle = mol_solve(cfg)
        pairs = zip(
            worst, (primary.u_path, primary.v_path, primary.w_path), oracle
        )
        for name, mine, theirs in pairs:
            worst[name] = max(worst[name], field_difference(mine, theirs))
        lowest = min(lowest, float(oracle.u_path.values.min()))
    records = [
        CheckRecord.compare(f"oracle.agreement.{name}", value, AGREEMENT_TOL)
        for name, value in worst.items()
    ]
    records.append(CheckRecord.compare("oracle.positivity", lowest, 0.0, sense=">"))
    return records


def _oracle_on(cfg, n_nodes, horizon, n_steps, profile=None, constants=None):
    grid = build_grid(cfg.length, n_nodes)
    c = constants or cfg.constants
    u0, v0, w0 = initial_fields(profile or cfg.profile, grid, c.theta1, c.theta2)
    return integrate_mol(
        c, u0, v0, w0, horizon, n_steps, max_dt=grid.spacing**2 / 8
    )


@check(SUITE_COUPLED, "oracle.self_convergence")
def check_self_convergence(ctx, rng):
    """Final-time error against a fine reference on shared nodes, h² fitted."""
    cfg = ctx.cfg
    horizon = PARABOLIC_HORIZON
    reference = _oracle_on(cfg, CONVERGENCE_REFERENCE, horizon, 1, CONVERGENCE_PROFILE)
    errors, spacings = [], []
    for n in CONVERGENCE_LEVELS:
        coarse = _oracle_on(cfg, n, horizon, 1, CONVERGENCE_PROFILE)
        stride = (CONVERGENCE_REFERENCE + 1) // (n + 1)
        shared = np.arange(1, n + 1) * stride - 1
        errors.append(
            max(
                float(np.max(np.abs(mine.values[-1] - fine.values[-1, shared])))
                for mine, fine in zip(coarse, reference)
            )
        )
        spacings.append(cfg.length / (n + 1))
    order = float(np.polyfit(np.log(spacings), np.log(errors), 1)[0])
    return [
        CheckRecord.compare(
            "oracle.self_convergence.order",
            order,
            1.7,
            sense=">=",
            mesh_levels=CONVERGENCE_LEVELS,
        ),
        CheckRecord.compare(
            "oracle.self_convergence.order_upper",
            order,
            2.3,
            mesh_levels=CONVERGENCE_LEVELS,
        ),
    ]


@check(SUITE_COUPLED, "oracle.flux_balance")
def check_flux_balance(ctx, rng):
    cfg = ctx.cfg
    c = cfg.constants
    balanced = PhysicalConstants(c.balanced_beta_F, c.beta_p, c.theta1, c.theta2)
    rest = _oracle_on(cfg, cfg.n_nodes, PARABOLIC_HORIZON, 8, "equilibrium", balanced)
    at_rest = float(
        flux_balance_residual(
            rest.u_path, rest.w_path, balanced, rest.u_path.grid
        ).max()
    )
    residuals, spacings = [], []
    for n in CONVERGENCE_LEVELS:
        run = _oracle_on(cfg, n, PARABOLIC_HORIZON, (n + 1) // 2, CONVERGENCE_PROFILE)
        residuals.append(
            float(
                flux_balance_residual(run.u_path, run.w_path, c, run.u_path.grid).max()
            )
        )
        spacings.append(cfg.length / (n + 1))
    order = float(np.polyfit(np.log(spacings), np.log(residuals), 1)[0])
    return [
        CheckRecord.compare("oracle.flux_balance.equilibrium", at_rest, 1e-10),
        CheckRecord.compare(
            "oracle.flux_balance.order",
            order,
            1.7,
            sense=">=",
            mesh_levels=CONVERGENCE_LEVELS,
        ),
    ]


@check(SUITE_COUPLED, "oracle.quench", "oracle.quench_monotone")
def check_quench(ctx, rng):
    cfg = get_scenario(QUENCH_SCENARIO)
    result = mol_solve(cfg)
    time = result.quench.time if result.quench else math.nan
    minima = result.w_path.values.min(axis=1)
    near = np.nonzero(minima < cfg.theta2 / 4)[0]
    rise = float(np.max(np.diff(minima[near[0] :]), initial=0.0)) if near.size else 0.0
    lo, hi = QUENCH_WINDOW
    return [
        CheckRecord.compare("oracle.quench.after", time, lo, sense=">"),
        CheckRecord.compare("oracle.quench.before", time, hi, sense="<"),
        CheckRecord.compare("oracle.quench_monotone", rise, 1e-12),
    ]


# Steady membrane


@check(SUITE_STEADY, "steady.monotonicity", "steady.symmetry", "steady.residual")
def check_steady_branch(ctx, rng):
    grid = ctx.grid
    tol = ctx.cfg.newton_tol
    upper = pullin_upper_bound(grid.length)
    betas = np.sort(np.concatenate([[0.0], rng.uniform(0, 0.9 * upper, 4)]))
    results = [steady_membrane(float(b), grid, tol) for b in betas]
    solved = [r for r in results if r.solvable]
    drop = max(
        (
            float(np.max(b.solution.values - a.solution.values))
            for a, b in zip(solved, solved[1:])
        ),
        default=0.0,
    )
    mirror = max(
        float(np.max(np.abs(r.solution.values - r.solution.values[::-1])))
        for r in solved
    )
    residual = max(r.residual / (tol * (1 + r.beta_F)) for r in solved)
    flat = math.inf
    if results[0].solvable:
        flat = float(np.max(np.abs(results[0].solution.values - 1)))
    beyond = steady_membrane(1.5 * upper, grid, tol)
    return [
        CheckRecord.compare("steady.solvable", len(solved), len(results), sense=">="),
        CheckRecord.compare("steady.monotonicity", drop, 1e-12),
        CheckRecord.compare("steady.symmetry", mirror, 1e-10),
        CheckRecord.compare("steady.residual", residual, 1.0),
        CheckRecord.compare("steady.zero_load", flat, 1e-12),
        CheckRecord.compare("steady.no_solution", float(beyond.solvable), 0.0),
    ]


@check(SUITE_STEADY, "steady.pullin")
def check_pullin(ctx, rng):
    estimates = []
    for factor in (1, 2):
        result = pullin_threshold(ctx.mesh(factor).grid, bracket_tol=1e-5)
        estimates.append(result.estimate)
    upper = pullin_upper_bound(ctx.cfg.length)
    return [
        CheckRecord.compare("steady.pullin.positive", estimates[0], 0.0, sense=">"),
        CheckRecord.compare("steady.pullin.bound", estimates[0], upper, sense="<"),
        CheckRecord.compare(
            "steady.pullin.refinement",
            _drift(*estimates),
            1e-3,
            mesh_levels=_levels(ctx, 1, 2),
        ),
    ]


def _run_check(func, ctx, seed):
    rng = check_rng(seed, func.__name__)
    try:
        return func(ctx, rng)
    except SolverError as e:
        _LOGGER.error("Check %s raised %s: %s", func.__name__, type(e).__name__, e)
        return [CheckRecord(func.__name__, math.nan, math.nan, False)]


def fingerprint(suite, cfg):
    return {
        "suite": suite,
        "seed": cfg.seed,
        CONF_LENGTH: cfg.length,
        CONF_NODES: cfg.n_nodes,
        CONF_MODES: cfg.n_modes,
        "config_sha256": cfg.sha256,
        "version": package_version(),
    }


async def async_run_suite(name, cfg, workers=None):
    """Run the checks of one suite (or all) in an executor and collect a report."""
    if name != SUITE_ALL and name not in SUITES:
        raise ConfigurationError(
            f"unknown suite {name!r}, expected one of "
            f"{', '.join([*SUITES, SUITE_ALL])}",
            "suite",
        )
    names = SUITES if name == SUITE_ALL else [name]
    ctx = VerifyContext(cfg)
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=workers) as executor:
        jobs = [
            loop.run_in_executor(executor, _run_check, func, ctx, cfg.seed)
            for suite in names
            for func in _CHECKS[suite]
        ]
        batches = await asyncio.gather(*jobs)
    records = [r for batch in batches for r in batch]
    report = VerificationReport(name, records, fingerprint(name, cfg))
    _LOGGER.info(
        "Suite %s: %d checks, %d failed", name, len(records), len(report.failures)
    )
    return report


def run_suite(name, cfg, workers=None):
    return asyncio.run(async_run_suite(name, cfg, workers))
