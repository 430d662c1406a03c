"""
Linearized Reynolds operator 𝒫*, its ellipticity and sector diagnostics, the
nonlinearity F and the contraction map Γ for the coupled pressure/gap system.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
import logging
import math
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm

from .const import NORM_H1, NORM_H2, NORM_L2, RADIUS_FRACTION
from .errors import (
    ConfigurationError,
    IterationError,
    NumericError,
    QuenchImminentError,
    SolverError,
)
from .grid import (
    EigenBasis,
    Field,
    Grid1D,
    HolderEstimate,
    TrajectoryPath,
    _norms,
    band_limited_field,
    dyadic_lags,
    embedding_constant,
    holder_norm,
    sine_derivative,
    sine_eigenbasis,
    sine_values,
    sobolev_norm,
)
from .hyperbolic import (
    Horizon,
    HyperbolicInit,
    PhysicalConstants,
    PicardSettings,
    WaveSolution,
    contraction_ratios,
    gap_constants,
    delta_o,
    estimate_L_G,
    frechet_W,
    horizon_T0,
    lipschitz_W,
    solve_wave_picard,
)

_LOGGER = logging.getLogger(__name__)

# Eigenvector condition number above which exponentials use scaling and squaring.
MAX_EIGVEC_CONDITION = 1e8
GARDING_TOLERANCE = 1e-8
RAY_ANGLES = (0.0, np.pi / 4, -np.pi / 4, np.pi / 2, -np.pi / 2)
RAY_SCALES = np.logspace(0, 4, 17)
M0 = 1.0
CONTRACTION_TARGET = 0.5


class LinearOperator1D:
    """Dense matrix acting on interior nodal values of zero-trace fields."""

    def __init__(self, grid: Grid1D, matrix, description="", lead=None):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (grid.n_nodes, grid.n_nodes):
            raise ConfigurationError(
                f"operator of shape {matrix.shape} on {grid.n_nodes} nodes"
            )
        if not np.all(np.isfinite(matrix)):
            raise NumericError(f"operator {description!r} has non-finite entries")
        self._grid = grid
        self._matrix = matrix
        self._description = description
        self._lead = lead

    @property
    def grid(self):
        return self._grid

    @property
    def matrix(self):
        return self._matrix

    @property
    def description(self):
        return self._description

    @property
    def lead(self):
        """Leading second order part (1/w₀)∂x(w₀³u₀∂x), if assembled."""
        return self._lead

    def __matmul__(self, values):
        return np.asarray(values) @ self._matrix.T

    @cached_property
    def eigensystem(self):
        """(eigenvalues, eigenvectors, inverse) or None when ill-conditioned."""
        try:
            lam, vec = np.linalg.eig(self._matrix)
        except np.linalg.LinAlgError:
            _LOGGER.debug("Eigendecomposition of %s failed", self._description)
            return None
        if np.linalg.cond(vec) > MAX_EIGVEC_CONDITION:
            _LOGGER.debug("Eigenvectors of %s are ill-conditioned", self._description)
            return None
        return lam, vec, np.linalg.inv(vec)

    @cached_property
    def eigenvalues(self):
        return np.linalg.eigvals(self._matrix)


def _positive(f: Field, name):
    if f.values.min() <= 0 or f.boundary <= 0:
        raise ConfigurationError("must be positive at every node", name)


def _conservative_second(coeff_full, grid: Grid1D):
    """Matrix of q ↦ ∂x(a ∂x q) with face-averaged coefficients."""
    faces = (coeff_full[1:] + coeff_full[:-1]) / 2
    main = -(faces[:-1] + faces[1:])
    matrix = np.diag(main) + np.diag(faces[1:-1], 1) + np.diag(faces[1:-1], -1)
    return matrix / grid.spacing**2


def _flux_divergence(coeff_full, values_full, grid: Grid1D):
    """
    ∂x(a ∂x f) at the interior nodes from padded a and f, face-averaged a.

    Works along the last axis, so whole paths or stacks of directions can be
    passed at once.
    """
    coeff_full = np.asarray(coeff_full, dtype=float)
    faces = (coeff_full[..., 1:] + coeff_full[..., :-1]) / 2
    return np.diff(faces * np.diff(values_full, axis=-1), axis=-1) / grid.spacing**2


def assemble_linearization(u0: Field, v0: Field, w0: Field, grid: Grid1D):
    """
    Assemble 𝒫*ψ = (1/w₀)∂x{w₀³u₀ψ' + (w₀³u₀')ψ} - (v₀/w₀)ψ
    with Dirichlet rows eliminated.

    The matrix is the exact Jacobian in ũ of the discrete F at (u₀, v₀, w₀).
    """
    _positive(u0, "init.u0")
    _positive(w0, "init.w0")
    w_full = w0.full_values
    u_full = u0.full_values

    diffusion = _conservative_second(w_full**3 * u_full, grid)
    # column j: the face flux of u₀ when the coefficient is w₀³ times node j
    directions = w_full**3 * grid.pad(np.eye(grid.n_nodes))
    drift = _flux_divergence(directions, u_full, grid).T

    inv_w = 1 / w0.values
    lead = inv_w[:, None] * diffusion
    matrix = lead + inv_w[:, None] * drift - np.diag(v0.values * inv_w)
    return LinearOperator1D(grid, matrix, "linearized Reynolds operator", lead)


@dataclass
class GardingReport:
    K: float
    K_o: float
    min_form_ratio: float
    K2: float = 0.0
    K2_formula: float = 0.0
    epsilon1: float = 0.0
    n_probes: int = 0
    violations: int = 0

    @property
    def valid(self):
        return self.K > 0

    @property
    def passed(self):
        return self.valid and self.violations == 0

    def as_dict(self):
        return {
            "K": self.K,
            "K_o": self.K_o,
            "min_form_ratio": self.min_form_ratio,
            "K2": self.K2,
            "K2_formula": self.K2_formula,
            "epsilon1": self.epsilon1,
            "n_probes": self.n_probes,
            "violations": self.violations,
        }


def leading_form(P: LinearOperator1D, q):
    """∫ (q/w₀)[w₀³u₀q']' dx by the trapezoid rule on the assembled lead part."""
    q = np.asarray(q, dtype=float)
    return float(P.grid.spacing * q @ (P.lead @ q))


def fd_gradient_square(q, grid: Grid1D):
    full = grid.pad(q)
    return float(np.sum(np.diff(full) ** 2) / grid.spacing)


def garding_constants(
    P: LinearOperator1D,
    u0: Field,
    w0: Field,
    rng=None,
    n_probes=128,
    n_active=None,
):
    """
    Constants K, K_o of |form(q)| ≥ K‖q'‖² - K_o‖q‖², checked on random probes.

    The cross term is bounded by K₂ = max|w₀w₀'u₀| and split by Young's
    inequality so that K = ε₁κ²/2 with ε₁ = min u₀.
    """
    if P.lead is None:
        raise ConfigurationError("operator carries no leading part", "operator")
    grid = P.grid
    rng = rng if rng is not None else np.random.default_rng(0)
    kappa = float(min(w0.values.min(), w0.boundary))
    epsilon1 = float(min(u0.values.min(), u0.boundary))
    dw_full = sine_derivative(w0.values - w0.boundary, grid)
    k2 = float(np.max(np.abs(w0.full_values * dw_full * u0.full_values)))
    basis = sine_eigenbasis(grid, grid.n_nodes)
    k2_formula = (
        embedding_constant(basis)
        * sobolev_norm(u0, NORM_H1)
        * sobolev_norm(w0, NORM_H2) ** 2
    )
    if k2 <= 0:
        K, K_o = epsilon1 * kappa**2, 0.0
    else:
        eps2 = epsilon1 * kappa**2 / (2 * k2)
        K, K_o = epsilon1 * kappa**2 / 2, k2 / (4 * eps2)

    n_active = n_active or max(1, grid.n_nodes // 2)
    worst = math.inf
    violations = 0
    for _ in range(n_probes):
        q = band_limited_field(grid, rng, n_active, smoothness=1.0)
        grad = fd_gradient_square(q, grid)
        if grad == 0:
            continue
        mass = float(_norms(q, grid, NORM_L2) ** 2)
        ratio = (abs(leading_form(P, q)) + K_o * mass) / grad
        worst = min(worst, ratio)
        if ratio < K * (1 - GARDING_TOLERANCE):
            violations += 1
    if violations:
        _LOGGER.warning(
            "Gårding estimate violated on %d of %d probes", violations, n_probes
        )
    return GardingReport(K, K_o, worst, k2, k2_formula, epsilon1, n_probes, violations)


def analytic_step(P: LinearOperator1D, t, f: Field, bound=M0):
    """
    e^{t𝒫*}f by eigendecomposition, or scaling and squaring as fallback.

    The operator norm of e^{t𝒫*} is logged against the semigroup bound M̄₀.
    """
    if t == 0:
        return Field(f.grid, f.values, f.boundary)
    if t < 0:
        raise ConfigurationError(f"analytic semigroup needs t ≥ 0, got {t}", "t")
    E = propagator(P, t)
    norm = float(np.linalg.norm(E, 2))
    if norm > bound:
        _LOGGER.warning("‖exp(%.6g 𝒫*)‖ = %.6g exceeds M0 = %g", t, norm, bound)
    else:
        _LOGGER.debug("‖exp(%.6g 𝒫*)‖ = %.6g within M0 = %g", t, norm, bound)
    values = E @ f.values
    if not np.all(np.isfinite(values)):
        raise NumericError(f"matrix exponential of {P.description} is not finite")
    return Field(f.grid, values, f.boundary)


def propagator(P: LinearOperator1D, t):
    """The matrix e^{t𝒫*}."""
    system = P.eigensystem
    if system is not None:
        lam, vec, inv = system
        result = (vec * np.exp(t * lam)) @ inv
        if np.all(np.isfinite(result)):
            return result.real
    try:
        result = expm(t * P.matrix)
    except (ValueError, np.linalg.LinAlgError) as e:
        raise NumericError(f"matrix exponential failed: {e}") from e
    if not np.all(np.isfinite(result)):
        raise NumericError(f"matrix exponential of {P.description} is not finite")
    return result


def semigroup_norm(P: LinearOperator1D, t):
    """‖e^{t𝒫*}‖ in the discrete L² norm."""
    return float(np.linalg.norm(propagator(P, t), 2))


def exponential_weights(P: LinearOperator1D, dt):
    """
    (E, W₀, W₁) of the exponential trapezoid rule
    u_{j+1} = E u_j + W₀R_j + W₁R_{j+1} for u' = 𝒫*u + R.
    """
    n = P.grid.n_nodes
    block = np.zeros((3 * n, 3 * n))
    block[:n, :n] = dt * P.matrix
    block[:n, n : 2 * n] = np.eye(n)
    block[n : 2 * n, 2 * n :] = np.eye(n)
    big = expm(block)
    phi1 = big[:n, n : 2 * n]
    phi2 = big[:n, 2 * n :]
    return big[:n, :n], dt * (phi1 - phi2), dt * phi2


def linear_duhamel(weights, initial, forcing):
    """e^{t𝒫*}u₀ + ∫₀ᵗ e^{(t-s)𝒫*}R(s) ds with R linear between grid times."""
    E, W0, W1 = weights
    forcing = np.asarray(forcing, dtype=float)
    increments = forcing[:-1] @ W0.T + forcing[1:] @ W1.T
    out = np.empty_like(forcing)
    out[0] = initial
    for j in range(forcing.shape[0] - 1):
        out[j + 1] = E @ out[j] + increments[j]
    return out


def _reynolds(u_tilde, v, w, c: PhysicalConstants, grid: Grid1D):
    """F(ũ; v, w) along the last axis; w is the full gap at interior nodes."""
    u_full = grid.pad(u_tilde) + c.theta1
    coeff = grid.pad(w, c.theta2) ** 3 * u_full
    u = np.asarray(u_tilde) + c.theta1
    return _flux_divergence(coeff, u_full, grid) / w - v * u / w


def reynolds_rhs(
    u_tilde: Field,
    v: Field,
    w: Field,
    c: PhysicalConstants,
    grid: Grid1D,
    floor=None,
):
    """
    F(ũ) = (1/w)∂x(w³(ũ+θ₁)ũ') - (v/w)(ũ+θ₁).

    The flux w³uũ' is taken on cell faces, the same stencil as the
    leading part of 𝒫*. The gap may not fall to floor; pass κ/2 for the
    run's κ = inf w₀. The default θ₂/2 is that bound for a gap starting flat.
    """
    floor = c.theta2 / 2 if floor is None else floor
    gap = w.values
    if gap.min() <= floor:
        node = int(np.argmin(gap))
        raise QuenchImminentError(
            f"gap {gap.min():.3g} at node {node} is below {floor:.3g}",
            node=node,
            gap=float(gap.min()),
        )
    return Field(grid, _reynolds(u_tilde.values, v.values, gap, c, grid))


def frechet_F(u_tilde, q, v, w, vq, wq, c: PhysicalConstants, grid: Grid1D):
    """
    Chain-rule derivative F'(ũ)q given the wave derivatives v'q and w'q.

    All arguments are nodal arrays (w is the full gap); leading axes are
    broadcast so whole paths can be passed at once.
    """
    u_full = grid.pad(u_tilde) + c.theta1
    q_full = grid.pad(q)
    w_full = grid.pad(w, c.theta2)
    u = np.asarray(u_tilde) + c.theta1

    coeff = w_full**3 * u_full
    coeff_q = 3 * w_full**2 * grid.pad(wq) * u_full + w_full**3 * q_full
    divergence = _flux_divergence(coeff, u_full, grid)
    divergence_q = _flux_divergence(coeff, q_full, grid) + _flux_divergence(
        coeff_q, u_full, grid
    )
    return (
        divergence_q / w
        - wq * divergence / w**2
        - v * q / w
        - vq * u / w
        + v * wq * u / w**2
    )


def compatibility_field(u0: Field, w0: Field, grid: Grid1D):
    """(1/w₀)∂x(w₀³u₀∂x u₀) at the interior nodes."""
    coeff = w0.full_values**3 * u0.full_values
    return _flux_divergence(coeff, u0.full_values, grid) / w0.values


def compatibility_norm(u0: Field, w0: Field, grid: Grid1D):
    """Finite-difference H² norm of the compatibility field."""
    values = compatibility_field(u0, w0, grid)
    d1 = np.gradient(values, grid.spacing, edge_order=2)
    d2 = np.gradient(d1, grid.spacing, edge_order=2)
    h = grid.spacing
    return float(math.sqrt(h * np.sum(values**2 + d1**2 + d2**2)))


class SectorReport(NamedTuple):
    omega: float
    M: float
    ray_angles: tuple


def sector_report(P: LinearOperator1D):
    """
    Spectral abscissa ω and M = max |λ-ω|·‖(λ-𝒫*)⁻¹‖ on rays from ω.
    """
    omega = float(np.max(P.eigenvalues.real))
    n = P.grid.n_nodes
    worst = 0.0
    for angle in RAY_ANGLES:
        for s in RAY_SCALES:
            lam = omega + s * np.exp(1j * angle)
            resolvent = np.linalg.inv(lam * np.eye(n) - P.matrix)
            worst = max(worst, abs(lam - omega) * np.linalg.norm(resolvent, 2))
    return SectorReport(omega, float(worst), RAY_ANGLES)


def _synthesis(grid: Grid1D):
    """Matrix mapping sine coefficients to interior values."""
    return sine_values(np.eye(grid.n_nodes)).T


def _h2_weights(grid: Grid1D):
    lam = (np.arange(1, grid.n_nodes + 1) * np.pi / grid.length) ** 2
    return np.sqrt(grid.length / 2 * (1 + lam + lam**2))


def operator_norm_H2_L2(P: LinearOperator1D):
    """‖𝒫*‖ as a map from zero-trace H² to L²."""
    grid = P.grid
    scaled = P.matrix @ _synthesis(grid) / _h2_weights(grid)
    return float(math.sqrt(grid.spacing) * np.linalg.norm(scaled, 2))


class GraphNormReport(NamedTuple):
    gamma0: float
    lower: float
    upper: float


def graph_norm_constant(P: LinearOperator1D, rng, n_probes=100, n_active=None):
    """Two-sided ratio (‖g‖ + ‖𝒫*g‖)/‖g‖_H2 over band-limited probes."""
    grid = P.grid
    n_active = n_active or min(grid.n_nodes, 8)
    ratios = []
    for _ in range(n_probes):
        g = band_limited_field(grid, rng, n_active)
        graph = float(_norms(g, grid, NORM_L2) + _norms(P @ g, grid, NORM_L2))
        ratios.append(graph / float(_norms(g, grid, NORM_H2)))
    lower, upper = min(ratios), max(ratios)
    return GraphNormReport(max(upper, 1 / lower), lower, upper)


def maximal_regularity_probe(
    P: LinearOperator1D, horizon, n_steps, alpha, rng, n_probes=6, n_active=8
):
    """
    Largest observed ‖q‖_{Cᵅ(H²)}/‖f‖_{Cᵅ(L²)} for q' = 𝒫*q + f, q(0) = 0.
    """
    grid = P.grid
    weights = exponential_weights(P, horizon / n_steps)
    times = np.linspace(0.0, horizon, n_steps + 1)
    worst = 0.0
    for _ in range(n_probes):
        g = band_limited_field(grid, rng, min(n_active, grid.n_nodes))
        kink = rng.uniform(0, horizon)
        forcing = np.abs(times - kink)[:, None] ** alpha * g
        q = linear_duhamel(weights, np.zeros(grid.n_nodes), forcing)
        num = holder_norm(TrajectoryPath(grid, horizon, q), alpha, NORM_H2)
        den = holder_norm(TrajectoryPath(grid, horizon, forcing), alpha, NORM_L2)
        if den > 0:
            worst = max(worst, num / den)
    return worst


def nonlinearity_lipschitz(c_emb, kappa, w0_h1, u0_h2, v0_l2, L_W):
    """L_e = CC₁²C̃³C̃₁²L_W + Ĉ₁ + Ĉ₂ + Ĉ₃."""
    ball = kappa / (2 * c_emb)
    const = gap_constants(kappa, w0_h1, c_emb, 0.0)
    c1, c_tilde = const.C1, const.C_tilde
    c_tilde1 = u0_h2 + ball
    c_tilde2 = v0_l2 + ball
    hat1 = 3 * c_emb * c1 * (c_tilde * c_tilde1) ** 2 * L_W
    hat2 = 2 * c_emb * c1 * c_tilde**3 * c_tilde1
    hat3 = (
        c_emb * c_tilde2 * c1
        + c_emb * c_tilde1 * c1 * L_W
        + c_emb * c_tilde1 * c_tilde2 * c1**2 * L_W
    )
    return c_emb * c1**2 * c_tilde**3 * c_tilde1**2 * L_W + hat1 + hat2 + hat3


@dataclass(frozen=True, eq=False)
class CoupledProblem:
    """Everything a coupled solve needs, resolved from a configuration."""

    constants: PhysicalConstants
    basis: EigenBasis
    u0: Field
    v0: Field
    w0: Field
    horizon: float
    n_steps: int
    alpha: float = 0.2
    radius: float | None = None
    picard_tol: float = 1e-10
    gamma_tol: float = 1e-8
    max_iter: int = 50

    def __post_init__(self):
        c = self.constants
        if abs(self.u0.boundary - c.theta1) > 1e-12:
            raise ConfigurationError("u0 trace differs from theta1", "init.u0")
        if abs(self.w0.boundary - c.theta2) > 1e-12:
            raise ConfigurationError("w0 trace differs from theta2", "init.w0")
        if abs(self.v0.boundary) > 0:
            raise ConfigurationError("v0 must vanish on the boundary", "init.v0")
        _positive(self.u0, "init.u0")
        if self.radius is None:
            object.__setattr__(
                self, "radius", RADIUS_FRACTION * self.kappa / (2 * self.c_emb)
            )
        self.picard_settings.check(self.kappa, self.c_emb)

    @classmethod
    def from_config(cls, cfg):
        grid = cfg.grid
        u0, v0, w0 = cfg.initial_fields(grid)
        return cls(
            cfg.constants,
            sine_eigenbasis(grid, cfg.n_modes),
            u0,
            v0,
            w0,
            cfg.horizon,
            cfg.n_steps,
            cfg.alpha,
            cfg.radius,
            cfg.picard_tol,
            cfg.gamma_tol,
            cfg.max_iter,
        )

    @property
    def grid(self):
        return self.basis.grid

    @property
    def dt(self):
        return self.horizon / self.n_steps

    @property
    def times(self):
        return np.linspace(0.0, self.horizon, self.n_steps + 1)

    @cached_property
    def c_emb(self):
        return embedding_constant(self.basis)

    @property
    def kappa(self):
        return self.hyperbolic_init.kappa

    @cached_property
    def hyperbolic_init(self):
        return HyperbolicInit(self.v0, self.w0)

    @property
    def picard_settings(self):
        return PicardSettings(self.radius, self.picard_tol, self.max_iter)

    @property
    def u0_tilde(self):
        return self.u0.values - self.constants.theta1

    @cached_property
    def linearization(self):
        return assemble_linearization(self.u0, self.v0, self.w0, self.grid)

    def u_path(self, u_tilde):
        c = self.constants
        return TrajectoryPath(self.grid, self.horizon, u_tilde + c.theta1, c.theta1)

    def constant_u_path(self):
        return TrajectoryPath.constant(self.u0, self.horizon, self.n_steps)


@dataclass
class HorizonReport:
    T0: Horizon
    T0_star: float
    delta_star: float
    constants: dict = field(default_factory=dict)

    @property
    def T1(self):
        return min(self.T0.value, self.T0_star, self.delta_star)

    @property
    def active(self):
        terms = {
            "T0": self.T0.value,
            "T0_star": self.T0_star,
            "delta_star": self.delta_star,
        }
        return min(terms, key=terms.get)

    def as_dict(self):
        return {
            "T0": self.T0.value,
            "T0_active": self.T0.active,
            "T0_terms": self.T0.terms,
            "T0_star": self.T0_star,
            "delta_star": self.delta_star,
            "T1": self.T1,
            "T1_active": self.active,
            "constants": self.constants,
        }


@dataclass
class CoupledSolution:
    u_path: TrajectoryPath
    v_path: TrajectoryPath
    w_path: TrajectoryPath
    iterations: int
    final_ratio: float
    ratios: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    min_gap: float = math.nan
    min_u: float = math.nan
    horizons: HorizonReport | None = None
    garding: GardingReport | None = None
    wave: WaveSolution | None = None

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "final_ratio": self.final_ratio,
            "ratios": self.ratios,
            "distances": self.distances,
            "min_gap": self.min_gap,
            "min_u": self.min_u,
            "horizons": self.horizons.as_dict() if self.horizons else None,
            "garding": self.garding.as_dict() if self.garding else None,
            "wave": self.wave.as_dict() if self.wave else None,
        }


def _check_gap(gap, times, floor):
    rows = np.nonzero(gap.min(axis=-1) < floor)[0]
    if rows.size:
        j = int(rows[0])
        node = int(np.argmin(gap[j]))
        raise QuenchImminentError(
            f"gap {gap[j, node]:.3g} below {floor:.3g} at t={times[j]:.6g}",
            node=node,
            time=float(times[j]),
            gap=float(gap[j, node]),
        )


def gamma_sweep(problem: CoupledProblem, weights, u_tilde):
    """One application of Γ to a ũ path; returns (Γũ, wave solution of ũ)."""
    c = problem.constants
    P = problem.linearization
    wave = solve_wave_picard(
        problem.u_path(u_tilde),
        problem.hyperbolic_init,
        c,
        problem.picard_settings,
        problem.basis,
    )
    gap = wave.path.w_tilde.values + c.theta2
    _check_gap(gap, problem.times, problem.kappa / 2)
    residual = _reynolds(u_tilde, wave.path.v.values, gap, c, problem.grid)
    residual = residual - P @ u_tilde
    return linear_duhamel(weights, problem.u0_tilde, residual), wave


def delta_star(problem: CoupledProblem, weights=None):
    """First grid time at which Γũ₀ leaves the r/2 ball around ũ₀ in H²."""
    weights = weights or exponential_weights(problem.linearization, problem.dt)
    start = np.tile(problem.u0_tilde, (problem.n_steps + 1, 1))
    image, _ = gamma_sweep(problem, weights, start)
    distance = _norms(image - problem.u0_tilde, problem.grid, NORM_H2)
    outside = np.nonzero(distance > problem.radius / 2)[0]
    if outside.size:
        return float(problem.times[outside[0]])
    return float(problem.horizon)


class TripleIncrement(NamedTuple):
    L_B: float
    estimate: HolderEstimate


def triple_increments(problem: CoupledProblem, wave: WaveSolution, u_tilde, q):
    """
    Fit ‖[F'q](t+h) - [F'q](t) - 𝒫*[q(t+h) - q(t)]‖ ≈ L_B·h^α on dyadic lags.
    """
    c = problem.constants
    grid = problem.grid
    q_path = TrajectoryPath(grid, problem.horizon, q)
    vq, wq = frechet_W(q_path, wave, c, problem.basis)
    gap = wave.path.w_tilde.values + c.theta2
    fq = frechet_F(
        u_tilde, q, wave.path.v.values, gap, vq.values, wq.values, c, grid
    )
    P = problem.linearization
    lags = dyadic_lags(q_path)
    if not lags:
        return TripleIncrement(0.0, HolderEstimate(math.nan, 0.0))
    sizes = []
    for m in lags:
        triple = fq[m:] - fq[:-m] - P @ (q[m:] - q[:-m])
        sizes.append(float(np.max(_norms(triple, grid, NORM_L2))))
    h = np.array(lags, dtype=float) * q_path.dt
    sizes = np.array(sizes)
    L_B = float(np.max(sizes / h**problem.alpha))
    if np.all(sizes > 0) and len(lags) >= 2:
        slope, intercept = np.polyfit(np.log(h), np.log(sizes), 1)
        fit = HolderEstimate(float(slope), float(np.exp(intercept)))
        return TripleIncrement(L_B, fit)
    return TripleIncrement(L_B, HolderEstimate(math.nan, 0.0))


def holder_probe_path(problem: CoupledProblem, rng, n_active=6):
    """A zero-trace path x(t) = |t - t*|ᵅ·g with a random band-limited g."""
    g = band_limited_field(problem.grid, rng, min(n_active, problem.grid.n_nodes))
    g = g / float(_norms(g, problem.grid, NORM_H2))
    kink = rng.uniform(0, problem.horizon)
    return np.abs(problem.times - kink)[:, None] ** problem.alpha * g


def horizon_T0_star(problem: CoupledProblem, L_e, L_B, gamma0, I_T0, P_norm=None):
    """
    T₀* = [2γ₀I(T₀)(L_e + ‖𝒫*‖ + 2L_B(1 + ‖u₀‖_H2 + κ/(2C)))]^(-1/α).

    Heuristic: I(T₀) is an empirical estimate.
    """
    if P_norm is None:
        P_norm = operator_norm_H2_L2(problem.linearization)
    bracket = (
        2
        * gamma0
        * I_T0
        * (
            L_e
            + P_norm
            + 2
            * L_B
            * (
                1
                + sobolev_norm(problem.u0, NORM_H2)
                + problem.kappa / (2 * problem.c_emb)
            )
        )
    )
    if bracket <= 0:
        return math.inf
    return float(bracket ** (-1 / problem.alpha))


def coupled_horizon(problem: CoupledProblem, rng=None):
    """T₀, T₀*, δ* and the constants that produced them."""
    rng = rng if rng is not None else np.random.default_rng(0)
    c = problem.constants
    init = problem.hyperbolic_init
    settings = problem.picard_settings
    c_emb = problem.c_emb

    d_o = delta_o(init, settings, problem.basis)
    L_G = estimate_L_G(init, settings, c, c_emb)
    T0 = horizon_T0(c, init, settings, M0, L_G, d_o, c_emb, problem.u0_tilde)
    L_W = lipschitz_W(T0.value, M0, L_G, c.beta_p)

    P = problem.linearization
    P_norm = operator_norm_H2_L2(P)
    semigroup_bound = semigroup_norm(P, T0.value)
    if semigroup_bound > M0:
        _LOGGER.warning(
            "‖exp(T0 𝒫*)‖ = %.6g exceeds the M0 = %g used for T0", semigroup_bound, M0
        )
    gamma0 = graph_norm_constant(P, rng).gamma0
    I_T0 = maximal_regularity_probe(
        P, T0.value, problem.n_steps, problem.alpha, rng
    )
    L_e = nonlinearity_lipschitz(
        c_emb,
        problem.kappa,
        sobolev_norm(problem.w0, NORM_H1),
        sobolev_norm(problem.u0, NORM_H2),
        sobolev_norm(problem.v0, NORM_L2),
        L_W,
    )
    weights = exponential_weights(P, problem.dt)
    start = np.tile(problem.u0_tilde, (problem.n_steps + 1, 1))
    _, wave = gamma_sweep(problem, weights, start)
    L_B = triple_increments(
        problem, wave, start, holder_probe_path(problem, rng)
    ).L_B
    T0_star = horizon_T0_star(problem, L_e, L_B, gamma0, I_T0, P_norm)
    constants = {
        "M0": M0,
        "L_G": L_G,
        "L_W": L_W,
        "L_e": L_e,
        "L_B": L_B,
        "gamma0": gamma0,
        "I_T0": I_T0,
        "P_norm": P_norm,
        "semigroup_norm": semigroup_bound,
        "delta_o": d_o,
        "c_emb": c_emb,
        "radius": problem.radius,
    }
    report = HorizonReport(T0, T0_star, delta_star(problem, weights), constants)
    _LOGGER.info("Horizon T1 = %.6g set by %s", report.T1, report.active)
    return report


def solve_coupled(problem: CoupledProblem, certify=True, rng=None, start=None):
    """
    Outer Picard iteration ũ ↦ Γũ with the wave operator refreshed per sweep.

    The iteration starts from the constant path ũ₀ unless a start path is given.
    """
    c = problem.constants
    grid = problem.grid
    horizons = coupled_horizon(problem, rng) if certify else None
    if horizons and problem.horizon >= horizons.T1:
        _LOGGER.warning(
            "Horizon %.6g is not below the certified T1 = %.6g (%s)",
            problem.horizon,
            horizons.T1,
            horizons.active,
        )

    weights = exponential_weights(problem.linearization, problem.dt)
    if start is None:
        current = np.tile(problem.u0_tilde, (problem.n_steps + 1, 1))
    else:
        current = np.array(start, dtype=float)
    distances = []
    for iteration in range(1, problem.max_iter + 1):
        following, wave = gamma_sweep(problem, weights, current)
        distance = float(np.max(_norms(following - current, grid, NORM_H2)))
        distances.append(distance)
        current = following
        _LOGGER.debug("Gamma iteration %d distance %.3e", iteration, distance)
        if distance < problem.gamma_tol:
            break
    else:
        raise IterationError(
            f"Γ iteration did not reach {problem.gamma_tol} "
            f"in {problem.max_iter} steps",
            contraction_ratios(distances, 0.0),
        )

    wave = solve_wave_picard(
        problem.u_path(current),
        problem.hyperbolic_init,
        c,
        problem.picard_settings,
        problem.basis,
    )
    u = current + c.theta1
    if u.min() <= 0:
        raise NumericError(f"pressure lost positivity, min u = {u.min():.3g}")
    ratios = contraction_ratios(distances, 100 * problem.gamma_tol)
    return CoupledSolution(
        problem.u_path(current),
        wave.path.v,
        wave.path.gap(c.theta2),
        len(distances),
        max(ratios) if ratios else 0.0,
        ratios,
        distances,
        wave.min_gap,
        float(min(u.min(), c.theta1)),
        horizons,
        garding_constants(problem.linearization, problem.u0, problem.w0),
        wave,
    )


def gamma_fixed_point(cfg, certify=True):
    """Solve the coupled system for a SolverConfig."""
    problem = CoupledProblem.from_config(cfg)
    rng = np.random.default_rng(cfg.seed)
    return solve_coupled(problem, certify, rng)


class ContractiveHorizon(NamedTuple):
    horizon: float
    ratio: float
    upper: float
    evaluations: dict

    def as_dict(self):
        return {
            "horizon": self.horizon,
            "ratio": self.ratio,
            "upper": self.upper,
            "evaluations": {f"{t:.9g}": r for t, r in self.evaluations.items()},
        }


def largest_contractive_horizon(
    problem: CoupledProblem,
    rng=None,
    target=CONTRACTION_TARGET,
    rel_tol=0.05,
    max_doublings=8,
    max_bisections=16,
):
    """
    Largest T on which the Γ iteration contracts by at most target.

    Every trial keeps n_steps and starts the iteration a quarter radius away
    from ũ₀ along one band-limited shape, ramped in from zero at t = 0. A
    solver failure counts as no contraction. The horizon is doubled from the
    problem's own until the target fails, then bisected to rel_tol.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    grid = problem.grid
    shape = band_limited_field(grid, rng, min(6, grid.n_nodes))
    shape = problem.radius / 4 * shape / float(_norms(shape, grid, NORM_H2))
    evaluations = {}

    def ratio_at(horizon):
        trial = replace(problem, horizon=horizon)
        start = trial.u0_tilde + (trial.times / horizon)[:, None] * shape
        try:
            ratio = solve_coupled(trial, certify=False, start=start).final_ratio
        except SolverError as e:
            _LOGGER.debug("Γ on T = %.6g failed: %s", horizon, e)
            ratio = math.inf
        evaluations[horizon] = ratio
        return ratio

    horizon = problem.horizon
    lo, hi = 0.0, math.inf
    if ratio_at(horizon) <= target:
        lo = horizon
        for _ in range(max_doublings):
            horizon *= 2
            if ratio_at(horizon) > target:
                hi = horizon
                break
            lo = horizon
    else:
        hi = horizon
        for _ in range(max_bisections):
            horizon /= 2
            if ratio_at(horizon) <= target:
                lo = horizon
                break
            hi = horizon
        else:
            raise IterationError(
                f"Γ does not contract by {target} on any horizon down to "
                f"{horizon:.3g}",
                list(evaluations.values()),
            )

    for _ in range(max_bisections):
        if math.isinf(hi) or hi - lo <= rel_tol * lo:
            break
        middle = (lo + hi) / 2
        if ratio_at(middle) <= target:
            lo = middle
        else:
            hi = middle

    _LOGGER.info("Γ contracts by %.3g up to T = %.6g (fails at %.6g)", target, lo, hi)
    ordered = dict(sorted(evaluations.items()))
    return ContractiveHorizon(lo, evaluations[lo], hi, ordered)
