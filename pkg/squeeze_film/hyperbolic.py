"""
Solution operator u ↦ W(u) = (v(u), w(u)) of the membrane subsystem.

The wave equation is solved in its mild form by Picard iteration on whole
paths, with the admissible horizon T₀ and the constants of the gap estimates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import NamedTuple

import numpy as np

from .const import NORM_H1, NORM_L2
from .errors import (
    ConfigurationError,
    HorizonTooLargeError,
    IterationError,
    QuenchImminentError,
)
from .grid import EigenBasis, Field, TrajectoryPath, sobolev_norm
from .wave import (
    WavePath,
    WaveState,
    apply_semigroup,
    duhamel,
    homogeneous_path,
    state_norms,
)

_LOGGER = logging.getLogger(__name__)

# Gap slack accepted below κ/2.
GAP_SLACK = 1e-12
DELTA_SAMPLES = 32
DELTA_BISECTIONS = 40


@dataclass(frozen=True)
class PhysicalConstants:
    """Coefficients β_F, β_p and boundary values θ₁, θ₂ of the model."""

    beta_F: float
    beta_p: float
    theta1: float
    theta2: float

    def __post_init__(self):
        for name in ("beta_F", "beta_p", "theta1", "theta2"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigurationError(
                    f"must be a finite number, got {value!r}", f"physics.{name}"
                )
        for name in ("theta1", "theta2"):
            value = getattr(self, name)
            if value <= 0:
                raise ConfigurationError(
                    f"must be positive, got {value}", f"physics.{name}"
                )
        for name in ("beta_F", "beta_p"):
            value = getattr(self, name)
            if value < 0:
                raise ConfigurationError(
                    f"must not be negative, got {value}", f"physics.{name}"
                )

    @property
    def balanced_beta_F(self):
        """The β_F for which u ≡ θ₁, w ≡ θ₂ is stationary."""
        return self.beta_p * (self.theta1 - 1) * self.theta2**2


@dataclass(frozen=True, eq=False)
class HyperbolicInit:
    """Initial velocity v₀ (zero trace) and gap w₀ (trace θ₂)."""

    v0: Field
    w0: Field

    def __post_init__(self):
        if self.v0.grid != self.w0.grid:
            raise ConfigurationError("v0 and w0 live on different grids", "init")
        if self.w0.values.min() <= 0 or self.w0.boundary <= 0:
            raise ConfigurationError("initial gap must be positive", "init.w0")

    @property
    def grid(self):
        return self.w0.grid

    @property
    def kappa(self):
        """inf w₀ over the closed interval."""
        return float(min(self.w0.values.min(), self.w0.boundary))

    @property
    def w0_tilde(self):
        return self.w0.values - self.w0.boundary

    @property
    def state(self):
        return WaveState(self.grid, self.v0.values, self.w0_tilde)


@dataclass(frozen=True)
class PicardSettings:
    radius: float
    tol: float = 1e-10
    max_iter: int = 50

    def check(self, kappa, c_emb):
        """Raise unless the radius lies inside (0, κ/(2C))."""
        limit = kappa / (2 * c_emb)
        if not 0 < self.radius < limit:
            raise ConfigurationError(
                f"radius {self.radius} must lie in (0, {limit:.6g})", "picard.radius"
            )


class Horizon(NamedTuple):
    value: float
    active: str
    terms: dict


class GapConstants(NamedTuple):
    C_tilde: float
    C1: float
    C2: float
    C3: float
    L_G: float


@dataclass
class WaveSolution:
    path: WavePath
    iterations: int
    final_ratio: float
    ratios: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    min_gap: float = math.nan

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "final_ratio": self.final_ratio,
            "ratios": self.ratios,
            "distances": self.distances,
            "min_gap": self.min_gap,
        }


def g_reaction(w_tilde, c: PhysicalConstants):
    """G(w̃) = -β_F/(w̃+θ₂)² + β_p(θ₁-1), evaluated nodewise."""
    if isinstance(w_tilde, Field):
        return Field(
            w_tilde.grid,
            g_reaction(w_tilde.values, c),
            float(g_reaction(np.array([w_tilde.boundary]), c)[0]),
        )
    gap = np.asarray(w_tilde, dtype=float) + c.theta2
    if np.any(gap <= 0):
        node = int(np.unravel_index(np.argmin(gap), gap.shape)[-1])
        raise QuenchImminentError(
            f"gap {gap.min():.3g} at node {node}", node=node, gap=float(gap.min())
        )
    return -c.beta_F / gap**2 + c.beta_p * (c.theta1 - 1)


def initial_reaction(init: HyperbolicInit, c: PhysicalConstants, u0_tilde=None):
    """G₀ = G(w̃₀) + β_p·ũ₀ as a field with its boundary trace."""
    g0 = g_reaction(Field(init.grid, init.w0_tilde), c)
    if u0_tilde is None:
        return g0
    return Field(init.grid, g0.values + c.beta_p * np.asarray(u0_tilde), g0.boundary)


def gap_constants(kappa, w0_h1, c_emb, beta_F):
    """
    Constants of the gap estimates on the ball of radius κ/(2C).

    C̃ bounds ‖w‖_H1, C₁ bounds ‖1/w‖_H1, C₂ and C₃ are the Lipschitz
    constants of 1/w² and 1/w³, and L_G = β_F·C₂.
    """
    c_tilde = kappa / (2 * c_emb) + w0_h1
    c1 = math.sqrt(4 * c_emb / kappa**2 + 16 * c_tilde**2 / kappa**4)
    c2 = 2 * c1**3
    c3 = 3 * c1**4
    return GapConstants(c_tilde, c1, c2, c3, beta_F * c2)


def estimate_L_G(init: HyperbolicInit, s: PicardSettings, c: PhysicalConstants, c_emb):
    """Lipschitz constant of G on the admissible ball."""
    w0_h1 = sobolev_norm(init.w0, NORM_H1)
    return gap_constants(init.kappa, w0_h1, c_emb, c.beta_F).L_G


def delta_o(init: HyperbolicInit, s: PicardSettings, basis: EigenBasis, t_max=None):
    """
    Largest time up to which ‖T(τ)Φ₀ - Φ₀‖ stays within r/2, by halving then
    bisection.
    """
    if t_max is None:
        t_max = 2 * init.grid.length
    start = apply_semigroup(0.0, init.state, basis)
    start = WaveState(
        start.grid,
        basis.from_modes(basis.to_modes(start.v)),
        basis.from_modes(basis.to_modes(start.w_tilde)),
    )
    limit = s.radius / 2

    def within(t):
        for tau in np.linspace(0.0, t, DELTA_SAMPLES + 1)[1:]:
            moved = apply_semigroup(tau, start, basis)
            dv = moved.v - start.v
            dw = moved.w_tilde - start.w_tilde
            if float(state_norms(dv, dw, start.grid)) > limit:
                return False
        return True

    if within(t_max):
        return float(t_max)
    t = t_max
    while not within(t):
        t /= 2
        if t < 1e-14:
            return t
    lo, hi = t, 2 * t
    for _ in range(DELTA_BISECTIONS):
        mid = (lo + hi) / 2
        if within(mid):
            lo = mid
        else:
            hi = mid
    return lo


def horizon_T0(
    c: PhysicalConstants,
    init: HyperbolicInit,
    s: PicardSettings,
    M0,
    L_G,
    delta_o,
    c_emb,
    u0_tilde=None,
):
    """T₀ = min{δ_o, 1/(2M₀L_G), κ/(2M₀[(L_G+1)κ + 2C‖G₀‖_H1])}."""
    g0_norm = sobolev_norm(initial_reaction(init, c, u0_tilde), NORM_H1)
    kappa = init.kappa
    terms = {
        "delta_o": float(delta_o),
        "lipschitz": 1 / (2 * M0 * L_G) if L_G > 0 else math.inf,
        "growth": kappa / (2 * M0 * ((L_G + 1) * kappa + 2 * c_emb * g0_norm)),
    }
    active = min(terms, key=terms.get)
    _LOGGER.debug("T0 = %.6g set by %s", terms[active], active)
    return Horizon(terms[active], active, terms)


def lipschitz_W(T0, M0, L_G, beta_p):
    """L_W = T₀M₀β_p·exp(M₀L_G T₀)."""
    return T0 * M0 * beta_p * math.exp(M0 * L_G * T0)


def lipschitz_W2(L_W, kappa, c_emb, v0_norm):
    """Lipschitz constant of the gap map W₂."""
    return L_W * max(
        2 / kappa, 4 * c_emb / kappa**2 * (v0_norm + kappa / (2 * c_emb))
    )


def contraction_ratios(distances, floor):
    """Successive distance quotients, skipping steps whose predecessor is at floor."""
    return [
        distances[i] / distances[i - 1]
        for i in range(1, len(distances))
        if distances[i - 1] > floor
    ]


def solve_wave_picard(
    u_path: TrajectoryPath,
    init: HyperbolicInit,
    c: PhysicalConstants,
    s: PicardSettings,
    basis: EigenBasis,
):
    """
    Fixed point of Φ(ṽ, w̃) = T(t)Φ₀ + Duhamel(G(w̃) + β_p ũ) for a
    pressure path.
    """
    basis.check_grid(u_path.grid)
    grid = u_path.grid
    kappa = init.kappa
    pressure = c.beta_p * (u_path.values - c.theta1)
    current = homogeneous_path(init.state, u_path.horizon, u_path.n_steps, basis)
    distances = []

    for iteration in range(1, s.max_iter + 1):
        w_values = current.w_tilde.values
        gap_min = float((w_values + c.theta2).min())
        if gap_min < kappa / 2 - GAP_SLACK:
            raise HorizonTooLargeError(
                f"gap {gap_min:.6g} fell below κ/2 = {kappa / 2:.6g} "
                f"at iteration {iteration}"
            )
        forcing = TrajectoryPath(
            grid, u_path.horizon, g_reaction(w_values, c) + pressure
        )
        following = duhamel(init.state, forcing, basis)
        distance = following.sup_distance(current)
        distances.append(distance)
        current = following
        _LOGGER.debug("Wave Picard iteration %d distance %.3e", iteration, distance)
        if distance < s.tol:
            break
    else:
        raise IterationError(
            f"wave Picard iteration did not reach {s.tol} in {s.max_iter} steps",
            contraction_ratios(distances, 0.0),
        )

    min_gap = float(min((current.w_tilde.values + c.theta2).min(), c.theta2))
    if min_gap < kappa / 2 - GAP_SLACK:
        raise HorizonTooLargeError(
            f"accepted gap {min_gap:.6g} is below κ/2 = {kappa / 2:.6g}"
        )
    ratios = contraction_ratios(distances, 100 * s.tol)
    return WaveSolution(
        current,
        len(distances),
        max(ratios) if ratios else 0.0,
        ratios,
        distances,
        min_gap,
    )


def gap_operator(u_path, init, c, s, basis):
    """W₂(u): the full gap path for a pressure path."""
    return solve_wave_picard(u_path, init, c, s, basis).path.gap(c.theta2)


def frechet_W(
    q_path: TrajectoryPath,
    solved: WaveSolution,
    c: PhysicalConstants,
    basis: EigenBasis,
    tol=1e-12,
    max_iter=100,
):
    """
    Directional derivative (v'(u)q, w'(u)q) of the wave solution operator.

    Solves the Volterra equation
    w'q(t) = ∫₀ᵗ T₂₁(t-s){β_p q(s) + 2β_F w'q(s)/w(s)³} ds
    by Picard iteration on whole paths; both components vanish at t = 0.
    The base pressure enters only through the solved wave path.
    """
    basis.check_grid(q_path.grid)
    grid = q_path.grid
    gap = solved.path.w_tilde.values + c.theta2
    weight = 2 * c.beta_F / gap**3
    source = c.beta_p * q_path.deviation()
    zero = WaveState.zero(grid)
    current = WavePath(
        TrajectoryPath(grid, q_path.horizon, np.zeros_like(source)),
        TrajectoryPath(grid, q_path.horizon, np.zeros_like(source)),
    )
    distances = []
    for iteration in range(1, max_iter + 1):
        forcing = TrajectoryPath(
            grid, q_path.horizon, source + weight * current.w_tilde.values
        )
        following = duhamel(zero, forcing, basis)
        distance = following.sup_distance(current)
        distances.append(distance)
        current = following
        scale = float(np.max(current.norms(NORM_L2)))
        if distance <= tol * (1 + scale):
            _LOGGER.debug("Fréchet iteration converged after %d steps", iteration)
            return current.v, current.w_tilde
    raise IterationError(
        f"Fréchet iteration did not reach {tol} in {max_iter} steps",
        contraction_ratios(distances, 0.0),
    )
