"""
Modal wave group and Duhamel integration of forced membrane dynamics.

A state is the pair (v, w̃) of membrane velocity and zero-trace gap deviation.
Per sine mode with frequency ω the group acts as a rotation of
z = ω·w + i·v, z(t) = exp(-iωt)·z(0), so its action is exact.
"""
from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np

from .const import NORM_H1, NORM_H2, NORM_L2
from .errors import ConfigurationError
from .grid import (
    EigenBasis,
    Grid1D,
    TrajectoryPath,
    _norms,
    gradient_norm,
    l2_norm,
)

_LOGGER = logging.getLogger(__name__)

# Below this phase increment the product weights use their Taylor series.
SERIES_CUTOFF = 0.1
SERIES_TERMS = 12


@dataclass(frozen=True, eq=False)
class WaveState:
    """A point (v, w̃) of L² × H¹₀."""

    grid: Grid1D
    v: np.ndarray
    w_tilde: np.ndarray

    def __post_init__(self):
        for name in ("v", "w_tilde"):
            values = np.array(getattr(self, name), dtype=float)
            if values.shape != (self.grid.n_nodes,):
                raise ConfigurationError(
                    f"{name} has {values.shape} values for {self.grid.n_nodes} nodes"
                )
            values.flags.writeable = False
            object.__setattr__(self, name, values)

    @classmethod
    def zero(cls, grid: Grid1D):
        return cls(grid, np.zeros(grid.n_nodes), np.zeros(grid.n_nodes))


def state_norms(v, w_tilde, grid: Grid1D):
    """‖v‖_L2² + ‖∂x w̃‖_L2², square-rooted, along the last axis."""
    return np.sqrt(l2_norm(v, grid) ** 2 + gradient_norm(w_tilde, grid) ** 2)


def state_norm(s: WaveState):
    return float(state_norms(s.v, s.w_tilde, s.grid))


# velocity order -> gap order, one derivative higher
_GAP_ORDERS = {NORM_H1: NORM_H2}


def wave_norms(v, w_tilde, grid: Grid1D, order=NORM_L2):
    """
    State norms with v measured in order and w̃ one derivative higher.

    L2 is the energy norm of state_norms; H1 pairs ‖v‖_H1 with ‖w̃‖_H2.
    """
    if order == NORM_L2:
        return state_norms(v, w_tilde, grid)
    if order not in _GAP_ORDERS:
        raise ConfigurationError(f"no wave state norm of order {order!r}", "order")
    return np.sqrt(
        _norms(v, grid, order) ** 2 + _norms(w_tilde, grid, _GAP_ORDERS[order]) ** 2
    )


@dataclass(frozen=True, eq=False)
class WavePath:
    """Wave states on a uniform time grid."""

    v: TrajectoryPath
    w_tilde: TrajectoryPath

    @property
    def grid(self):
        return self.v.grid

    @property
    def horizon(self):
        return self.v.horizon

    @property
    def n_steps(self):
        return self.v.n_steps

    @property
    def dt(self):
        return self.v.dt

    @property
    def times(self):
        return self.v.times

    def state(self, j):
        return WaveState(self.grid, self.v.values[j], self.w_tilde.values[j])

    def gap(self, theta2):
        """The full gap w = w̃ + θ₂ as a path with boundary trace θ₂."""
        return TrajectoryPath(
            self.grid, self.horizon, self.w_tilde.values + theta2, theta2
        )

    def norms(self, order=NORM_L2):
        return wave_norms(self.v.values, self.w_tilde.values, self.grid, order)

    def increment_norms(self, lag, order=NORM_L2):
        dv = self.v.values[lag:] - self.v.values[:-lag]
        dw = self.w_tilde.values[lag:] - self.w_tilde.values[:-lag]
        return wave_norms(dv, dw, self.grid, order)

    def sup_distance(self, other: WavePath):
        return float(
            np.max(
                state_norms(
                    self.v.values - other.v.values,
                    self.w_tilde.values - other.w_tilde.values,
                    self.grid,
                )
            )
        )


def apply_semigroup(t, s: WaveState, basis: EigenBasis):
    """Apply the wave group T(t) to a state; any real t is accepted."""
    basis.check_grid(s.grid)
    if t == 0:
        return WaveState(s.grid, s.v, s.w_tilde)
    omega = basis.frequencies
    vk = basis.to_modes(s.v)
    wk = basis.to_modes(s.w_tilde)
    cos, sin = np.cos(omega * t), np.sin(omega * t)
    w_new = wk * cos + vk * sin / omega
    v_new = -wk * omega * sin + vk * cos
    return WaveState(s.grid, basis.from_modes(v_new), basis.from_modes(w_new))


def _product_weights(theta, dt):
    """
    Weights (I0, I1) with ∫₀^dt exp(iωτ)·(g0·(1-τ/dt) + g1·τ/dt) dτ = I0·g0 + I1·g1,
    where theta = ω·dt.
    """
    theta = np.asarray(theta, dtype=float)
    small = theta < SERIES_CUTOFF
    safe = np.where(small, 1.0, theta)
    expm1 = -2 * np.sin(safe / 2) ** 2 + 1j * np.sin(safe)
    i1 = dt * (np.exp(1j * safe) / (1j * safe) + expm1 / safe**2)
    i0 = dt * expm1 / (1j * safe) - i1

    term = np.ones_like(theta, dtype=complex)
    s0 = np.zeros_like(theta, dtype=complex)
    s1 = np.zeros_like(theta, dtype=complex)
    for n in range(SERIES_TERMS):
        if n:
            term = term * (1j * theta) / n
        s0 = s0 + term / ((n + 1) * (n + 2))
        s1 = s1 + term / (n + 2)
    return np.where(small, dt * s0, i0), np.where(small, dt * s1, i1)


def duhamel(init: WaveState, forcing: TrajectoryPath, basis: EigenBasis):
    """
    T(t)Φ₀ + ∫₀ᵗ T(t-s)(g(s), 0) ds on the forcing's time grid.

    The forcing is interpolated linearly between grid times (trapezoid
    product rule) and integrated against the exact modal kernel.
    """
    basis.check_grid(init.grid)
    basis.check_grid(forcing.grid)
    omega = basis.frequencies
    times = forcing.times
    dt = forcing.dt

    z0 = omega * basis.to_modes(init.w_tilde) + 1j * basis.to_modes(init.v)
    g = basis.to_modes(forcing.values)
    i0, i1 = _product_weights(omega * dt, dt)
    phase = np.exp(1j * np.outer(times[:-1], omega))
    pieces = 1j * phase * (i0 * g[:-1] + i1 * g[1:])
    accumulated = np.vstack([np.zeros((1, omega.size)), np.cumsum(pieces, axis=0)])
    z = np.exp(-1j * np.outer(times, omega)) * (z0 + accumulated)

    w_tilde = basis.from_modes(z.real / omega)
    v = basis.from_modes(z.imag)
    grid = init.grid
    return WavePath(
        TrajectoryPath(grid, forcing.horizon, v),
        TrajectoryPath(grid, forcing.horizon, w_tilde),
    )


def homogeneous_path(init: WaveState, horizon, n_steps, basis: EigenBasis):
    """The free evolution T(t_j)Φ₀ on a uniform grid."""
    zero = TrajectoryPath(
        init.grid, horizon, np.zeros((n_steps + 1, init.grid.n_nodes))
    )
    return duhamel(init, zero, basis)
