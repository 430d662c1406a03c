"""
Spatial grid, sine spectral transforms, discrete Sobolev norms and temporal
Hölder estimates shared by every solver.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import json
import logging
import math
from typing import NamedTuple

import numpy as np
from scipy.fft import dct, dst
from scipy.integrate import trapezoid

from .const import NORM_H2, NORM_L2, NORM_ORDERS
from .errors import ConfigurationError

_LOGGER = logging.getLogger(__name__)

MIN_NODES = 3
MIN_HOLDER_STEPS = 8
# Increments below this fraction of the path scale are treated as noise.
HOLDER_NOISE = 1e-13


@dataclass(frozen=True)
class Grid1D:
    """Uniform interior mesh of (0, L); boundary nodes are implied."""

    length: float
    n_nodes: int

    @property
    def spacing(self):
        return self.length / (self.n_nodes + 1)

    @property
    def nodes(self):
        """Interior node coordinates."""
        return self.spacing * np.arange(1, self.n_nodes + 1)

    @property
    def full_nodes(self):
        """Node coordinates including both boundary nodes."""
        return self.spacing * np.arange(0, self.n_nodes + 2)

    def pad(self, values, boundary=0.0):
        """Append the boundary trace on both sides of the last axis."""
        values = np.asarray(values, dtype=float)
        edge = np.full(values.shape[:-1] + (1,), float(boundary))
        return np.concatenate([edge, values, edge], axis=-1)


def build_grid(L, n_nodes):
    """Build the uniform interior mesh of (0, L)."""
    try:
        length = float(L)
    except (TypeError, ValueError):
        raise ConfigurationError(f"length must be a number, got {L!r}", "grid.L")
    if not math.isfinite(length) or length <= 0:
        raise ConfigurationError(f"length must be positive, got {L}", "grid.L")
    if isinstance(n_nodes, bool) or int(n_nodes) != n_nodes:
        raise ConfigurationError(
            f"node count must be an integer, got {n_nodes!r}", "grid.n_nodes"
        )
    if n_nodes < MIN_NODES:
        raise ConfigurationError(
            f"at least {MIN_NODES} interior nodes are needed, got {n_nodes}",
            "grid.n_nodes",
        )
    return Grid1D(length, int(n_nodes))


def sine_coefficients(values):
    """Sine coefficients of interior nodal values along the last axis."""
    values = np.asarray(values, dtype=float)
    return dst(values, type=1, axis=-1) / (values.shape[-1] + 1)


def sine_values(coeffs):
    """Interior nodal values of a full set of sine coefficients."""
    return dst(np.asarray(coeffs, dtype=float), type=1, axis=-1) / 2


def sine_derivative(values, grid: Grid1D):
    """
    Derivative of the sine interpolant of zero-trace values, evaluated on the
    full grid (both boundary nodes included).
    """
    coeffs = sine_coefficients(values)
    k = np.arange(1, grid.n_nodes + 1)
    scaled = coeffs * (k * np.pi / grid.length)
    zero = np.zeros(scaled.shape[:-1] + (1,))
    return dct(np.concatenate([zero, scaled, zero], axis=-1), type=1, axis=-1) / 2


@dataclass(frozen=True, eq=False)
class Field:
    """One scalar function on the grid, interior values plus boundary trace."""

    grid: Grid1D
    values: np.ndarray
    boundary: float = 0.0
    modal: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise ConfigurationError(
                f"field has {values.shape} values for {self.grid.n_nodes} nodes"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "boundary", float(self.boundary))

    @classmethod
    def from_function(cls, grid: Grid1D, func, boundary=0.0):
        return cls(grid, func(grid.nodes), boundary)

    @property
    def full_values(self):
        return self.grid.pad(self.values, self.boundary)

    def with_modes(self, basis: EigenBasis):
        """Return a copy carrying its sine coefficients for this basis."""
        return Field(
            self.grid,
            self.values,
            self.boundary,
            basis.to_modes(self.values - self.boundary),
        )


class EigenBasis:
    """Dirichlet Laplacian eigensystem sampled on a grid."""

    def __init__(self, grid: Grid1D, n_modes: int):
        self._grid = grid
        self._n_modes = n_modes

    @property
    def grid(self):
        return self._grid

    @property
    def n_modes(self):
        return self._n_modes

    @cached_property
    def eigenvalues(self):
        """Return λ_k = (kπ/L)² for k = 1..n_modes."""
        return self.frequencies**2

    @cached_property
    def frequencies(self):
        """Return ω_k = kπ/L."""
        return np.arange(1, self._n_modes + 1) * np.pi / self._grid.length

    @cached_property
    def mode_shapes(self):
        """Mode shapes sin(kπx/L), one row per mode."""
        return np.sin(np.outer(self.frequencies, self._grid.nodes))

    def to_modes(self, values):
        """Sine coefficients of zero-trace values, truncated to this basis."""
        return sine_coefficients(values)[..., : self._n_modes]

    def from_modes(self, coeffs):
        """Nodal values of a coefficient array of this basis."""
        coeffs = np.asarray(coeffs, dtype=float)
        pad = self._grid.n_nodes - coeffs.shape[-1]
        if pad:
            coeffs = np.concatenate(
                [coeffs, np.zeros(coeffs.shape[:-1] + (pad,))], axis=-1
            )
        return sine_values(coeffs)

    def check_grid(self, grid: Grid1D):
        if grid != self._grid:
            raise ConfigurationError(
                f"basis built on {self._grid} used with {grid}", "grid"
            )


def sine_eigenbasis(grid: Grid1D, n_modes: int):
    """Build the Dirichlet sine eigenbasis with n_modes modes."""
    if isinstance(n_modes, bool) or int(n_modes) != n_modes or n_modes < 1:
        raise ConfigurationError(
            f"mode count must be a positive integer, got {n_modes!r}", "grid.n_modes"
        )
    if n_modes > grid.n_nodes:
        raise ConfigurationError(
            f"{n_modes} modes alias on {grid.n_nodes} nodes", "grid.n_modes"
        )
    return EigenBasis(grid, int(n_modes))


def _norms(values, grid: Grid1D, order, boundary=0.0):
    """Discrete Sobolev norms along the last axis of values."""
    if order not in NORM_ORDERS:
        raise ConfigurationError(f"unknown norm order {order!r}")
    values = np.asarray(values, dtype=float)
    square = trapezoid(grid.pad(values, boundary) ** 2, dx=grid.spacing, axis=-1)
    if order != NORM_L2:
        coeffs = sine_coefficients(values - boundary)
        lam = (np.arange(1, grid.n_nodes + 1) * np.pi / grid.length) ** 2
        weight = grid.length / 2
        square = square + weight * np.sum(lam * coeffs**2, axis=-1)
        if order == NORM_H2:
            square = square + weight * np.sum(lam**2 * coeffs**2, axis=-1)
    return np.sqrt(square)


def sobolev_norm(f: Field, order=NORM_L2):
    """Discrete L2, H1 or H2 norm of a field, boundary trace included."""
    return float(_norms(f.values, f.grid, order, f.boundary))


def l2_norm(values, grid: Grid1D):
    """Trapezoid L2 norm of zero-trace values along the last axis."""
    return _norms(values, grid, NORM_L2)


def modal_l2_norm(f: Field):
    """L2 norm of a zero-trace field computed from its sine coefficients."""
    coeffs = sine_coefficients(f.values)
    return float(np.sqrt(f.grid.length / 2 * np.sum(coeffs**2)))


def gradient_norm(values, grid: Grid1D):
    """The H¹₀ norm ‖∂x f‖ of zero-trace values along the last axis."""
    coeffs = sine_coefficients(values)
    lam = (np.arange(1, grid.n_nodes + 1) * np.pi / grid.length) ** 2
    return np.sqrt(grid.length / 2 * np.sum(lam * coeffs**2, axis=-1))


def embedding_constant(basis: EigenBasis):
    """
    Smallest C with max|f| <= C‖f‖_H1 over the span of the basis.

    Evaluated through the reproducing kernel of the modal H1 inner product,
    so the bound is exact for band-limited fields at the grid nodes.
    """
    weights = basis.grid.length / 2 * (1 + basis.eigenvalues)
    kernel = np.sum(basis.mode_shapes**2 / weights[:, None], axis=0)
    return float(np.sqrt(kernel.max()))


def band_limited_field(grid: Grid1D, rng, n_active, smoothness=2.0):
    """Random zero-trace values built from the first n_active sine modes."""
    k = np.arange(1, n_active + 1)
    coeffs = np.zeros(grid.n_nodes)
    coeffs[:n_active] = rng.standard_normal(n_active) / k**smoothness
    return sine_values(coeffs)


@dataclass(frozen=True, eq=False)
class TrajectoryPath:
    """Fields on the uniform time grid t_j = j·T/n_steps."""

    grid: Grid1D
    horizon: float
    values: np.ndarray
    boundary: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 2:
            raise ConfigurationError("a path needs at least two time entries")
        if values.shape[1] != self.grid.n_nodes:
            raise ConfigurationError(
                f"path entries have {values.shape[1]} values "
                f"for {self.grid.n_nodes} nodes"
            )
        if not self.horizon > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, field: Field, horizon, n_steps):
        values = np.tile(field.values, (n_steps + 1, 1))
        return cls(field.grid, horizon, values, field.boundary)

    @property
    def n_steps(self):
        return self.values.shape[0] - 1

    @property
    def dt(self):
        return self.horizon / self.n_steps

    @property
    def times(self):
        return np.linspace(0.0, self.horizon, self.n_steps + 1)

    def entry(self, j):
        return Field(self.grid, self.values[j], self.boundary)

    def deviation(self):
        """Values with the boundary trace removed."""
        return self.values - self.boundary

    def norms(self, order=NORM_L2):
        """Norm of every entry."""
        return _norms(self.values, self.grid, order, self.boundary)

    def increment_norms(self, lag, order=NORM_L2):
        """Norms of x(t + lag·dt) - x(t) for every admissible t."""
        diff = self.values[lag:] - self.values[:-lag]
        return _norms(diff, self.grid, order)

    def sup_distance(self, other: TrajectoryPath, order=NORM_L2):
        return float(np.max(_norms(self.values - other.values, self.grid, order)))


class HolderEstimate(NamedTuple):
    alpha: float
    prefactor: float

    @property
    def defined(self):
        return not math.isnan(self.alpha)


def holder_fit(path, norm_order=NORM_L2):
    """
    Fit sup_t ‖x(t+h) - x(t)‖ ≈ L·h^α over dyadic lags h = dt, 2dt, ... T/4.

    The largest lag octave is dropped when at least three lags are available.
    Paths whose increments sit at rounding level return an undefined exponent
    and a zero prefactor.
    """
    if path.n_steps < MIN_HOLDER_STEPS:
        raise ConfigurationError(
            f"Hölder fit needs {MIN_HOLDER_STEPS} steps, path has {path.n_steps}"
        )
    lags = dyadic_lags(path)
    if len(lags) >= 3:
        lags = lags[:-1]

    increments = np.array([path.increment_norms(m, norm_order).max() for m in lags])
    scale = float(np.max(path.norms(norm_order)))
    if increments.max() <= HOLDER_NOISE * (1 + scale):
        _LOGGER.debug("Hölder fit on a constant path, exponent undefined")
        return HolderEstimate(math.nan, 0.0)

    usable = increments > HOLDER_NOISE * (1 + scale)
    h = np.array(lags, dtype=float)[usable] * path.dt
    if usable.sum() < 2:
        _LOGGER.warning("Hölder fit has a single usable lag, exponent undefined")
        return HolderEstimate(math.nan, float(increments.max()))
    alpha, intercept = np.polyfit(np.log(h), np.log(increments[usable]), 1)
    return HolderEstimate(float(alpha), float(np.exp(intercept)))


def dyadic_lags(path):
    """Lags 1, 2, 4, ... up to a quarter of the horizon."""
    lags = []
    lag = 1
    while lag * path.dt <= path.horizon / 4 * (1 + 1e-12):
        lags.append(lag)
        lag *= 2
    return lags


def holder_norm(path, alpha, norm_order=NORM_L2):
    """sup_t ‖x(t)‖ plus the Hölder-α seminorm sampled on dyadic lags."""
    seminorm = max(
        (
            float(path.increment_norms(m, norm_order).max()) / (m * path.dt) ** alpha
            for m in dyadic_lags(path) or [1]
        ),
        default=0.0,
    )
    return float(np.max(path.norms(norm_order))) + seminorm


def field_to_csv(f: Field, fname):
    """Write a field as rows of (x, value)."""
    np.savetxt(
        fname,
        np.column_stack([f.grid.nodes, f.values]),
        delimiter=",",
        header="x,value",
        comments="",
        fmt="%.17g",
    )


def field_to_json(f: Field, basis: EigenBasis | None = None):
    """Sine coefficients of the zero-trace part as a JSON array."""
    deviation = f.values - f.boundary
    coeffs = basis.to_modes(deviation) if basis else sine_coefficients(deviation)
    return json.dumps(coeffs.tolist())


def field_from_json(grid: Grid1D, text, boundary=0.0):
    coeffs = np.asarray(json.loads(text), dtype=float)
    full = np.zeros(grid.n_nodes)
    full[: coeffs.size] = coeffs
    return Field(grid, sine_values(full) + boundary, boundary, coeffs)


def path_header(grid: Grid1D):
    return "t," + ",".join(f"{x:.12g}" for x in grid.nodes)


def path_to_csv(path: TrajectoryPath, fname):
    """Write a path with columns t, node_1..node_n and an x-coordinate header."""
    np.savetxt(
        fname,
        np.column_stack([path.times, path.values]),
        delimiter=",",
        header=path_header(path.grid),
        comments="",
        fmt="%.17g",
    )


def path_from_csv(fname, boundary=0.0, grid: Grid1D | None = None):
    """Read a path written by path_to_csv."""
    data = np.loadtxt(fname, delimiter=",", skiprows=1, ndmin=2)
    if grid is None:
        with open(fname) as f:
            header = f.readline().strip().split(",")[1:]
        nodes = [float(x) for x in header]
        grid = build_grid(nodes[0] * (len(nodes) + 1), len(nodes))
    return TrajectoryPath(grid, float(data[-1, 0]), data[:, 1:], boundary)
