from contextlib import contextmanager
import os
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np

from squeeze_film.grid import Field, band_limited_field, build_grid, sine_eigenbasis
from squeeze_film.hyperbolic import HyperbolicInit, PhysicalConstants
from squeeze_film.wave import WaveState

BALANCED = PhysicalConstants(1.0, 1.0, 2.0, 1.0)


def make_basis(n_nodes=31, n_modes=None, length=1.0):
    grid = build_grid(length, n_nodes)
    return sine_eigenbasis(grid, n_modes or n_nodes)


def random_state(basis, rng, n_active=6):
    grid = basis.grid
    return WaveState(
        grid,
        band_limited_field(grid, rng, n_active),
        band_limited_field(grid, rng, n_active),
    )


def perturbed_fields(grid, rng, c=BALANCED, amplitude=0.02, n_active=4):
    """(u₀, v₀, w₀) close to (θ₁, 0, θ₂) with the right boundary traces."""

    def shape():
        g = band_limited_field(grid, rng, n_active)
        return g / np.max(np.abs(g))

    u0 = Field(grid, c.theta1 * (1 + amplitude * shape()), c.theta1)
    v0 = Field(grid, amplitude * shape())
    w0 = Field(grid, c.theta2 * (1 + amplitude * shape()), c.theta2)
    return u0, v0, w0


def equilibrium_init(grid, c=BALANCED):
    return HyperbolicInit(
        Field(grid, np.zeros(grid.n_nodes)),
        Field(grid, np.full(grid.n_nodes, c.theta2), c.theta2),
    )


@contextmanager
def working_directory():
    """Run inside a fresh temporary directory."""
    previous = os.getcwd()
    with TemporaryDirectory() as path:
        os.chdir(path)
        try:
            yield path
        finally:
            os.chdir(previous)


def listing(folder):
    """Relative paths of every file below folder, sorted."""
    root = Path(folder)
    files = (p for p in root.rglob("*") if p.is_file())
    return sorted(p.relative_to(root).as_posix() for p in files)
