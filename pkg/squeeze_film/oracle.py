"""
Method-of-lines reference solver for the coupled pressure/gap system, with
quench detection and the conservation-form residual.

Space is discretized by second order finite differences. The wave pair is
advanced by velocity Verlet; the pressure by a linearized backward Euler step
whose matrix is an M-matrix, so positivity of u is preserved.
"""
from __future__ import annotations

from dataclasses import dataclass
import logging
import math
from typing import NamedTuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import solve_banded

from .const import QUENCH_FRACTION
from .errors import NumericError, StiffnessError
from .grid import Field, Grid1D, TrajectoryPath
from .hyperbolic import PhysicalConstants

_LOGGER = logging.getLogger(__name__)

MIN_STEP = 1e-12


class QuenchEvent(NamedTuple):
    time: float
    node_index: int
    w_value: float

    def as_dict(self):
        return {
            "time": self.time,
            "node_index": self.node_index,
            "w_value": self.w_value,
        }


@dataclass
class MolResult:
    u_path: TrajectoryPath
    v_path: TrajectoryPath
    w_path: TrajectoryPath
    quench: QuenchEvent | None
    dt: float
    substeps: int

    def __iter__(self):
        return iter((self.u_path, self.v_path, self.w_path))

    def as_dict(self):
        return {
            "quench": self.quench.as_dict() if self.quench else None,
            "dt": self.dt,
            "substeps": self.substeps,
            "horizon": self.u_path.horizon,
        }


def _acceleration(w, u, c: PhysicalConstants, grid: Grid1D):
    full = grid.pad(w, c.theta2)
    laplacian = (full[2:] - 2 * full[1:-1] + full[:-2]) / grid.spacing**2
    return laplacian - c.beta_F / w**2 + c.beta_p * (u - 1)


def _pressure_step(u, v_half, w_mid, dt, c: PhysicalConstants, grid: Grid1D):
    """
    Linearized backward Euler for u with coefficients frozen at the mid gap.

    The decaying part of -(v/w)u is implicit and the growing part explicit.
    """
    h2 = grid.spacing**2
    a_full = grid.pad(w_mid, c.theta2) ** 3 * grid.pad(u, c.theta1)
    faces = (a_full[1:] + a_full[:-1]) / 2
    scale = dt / (w_mid * h2)
    decay = np.maximum(v_half, 0) / w_mid
    growth = np.maximum(-v_half, 0) / w_mid

    n = grid.n_nodes
    bands = np.zeros((3, n))
    bands[0, 1:] = -scale[:-1] * faces[1:-1]
    bands[1] = 1 + scale * (faces[:-1] + faces[1:]) + dt * decay
    bands[2, :-1] = -scale[1:] * faces[1:-1]
    rhs = u * (1 + dt * growth)
    rhs[0] += scale[0] * faces[0] * c.theta1
    rhs[-1] += scale[-1] * faces[-1] * c.theta1
    return solve_banded((1, 1), bands, rhs)


def _stable_step(u, w, c: PhysicalConstants, grid: Grid1D):
    h = grid.spacing
    diffusivity = float(np.max(grid.pad(w, c.theta2) ** 3 * grid.pad(u, c.theta1)))
    if diffusivity <= 0:
        return h
    return min(h, h**2 / (2 * diffusivity))


def integrate_mol(
    c: PhysicalConstants,
    u0: Field,
    v0: Field,
    w0: Field,
    horizon,
    n_steps,
    threshold=None,
    max_dt=None,
):
    """
    Integrate from (u₀, v₀, w₀) to the horizon, sampling n_steps + 1 rows.

    Stops early when min w falls to the quench threshold; the returned paths
    then end at the last completed output time.
    max_dt optionally caps the internal step below the stability bound.
    """
    grid = u0.grid
    threshold = threshold if threshold is not None else QUENCH_FRACTION * c.theta2
    dt_out = horizon / n_steps
    u, v, w = u0.values.copy(), v0.values.copy(), w0.values.copy()
    rows_u, rows_v, rows_w = [u.copy()], [v.copy()], [w.copy()]
    quench = None
    total_substeps = 0
    dt = dt_out

    for j in range(n_steps):
        limit = _stable_step(u, w, c, grid)
        if max_dt is not None:
            limit = min(limit, max_dt)
        substeps = math.ceil(dt_out / limit - 1e-9)
        dt = dt_out / substeps
        if dt < MIN_STEP:
            raise StiffnessError(
                f"stable step {dt:.3g} underflowed at t={j * dt_out:.6g}"
            )
        for k in range(substeps):
            t = j * dt_out + k * dt
            v_half = v + dt / 2 * _acceleration(w, u, c, grid)
            w_new = w + dt * v_half
            total_substeps += 1
            if w_new.min() <= threshold:
                quench = _interpolate_crossing(w, w_new, t, dt, threshold)
                _LOGGER.info(
                    "Oracle quench at t=%.6g node %d", quench.time, quench.node_index
                )
                break
            u_new = _pressure_step(u, v_half, (w + w_new) / 2, dt, c, grid)
            if not np.all(np.isfinite(u_new)) or u_new.min() <= 0:
                raise NumericError(
                    f"pressure lost positivity at t={t + dt:.6g}, "
                    f"min u = {np.nanmin(u_new):.3g}"
                )
            v = v_half + dt / 2 * _acceleration(w_new, u_new, c, grid)
            u, w = u_new, w_new
        if quench:
            if len(rows_u) == 1:
                rows_u.append(u.copy())
                rows_v.append(v_half)
                rows_w.append(w_new)
                horizon_done = quench.time
            else:
                horizon_done = (len(rows_u) - 1) * dt_out
            break
        rows_u.append(u.copy())
        rows_v.append(v.copy())
        rows_w.append(w.copy())
    else:
        horizon_done = horizon

    return MolResult(
        TrajectoryPath(grid, horizon_done, np.array(rows_u), c.theta1),
        TrajectoryPath(grid, horizon_done, np.array(rows_v)),
        TrajectoryPath(grid, horizon_done, np.array(rows_w), c.theta2),
        quench,
        dt,
        total_substeps,
    )


def _interpolate_crossing(w_old, w_new, t, dt, threshold):
    crossing = np.nonzero(w_new <= threshold)[0]
    drop = w_old[crossing] - w_new[crossing]
    fractions = np.where(
        drop > 0, (w_old[crossing] - threshold) / np.where(drop > 0, drop, 1), 0.0
    )
    fractions = np.clip(fractions, 0.0, 1.0)
    first = int(np.argmin(fractions))
    return QuenchEvent(
        float(t + fractions[first] * dt), int(crossing[first]), float(threshold)
    )


def mol_solve(cfg):
    """Run the oracle for a SolverConfig."""
    grid = cfg.grid
    u0, v0, w0 = cfg.initial_fields(grid)
    threshold = cfg.quench_threshold
    return integrate_mol(cfg.constants, u0, v0, w0, cfg.horizon, cfg.n_steps, threshold)


def quench_scan(w_path: TrajectoryPath, threshold):
    """First crossing of the threshold by any node, linear in time."""
    values = w_path.values
    times = w_path.times
    below = values <= threshold
    if not below.any():
        return None
    if below[0].any():
        node = int(np.argmin(values[0]))
        return QuenchEvent(0.0, node, float(values[0, node]))
    best = None
    for node in np.nonzero(below.any(axis=0))[0]:
        j = int(np.argmax(below[:, node]))
        before, after = values[j - 1, node], values[j, node]
        fraction = (before - threshold) / (before - after)
        time = float(times[j - 1] + fraction * (times[j] - times[j - 1]))
        if best is None or time < best.time:
            best = QuenchEvent(time, int(node), float(threshold))
    return best


def flux_balance_residual(
    u_path: TrajectoryPath, w_path: TrajectoryPath, c: PhysicalConstants, grid: Grid1D
):
    """
    |d/dt ∫wu dx - [w³u ∂x u] at the boundary| at every output time.
    """
    h = grid.spacing
    u_full = grid.pad(u_path.values, u_path.boundary)
    w_full = grid.pad(w_path.values, w_path.boundary)
    mass = trapezoid(w_full * u_full, dx=h, axis=-1)
    rate = np.gradient(mass, u_path.dt, edge_order=2 if mass.size > 2 else 1)

    du_left = (-3 * u_full[:, 0] + 4 * u_full[:, 1] - u_full[:, 2]) / (2 * h)
    du_right = (3 * u_full[:, -1] - 4 * u_full[:, -2] + u_full[:, -3]) / (2 * h)
    flux_left = w_full[:, 0] ** 3 * u_full[:, 0] * du_left
    flux_right = w_full[:, -1] ** 3 * u_full[:, -1] * du_right
    return np.abs(rate - (flux_right - flux_left))
