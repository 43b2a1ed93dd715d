"""Shared oracles and generators for the test suite.

These stay independent of the library's solution paths: grid sweeps,
projections, and direct LP solves over the raw constraint system.
"""

import numpy as np
from scipy.optimize import linprog

from sensorshift import IdentificationSystem


def random_feasible_system(rng, m, dim, mass=None):
    """Column-stochastic sensor with a consistent rhs built from a hidden truth."""
    sensor = rng.dirichlet(np.ones(m), size=dim).T  # (m, dim)
    truth = rng.dirichlet(np.ones(dim)) * (mass if mass is not None else rng.uniform(0.2, 1.0))
    return IdentificationSystem(sensor, sensor @ truth), truth


def grid_points(dim, resolution):
    """All non-negative grid vectors with coordinates k/resolution summing <= 1."""
    steps = int(round(resolution))
    axes = [np.arange(steps + 1) for _ in range(dim)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    mesh = mesh[mesh.sum(axis=1) <= steps]
    return mesh / steps * 1.0


def grid_feasible_points(system, resolution=40, move_tol=0.05, cap=60):
    """Feasible points from a grid sweep: project each grid point exactly onto
    the affine solution set, keep non-negative projections that moved little,
    and thin near-duplicates.  ``cap`` bounds the total via even subsampling.
    """
    pts = grid_points(system.matrix.shape[1], resolution)
    pinv = np.linalg.pinv(system.matrix)
    projected = pts + (system.rhs - pts @ system.matrix.T) @ pinv.T
    near = np.max(np.abs(projected - pts), axis=1) <= move_tol
    feasible = projected[near & (projected.min(axis=1) >= -1e-12)]
    feasible = np.clip(feasible, 0.0, None)
    if len(feasible) == 0:
        return feasible
    _, keep = np.unique(np.round(feasible / 0.025), axis=0, return_index=True)
    feasible = feasible[np.sort(keep)]
    if len(feasible) > cap:
        feasible = feasible[np.linspace(0, len(feasible) - 1, cap).astype(int)]
    return feasible


def lp_extreme_point(system, objective):
    """Solve max objective . v over {A v = rhs, v >= 0} directly (no hull)."""
    res = linprog(
        c=-np.asarray(objective, dtype=float),
        A_eq=system.matrix,
        b_eq=system.rhs,
        bounds=(0.0, None),
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"oracle LP failed: {res.message}")
    return res.x
