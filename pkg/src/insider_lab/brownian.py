"""Exact Brownian sampling on grids that carry every look-ahead anchor.

Insider strategies read the driving noise at t and at the anchor
t + eps_t.  Both times must be actual grid points so path values are
exact joint Gaussian draws; interpolating a Brownian path at off-grid
times would silently change its law.  union_grid builds the grid:
a uniform base grid with a ten-times-denser block next to the truncated
horizon, merged with the anchor of every base point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from insider_lab.schedules import (
    EpsilonSchedule,
    Regime,
    ScheduleError,
    TableSchedule,
    regime,
)

#: Grid points closer than this are treated as the same instant.
MERGE_TOL = 1e-12

_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


class GridError(ValueError):
    """Malformed time grid or off-grid lookup."""


def mix_seed(master_seed: int, index: int) -> int:
    """Derive the seed for path ``index`` from the master seed.

    Counter-based splitmix64 finalizer: full-period, avalanching, and
    O(1) per path, so any path's generator can be reproduced without
    drawing the ones before it.
    """
    if index < 0:
        raise GridError(f"path index must be non-negative, got {index}")
    z = (master_seed + (index + 1) * _SPLITMIX_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times starting at 0.

    ``base_indices`` locates the simulation base grid inside ``points``
    and ``anchor_indices[j]`` locates the anchor of base point j; both
    are populated by union_grid and carried along so integrators never
    have to re-match times against the grid.
    """

    points: np.ndarray
    max_horizon: float
    base_indices: np.ndarray | None = None
    anchor_indices: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise GridError("time grid needs at least two points")
        if pts[0] != 0.0:
            raise GridError(f"time grid must start at 0, got {pts[0]}")
        gaps = np.diff(pts)
        if np.any(gaps <= 0):
            raise GridError("time grid points must be strictly increasing")
        if abs(pts[-1] - self.max_horizon) > MERGE_TOL:
            raise GridError(
                f"last grid point {pts[-1]} must equal max_horizon {self.max_horizon}"
            )

    def __len__(self) -> int:
        return len(self.points)

    def index_of(self, t: float) -> int:
        """Index of grid point equal to t within MERGE_TOL; error if absent."""
        i = int(np.searchsorted(self.points, t))
        for j in (i - 1, i, i + 1):
            if 0 <= j < len(self.points) and abs(self.points[j] - t) <= MERGE_TOL:
                return j
        raise GridError(f"time {t!r} is not a grid point; refusing to interpolate")


@dataclass(frozen=True)
class BrownianPath:
    """One sampled path: values[i] is the noise at grid.points[i]."""

    grid: TimeGrid
    values: np.ndarray
    seed: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != self.grid.points.shape:
            raise GridError("path values must align with the grid points")
        if vals[0] != 0.0:
            raise GridError("Brownian path must start at 0")


def _base_points(base_points: int, horizon: float, delta: float) -> np.ndarray:
    """Two-block base grid on [0, T - delta].

    Uniform over [0, T - 10*delta], then ten times denser over the last
    stretch [T - 10*delta, T - delta] where integrands steepen.  When
    delta is 0 (or so large the head block vanishes) a single uniform
    block is used.
    """
    if base_points < 2:
        raise GridError(f"base grid needs at least 2 points, got {base_points}")
    end = horizon - delta
    split = horizon - 10.0 * delta
    if delta <= 0 or split <= 0 or base_points < 4:
        return np.linspace(0.0, end, base_points)
    n_head = int(round(base_points * split / (horizon + 80.0 * delta)))
    n_head = min(max(n_head, 1), base_points - 2)
    n_tail = base_points - n_head
    head = np.linspace(0.0, split, n_head, endpoint=False)
    tail = np.linspace(split, end, n_tail)
    return np.concatenate([head, tail])


def union_grid(base_points: int, schedule: EpsilonSchedule, delta: float) -> TimeGrid:
    """Base grid on [0, T - delta] merged with every anchor t_j + eps(t_j).

    Table schedules whose anchors straddle the horizon are rejected: the
    strategy layer has no consistent reading for them.
    """
    T = schedule.horizon
    if not (0 <= delta < T):
        raise GridError(f"truncation delta must lie in [0, {T}), got {delta!r}")
    if isinstance(schedule, TableSchedule) and regime(schedule) is Regime.MIXED:
        raise ScheduleError(
            "table schedule anchors straddle the horizon (mixed regime); "
            "cannot build a simulation grid for it"
        )
    base = _base_points(base_points, T, delta)
    # the closed-endpoint evaluation: with delta = 0 the base grid ends at
    # T itself, where the kind formulas extend continuously
    anchors = base + schedule._eval_extended(base)

    merged = np.concatenate([base, anchors])
    order = np.argsort(merged, kind="stable")
    merged = merged[order]
    keep = np.empty(len(merged), dtype=bool)
    keep[0] = True
    np.greater(np.diff(merged), MERGE_TOL, out=keep[1:])
    points = merged[keep]
    # map each original time to its surviving representative
    rep = np.cumsum(keep) - 1
    inverse = np.empty(len(merged), dtype=np.int64)
    inverse[order] = rep
    base_idx = inverse[: len(base)]
    anchor_idx = inverse[len(base):]

    return TimeGrid(
        points=points,
        max_horizon=float(points[-1]),
        base_indices=base_idx,
        anchor_indices=anchor_idx,
    )


def sample_increments(grid: TimeGrid, seed: int) -> np.ndarray:
    """Standard normal draws scaled to the grid gaps, one per gap."""
    gaps = np.diff(grid.points)
    z = np.random.default_rng(seed).standard_normal(len(gaps))
    return z * np.sqrt(gaps)


def sample_path(grid: TimeGrid, seed: int) -> BrownianPath:
    """Exact Brownian draw on the grid; deterministic in (grid, seed)."""
    increments = sample_increments(grid, seed)
    values = np.empty(len(grid.points))
    values[0] = 0.0
    np.cumsum(increments, out=values[1:])
    return BrownianPath(grid=grid, values=values, seed=seed)


def value_at(path: BrownianPath, t: float) -> float:
    """Stored path value at grid time t; off-grid times are an error."""
    return float(path.values[path.grid.index_of(t)])


def dump_path_csv(path: BrownianPath, target) -> None:
    """Write (t, B) rows for one path; debugging aid behind a CLI flag."""
    import csv

    with open(target, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "B"])
        for t, b in zip(path.grid.points, path.values):
            writer.writerow([f"{t:.17g}", f"{b:.17g}"])
