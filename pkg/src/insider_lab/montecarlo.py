"""Batch Monte Carlo estimation of expected log utility.

The engine simulates Brownian paths on a shared union grid, evaluates
log wealth in vectorized chunks and reduces chunk results in index
order, so a run is reproducible bit for bit no matter how many worker
threads execute it.  Antithetic pairing (negating every Gaussian draw
of a path) is on by default; a pair then counts as one statistically
independent observation and all error bars are computed over pair
means.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from insider_lab.brownian import TimeGrid, _base_points, mix_seed, union_grid
from insider_lab.forward_sde import ForwardError, check_truncation, log_wealth_matrix
from insider_lab.schedules import EpsilonSchedule
from insider_lab.strategy import (
    HonestStrategy,
    InsiderStrategy,
    MarketCoefficients,
    Strategy,
    TableStrategy,
)

# target size of one simulation block, in doubles; keeps peak memory flat
# as grids grow while leaving enough rows for vectorization to pay off
_CHUNK_TARGET = 1 << 22


class MonteCarloError(RuntimeError):
    """Estimation aborted: bad configuration or a failing path."""


class BatchAbort(MonteCarloError):
    """A path blew up mid-batch; the whole estimate is discarded."""


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with its standard error and 95% confidence interval.

    ``n_paths`` counts statistically independent observations; an
    antithetic pair collapses to a single observation, so a run with
    200000 paired paths reports 100000 here.
    """

    mean: float
    stderr: float
    n_paths: int
    ci95: tuple = None

    def __post_init__(self):
        if self.n_paths < 2:
            raise MonteCarloError(f"need at least 2 observations, got {self.n_paths}")
        if not (math.isfinite(self.mean) and math.isfinite(self.stderr)):
            raise MonteCarloError("estimate must be finite")
        if self.stderr < 0:
            raise MonteCarloError("standard error cannot be negative")
        band = (self.mean - 1.96 * self.stderr, self.mean + 1.96 * self.stderr)
        if self.ci95 is None:
            object.__setattr__(self, "ci95", band)
        elif tuple(self.ci95) != band:
            raise MonteCarloError("ci95 must equal mean +/- 1.96*stderr")

    def covers(self, value: float) -> bool:
        return self.ci95[0] <= value <= self.ci95[1]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an estimate, and nothing that doesn't.

    Worker-thread count is deliberately not part of the config: it must
    never change the result, so it stays a runtime knob.
    """

    market: MarketCoefficients
    schedule: EpsilonSchedule
    strategy: Strategy
    n_paths: int
    base_points: int
    delta: float
    master_seed: int = 42
    antithetic: bool = True
    pi_cap: float | None = None

    def __post_init__(self):
        if not isinstance(self.n_paths, int) or self.n_paths < 100:
            raise MonteCarloError(f"n_paths must be an integer >= 100, got {self.n_paths!r}")
        bp = self.base_points
        if not isinstance(bp, int) or bp < 256 or bp & (bp - 1):
            raise MonteCarloError(
                f"base_points must be a power of two >= 256, got {bp!r}"
            )
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2**64:
            raise MonteCarloError(f"master_seed must fit in 64 bits, got {self.master_seed!r}")
        if not 0 <= self.delta < self.market.horizon:
            raise MonteCarloError(
                f"truncation delta must lie in [0, {self.market.horizon}), got {self.delta!r}"
            )
        if abs(self.schedule.horizon - self.market.horizon) > 1e-12:
            raise MonteCarloError(
                f"schedule horizon {self.schedule.horizon} disagrees with "
                f"market horizon {self.market.horizon}"
            )
        if isinstance(self.strategy, InsiderStrategy):
            if self.strategy.schedule._config_entry() != self.schedule._config_entry():
                raise MonteCarloError(
                    "look-ahead strategy must use the experiment's schedule"
                )
        if self.antithetic and self.n_paths % 2:
            raise MonteCarloError("antithetic pairing needs an even n_paths")
        if self.pi_cap is not None:
            cap = self.pi_cap
            if not (isinstance(cap, (int, float)) and math.isfinite(cap) and cap > 0):
                raise MonteCarloError(f"pi_cap must be a positive number, got {cap!r}")


def _strategy_entry(strategy: Strategy):
    if isinstance(strategy, HonestStrategy):
        return {"kind": "merton"}
    if isinstance(strategy, InsiderStrategy):
        return {"kind": "insider"}
    if isinstance(strategy, TableStrategy):
        return {"kind": "table", "knots": [[float(t), float(v)] for t, v in strategy.knots]}
    raise MonteCarloError(f"cannot serialize strategy {strategy!r}")


def config_dict(cfg: ExperimentConfig) -> dict:
    """Canonical plain-data form of a config, stable across runs."""
    return {
        "market": {
            "alpha": cfg.market.alpha._config_entry(),
            "beta": cfg.market.beta._config_entry(),
            "horizon": cfg.market.horizon,
            "x0": cfg.market.x0,
        },
        "schedule": cfg.schedule._config_entry(),
        "strategy": _strategy_entry(cfg.strategy),
        "n_paths": cfg.n_paths,
        "base_points": cfg.base_points,
        "delta": cfg.delta,
        "master_seed": cfg.master_seed,
        "antithetic": cfg.antithetic,
        "pi_cap": cfg.pi_cap,
    }


def digest_of(payload: dict) -> str:
    """64-bit FNV-1a over the canonical JSON encoding, as 16 hex digits."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    acc = 0xCBF29CE484222325
    for byte in blob:
        acc ^= byte
        acc = (acc * 0x100000001B3) % 2**64
    return f"{acc:016x}"


def config_digest(cfg: ExperimentConfig) -> str:
    return digest_of(config_dict(cfg))


def _resolve_threads(threads) -> int:
    if threads is None:
        return os.cpu_count() or 1
    if not isinstance(threads, int) or threads < 1:
        raise MonteCarloError(f"thread count must be a positive integer, got {threads!r}")
    return threads


def _chunk_units(n_grid_points: int) -> int:
    return max(32, min(512, _CHUNK_TARGET // max(1, n_grid_points)))


def _normal_block(seeds, sqrt_gaps: np.ndarray) -> np.ndarray:
    """Brownian values for one chunk, row k driven by seeds[k]."""
    z = np.empty((len(seeds), sqrt_gaps.size))
    for i, s in enumerate(seeds):
        z[i] = np.random.default_rng(s).standard_normal(sqrt_gaps.size)
    values = np.empty((len(seeds), sqrt_gaps.size + 1))
    values[:, 0] = 0.0
    np.cumsum(z * sqrt_gaps, axis=1, out=values[:, 1:])
    return values


def _map_in_order(work, items, threads: int):
    if threads == 1 or len(items) == 1:
        return [work(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, items))


def _estimate_from_sample(sample: np.ndarray) -> McEstimate:
    n = int(sample.size)
    mean = float(np.mean(sample))
    sd = float(np.std(sample, ddof=1))
    return McEstimate(mean=mean, stderr=sd / math.sqrt(n), n_paths=n)


def estimate_log_utility(cfg: ExperimentConfig, threads: int | None = None) -> McEstimate:
    """Mean log wealth over independent paths seeded from the master seed.

    Deterministic given the config alone; the thread count only changes
    how chunks are scheduled, never what they compute or the order in
    which their results are reduced.
    """
    threads = _resolve_threads(threads)
    grid = union_grid(cfg.base_points, cfg.schedule, cfg.delta)
    check_truncation(cfg.market, cfg.strategy, grid, cfg.delta)
    units = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    sqrt_gaps = np.sqrt(np.diff(grid.points))
    chunk = _chunk_units(len(grid.points))
    bounds = [(lo, min(lo + chunk, units)) for lo in range(0, units, chunk)]

    def run_chunk(span):
        lo, hi = span
        seeds = [mix_seed(cfg.master_seed, k) for k in range(lo, hi)]
        values = _normal_block(seeds, sqrt_gaps)
        try:
            plus = log_wealth_matrix(
                cfg.market, cfg.strategy, grid, values, cfg.delta, pi_cap=cfg.pi_cap
            )[0]
            if not cfg.antithetic:
                return plus
            np.negative(values, out=values)
            minus = log_wealth_matrix(
                cfg.market, cfg.strategy, grid, values, cfg.delta, pi_cap=cfg.pi_cap
            )[0]
        except ForwardError as exc:
            row = getattr(exc, "row", None)
            if row is None:
                raise BatchAbort(f"batch aborted: {exc}") from exc
            raise BatchAbort(
                f"batch aborted: path with seed {seeds[row]} "
                f"(unit {lo + row}) failed: {exc}"
            ) from exc
        return 0.5 * (plus + minus)

    sample = np.concatenate(_map_in_order(run_chunk, bounds, threads))
    return _estimate_from_sample(sample)


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> dict:
    """Estimate and wrap the result in its serializable record."""
    start = time.perf_counter()
    est = estimate_log_utility(cfg, threads=threads)
    return {
        "config_digest": config_digest(cfg),
        "mean": est.mean,
        "stderr": est.stderr,
        "ci95": [est.ci95[0], est.ci95[1]],
        "n_paths": est.n_paths,
        "wall_time_s": time.perf_counter() - start,
    }


def discretized_mean(market: MarketCoefficients, strategy: Strategy,
                     grid: TimeGrid, delta: float) -> float:
    """Closed-form expectation of the discretized log-wealth estimator.

    On a fixed grid the estimator's mean is known exactly: the
    stochastic sum contributes nothing for deterministic fractions,
    while for the look-ahead fraction each term contributes
    dt/eps (from the squared increment inside the correction) minus
    half of dt/eps (from the variance penalty), leaving the left
    Riemann sum of (alpha/beta)^2/2 + 1/(2 eps).  Used as a control
    variate and as an oracle for discretization-bias studies.
    """
    sub = np.asarray(grid.base_indices, dtype=np.int64)
    t_left = grid.points[sub[:-1]]
    dt = np.diff(grid.points[sub])
    alpha = market.alpha(t_left)
    beta = market.beta(t_left)
    if isinstance(strategy, HonestStrategy):
        rate = 0.5 * (alpha / beta) ** 2
    elif isinstance(strategy, InsiderStrategy):
        eps = strategy.schedule.eval(t_left)
        rate = 0.5 * (alpha / beta) ** 2 + 0.5 / eps
    elif isinstance(strategy, TableStrategy):
        f = strategy.fraction(t_left)
        rate = f * alpha - 0.5 * f**2 * beta**2
    else:
        raise MonteCarloError(f"unknown strategy type {type(strategy).__name__}")
    total = float(np.dot(rate, dt))
    if market.x0 != 1.0:
        total += math.log(market.x0)
    return total


@dataclass(frozen=True)
class RefinementLevel:
    base_points: int
    estimate: McEstimate


def refinement_study(cfg: ExperimentConfig, levels: int = 3, factor: int = 4,
                     threads: int | None = None) -> list[RefinementLevel]:
    """Re-estimate the same expectation on successively finer base grids.

    All levels are driven by the same Brownian paths, sampled once on
    the union of every level's grid, so level-to-level movement of the
    mean isolates discretization bias instead of Monte Carlo noise.
    On top of that, the average deviation of the levels from their
    closed-form discretized means serves as a control variate with
    known zero mean; subtracting it shrinks each level's error bar to
    the scale of the level differences while leaving every level's
    expectation untouched.
    """
    if levels < 2:
        raise MonteCarloError(f"a refinement study needs at least 2 levels, got {levels}")
    if factor < 2:
        raise MonteCarloError(f"refinement factor must be at least 2, got {factor}")
    threads = _resolve_threads(threads)
    T = cfg.market.horizon

    sizes = [cfg.base_points * factor**k for k in range(levels)]
    segments = []
    for n in sizes:
        base = _base_points(n, T, cfg.delta)
        anchors = base + cfg.schedule._eval_extended(base)
        segments.append((base, anchors))

    merged = np.concatenate([arr for pair in segments for arr in pair])
    order = np.argsort(merged, kind="stable")
    ranked = merged[order]
    keep = np.empty(len(ranked), dtype=bool)
    keep[0] = True
    np.greater(np.diff(ranked), 1e-12, out=keep[1:])
    points = ranked[keep]
    rep = np.cumsum(keep) - 1
    inverse = np.empty(len(ranked), dtype=np.int64)
    inverse[order] = rep

    grids = []
    offset = 0
    for base, anchors in segments:
        base_idx = inverse[offset: offset + len(base)]
        anchor_idx = inverse[offset + len(base): offset + len(base) + len(anchors)]
        offset += len(base) + len(anchors)
        grids.append(TimeGrid(
            points=points,
            max_horizon=float(points[-1]),
            base_indices=base_idx,
            anchor_indices=anchor_idx,
        ))

    for grid in grids:
        check_truncation(cfg.market, cfg.strategy, grid, cfg.delta)
    centers = [discretized_mean(cfg.market, cfg.strategy, g, cfg.delta) for g in grids]
    center_avg = float(np.mean(centers))

    units = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    sqrt_gaps = np.sqrt(np.diff(points))
    chunk = _chunk_units(len(points))
    bounds = [(lo, min(lo + chunk, units)) for lo in range(0, units, chunk)]

    def run_chunk(span):
        lo, hi = span
        seeds = [mix_seed(cfg.master_seed, k) for k in range(lo, hi)]
        values = _normal_block(seeds, sqrt_gaps)
        per_level = [
            log_wealth_matrix(
                cfg.market, cfg.strategy, g, values, cfg.delta, pi_cap=cfg.pi_cap
            )[0]
            for g in grids
        ]
        if cfg.antithetic:
            np.negative(values, out=values)
            for j, g in enumerate(grids):
                minus = log_wealth_matrix(
                    cfg.market, cfg.strategy, g, values, cfg.delta, pi_cap=cfg.pi_cap
                )[0]
                per_level[j] = 0.5 * (per_level[j] + minus)
        control = np.mean(per_level, axis=0) - center_avg
        return np.stack([x - control for x in per_level])

    parts = _map_in_order(run_chunk, bounds, threads)
    stacked = np.concatenate(parts, axis=1)
    return [
        RefinementLevel(base_points=n, estimate=_estimate_from_sample(stacked[j]))
        for j, n in enumerate(sizes)
    ]


def duality_check(kind: str, T: float, n_paths: int, base_points: int, seed: int,
                  eps: float | None = None, threads: int | None = None):
    """Compare E[forward integral of phi] against its closed form.

    Kinds: ``constant_lookahead`` integrates phi(t) = B(t + eps) and has
    closed form T (the look-ahead derivative of phi is 1 on [0, T]);
    ``terminal_value`` integrates phi(t) = B(T), whose sum telescopes to
    B(T)^2 with mean T; ``adapted_one`` integrates phi = 1, an adapted
    integrand with no look-ahead content, giving 0.
    Returns (estimate, analytic).
    """
    canon = str(kind).strip().lower().replace("-", "_")
    if not (math.isfinite(T) and T > 0):
        raise MonteCarloError(f"horizon must be positive, got {T!r}")
    if n_paths < 2:
        raise MonteCarloError(f"need at least 2 paths, got {n_paths}")
    if base_points < 2:
        raise MonteCarloError(f"need at least 2 grid points, got {base_points}")
    threads = _resolve_threads(threads)

    if canon == "constant_lookahead":
        if eps is None or not (math.isfinite(eps) and eps > 0):
            raise MonteCarloError(f"constant_lookahead needs eps > 0, got {eps!r}")
        from insider_lab.schedules import ConstantSchedule

        grid = union_grid(base_points, ConstantSchedule(value=eps, horizon=T), 0.0)
        analytic = T
    elif canon in ("terminal_value", "adapted_one"):
        if eps is not None:
            raise MonteCarloError(f"kind {canon!r} takes no eps")
        grid = TimeGrid(points=np.linspace(0.0, T, base_points), max_horizon=T)
        analytic = T if canon == "terminal_value" else 0.0
    else:
        raise MonteCarloError(
            f"unknown duality kind {kind!r}; expected constant_lookahead, "
            "terminal_value or adapted_one"
        )

    sqrt_gaps = np.sqrt(np.diff(grid.points))
    chunk = _chunk_units(len(grid.points))
    bounds = [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]

    def run_chunk(span):
        lo, hi = span
        seeds = [mix_seed(seed, k) for k in range(lo, hi)]
        values = _normal_block(seeds, sqrt_gaps)
        if canon == "constant_lookahead":
            sub = np.asarray(grid.base_indices, dtype=np.int64)
            anchors = np.asarray(grid.anchor_indices, dtype=np.int64)[: sub.size - 1]
            inc = np.ascontiguousarray(values[:, sub[1:]] - values[:, sub[:-1]])
            phi = np.ascontiguousarray(values[:, anchors])
            return np.sum(phi * inc, axis=1)
        if canon == "terminal_value":
            inc = np.diff(values, axis=1)
            return np.sum(values[:, -1:] * inc, axis=1)
        return values[:, -1] - values[:, 0]

    sample = np.concatenate(_map_in_order(run_chunk, bounds, threads))
    return _estimate_from_sample(sample), analytic


@dataclass(frozen=True)
class RegressionResult:
    """No-intercept least-squares slope with its standard error."""

    slope: float
    stderr: float
    n_paths: int


def _regress(x: np.ndarray, y: np.ndarray) -> RegressionResult:
    sxx = float(np.dot(x, x))
    if sxx == 0.0:
        raise MonteCarloError("degenerate regressor: zero variance")
    slope = float(np.dot(x, y)) / sxx
    resid = y - slope * x
    n = x.size
    stderr = math.sqrt(float(np.dot(resid, resid)) / ((n - 1) * sxx))
    return RegressionResult(slope=slope, stderr=stderr, n_paths=n)


def bridge_drift_regression(t: float, eps: float, h: float,
                            n_paths: int, seed: int) -> RegressionResult:
    """Slope of B(t+h) - B(t) on B(t+eps) - B(t) for h inside the window.

    Conditionally on the window increment the path behaves like a
    Brownian bridge, so the population slope is h/eps.
    """
    _check_increment_args(t, eps, n_paths)
    if not (0 < h <= eps):
        raise MonteCarloError(f"need 0 < h <= eps, got h={h!r}, eps={eps!r}")
    z = np.random.default_rng(seed).standard_normal((2, n_paths))
    y = math.sqrt(h) * z[0]
    x = y + math.sqrt(eps - h) * z[1]
    return _regress(x, y)


def martingale_gap_check(t: float, eps: float, h: float,
                         n_paths: int, seed: int) -> RegressionResult:
    """Slope of B(t+h) - B(t) on B(t+eps) - B(t) for h beyond the window.

    The increment past t+eps is independent of the window, so the slope
    is exactly 1 for every h >= eps; the projection of the future onto
    the window never grows past the window itself.
    """
    _check_increment_args(t, eps, n_paths)
    if not (math.isfinite(h) and h >= eps):
        raise MonteCarloError(f"need h >= eps, got h={h!r}, eps={eps!r}")
    z = np.random.default_rng(seed).standard_normal((2, n_paths))
    x = math.sqrt(eps) * z[0]
    y = x + math.sqrt(h - eps) * z[1]
    return _regress(x, y)


def _check_increment_args(t: float, eps: float, n_paths: int) -> None:
    if not (math.isfinite(t) and t >= 0):
        raise MonteCarloError(f"start time must be finite and >= 0, got {t!r}")
    if not (math.isfinite(eps) and eps > 0):
        raise MonteCarloError(f"window eps must be positive, got {eps!r}")
    if n_paths < 2:
        raise MonteCarloError(f"need at least 2 paths, got {n_paths}")
