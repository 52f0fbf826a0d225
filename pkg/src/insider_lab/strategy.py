"""Portfolio rules: the honest benchmark and the look-ahead rule.

The honest trader holds the drift-to-variance ratio alpha/beta^2.  The
insider adds a correction proportional to the noise increment it can
already see: (anchor value - current value) / (beta * eps_t).  The same
correction can be produced by composing the conditional-density layer's
derivative-to-density ratio; both routes are exposed and tested against
each other rather than collapsed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from insider_lab.brownian import BrownianPath, value_at
from insider_lab.donsker import malliavin_ratio
from insider_lab.schedules import EpsilonSchedule


class StrategyError(ValueError):
    """Invalid market coefficients or strategy parameters."""


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-open step function: value(t) = values[k] on [breaks[k], breaks[k+1])."""

    breaks: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.breaks) != len(self.values) or not self.breaks:
            raise StrategyError("piecewise coefficients need one value per breakpoint")
        if self.breaks[0] != 0.0:
            raise StrategyError(f"first breakpoint must be 0, got {self.breaks[0]}")
        if any(b >= c for b, c in zip(self.breaks, self.breaks[1:])):
            raise StrategyError("breakpoints must be strictly increasing")
        if not all(map(math.isfinite, self.values)):
            raise StrategyError("coefficient values must be finite")

    @classmethod
    def from_spec(cls, spec) -> "PiecewiseConstant":
        """Accept a bare number or a {breaks, values} mapping."""
        if isinstance(spec, PiecewiseConstant):
            return spec
        if isinstance(spec, (int, float)):
            return cls(breaks=(0.0,), values=(float(spec),))
        if isinstance(spec, dict) and set(spec) == {"breaks", "values"}:
            return cls(
                breaks=tuple(float(b) for b in spec["breaks"]),
                values=tuple(float(v) for v in spec["values"]),
            )
        raise StrategyError(f"cannot build a piecewise coefficient from {spec!r}")

    def __call__(self, t):
        idx = np.clip(
            np.searchsorted(self.breaks, np.asarray(t, dtype=float), side="right") - 1,
            0,
            len(self.values) - 1,
        )
        out = np.asarray(self.values, dtype=float)[idx]
        return float(out) if np.ndim(t) == 0 else out

    def _config_entry(self):
        if len(self.values) == 1:
            return self.values[0]
        return {"breaks": list(self.breaks), "values": list(self.values)}


@dataclass(frozen=True)
class MarketCoefficients:
    """Drift alpha(t), volatility beta(t) (both piecewise constant), horizon, start wealth."""

    alpha: PiecewiseConstant
    beta: PiecewiseConstant
    horizon: float
    x0: float = 1.0
    beta_min: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "alpha", PiecewiseConstant.from_spec(self.alpha))
        object.__setattr__(self, "beta", PiecewiseConstant.from_spec(self.beta))
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise StrategyError(f"market horizon must be positive, got {self.horizon!r}")
        if not (math.isfinite(self.x0) and self.x0 > 0):
            raise StrategyError(f"initial wealth must be positive, got {self.x0!r}")
        if any(abs(v) < self.beta_min for v in self.beta.values):
            raise StrategyError(
                f"volatility must stay at least beta_min={self.beta_min} in magnitude"
            )

    def squared_ratio_integral(self, upto: float) -> float:
        """Exact integral of (alpha/beta)^2 over [0, upto] for step coefficients."""
        if not (0 <= upto <= self.horizon + 1e-12):
            raise StrategyError(f"integration end must lie in [0, {self.horizon}], got {upto}")
        cuts = sorted({0.0, upto, *(b for b in self.alpha.breaks if b < upto),
                       *(b for b in self.beta.breaks if b < upto)})
        total = 0.0
        for lo, hi in zip(cuts, cuts[1:]):
            mid = 0.5 * (lo + hi)
            total += (self.alpha(mid) / self.beta(mid)) ** 2 * (hi - lo)
        return total


@dataclass(frozen=True)
class HonestStrategy:
    """Drift-to-variance portfolio; uses no look-ahead."""

    def describe(self) -> str:
        return "merton"


@dataclass(frozen=True)
class InsiderStrategy:
    """Honest portfolio plus the look-ahead correction for a schedule."""

    schedule: EpsilonSchedule

    def describe(self) -> str:
        return "insider"


@dataclass(frozen=True)
class TableStrategy:
    """Deterministic fraction-of-wealth profile, linear between knots."""

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.knots) < 2:
            raise StrategyError("strategy table needs at least two knots")
        times = [k[0] for k in self.knots]
        if any(b >= c for b, c in zip(times, times[1:])):
            raise StrategyError("strategy knot times must be strictly increasing")

    def fraction(self, t):
        times = np.array([k[0] for k in self.knots])
        fracs = np.array([k[1] for k in self.knots])
        arr = np.asarray(t, dtype=float)
        if np.any(arr < times[0] - 1e-12) or np.any(arr > times[-1] + 1e-12):
            raise StrategyError(
                f"strategy table covers [{times[0]}, {times[-1]}]; "
                f"evaluation outside it is extrapolation"
            )
        out = np.interp(arr, times, fracs)
        return float(out) if arr.ndim == 0 else out

    def describe(self) -> str:
        return f"table:{len(self.knots)} knots"


Strategy = HonestStrategy | InsiderStrategy | TableStrategy


def honest_merton(market: MarketCoefficients, t: float) -> float:
    """alpha(t)/beta(t)^2, the log-optimal fraction without look-ahead."""
    return market.alpha(t) / market.beta(t) ** 2


def insider_optimal(
    market: MarketCoefficients,
    schedule: EpsilonSchedule,
    path: BrownianPath,
    t: float,
) -> float:
    """Honest fraction plus (anchor noise - current noise)/(beta * eps_t).

    Both t and t + eps_t must be grid points of the path; missing times
    raise rather than interpolate.
    """
    eps = schedule.eval(t)
    b_now = value_at(path, t)
    b_anchor = value_at(path, t + eps)
    return honest_merton(market, t) - (b_now - b_anchor) / (market.beta(t) * eps)


def donsker_composed(
    market: MarketCoefficients,
    schedule: EpsilonSchedule,
    path: BrownianPath,
    t: float,
) -> float:
    """Same portfolio from the conditional-density layer's ratio.

    Only the first look-ahead horizon enters; any second horizon (and
    the value observed there) cancels between derivative and density, so
    the result must agree with insider_optimal to rounding.
    """
    eps = schedule.eval(t)
    b_now = value_at(path, t)
    b_anchor = value_at(path, t + eps)
    ratio = malliavin_ratio(b_now, b_anchor, eps)
    return honest_merton(market, t) + ratio / market.beta(t)


def load_strategy_table_csv(path) -> tuple[tuple[float, float], ...]:
    """Read (t, pi) knots with a required header."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise StrategyError(f"strategy table {path} is empty") from None
        cols = [c.strip().lower() for c in header]
        if cols[:2] != ["t", "pi"]:
            raise StrategyError(
                f"strategy table {path} must start with header 't,pi'; got {header!r}"
            )
        knots = []
        for row in reader:
            if not row or not "".join(row).strip():
                continue
            try:
                knots.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                raise StrategyError(f"bad strategy table row in {path}: {row!r}") from None
    return tuple(knots)


def parse_strategy(text: str, schedule: EpsilonSchedule) -> Strategy:
    """Build a strategy from a CLI literal: merton, insider, or table:@file.csv."""
    text = text.strip()
    if text == "merton":
        return HonestStrategy()
    if text == "insider":
        return InsiderStrategy(schedule)
    if text.startswith("table:"):
        arg = text[len("table:"):]
        if not arg.startswith("@"):
            raise StrategyError("strategy tables are loaded from a file: table:@profile.csv")
        return TableStrategy(load_strategy_table_csv(arg[1:]))
    raise StrategyError(
        f"unknown strategy literal {text!r}; expected merton, insider or table:@file.csv"
    )
