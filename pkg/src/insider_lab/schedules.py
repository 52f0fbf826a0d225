"""Deterministic look-ahead schedules and the viability integral.

A schedule assigns to every time t in [0, T) a positive look-ahead
eps_t: the insider acting at time t already knows the driving noise at
time t + eps_t.  Whether such a market admits finite maximal expected
log utility is governed by the integral of 1/eps_t over [0, T): finite
integral means viable, divergent means the insider can generate
unbounded expected log wealth as the horizon is approached.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

#: Grid size used for the sampled regime and construction checks.
CHECK_POINTS = 1024

#: Truncations at which every viability report tabulates the integral.
TRACE_DELTAS = (1e-1, 1e-2, 1e-3, 1e-4)


class ScheduleError(ValueError):
    """Malformed schedule or evaluation outside [0, T)."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge.

    ``partial`` carries the best value accumulated so far, so callers can
    report how far the integration got before giving up.
    """

    def __init__(self, message: str, partial: float):
        super().__init__(message)
        self.partial = partial


class Regime(Enum):
    ABOVE_HORIZON = "AboveHorizon"
    BELOW_HORIZON = "BelowHorizon"
    MIXED = "Mixed"


class Classification(Enum):
    VIABLE = "Viable"
    NOT_VIABLE = "NotViable"
    NOT_VIABLE_BELOW_HORIZON = "NotViableBelowHorizon"


class Method(Enum):
    ANALYTIC = "Analytic"
    QUADRATURE = "Quadrature"


@dataclass(frozen=True)
class ViabilityReport:
    """Outcome of classifying a schedule.

    ``integral_value`` is the value of the look-ahead integral, with
    ``math.inf`` standing for divergence.  ``truncation_trace`` holds
    (delta, truncated integral) pairs at the deltas in TRACE_DELTAS.
    """

    classification: Classification
    integral_value: float
    method: Method
    truncation_trace: tuple[tuple[float, float], ...]

    @property
    def divergent(self) -> bool:
        return math.isinf(self.integral_value)

    def integral_label(self) -> str:
        return "Divergent" if self.divergent else f"{self.integral_value:.9g}"


class EpsilonSchedule:
    """Base class; concrete kinds implement _eval_array and horizon."""

    horizon: float

    def _eval_array(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def eval(self, t):
        """Look-ahead at time t; t may be a scalar or an array.

        The domain is [0, horizon): the schedule describes information
        available strictly before the terminal time.
        """
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0) or np.any(arr >= self.horizon):
            raise ScheduleError(
                f"schedule evaluation time must lie in [0, {self.horizon}); got {t!r}"
            )
        out = self._eval_array(arr)
        return float(out) if np.isscalar(t) or arr.ndim == 0 else out

    def _eval_extended(self, t: np.ndarray) -> np.ndarray:
        # Internal: quadrature needs the integrand at the closed right
        # endpoint; the kind formulas extend continuously to t = horizon.
        return self._eval_array(np.asarray(t, dtype=float))

    @property
    def epsilon0(self) -> float:
        """Initial look-ahead eval(0); reported as metadata only."""
        return float(self.eval(0.0))

    def describe(self) -> str:
        raise NotImplementedError

    def _config_entry(self) -> dict:
        raise NotImplementedError


def _validate_horizon(T: float) -> None:
    if not (isinstance(T, (int, float)) and math.isfinite(T) and T > 0):
        raise ScheduleError(f"horizon must be a finite positive number, got {T!r}")


def _check_anchor_convergence(schedule: EpsilonSchedule) -> None:
    """Reject schedules whose anchor map t + eps_t oscillates near T.

    When the anchors approach the horizon they must do so monotonically;
    checked on the last eighth of a CHECK_POINTS grid via the distance
    |t + eps_t - T|.  A monotonically growing distance is also fine: it
    means the anchors keep a widening lead over the horizon (constant
    look-ahead style) and never converge to T in the first place.  Only
    a distance that wobbles near the terminal time is rejected.
    """
    T = schedule.horizon
    t = np.linspace(0.0, T, CHECK_POINTS, endpoint=False)
    dist = np.abs(t + schedule._eval_array(t) - T)
    steps = np.diff(dist[-(CHECK_POINTS // 8):])
    tol = 1e-12 * max(1.0, T)
    falls = np.flatnonzero(steps < -tol)
    rises = np.flatnonzero(steps > tol)
    # A rise occurring after a fall means the anchors started converging
    # and then backed away again: that is the oscillation we reject.  A
    # single rise-then-fall (distance peaks inside the window) is fine.
    if falls.size and rises.size and rises[-1] > falls[0]:
        raise ScheduleError(
            "anchor map t + eps_t must approach the horizon monotonically; "
            "oscillation detected near the terminal time"
        )


@dataclass(frozen=True)
class PowerLawSchedule(EpsilonSchedule):
    """eps_t = (T - t)**q with q > 0."""

    exponent: float
    horizon: float

    def __post_init__(self):
        _validate_horizon(self.horizon)
        if not (math.isfinite(self.exponent) and self.exponent > 0):
            raise ScheduleError(f"power-law exponent must be positive, got {self.exponent!r}")
        if self.exponent != 1.0 and self.horizon > 1.0:
            # For q != 1 the look-ahead (T-t)**q compares to the remaining
            # time T-t only when T-t <= 1; larger horizons would flip the
            # comparison on part of the interval and the classification
            # below would be wrong there.  Restrict rather than guess.
            raise ScheduleError(
                "power-law schedules with exponent != 1 require horizon <= 1 "
                f"(got horizon={self.horizon}); rescale time before simulating"
            )
        _check_anchor_convergence(self)

    def _eval_array(self, t):
        return np.power(self.horizon - t, self.exponent)

    def describe(self) -> str:
        return f"powerlaw:q={self.exponent:g}"

    def _config_entry(self) -> dict:
        return {"kind": "powerlaw", "q": self.exponent}


@dataclass(frozen=True)
class ConstantSchedule(EpsilonSchedule):
    """eps_t = value for all t."""

    value: float
    horizon: float

    def __post_init__(self):
        _validate_horizon(self.horizon)
        if not (math.isfinite(self.value) and self.value > 0):
            raise ScheduleError(f"constant look-ahead must be positive, got {self.value!r}")

    def _eval_array(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.value)

    def describe(self) -> str:
        return f"const:{self.value:g}"

    def _config_entry(self) -> dict:
        return {"kind": "const", "value": self.value}


@dataclass(frozen=True)
class AffineBelowSchedule(EpsilonSchedule):
    """eps_t = c * (T - t) with 0 < c <= 1; the insider never sees past T."""

    slope: float
    horizon: float

    def __post_init__(self):
        _validate_horizon(self.horizon)
        if not (math.isfinite(self.slope) and 0 < self.slope <= 1):
            raise ScheduleError(f"affine-below slope must lie in (0, 1], got {self.slope!r}")

    def _eval_array(self, t):
        return self.slope * (self.horizon - t)

    def describe(self) -> str:
        return f"affine_below:c={self.slope:g}"

    def _config_entry(self) -> dict:
        return {"kind": "affine_below", "c": self.slope}


@dataclass(frozen=True)
class TableSchedule(EpsilonSchedule):
    """Piecewise-linear look-ahead through (time, duration) knots.

    Knot times must be strictly increasing, cover [0, horizon], and all
    durations must be strictly positive.  Evaluation interpolates
    linearly between knots; extrapolation beyond the knot range is an
    error rather than a silent guess.
    """

    knots: tuple[tuple[float, float], ...]
    horizon: float

    def __post_init__(self):
        _validate_horizon(self.horizon)
        if len(self.knots) < 2:
            raise ScheduleError("table schedule needs at least two knots")
        times = np.array([k[0] for k in self.knots], dtype=float)
        eps = np.array([k[1] for k in self.knots], dtype=float)
        if np.any(np.diff(times) <= 0):
            raise ScheduleError("table knot times must be strictly increasing")
        if np.any(eps <= 0) or not np.all(np.isfinite(eps)):
            raise ScheduleError("table look-ahead durations must be strictly positive")
        if times[0] > 0 or times[-1] < self.horizon:
            raise ScheduleError(
                f"table knots must cover [0, {self.horizon}]; got range "
                f"[{times[0]}, {times[-1]}] and extrapolation is not allowed"
            )
        _check_anchor_convergence(self)

    def _eval_array(self, t):
        times = np.array([k[0] for k in self.knots], dtype=float)
        eps = np.array([k[1] for k in self.knots], dtype=float)
        return np.interp(t, times, eps)

    def describe(self) -> str:
        return f"table:{len(self.knots)} knots"

    def _config_entry(self) -> dict:
        return {"kind": "table", "knots": [list(k) for k in self.knots]}


def regime(schedule: EpsilonSchedule) -> Regime:
    """Classify where the anchors t + eps_t sit relative to the horizon.

    Power-law schedules always belong to the above-horizon family (the
    constructor restricts them to horizons where that comparison is
    meaningful), and affine-below schedules sit below it by
    construction.  Other kinds are checked on a CHECK_POINTS grid.
    """
    if isinstance(schedule, PowerLawSchedule):
        return Regime.ABOVE_HORIZON
    if isinstance(schedule, AffineBelowSchedule):
        return Regime.BELOW_HORIZON
    T = schedule.horizon
    t = np.linspace(0.0, T, CHECK_POINTS, endpoint=False)
    anchors = t + schedule._eval_array(t)
    tol = 1e-12 * max(1.0, T)
    if np.all(anchors >= T - tol):
        return Regime.ABOVE_HORIZON
    if np.all(anchors <= T + tol):
        return Regime.BELOW_HORIZON
    return Regime.MIXED


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 40) -> float:
    """Adaptive Simpson quadrature with interval-halving error control.

    The per-interval acceptance test carries a 1e-10 relative floor: for
    steep integrands the absolute tolerance alone would demand precision
    below float64 rounding (evaluating eps at T - u suffers cancellation
    noise of order |d eps/dt| * ulp(T), which Simpson differences inherit).
    """

    def simpson(lo, flo, hi, fhi, fmid):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, flo, mid, fmid, hi, fhi, whole, eps, depth):
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        flmid = f(lmid)
        frmid = f(rmid)
        left = simpson(lo, flo, mid, fmid, flmid)
        right = simpson(mid, fmid, hi, fhi, frmid)
        if not (math.isfinite(left) and math.isfinite(right)):
            raise QuadratureError(
                f"integrand not finite near [{lo:.6g}, {hi:.6g}]", left + right
            )
        both = left + right
        if abs(both - whole) <= 15.0 * (eps + 1e-10 * abs(both)):
            return both + (both - whole) / 15.0
        if depth >= max_depth:
            raise QuadratureError(
                f"quadrature failed to converge after depth {max_depth} "
                f"near [{lo:.6g}, {hi:.6g}]; integral may diverge",
                both,
            )
        return (
            recurse(lo, flo, lmid, flmid, mid, fmid, left, 0.5 * eps, depth + 1)
            + recurse(mid, fmid, rmid, frmid, hi, fhi, right, 0.5 * eps, depth + 1)
        )

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    if not all(map(math.isfinite, (fa, fm, fb))):
        raise QuadratureError("integrand not finite at initial quadrature nodes", math.nan)
    whole = simpson(a, fa, b, fb, fm)
    return recurse(a, fa, m, fm, b, fb, whole, tol, 0)


def viability_integral(schedule: EpsilonSchedule, delta: float, tol: float = 1e-9) -> float:
    """Integral of 1/eps_t over [0, T - delta] by adaptive quadrature.

    delta = 0 is allowed for schedules whose look-ahead stays bounded
    away from zero at the horizon; otherwise the quadrature will fail to
    converge and raises QuadratureError with the partial value.
    """
    T = schedule.horizon
    if not (0 <= delta < T):
        raise ScheduleError(f"truncation delta must lie in [0, {T}), got {delta!r}")
    if tol <= 0:
        raise ScheduleError(f"quadrature tolerance must be positive, got {tol!r}")

    def integrand(t):
        eps = float(schedule._eval_extended(np.asarray(t)))
        if eps <= 0:
            return math.inf
        return 1.0 / eps

    return _adaptive_simpson(integrand, 0.0, T - delta, tol)


# Ratio test used for table schedules: if tightening the truncation from
# 1e-4 to 1e-6 still grows the integral by more than 10%, treat it as
# divergent.
_HEURISTIC_DELTAS = (1e-2, 1e-4, 1e-6)
_HEURISTIC_GROWTH = 0.1


def classify_viability(schedule: EpsilonSchedule, tol: float = 1e-9) -> ViabilityReport:
    """Decide viability of the market driven by this schedule.

    Analytic kinds are classified in closed form; table schedules fall
    back to quadrature plus a truncation-growth heuristic.  A table
    whose anchors straddle the horizon is rejected: the two regimes call
    for different treatments and mixing them has no supported meaning.
    """
    T = schedule.horizon
    if isinstance(schedule, PowerLawSchedule):
        q = schedule.exponent
        if q >= 1.0:
            cls, value = Classification.NOT_VIABLE, math.inf
        else:
            cls, value = Classification.VIABLE, T ** (1.0 - q) / (1.0 - q)
        method = Method.ANALYTIC
    elif isinstance(schedule, ConstantSchedule):
        cls, value, method = Classification.VIABLE, T / schedule.value, Method.ANALYTIC
    elif isinstance(schedule, AffineBelowSchedule):
        cls, value, method = Classification.NOT_VIABLE_BELOW_HORIZON, math.inf, Method.ANALYTIC
    else:
        reg = regime(schedule)
        if reg is Regime.MIXED:
            raise ScheduleError(
                "schedule anchors straddle the horizon (mixed regime); "
                "viability classification is defined per regime only"
            )
        if reg is Regime.BELOW_HORIZON:
            # eps_t <= T - t everywhere, so the integral dominates the
            # divergent integral of 1/(T - t).
            cls, value, method = Classification.NOT_VIABLE_BELOW_HORIZON, math.inf, Method.QUADRATURE
        else:
            try:
                partials = [viability_integral(schedule, d, tol) for d in _HEURISTIC_DELTAS]
            except QuadratureError:
                partials = None
            if partials is None:
                cls, value = Classification.NOT_VIABLE, math.inf
            else:
                i_mid, i_fine = partials[1], partials[2]
                if i_fine - i_mid > _HEURISTIC_GROWTH * i_mid:
                    cls, value = Classification.NOT_VIABLE, math.inf
                else:
                    cls, value = Classification.VIABLE, i_fine
            method = Method.QUADRATURE

    trace = []
    for d in TRACE_DELTAS:
        if d >= T:
            continue
        try:
            trace.append((d, viability_integral(schedule, d, tol)))
        except QuadratureError as exc:
            trace.append((d, exc.partial))
    return ViabilityReport(cls, value, method, tuple(trace))


def load_table_csv(path) -> tuple[tuple[float, float], ...]:
    """Read (t, eps) knots from a CSV file with a required header."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ScheduleError(f"table file {path} is empty") from None
        cols = [c.strip().lower() for c in header]
        if cols[:2] != ["t", "eps"]:
            raise ScheduleError(
                f"table file {path} must start with header 't,eps'; got {header!r}"
            )
        knots = []
        for row in reader:
            if not row or not "".join(row).strip():
                continue
            try:
                knots.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                raise ScheduleError(f"bad table row in {path}: {row!r}") from None
    return tuple(knots)


def parse_schedule(text: str, horizon: float) -> EpsilonSchedule:
    """Build a schedule from a CLI literal.

    Accepted forms: ``powerlaw:q=0.5``, ``const:0.5``,
    ``affine_below:c=0.5`` and ``table:@knots.csv``.
    """
    kind, sep, arg = text.partition(":")
    if not sep:
        raise ScheduleError(f"schedule literal must look like 'kind:arg', got {text!r}")
    kind = kind.strip().lower()
    arg = arg.strip()
    try:
        if kind == "powerlaw":
            key, _, val = arg.partition("=")
            if key.strip() != "q":
                raise ScheduleError(f"powerlaw takes q=<value>, got {arg!r}")
            return PowerLawSchedule(float(val), horizon)
        if kind == "const":
            return ConstantSchedule(float(arg), horizon)
        if kind == "affine_below":
            key, _, val = arg.partition("=")
            if key.strip() != "c":
                raise ScheduleError(f"affine_below takes c=<value>, got {arg!r}")
            return AffineBelowSchedule(float(val), horizon)
        if kind == "table":
            if not arg.startswith("@"):
                raise ScheduleError("table schedules are loaded from a file: table:@knots.csv")
            return TableSchedule(load_table_csv(arg[1:]), horizon)
    except ValueError as exc:
        if isinstance(exc, ScheduleError):
            raise
        raise ScheduleError(f"could not parse schedule literal {text!r}: {exc}") from None
    raise ScheduleError(
        f"unknown schedule kind {kind!r}; expected powerlaw, const, affine_below or table"
    )


def schedule_from_config(entry: dict, horizon: float) -> EpsilonSchedule:
    """Build a schedule from a parsed JSON config entry."""
    if not isinstance(entry, dict) or "kind" not in entry:
        raise ScheduleError(f"schedule config must be an object with a 'kind', got {entry!r}")
    kind = entry["kind"]
    known = {
        "powerlaw": ({"kind", "q"}, lambda: PowerLawSchedule(float(entry["q"]), horizon)),
        "const": ({"kind", "value"}, lambda: ConstantSchedule(float(entry["value"]), horizon)),
        "affine_below": ({"kind", "c"}, lambda: AffineBelowSchedule(float(entry["c"]), horizon)),
        "table": (
            {"kind", "knots"},
            lambda: TableSchedule(tuple((float(t), float(e)) for t, e in entry["knots"]), horizon),
        ),
    }
    if kind not in known:
        raise ScheduleError(f"unknown schedule kind {kind!r} in config")
    allowed, build = known[kind]
    extra = set(entry) - allowed
    if extra:
        raise ScheduleError(f"unknown keys in schedule config: {sorted(extra)}")
    missing = allowed - set(entry)
    if missing:
        raise ScheduleError(f"schedule config for {kind!r} missing keys: {sorted(missing)}")
    return build()
