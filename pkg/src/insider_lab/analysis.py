"""Closed-form benchmarks and theory-versus-simulation comparison reports.

The benchmark for the look-ahead portfolio is half the sum of two
integrals over [0, T - delta]: the reciprocal look-ahead integral
(quadrature or closed form) and the squared drift-to-volatility ratio
(exact for step coefficients).  Sweeping delta toward zero makes the
dichotomy visible: benchmarks converge exactly when the reciprocal
integral does, and grow without bound otherwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum

from insider_lab.montecarlo import (
    ExperimentConfig,
    McEstimate,
    estimate_log_utility,
)
from insider_lab.schedules import (
    Classification,
    EpsilonSchedule,
    classify_viability,
    viability_integral,
)
from insider_lab.strategy import (
    HonestStrategy,
    InsiderStrategy,
    MarketCoefficients,
    Strategy,
)

DEFAULT_ABS_TOL = 0.02


class AnalysisError(ValueError):
    """Benchmark or report construction failed."""


class Verdict(Enum):
    PASS = "Pass"
    FAIL = "Fail"


def theoretical_utility(market: MarketCoefficients, schedule: EpsilonSchedule,
                        delta: float) -> float:
    """Expected log wealth of the optimal look-ahead portfolio at T - delta.

    Half of [integral of 1/eps + integral of (alpha/beta)^2] over
    [0, T - delta].  With delta = 0 the value exists only for viable
    schedules; divergent ones raise instead of returning infinity so a
    truncation choice is always explicit.
    """
    T = market.horizon
    if abs(schedule.horizon - T) > 1e-12:
        raise AnalysisError(
            f"schedule horizon {schedule.horizon} disagrees with market horizon {T}"
        )
    if not 0 <= delta < T:
        raise AnalysisError(f"truncation delta must lie in [0, {T}), got {delta!r}")
    if delta == 0:
        report = classify_viability(schedule)
        if report.classification is not Classification.VIABLE:
            raise AnalysisError(
                "the look-ahead integral diverges at the horizon, so expected "
                "log utility is unbounded; pass delta > 0 for a truncated value"
            )
        lookahead_part = report.integral_value
    else:
        lookahead_part = viability_integral(schedule, delta)
    return 0.5 * (lookahead_part + market.squared_ratio_integral(T - delta))


def honest_utility(market: MarketCoefficients, delta: float) -> float:
    """Expected log wealth of the drift-to-variance portfolio at T - delta."""
    if not 0 <= delta < market.horizon:
        raise AnalysisError(
            f"truncation delta must lie in [0, {market.horizon}), got {delta!r}"
        )
    return 0.5 * market.squared_ratio_integral(market.horizon - delta)


def benchmark_value(market: MarketCoefficients, schedule: EpsilonSchedule,
                    strategy: Strategy, delta: float) -> float:
    """Closed-form expected log utility matching the strategy kind."""
    if isinstance(strategy, HonestStrategy):
        return honest_utility(market, delta)
    if isinstance(strategy, InsiderStrategy):
        return theoretical_utility(market, schedule, delta)
    raise AnalysisError(
        f"no closed-form benchmark for strategy {strategy.describe()!r}; "
        "only the honest and look-ahead portfolios have one"
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Benchmark value against a Monte Carlo estimate at the same delta.

    The verdict passes when the estimate sits within max(3 standard
    errors, abs_tol) of the benchmark; z_score records the signed
    distance in stderr units.
    """

    theory: float
    mc: McEstimate
    delta: float
    abs_tol: float = DEFAULT_ABS_TOL
    z_score: float = None
    verdict: Verdict = None

    def __post_init__(self):
        if self.abs_tol < 0:
            raise AnalysisError(f"abs_tol cannot be negative, got {self.abs_tol!r}")
        diff = self.mc.mean - self.theory
        if self.mc.stderr > 0:
            z = diff / self.mc.stderr
        elif diff == 0:
            z = 0.0
        else:
            z = math.copysign(math.inf, diff)
        verdict = Verdict.PASS if abs(diff) <= max(3 * self.mc.stderr, self.abs_tol) \
            else Verdict.FAIL
        if self.z_score is None:
            object.__setattr__(self, "z_score", z)
        elif self.z_score != z:
            raise AnalysisError("z_score must equal (mean - theory)/stderr")
        if self.verdict is None:
            object.__setattr__(self, "verdict", verdict)
        elif self.verdict is not verdict:
            raise AnalysisError("verdict must follow the tolerance rule")

    def passed(self) -> bool:
        return self.verdict is Verdict.PASS


def compare(cfg: ExperimentConfig, abs_tol: float = DEFAULT_ABS_TOL,
            threads: int | None = None,
            theory_override: float | None = None) -> ComparisonReport:
    """Run the estimator and grade it against the closed-form benchmark.

    ``theory_override`` substitutes an arbitrary reference value; the
    verdict logic is graded against whatever reference is in force.
    """
    if theory_override is not None:
        theory = float(theory_override)
    else:
        theory = benchmark_value(cfg.market, cfg.schedule, cfg.strategy, cfg.delta)
    mc = estimate_log_utility(cfg, threads=threads)
    return ComparisonReport(theory=theory, mc=mc, delta=cfg.delta, abs_tol=abs_tol)


def truncation_sweep(cfg: ExperimentConfig, deltas, abs_tol: float = DEFAULT_ABS_TOL,
                     threads: int | None = None) -> list[ComparisonReport]:
    """One comparison per truncation level, largest delta first.

    Benchmarks of a divergent schedule grow as delta shrinks; a viable
    schedule's benchmarks settle toward the delta = 0 value instead.
    """
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise AnalysisError("sweep needs at least one delta")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise AnalysisError(f"deltas must be strictly decreasing, got {deltas}")
    return [
        compare(replace(cfg, delta=d), abs_tol=abs_tol, threads=threads)
        for d in deltas
    ]


def report_dict(report: ComparisonReport) -> dict:
    """Plain-data form of one report, ready for JSON."""
    return {
        "delta": report.delta,
        "theory": report.theory,
        "mean": report.mc.mean,
        "stderr": report.mc.stderr,
        "ci95": [report.mc.ci95[0], report.mc.ci95[1]],
        "n_paths": report.mc.n_paths,
        "z_score": report.z_score,
        "verdict": report.verdict.value,
        "abs_tol": report.abs_tol,
    }


def sweep_to_csv(reports, target) -> None:
    """Write sweep rows as delta, theory, mc_mean, mc_stderr, z, verdict."""
    with open(target, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delta", "theory", "mc_mean", "mc_stderr", "z", "verdict"])
        for rep in reports:
            writer.writerow([
                f"{rep.delta:.17g}",
                f"{rep.theory:.17g}",
                f"{rep.mc.mean:.17g}",
                f"{rep.mc.stderr:.17g}",
                f"{rep.z_score:.17g}",
                rep.verdict.value,
            ])
