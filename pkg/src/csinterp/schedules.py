"""Additive interpolation schedules: coefficient triples (a, b, gamma) on [0, 1].

A schedule defines the process y_t = a(t) y0 + b(t) y1 + gamma(t) eta together
with analytic derivatives of the three coefficients. Finite differences are
used only as a test oracle, never at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import ConfigError, DomainError, EvaluationError

# Consumers that need dgamma or 1/gamma clamp t into [T_MIN, 1 - T_MIN];
# several shipped schedules have dgamma diverging at the endpoints.
T_MIN = 1e-4

CoeffFn = Callable[[float], float]


@dataclass(frozen=True)
class Schedule:
    """Immutable coefficient triple with analytic derivatives."""

    name: str
    a: CoeffFn
    b: CoeffFn
    gamma: CoeffFn
    da: CoeffFn
    db: CoeffFn
    dgamma: CoeffFn
    gamma_is_zero: bool = False


@dataclass(frozen=True)
class SchedulePoint:
    """All six coefficient values at a single time."""

    t: float
    a: float
    b: float
    gamma: float
    da: float
    db: float
    dgamma: float

    def derivatives_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.da, self.db, self.dgamma))


@dataclass
class ValidationReport:
    """Per-boundary-condition residuals from validate_boundary."""

    schedule: str
    tol: float
    entries: list[tuple[str, float, bool]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, _, ok in self.entries)


@dataclass
class StabilityReport:
    """Ratios (1-a)/gamma and b/gamma along a grid decreasing to 0."""

    schedule: str
    ts: np.ndarray
    ratio_one_minus_a: np.ndarray
    ratio_b: np.ndarray
    passed: bool
    limiting_ratio_one_minus_a: float
    limiting_ratio_b: float


def eval_schedule(s: Schedule, t: float) -> SchedulePoint:
    """Evaluate all six coefficients at t in [0, 1].

    Derivative values at the endpoints are the one-sided limits of the
    analytic derivative; where these diverge the value is +/-inf.
    """
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t} outside [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        return SchedulePoint(
            t=float(t),
            a=float(s.a(t)),
            b=float(s.b(t)),
            gamma=float(s.gamma(t)),
            da=float(s.da(t)),
            db=float(s.db(t)),
            dgamma=float(s.dgamma(t)),
        )


def eval_coefficients(s: Schedule, t: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorized coefficient evaluation over an array of times."""
    t = np.asarray(t, dtype=np.float64)
    if np.any((t < 0.0) | (t > 1.0)):
        raise DomainError("times outside [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        return {
            "a": np.asarray(s.a(t), dtype=np.float64),
            "b": np.asarray(s.b(t), dtype=np.float64),
            "gamma": np.asarray(s.gamma(t), dtype=np.float64),
            "da": np.asarray(s.da(t), dtype=np.float64),
            "db": np.asarray(s.db(t), dtype=np.float64),
            "dgamma": np.asarray(s.dgamma(t), dtype=np.float64),
        }


def capital_A(s: Schedule, t: float) -> float:
    """A(t) = a(a*db - da*b) + gamma(gamma*db - dgamma*b), from its definition."""
    p = eval_schedule(s, t)
    value = p.a * (p.a * p.db - p.da * p.b) + p.gamma * (p.gamma * p.db - p.dgamma * p.b)
    if not math.isfinite(value):
        raise EvaluationError(f"non-finite coefficient for {s.name} at t={t}")
    return value


def validate_boundary(s: Schedule, tol: float) -> ValidationReport:
    """Check a(0)=1, a(1)=0, b(0)=0, b(1)=1, gamma(0)=gamma(1)=0, gamma>=0."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    report = ValidationReport(schedule=s.name, tol=tol)
    checks = [
        ("a(0)", float(s.a(0.0)) - 1.0),
        ("a(1)", float(s.a(1.0))),
        ("b(0)", float(s.b(0.0))),
        ("b(1)", float(s.b(1.0)) - 1.0),
        ("gamma(0)", float(s.gamma(0.0))),
        ("gamma(1)", float(s.gamma(1.0))),
    ]
    for name, residual in checks:
        report.entries.append((name, abs(residual), abs(residual) <= tol))
    grid = np.linspace(0.0, 1.0, 1001)[1:-1]
    g = np.asarray(s.gamma(grid), dtype=np.float64)
    neg = float(max(0.0, -g.min()))
    report.entries.append(("gamma>=0 on (0,1)", neg, neg <= tol))
    return report


def check_stability_t0(s: Schedule, grid: np.ndarray | None = None) -> StabilityReport:
    """Check that (1-a)/gamma and b/gamma decay to 0 as t decreases to 0.

    Pass requires both ratios to be non-increasing over the last half of the
    grid and to have dropped to at most half their value at the start of that
    tail. A ratio converging to a positive constant (Example-3 behaviour)
    fails the second condition.
    """
    if grid is None:
        grid = np.geomspace(0.5, 1e-6, 25)
    grid = np.asarray(grid, dtype=np.float64)
    if np.any((grid <= 0.0) | (grid > 0.5)):
        raise ValueError("grid values must lie in (0, 0.5]")
    if np.any(np.diff(grid) >= 0):
        raise ValueError("grid must be strictly decreasing")
    g = np.asarray(s.gamma(grid), dtype=np.float64)
    if np.any(g == 0.0):
        raise EvaluationError(f"gamma vanishes on the grid for {s.name}")
    r1 = (1.0 - np.asarray(s.a(grid), dtype=np.float64)) / g
    r2 = np.asarray(s.b(grid), dtype=np.float64) / g

    half = len(grid) // 2
    eps = 1e-12

    def _decays(r: np.ndarray) -> bool:
        tail = r[half:]
        nonincreasing = bool(np.all(np.diff(tail) <= eps))
        shrunk = tail[-1] <= 0.5 * tail[0] + eps
        return nonincreasing and shrunk

    passed = _decays(r1) and _decays(r2)
    return StabilityReport(
        schedule=s.name,
        ts=grid,
        ratio_one_minus_a=r1,
        ratio_b=r2,
        passed=passed,
        limiting_ratio_one_minus_a=float(r1[-1]),
        limiting_ratio_b=float(r2[-1]),
    )


# --- shipped presets ------------------------------------------------------

def _linear_sqrt_gamma(t):
    return np.sqrt(2.0 * t * (1.0 - t))


def _linear_sqrt_dgamma(t):
    return (1.0 - 2.0 * t) / np.sqrt(2.0 * t * (1.0 - t))


def _log_gamma(t):
    return np.log(t - t * t + 1.0)


def _log_dgamma(t):
    return (1.0 - 2.0 * t) / (t - t * t + 1.0)


PRESETS: dict[str, Schedule] = {
    "rectified-flow": Schedule(
        name="rectified-flow",
        a=lambda t: 1.0 - t,
        b=lambda t: t + 0.0 * t,
        gamma=lambda t: 0.0 * t,
        da=lambda t: -1.0 + 0.0 * t,
        db=lambda t: 1.0 + 0.0 * t,
        dgamma=lambda t: 0.0 * t,
        gamma_is_zero=True,
    ),
    "linear-sqrt": Schedule(
        name="linear-sqrt",
        a=lambda t: 1.0 - t,
        b=lambda t: t + 0.0 * t,
        gamma=_linear_sqrt_gamma,
        da=lambda t: -1.0 + 0.0 * t,
        db=lambda t: 1.0 + 0.0 * t,
        dgamma=_linear_sqrt_dgamma,
    ),
    "trig-squared": Schedule(
        name="trig-squared",
        a=lambda t: np.cos(np.pi * t / 2.0) ** 2,
        b=lambda t: np.sin(np.pi * t / 2.0) ** 2,
        gamma=lambda t: (math.sqrt(2.0) / 2.0) * np.sin(np.pi * t),
        da=lambda t: -(np.pi / 2.0) * np.sin(np.pi * t),
        db=lambda t: (np.pi / 2.0) * np.sin(np.pi * t),
        dgamma=lambda t: (math.sqrt(2.0) * np.pi / 2.0) * np.cos(np.pi * t),
    ),
    "trig-unstable": Schedule(
        name="trig-unstable",
        a=lambda t: np.cos(np.pi * t / 2.0),
        b=lambda t: np.sin(np.pi * t / 2.0),
        gamma=lambda t: np.sin(np.pi * t),
        da=lambda t: -(np.pi / 2.0) * np.sin(np.pi * t / 2.0),
        db=lambda t: (np.pi / 2.0) * np.cos(np.pi * t / 2.0),
        dgamma=lambda t: np.pi * np.cos(np.pi * t),
    ),
    "paper-7-1": Schedule(
        name="paper-7-1",
        a=lambda t: np.cos(np.pi * t / 2.0),
        b=lambda t: np.sin(np.pi * t / 2.0),
        gamma=_log_gamma,
        da=lambda t: -(np.pi / 2.0) * np.sin(np.pi * t / 2.0),
        db=lambda t: (np.pi / 2.0) * np.cos(np.pi * t / 2.0),
        dgamma=_log_dgamma,
    ),
}


def get_schedule(name: str) -> Schedule:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError("schedule", f"unknown preset {name!r}") from None
