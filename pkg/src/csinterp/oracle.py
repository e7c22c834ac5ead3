"""Ground-truth conditional drift/score fields.

Closed forms for the scalar-response regression family y1 = f(x) + eps with a
standard-normal reference, plus a Monte-Carlo kernel-regression oracle for any
simulable data source. The closed forms generalize the unit-variance noise
case: with noise_sd = sigma the shared denominator becomes
a^2 + b^2 sigma^2 + gamma^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .exceptions import EvaluationError, InsufficientSupportError
from .process import RegressionDataSource, stream_rng
from .schedules import Schedule, eval_schedule


@dataclass(frozen=True)
class RegressionModel:
    """y1 | x ~ N(f(x), noise_sd^2), reference y0 ~ N(0, 1); f: (..., k) -> (...,)."""

    f: object
    k: int
    noise_sd: float = 1.0
    d: int = 1

    def f_at(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(self.f(x[None, :])[0])


@dataclass(frozen=True)
class FieldProbe:
    """A single (condition, state, time) evaluation point."""

    x: np.ndarray
    y: float
    t: float


def _denominator(m: RegressionModel, p) -> float:
    return p.a ** 2 + (p.b * m.noise_sd) ** 2 + p.gamma ** 2


def phi(m: RegressionModel, s: Schedule, t: float) -> float:
    """Mean-reversion rate of the regression-family drift field."""
    p = eval_schedule(s, t)
    num = p.da * p.a + p.db * p.b * m.noise_sd ** 2 + p.dgamma * p.gamma
    den = _denominator(m, p)
    if not (math.isfinite(num) and math.isfinite(den)) or den == 0.0:
        raise EvaluationError(f"phi undefined for {s.name} at t={t}")
    return num / den


def regression_drift(m: RegressionModel, s: Schedule, p: FieldProbe) -> float:
    """phi(t) * (y - b(t) f(x)) + db(t) f(x)."""
    point = eval_schedule(s, p.t)
    fx = m.f_at(p.x)
    value = phi(m, s, p.t) * (p.y - point.b * fx) + point.db * fx
    if not math.isfinite(value):
        raise EvaluationError(f"non-finite drift for {s.name} at t={p.t}")
    return value


def regression_score(m: RegressionModel, s: Schedule, p: FieldProbe) -> float:
    """-(y - b(t) f(x)) / (a^2 + b^2 noise_sd^2 + gamma^2)."""
    point = eval_schedule(s, p.t)
    den = _denominator(m, point)
    if den == 0.0:
        raise EvaluationError(f"zero denominator for {s.name} at t={p.t}")
    return -(p.y - point.b * m.f_at(p.x)) / den


def regression_denoiser(m: RegressionModel, s: Schedule, p: FieldProbe) -> float:
    """E[eta | x, y_t = y] = gamma(t) (y - b(t) f(x)) / denominator."""
    point = eval_schedule(s, p.t)
    den = _denominator(m, point)
    if den == 0.0:
        raise EvaluationError(f"zero denominator for {s.name} at t={p.t}")
    return point.gamma * (p.y - point.b * m.f_at(p.x)) / den


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n: int
    bandwidth: float


def _silverman(sample: np.ndarray) -> float:
    sd = float(np.std(sample))
    q75, q25 = np.percentile(sample, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if spread == 0.0:
        spread = 1.0
    return 0.9 * spread * len(sample) ** (-0.2)


def _kernel_estimate(yt: np.ndarray, targets: np.ndarray, y: float,
                     bandwidth: float | None, seed: int,
                     n_boot: int = 100) -> MCEstimate:
    h = _silverman(yt) if bandwidth is None else float(bandwidth)
    w = np.exp(-0.5 * ((yt - y) / h) ** 2)
    if float(np.mean(w)) < 1e-8:
        raise InsufficientSupportError(
            f"negligible kernel mass at y={y} (mean weight {np.mean(w):.3e})")
    est = float(np.sum(w * targets) / np.sum(w))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    m = len(yt)
    boots = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, m, m)
        wb = w[idx]
        boots[b] = np.sum(wb * targets[idx]) / np.sum(wb)
    return MCEstimate(value=est, stderr=float(np.std(boots)), n=m, bandwidth=h)


def _simulate_at(src: RegressionDataSource, s: Schedule, p: FieldProbe,
                 m: int) -> dict[str, np.ndarray]:
    cond = src.conditioned(p.x) if hasattr(src, "conditioned") else src
    point = eval_schedule(s, p.t)
    _, y1 = cond.draw_pairs(m)
    y0 = cond.draw_y0(m)
    eta = cond.draw_eta(m)
    yt = (point.a * y0 + point.b * y1 + point.gamma * eta)[:, 0]
    drift = (point.da * y0 + point.db * y1 + point.dgamma * eta)[:, 0]
    if not np.all(np.isfinite(drift)):
        raise EvaluationError(f"non-finite drift targets for {s.name} at t={p.t}")
    return {"yt": yt, "drift": drift, "eta": eta[:, 0], "gamma": point.gamma}


def mc_conditional_drift(src: RegressionDataSource, s: Schedule, p: FieldProbe,
                         m: int, bandwidth: float | None = None,
                         seed: int = 0) -> MCEstimate:
    """Nadaraya-Watson estimate of the drift field with a bootstrap stderr.

    Conditions on y_t = y by Gaussian-kernel smoothing over m simulated
    (y_t, velocity-target) pairs drawn at the probe's x and t.
    """
    if m < 1000:
        raise ValueError("m must be >= 1000")
    sim = _simulate_at(src, s, p, m)
    return _kernel_estimate(sim["yt"], sim["drift"], p.y, bandwidth, seed)


def mc_conditional_denoiser(src: RegressionDataSource, s: Schedule,
                            p: FieldProbe, m: int,
                            bandwidth: float | None = None,
                            seed: int = 0) -> MCEstimate:
    """Kernel estimate of E[eta | x, y_t = y]."""
    if m < 1000:
        raise ValueError("m must be >= 1000")
    sim = _simulate_at(src, s, p, m)
    return _kernel_estimate(sim["yt"], sim["eta"], p.y, bandwidth, seed)


def mc_conditional_score(src: RegressionDataSource, s: Schedule, p: FieldProbe,
                         m: int, bandwidth: float | None = None,
                         seed: int = 0) -> MCEstimate:
    """Kernel score estimate via -E[eta | x, y_t] / gamma(t)."""
    point = eval_schedule(s, p.t)
    if point.gamma == 0.0:
        raise EvaluationError(f"gamma({p.t}) = 0 for {s.name}; score undefined")
    kappa = mc_conditional_denoiser(src, s, p, m, bandwidth, seed)
    return MCEstimate(value=-kappa.value / point.gamma,
                      stderr=kappa.stderr / abs(point.gamma),
                      n=kappa.n, bandwidth=kappa.bandwidth)
