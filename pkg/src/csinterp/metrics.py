"""One-dimensional empirical distribution comparisons."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class EmpiricalDistribution:
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64).ravel()
        if arr.size < 1:
            raise ValueError("need at least one sample")
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.size

    @cached_property
    def sorted(self) -> np.ndarray:
        return np.sort(self.samples)


def _as_dist(p) -> EmpiricalDistribution:
    return p if isinstance(p, EmpiricalDistribution) else EmpiricalDistribution(p)


def w2_1d(p, q) -> float:
    """Wasserstein-2 via the order-statistic (quantile) coupling; equal sizes."""
    p, q = _as_dist(p), _as_dist(q)
    if p.n != q.n:
        raise ValueError(f"sample sizes differ: {p.n} vs {q.n}")
    return float(np.sqrt(np.mean((p.sorted - q.sorted) ** 2)))


def ks_stat(p, q) -> float:
    """Two-sample Kolmogorov-Smirnov statistic (sup distance between ECDFs)."""
    p, q = _as_dist(p), _as_dist(q)
    grid = np.concatenate([p.sorted, q.sorted])
    cdf_p = np.searchsorted(p.sorted, grid, side="right") / p.n
    cdf_q = np.searchsorted(q.sorted, grid, side="right") / q.n
    return float(np.max(np.abs(cdf_p - cdf_q)))


def kl_hist(p, q, bins: int, range: tuple[float, float],
            alpha: float = 0.5) -> float:
    """KL divergence of additively smoothed histograms on a shared range.

    Samples outside [lo, hi] are clipped into the end bins.
    """
    lo, hi = range
    if lo >= hi:
        raise ValueError(f"empty range ({lo}, {hi})")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    p, q = _as_dist(p), _as_dist(q)
    edges = np.linspace(lo, hi, bins + 1)
    cp, _ = np.histogram(np.clip(p.samples, lo, hi), bins=edges)
    cq, _ = np.histogram(np.clip(q.samples, lo, hi), bins=edges)
    ph = (cp + alpha) / (p.n + alpha * bins)
    qh = (cq + alpha) / (q.n + alpha * bins)
    return float(np.sum(ph * np.log(ph / qh)))


def summary_stats(p) -> dict:
    """Mean, unbiased variance, and count; variance is None for n < 2."""
    p = _as_dist(p)
    out = {"mean": float(np.mean(p.samples)), "n": p.n}
    out["variance"] = float(np.var(p.samples, ddof=1)) if p.n >= 2 else None
    return out
