"""Simulation of the interpolation process and training-tuple generation.

Randomness comes from a counter-based (Philox) generator split into named
independent streams so that y0, eta, the (x, y1) pairs, and the time draws
are honestly independent while staying reproducible from one 64-bit seed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .exceptions import ShapeError
from .schedules import T_MIN, Schedule, SchedulePoint, eval_coefficients

_STREAM_IDS = {"y0": 0, "y1x": 1, "eta": 2, "t": 3}


def stream_rng(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named stream of a seeded source."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_STREAM_IDS[name],))
    return np.random.Generator(np.random.Philox(ss))


class RegressionDataSource:
    """Draws for the model y1 = f(x) + noise_sd * eps with x ~ U[x_low, x_high]^k.

    The scalar-response regression family; y0 and eta are standard normal.
    f must be vectorized over the leading axes: it maps (..., k) -> (...,).
    """

    def __init__(self, f, k: int, noise_sd: float = 1.0, seed: int = 0,
                 x_low: float = -3.0, x_high: float = 3.0, x_fixed=None):
        self.f = f
        self.k = int(k)
        self.d = 1
        self.noise_sd = float(noise_sd)
        self.seed = int(seed)
        self.x_low = float(x_low)
        self.x_high = float(x_high)
        self.x_fixed = None if x_fixed is None else np.asarray(x_fixed, dtype=np.float64)
        self._rng_y0 = stream_rng(self.seed, "y0")
        self._rng_y1x = stream_rng(self.seed, "y1x")
        self._rng_eta = stream_rng(self.seed, "eta")
        self._rng_t = stream_rng(self.seed, "t")

    def conditioned(self, x) -> "RegressionDataSource":
        """A copy whose x draws are pinned to a single condition vector."""
        return RegressionDataSource(
            self.f, self.k, noise_sd=self.noise_sd, seed=self.seed,
            x_low=self.x_low, x_high=self.x_high, x_fixed=x,
        )

    def draw_pairs(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if self.x_fixed is not None:
            x = np.tile(self.x_fixed, (n, 1))
        else:
            x = self._rng_y1x.uniform(self.x_low, self.x_high, size=(n, self.k))
        eps = self._rng_y1x.standard_normal((n, self.d))
        fx = np.asarray(self.f(x), dtype=np.float64).reshape(n, self.d)
        return x, fx + self.noise_sd * eps

    def draw_y0(self, n: int) -> np.ndarray:
        return self._rng_y0.standard_normal((n, self.d))

    def draw_eta(self, n: int) -> np.ndarray:
        return self._rng_eta.standard_normal((n, self.d))

    def draw_t(self, n: int, lo: float = T_MIN, hi: float = 1.0 - T_MIN) -> np.ndarray:
        return self._rng_t.uniform(lo, hi, size=n)


class PointMassDataSource(RegressionDataSource):
    """Degenerate data law y1 = c, used as an exactly solvable oracle case."""

    def __init__(self, c: float, k: int = 1, seed: int = 0, x_fixed=None):
        super().__init__(lambda x: np.full(x.shape[:-1], c), k,
                         noise_sd=0.0, seed=seed, x_fixed=x_fixed)
        self.c = float(c)


@dataclass(frozen=True)
class TrainingTuple:
    """One regression draw with its drift and denoiser targets."""

    x: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    eta: np.ndarray
    t: float
    yt: np.ndarray
    drift_target: np.ndarray
    denoiser_target: np.ndarray


@dataclass
class TrainingBatch:
    """Columnar batch of training tuples (row i is tuple i)."""

    x: np.ndarray            # (n, k)
    y0: np.ndarray           # (n, d)
    y1: np.ndarray           # (n, d)
    eta: np.ndarray          # (n, d)
    t: np.ndarray            # (n,)
    yt: np.ndarray           # (n, d)
    drift_target: np.ndarray  # (n, d)
    denoiser_target: np.ndarray  # (n, d)
    gamma: np.ndarray        # (n,) schedule gamma at each t
    score_usable: bool       # False when the schedule has gamma == 0

    def __len__(self) -> int:
        return self.t.shape[0]

    def __getitem__(self, i: int) -> TrainingTuple:
        return TrainingTuple(
            x=self.x[i], y0=self.y0[i], y1=self.y1[i], eta=self.eta[i],
            t=float(self.t[i]), yt=self.yt[i],
            drift_target=self.drift_target[i],
            denoiser_target=self.denoiser_target[i],
        )

    def __iter__(self) -> Iterator[TrainingTuple]:
        return (self[i] for i in range(len(self)))

    def subset(self, idx: np.ndarray) -> "TrainingBatch":
        return TrainingBatch(
            x=self.x[idx], y0=self.y0[idx], y1=self.y1[idx], eta=self.eta[idx],
            t=self.t[idx], yt=self.yt[idx],
            drift_target=self.drift_target[idx],
            denoiser_target=self.denoiser_target[idx],
            gamma=self.gamma[idx], score_usable=self.score_usable,
        )


def sample_yt(point: SchedulePoint, y0: np.ndarray, y1: np.ndarray,
              eta: np.ndarray) -> np.ndarray:
    """a*y0 + b*y1 + gamma*eta componentwise."""
    y0 = np.asarray(y0, dtype=np.float64)
    y1 = np.asarray(y1, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    if not (y0.shape == y1.shape == eta.shape):
        raise ShapeError(
            f"mismatched shapes: y0 {y0.shape}, y1 {y1.shape}, eta {eta.shape}")
    return point.a * y0 + point.b * y1 + point.gamma * eta


def draw_training_batch(src: RegressionDataSource, s: Schedule, n: int,
                        t_mode: str = "uniform-interior",
                        t_fixed: float | None = None) -> TrainingBatch:
    """Draw n training tuples with drift and denoiser regression targets.

    t_mode "uniform-interior" samples a fresh t ~ U[T_MIN, 1-T_MIN] per tuple
    (the training default); "fixed" uses t_fixed for every tuple, clamped to
    the same interior, for pointwise diagnostics.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x, y1 = src.draw_pairs(n)
    y0 = src.draw_y0(n)
    eta = src.draw_eta(n)
    if t_mode == "uniform-interior":
        t = src.draw_t(n)
    elif t_mode == "fixed":
        if t_fixed is None:
            raise ValueError("t_fixed required for t_mode='fixed'")
        t = np.full(n, float(np.clip(t_fixed, T_MIN, 1.0 - T_MIN)))
    else:
        raise ValueError(f"unknown t_mode {t_mode!r}")

    c = eval_coefficients(s, t)
    col = lambda v: v[:, None]
    yt = col(c["a"]) * y0 + col(c["b"]) * y1 + col(c["gamma"]) * eta
    drift_target = col(c["da"]) * y0 + col(c["db"]) * y1 + col(c["dgamma"]) * eta
    return TrainingBatch(
        x=x, y0=y0, y1=y1, eta=eta, t=t, yt=yt,
        drift_target=drift_target, denoiser_target=eta,
        gamma=c["gamma"], score_usable=not s.gamma_is_zero,
    )


def batch_to_csv(batch: TrainingBatch, fp: io.TextIOBase) -> None:
    """Flat CSV dump: t, x_1..x_k, y0_1..d, y1_1..d, eta_1..d, yt_1..d."""
    k = batch.x.shape[1]
    d = batch.y0.shape[1]
    writer = csv.writer(fp, lineterminator="\n")
    header = (["t"]
              + [f"x_{j + 1}" for j in range(k)]
              + [f"y0_{j + 1}" for j in range(d)]
              + [f"y1_{j + 1}" for j in range(d)]
              + [f"eta_{j + 1}" for j in range(d)]
              + [f"yt_{j + 1}" for j in range(d)])
    writer.writerow(header)
    for i in range(len(batch)):
        row = ([repr(float(batch.t[i]))]
               + [repr(float(v)) for v in batch.x[i]]
               + [repr(float(v)) for v in batch.y0[i]]
               + [repr(float(v)) for v in batch.y1[i]]
               + [repr(float(v)) for v in batch.eta[i]]
               + [repr(float(v)) for v in batch.yt[i]])
        writer.writerow(row)
