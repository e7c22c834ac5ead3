"""Field models: fitted, analytic, and derived drift/score/denoiser evaluators.

The score is never trained directly against gamma^{-1} eta. Two derived
routes are provided: score-from-denoiser (-kappa / gamma) and, for additive
schedules with a Gaussian reference, score-from-drift
(b/A) * drift - (db/A) * y.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from . import net as nn
from .exceptions import DomainError, SingularCoefficientError, TrainingDivergedError
from .oracle import (FieldProbe, RegressionModel, regression_denoiser,
                     regression_drift, regression_score)
from .process import RegressionDataSource, draw_training_batch
from .schedules import Schedule, capital_A, eval_schedule


@dataclass
class FieldModel:
    """An evaluator (x, y, t) -> field value with provenance metadata.

    The evaluator function takes a condition vector x of shape (k,), states of
    shape (n, d), and a scalar t, returning (n, d). `evaluate` additionally
    accepts a single state of shape (d,) or a scalar for d = 1.
    """

    kind: str         # drift | denoiser | score
    provenance: str   # analytic-oracle | mc-oracle | fitted-net(...) | derived(...)
    fn: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    boundary_singular: bool = False
    schedule: Schedule | None = None
    params: nn.NetParams | None = None
    config: nn.NetConfig | None = None
    loss_history: list[float] = dc_field(default_factory=list)

    def evaluate(self, x, y, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        single = y.ndim <= 1
        if y.ndim == 0:
            y = y[None, None]
        elif y.ndim == 1:
            y = y[None, :]
        out = self.fn(x, y, float(t))
        return out[0] if single else out

    def __call__(self, x, y, t: float) -> np.ndarray:
        return self.evaluate(x, y, t)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 20_000
    batch_size: int = 256
    seed: int = 0
    n_tuples: int = 100_000
    lr: float = 1e-3


def _lr_for_step(train: TrainConfig, step: int) -> float:
    # step decay keeps late-training minibatch jitter from dominating the fit
    frac = step / max(train.steps, 1)
    if frac >= 0.95:
        return train.lr * 0.03
    if frac >= 0.8:
        return train.lr * 0.1
    if frac >= 0.6:
        return train.lr * 0.3
    return train.lr


def analytic_drift_field(m: RegressionModel, s: Schedule) -> FieldModel:
    return _vectorized_regression_field("drift", m, s)


def _vectorized_regression_field(kind, m, s):
    # closed forms are affine in y at fixed (x, t); evaluate them vectorized
    from .oracle import _denominator, phi

    def fn(x, y, t):
        point = eval_schedule(s, t)
        fx = m.f_at(x)
        resid = y - point.b * fx
        if kind == "drift":
            return phi(m, s, t) * resid + point.db * fx
        den = _denominator(m, point)
        if kind == "score":
            return -resid / den
        return point.gamma * resid / den

    return FieldModel(kind=kind, provenance="analytic-oracle", fn=fn, schedule=s)


def analytic_score_field(m: RegressionModel, s: Schedule) -> FieldModel:
    return _vectorized_regression_field("score", m, s)


def analytic_denoiser_field(m: RegressionModel, s: Schedule) -> FieldModel:
    return _vectorized_regression_field("denoiser", m, s)


def constant_field(value: float, kind: str = "drift") -> FieldModel:
    def fn(x, y, t):
        return np.full_like(y, value)
    return FieldModel(kind=kind, provenance="analytic-oracle", fn=fn)


def net_field(params: nn.NetParams, cfg: nn.NetConfig, kind: str,
              provenance: str = "fitted-net",
              loss_history: list[float] | None = None,
              schedule: Schedule | None = None) -> FieldModel:
    def fn(x, y, t):
        n = y.shape[0]
        inputs = np.concatenate(
            [np.tile(x, (n, 1)), y, np.full((n, 1), t)], axis=1)
        return nn.forward(params, inputs, cfg.output_clamp)
    return FieldModel(kind=kind, provenance=provenance, fn=fn,
                      params=params, config=cfg,
                      loss_history=list(loss_history or []), schedule=schedule)


def _fit(src: RegressionDataSource, s: Schedule, cfg: nn.NetConfig,
         train: TrainConfig, which: str) -> FieldModel:
    if train.steps < 1 or train.batch_size < 1:
        raise ValueError("steps and batch_size must be >= 1")
    if which == "denoiser" and s.gamma_is_zero:
        raise DomainError(f"schedule {s.name} has gamma == 0; denoiser unusable")
    pool = draw_training_batch(src, s, train.n_tuples)
    params = nn.init_params(cfg, seed=train.seed)
    state = nn.AdamState(lr=train.lr)
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=train.seed,
                                                spawn_key=(100,))))
    history: list[float] = []
    for step in range(train.steps):
        idx = rng.integers(0, len(pool), train.batch_size)
        mini = pool.subset(idx)
        loss = (nn.loss_drift if which == "drift" else nn.loss_denoiser)(
            params, mini, cfg.output_clamp)
        if not np.isfinite(loss):
            raise TrainingDivergedError(step, loss)
        g = nn.grad(params, mini, which, cfg.output_clamp)
        state, params = nn.adam_step(state, params, g,
                                     lr=_lr_for_step(train, step))
        history.append(loss)
    return net_field(params, cfg, which, provenance=f"fitted-net(seed={train.seed})",
                     loss_history=history, schedule=s)


def fit_drift(src: RegressionDataSource, s: Schedule, cfg: nn.NetConfig,
              train: TrainConfig) -> FieldModel:
    """ERM fit of the drift field by minibatch Adam on the velocity loss."""
    return _fit(src, s, cfg, train, "drift")


def fit_denoiser(src: RegressionDataSource, s: Schedule, cfg: nn.NetConfig,
                 train: TrainConfig) -> FieldModel:
    """ERM fit of the denoiser field; requires gamma > 0 on the sampled range."""
    return _fit(src, s, cfg, train, "denoiser")


def score_from_denoiser(model: FieldModel, s: Schedule, p: FieldProbe) -> np.ndarray:
    g = float(s.gamma(p.t))
    if g == 0.0:
        raise DomainError(f"gamma({p.t}) = 0 for {s.name}; score undefined")
    return -np.asarray(model.evaluate(p.x, p.y, p.t)) / g


def score_from_drift(model: FieldModel, s: Schedule, p: FieldProbe) -> np.ndarray:
    a_t = capital_A(s, p.t)
    if abs(a_t) < 1e-12:
        raise SingularCoefficientError(f"A({p.t}) = {a_t} for {s.name}")
    point = eval_schedule(s, p.t)
    bval = np.asarray(model.evaluate(p.x, p.y, p.t))
    return (point.b / a_t) * bval - (point.db / a_t) * np.asarray(p.y)


def derived_score_from_denoiser(model: FieldModel, s: Schedule) -> FieldModel:
    def fn(x, y, t):
        g = float(s.gamma(t))
        if g == 0.0:
            raise DomainError(f"gamma({t}) = 0 for {s.name}; score undefined")
        return -model.fn(x, y, t) / g
    return FieldModel(kind="score", provenance="derived(score-from-denoiser)",
                      fn=fn, boundary_singular=True, schedule=s)


def derived_score_from_drift(model: FieldModel, s: Schedule) -> FieldModel:
    def fn(x, y, t):
        a_t = capital_A(s, t)
        if abs(a_t) < 1e-12:
            raise SingularCoefficientError(f"A({t}) = {a_t} for {s.name}")
        point = eval_schedule(s, t)
        return (point.b / a_t) * model.fn(x, y, t) - (point.db / a_t) * y
    return FieldModel(kind="score", provenance="derived(score-from-drift)",
                      fn=fn, schedule=s)


def probe_grid(src: RegressionDataSource, s: Schedule, n: int = 256,
               seed: int = 1234,
               t_range: tuple[float, float] = (0.05, 0.95)):
    """Probes with x from the data law, y from the marginal of y_t, t uniform."""
    probe_src = RegressionDataSource(src.f, src.k, noise_sd=src.noise_sd,
                                     seed=seed + 777, x_low=src.x_low,
                                     x_high=src.x_high)
    x, y1 = probe_src.draw_pairs(n)
    y0 = probe_src.draw_y0(n)
    eta = probe_src.draw_eta(n)
    t = probe_src.draw_t(n, *t_range)
    from .schedules import eval_coefficients
    c = eval_coefficients(s, t)
    y = c["a"][:, None] * y0 + c["b"][:, None] * y1 + c["gamma"][:, None] * eta
    return x, y, t


def oracle_mse(model: FieldModel, m: RegressionModel, s: Schedule,
               probes) -> tuple[float, float]:
    """(MSE against the analytic field, variance of the analytic field values)."""
    x, y, t = probes
    oracle_fn = {"drift": regression_drift, "score": regression_score,
                 "denoiser": regression_denoiser}[model.kind]
    truth = np.empty(len(t))
    pred = np.empty(len(t))
    for i in range(len(t)):
        probe = FieldProbe(x[i], float(y[i, 0]), float(t[i]))
        truth[i] = oracle_fn(m, s, probe)
        pred[i] = float(np.asarray(model.evaluate(x[i], y[i], float(t[i]))).ravel()[0])
    mse = float(np.mean((pred - truth) ** 2))
    var = float(np.var(truth))
    return mse, var


def save_field(path, model: FieldModel, seed: int = 0) -> None:
    """Persist a fitted field as a csi-net-v1 checkpoint with a role tag."""
    if model.params is None or model.config is None:
        raise ValueError("only fitted-net fields can be checkpointed")
    nn.save_checkpoint(path, model.params, model.config, seed,
                       loss_tail=model.loss_history, role=model.kind)


def load_field(path, schedule: Schedule | None = None) -> FieldModel:
    params, cfg, doc = nn.load_checkpoint(path)
    return net_field(params, cfg, doc.get("role") or "drift",
                     provenance="fitted-net(checkpoint)", schedule=schedule)
