"""Feedforward ReLU network with exact backpropagation and Adam, in numpy.

Sized for desk-scale field fitting: inputs are the concatenation (x, y, t),
outputs are d-dimensional field values. The ReLU subgradient at 0 is taken to
be 0, consistently in forward and backward passes. An optional smooth output
clamp out = B * tanh(raw / B) bounds the network range by B.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import DomainError, ShapeError

CHECKPOINT_FORMAT = "csi-net-v1"


@dataclass(frozen=True)
class NetConfig:
    input_dim: int
    output_dim: int
    hidden_widths: tuple[int, ...] = (256, 256, 256)
    output_clamp: float | None = None

    def __post_init__(self):
        if len(self.hidden_widths) < 1 or any(w < 1 for w in self.hidden_widths):
            raise ValueError("need at least one hidden layer, all widths >= 1")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_widths, self.output_dim]
        return list(zip(dims[:-1], dims[1:]))


@dataclass
class NetParams:
    """Per-layer weights (out, in) and biases (out,)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy(self) -> "NetParams":
        return NetParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)


def params_from_flat(cfg: NetConfig, flat: np.ndarray) -> NetParams:
    weights, biases = [], []
    pos = 0
    for n_in, n_out in cfg.layer_dims:
        weights.append(flat[pos:pos + n_in * n_out].reshape(n_out, n_in).copy())
        pos += n_in * n_out
        biases.append(flat[pos:pos + n_out].copy())
        pos += n_out
    if pos != flat.size:
        raise ShapeError(f"flat size {flat.size} does not match config ({pos})")
    return NetParams(weights, biases)


def init_params(cfg: NetConfig, seed: int = 0) -> NetParams:
    """He-style scaled Gaussian init, zero biases."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    weights, biases = [], []
    for n_in, n_out in cfg.layer_dims:
        weights.append(rng.standard_normal((n_out, n_in)) * np.sqrt(2.0 / n_in))
        biases.append(np.zeros(n_out))
    return NetParams(weights, biases)


def _as_batch(x: np.ndarray, input_dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != input_dim:
        raise ShapeError(f"input dim {x.shape[1]} != expected {input_dim}")
    return x, single


def forward(params: NetParams, x: np.ndarray,
            output_clamp: float | None = None) -> np.ndarray:
    """Alternating affine/ReLU layers, final layer affine (plus optional clamp)."""
    h, single = _as_batch(x, params.weights[0].shape[1])
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i < n_layers - 1:
            h = np.maximum(h, 0.0)
    if output_clamp is not None:
        h = output_clamp * np.tanh(h / output_clamp)
    return h[0] if single else h


def _forward_cached(params: NetParams, x: np.ndarray,
                    output_clamp: float | None):
    h = x
    pre = []
    acts = [h]
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < n_layers - 1 else z
        acts.append(h)
    raw = h
    if output_clamp is not None:
        h = output_clamp * np.tanh(raw / output_clamp)
    return h, pre, acts, raw


def _batch_inputs(batch) -> np.ndarray:
    return np.concatenate([batch.x, batch.yt, batch.t[:, None]], axis=1)


def _targets(batch, which: str) -> np.ndarray:
    if which == "drift":
        return batch.drift_target
    if which == "denoiser":
        if not batch.score_usable or np.any(batch.gamma == 0.0):
            raise DomainError("denoiser loss undefined: gamma(t) = 0 in batch")
        return -batch.denoiser_target
    raise ValueError(f"unknown loss kind {which!r}")


def _loss(params: NetParams, batch, which: str,
          output_clamp: float | None) -> float:
    if len(batch) == 0:
        raise ValueError("empty batch")
    out = forward(params, _batch_inputs(batch), output_clamp)
    target = _targets(batch, which)
    return float(np.mean(np.sum((out - target) ** 2, axis=1)))


def loss_drift(params: NetParams, batch,
               output_clamp: float | None = None) -> float:
    """Mean squared error against the velocity targets."""
    return _loss(params, batch, "drift", output_clamp)


def loss_denoiser(params: NetParams, batch,
                  output_clamp: float | None = None) -> float:
    """Mean of ||eta + net(x, yt, t)||^2; requires gamma(t) != 0 per tuple."""
    return _loss(params, batch, "denoiser", output_clamp)


def grad(params: NetParams, batch, which: str,
         output_clamp: float | None = None) -> NetParams:
    """Exact gradient of the selected empirical risk, congruent to params."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    x = _batch_inputs(batch)
    target = _targets(batch, which)
    n = x.shape[0]
    out, pre, acts, raw = _forward_cached(params, x, output_clamp)
    delta = 2.0 * (out - target) / n
    if output_clamp is not None:
        delta = delta * (1.0 - (out / output_clamp) ** 2)

    g_w = [np.empty(0)] * len(params.weights)
    g_b = [np.empty(0)] * len(params.biases)
    for i in reversed(range(len(params.weights))):
        g_w[i] = delta.T @ acts[i]
        g_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i]) * (pre[i - 1] > 0.0)
    return NetParams(g_w, g_b)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: NetParams | None = None
    v: NetParams | None = None


def adam_step(state: AdamState, params: NetParams, g: NetParams,
              lr: float | None = None) -> tuple[AdamState, NetParams]:
    """One Adam update with bias correction; returns new state and params."""
    for arr in (*g.weights, *g.biases):
        if not np.all(np.isfinite(arr)):
            raise ArithmeticError("non-finite gradient entry")
    if state.m is None:
        state = replace(
            state,
            m=NetParams([np.zeros_like(w) for w in params.weights],
                        [np.zeros_like(b) for b in params.biases]),
            v=NetParams([np.zeros_like(w) for w in params.weights],
                        [np.zeros_like(b) for b in params.biases]),
        )
    step = state.step + 1
    lr = state.lr if lr is None else lr
    bc1 = 1.0 - state.beta1 ** step
    bc2 = 1.0 - state.beta2 ** step
    new_params = params.copy()
    m, v = state.m, state.v
    for group_p, group_g, group_m, group_v in (
        (new_params.weights, g.weights, m.weights, v.weights),
        (new_params.biases, g.biases, m.biases, v.biases),
    ):
        for p, gi, mi, vi in zip(group_p, group_g, group_m, group_v):
            mi *= state.beta1
            mi += (1.0 - state.beta1) * gi
            vi *= state.beta2
            vi += (1.0 - state.beta2) * gi ** 2
            p -= lr * (mi / bc1) / (np.sqrt(vi / bc2) + state.eps)
    return replace(state, step=step, m=m, v=v), new_params


def save_checkpoint(path, params: NetParams, cfg: NetConfig, seed: int,
                    loss_tail: list[float] | None = None,
                    role: str | None = None) -> None:
    """csi-net-v1: JSON header plus the flat 64-bit parameter vector."""
    flat = params.flat()
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": {
            "input_dim": cfg.input_dim,
            "output_dim": cfg.output_dim,
            "hidden_widths": list(cfg.hidden_widths),
            "output_clamp": cfg.output_clamp,
        },
        "seed": int(seed),
        "loss_tail": [float(v) for v in (loss_tail or [])[-20:]],
        "role": role,
        "n_params": int(flat.size),
        "params": [float(v) for v in flat],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_checkpoint(path) -> tuple[NetParams, NetConfig, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {doc.get('format')!r}")
    c = doc["config"]
    cfg = NetConfig(input_dim=c["input_dim"], output_dim=c["output_dim"],
                    hidden_widths=tuple(c["hidden_widths"]),
                    output_clamp=c["output_clamp"])
    flat = np.asarray(doc["params"], dtype=np.float64)
    return params_from_flat(cfg, flat), cfg, doc
