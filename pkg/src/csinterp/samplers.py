"""ODE-flow and SDE-diffusion sample generators.

Both integrators use a uniform time grid t_k = k / steps covering [0, 1]
exactly, evaluating fields at the left endpoint of each step (Heun adds the
right-endpoint correction for the ODE). Fields flagged boundary-singular are
probed at times clamped into [T_MIN, 1 - T_MIN].
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .estimators import FieldModel
from .exceptions import ConfigError, DomainError, IntegrationBlowUpError
from .schedules import T_MIN, Schedule


@dataclass(frozen=True)
class SamplerSpec:
    method: str = "ode-euler"     # ode-euler | ode-heun | sde-euler-maruyama
    steps: int = 1000
    u: str | float = "zero"       # diffusion preset name or constant (sde only)
    seed: int = 0
    record_times: tuple[float, ...] = ()
    t_end: float = 1.0            # exposed for truncation ablations

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.method not in ("ode-euler", "ode-heun", "sde-euler-maruyama"):
            raise ConfigError("method", f"unknown integrator {self.method!r}")


@dataclass
class Trajectory:
    x: np.ndarray
    states: list[tuple[float, np.ndarray]]
    terminal: np.ndarray


@dataclass
class TrajectoryBatch:
    """All trajectories for one condition, states stacked per recorded time."""

    x: np.ndarray
    times: np.ndarray          # (n_rec,) strictly increasing, starts at 0
    states: np.ndarray         # (n_rec, n_traj, d)
    terminal: np.ndarray       # (n_traj, d)

    def __len__(self) -> int:
        return self.terminal.shape[0]

    def __getitem__(self, i: int) -> Trajectory:
        return Trajectory(
            x=self.x,
            states=[(float(t), self.states[j, i]) for j, t in enumerate(self.times)],
            terminal=self.terminal[i],
        )

    def __iter__(self) -> Iterator[Trajectory]:
        return (self[i] for i in range(len(self)))

    def at_time(self, t: float) -> np.ndarray:
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-9:
            raise KeyError(f"time {t} not recorded")
        return self.states[j]


_CONST_RE = re.compile(r"^const\((?P<c>[-+0-9.eE]+)\)$")

U_PRESET_NAMES = ("gamma", "quartic", "linear-decay", "sqrt-parabola", "zero")


def u_preset(name: str | float,
             schedule: Schedule | None = None) -> Callable[[float], float]:
    """Resolve a diffusion function u(t) >= 0 by preset name or constant."""
    if isinstance(name, (int, float)):
        c = float(name)
        if c < 0:
            raise DomainError(f"constant u must be >= 0, got {c}")
        return lambda t: c
    if name == "zero":
        return lambda t: 0.0
    if name == "quartic":
        return lambda t: t * t * (1.0 - t) ** 2 / 8.0
    if name == "linear-decay":
        return lambda t: 0.1 * (1.0 - t)
    if name == "sqrt-parabola":
        return lambda t: float(np.sqrt(2.0 * t * (1.0 - t)))
    if name == "gamma":
        if schedule is None:
            raise ConfigError("u", "u='gamma' requires a schedule")
        return lambda t: float(schedule.gamma(t))
    match = _CONST_RE.match(name) if isinstance(name, str) else None
    if match:
        return u_preset(float(match.group("c")))
    raise ConfigError("u", f"unknown diffusion preset {name!r}")


def _probe_time(t: float, singular: bool) -> float:
    return min(max(t, T_MIN), 1.0 - T_MIN) if singular else t


def _record_grid(spec: SamplerSpec) -> np.ndarray:
    dt = spec.t_end / spec.steps
    wanted = {0, spec.steps}
    for t in spec.record_times:
        wanted.add(int(round(t / dt)))
    return np.array(sorted(k for k in wanted if 0 <= k <= spec.steps))


def _check_finite(z: np.ndarray, step: int) -> None:
    bad = ~np.isfinite(z).all(axis=1)
    if bad.any():
        raise IntegrationBlowUpError(int(np.argmax(bad)), step)


def ode_flow_sample(drift: FieldModel, x, n_traj: int,
                    spec: SamplerSpec) -> TrajectoryBatch:
    """Integrate dz = b(x, z, t) dt from z0 ~ N(0, I_d)."""
    if spec.method not in ("ode-euler", "ode-heun"):
        raise ConfigError("method", f"{spec.method!r} is not an ODE method")
    x = np.asarray(x, dtype=np.float64)
    d = 1
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(spec.seed)))
    z = rng.standard_normal((n_traj, d))
    dt = spec.t_end / spec.steps
    record = _record_grid(spec)
    record_set = {int(v) for v in record}
    rec_states = {0: z.copy()}
    singular = drift.boundary_singular
    for k in range(spec.steps):
        t_k = k * dt
        b1 = drift.fn(x, z, _probe_time(t_k, singular))
        if spec.method == "ode-euler":
            z = z + b1 * dt
        else:
            z_pred = z + b1 * dt
            b2 = drift.fn(x, z_pred, _probe_time(t_k + dt, singular))
            z = z + 0.5 * dt * (b1 + b2)
        _check_finite(z, k)
        if (k + 1) in record_set:
            rec_states[k + 1] = z.copy()
    times = record * dt
    states = np.stack([rec_states[k] for k in record])
    return TrajectoryBatch(x=x, times=times, states=states, terminal=z)


def sde_diffusion_sample(drift: FieldModel, score: FieldModel, x, n_traj: int,
                         spec: SamplerSpec,
                         schedule: Schedule | None = None) -> TrajectoryBatch:
    """Euler-Maruyama for dz = (b + u s) dt + sqrt(2 u) dW from z0 ~ N(0, I_d).

    The score field is only evaluated where u(t) > 0, so boundary-vanishing
    diffusion presets never probe a singular score at t in {0, 1}.
    """
    if spec.method != "sde-euler-maruyama":
        raise ConfigError("method", f"{spec.method!r} is not an SDE method")
    u = u_preset(spec.u, schedule=schedule or score.schedule or drift.schedule)
    x = np.asarray(x, dtype=np.float64)
    d = 1
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(spec.seed)))
    z = rng.standard_normal((n_traj, d))
    dt = spec.t_end / spec.steps
    record = _record_grid(spec)
    record_set = {int(v) for v in record}
    rec_states = {0: z.copy()}
    for k in range(spec.steps):
        t_k = k * dt
        u_k = float(u(t_k))
        if u_k < 0:
            raise DomainError(f"u({t_k}) = {u_k} < 0")
        vel = drift.fn(x, z, _probe_time(t_k, drift.boundary_singular))
        if u_k > 0:
            vel = vel + u_k * score.fn(x, z, _probe_time(t_k, score.boundary_singular))
        xi = rng.standard_normal((n_traj, d))
        z = z + vel * dt + np.sqrt(2.0 * u_k * dt) * xi
        _check_finite(z, k)
        if (k + 1) in record_set:
            rec_states[k + 1] = z.copy()
    times = record * dt
    states = np.stack([rec_states[k] for k in record])
    return TrajectoryBatch(x=x, times=times, states=states, terminal=z)


def trajectories_to_csv(batch: TrajectoryBatch, fp: io.TextIOBase) -> None:
    """Long-format CSV: traj_id, t, z_1..d."""
    writer = csv.writer(fp, lineterminator="\n")
    d = batch.terminal.shape[1]
    writer.writerow(["traj_id", "t"] + [f"z_{j + 1}" for j in range(d)])
    for i in range(len(batch)):
        for j, t in enumerate(batch.times):
            writer.writerow([i, repr(float(t))]
                            + [repr(float(v)) for v in batch.states[j, i]])


def terminals_to_csv(batch: TrajectoryBatch, fp: io.TextIOBase) -> None:
    """Terminal-only CSV: traj_id, z_1..d."""
    writer = csv.writer(fp, lineterminator="\n")
    d = batch.terminal.shape[1]
    writer.writerow(["traj_id"] + [f"z_{j + 1}" for j in range(d)])
    for i in range(len(batch)):
        writer.writerow([i] + [repr(float(v)) for v in batch.terminal[i]])
