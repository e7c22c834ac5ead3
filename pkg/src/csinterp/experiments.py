"""Config-driven experiment runner: sampling reproductions and rate studies.

A run writes per-condition, per-time sample CSVs for the interpolation, ODE,
and SDE processes, a metrics JSON, and a manifest with a config hash. Every
CSV starts with a '# generated: <timestamp>' comment line; reproducibility
comparisons exclude that line.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import metrics as mt
from .estimators import (TrainConfig, analytic_drift_field, analytic_score_field,
                         derived_score_from_drift, fit_drift, oracle_mse,
                         probe_grid, save_field)
from .exceptions import ConfigError
from .net import NetConfig
from .oracle import RegressionModel
from .process import RegressionDataSource
from .samplers import SamplerSpec, ode_flow_sample, sde_diffusion_sample
from .schedules import PRESETS, eval_schedule, get_schedule


def paper_7_1_f(x: np.ndarray) -> np.ndarray:
    """|2 + x1^2/3| - |x2| + max{x3^3, x4 * exp(x5/2)} over the last axis."""
    x = np.asarray(x, dtype=np.float64)
    return (np.abs(2.0 + x[..., 0] ** 2 / 3.0)
            - np.abs(x[..., 1])
            + np.maximum(x[..., 2] ** 3, x[..., 3] * np.exp(x[..., 4] / 2.0)))


def linear_f(x: np.ndarray) -> np.ndarray:
    return np.sum(np.asarray(x, dtype=np.float64), axis=-1)


F_PRESETS = {"paper-7-1-f": paper_7_1_f, "linear": linear_f}


def resolve_f(name: str, constant: float = 0.0):
    if name == "custom-constant":
        return lambda x: np.full(np.asarray(x).shape[:-1], constant)
    try:
        return F_PRESETS[name]
    except KeyError:
        raise ConfigError("data.f", f"unknown regression function {name!r}") from None


DEFAULT_CONFIG = {
    "schedule": "paper-7-1",
    "data": {"f": "paper-7-1-f", "noise_sd": 1.0, "k": 5,
             "x_low": -3.0, "x_high": 3.0, "constant": 0.0},
    "fields": {"source": "oracle"},
    "samplers": {
        "ode": {"method": "ode-euler", "steps": 1000},
        "sde": {"steps": 1000, "u": "quartic"},
    },
    "conditions": [[0.0] * 5, [2.0] * 5],
    "n_samples": 5000,
    "record_times": [0.2, 0.4, 0.6, 0.8],
    "seed": 20240101,
}

_FITTED_TRAIN = {"steps": 20000, "batch_size": 256, "n_tuples": 100000,
                 "lr": 1e-3, "hidden_widths": [256, 256, 256]}

BUILTIN_CONFIGS = {
    "reproduce-fig1": DEFAULT_CONFIG,
    "reproduce-fig1-fitted": {**DEFAULT_CONFIG,
                              "fields": {"source": "fitted", "train": _FITTED_TRAIN}},
    "marginal-check": {**DEFAULT_CONFIG,
                       "samplers": {"ode": {"method": "ode-euler", "steps": 1000},
                                    "sde": {"steps": 1000, "u": "quartic"}},
                       "record_times": [0.2, 0.4, 0.6, 0.8]},
    "rate-study-default": {**DEFAULT_CONFIG,
                           "fields": {"source": "fitted",
                                      "train": {**_FITTED_TRAIN, "steps": 4000,
                                                "batch_size": 128}},
                           "n_grid": [512, 1024, 2048, 4096, 8192]},
}


def _merge_defaults(cfg: dict) -> dict:
    merged = json.loads(json.dumps(DEFAULT_CONFIG))
    for key, value in cfg.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key].update(value)
        else:
            merged[key] = value
    return merged


def validate_config(cfg: dict) -> dict:
    """Fill defaults and check the fields the runner depends on."""
    cfg = _merge_defaults(cfg)
    if cfg["schedule"] not in PRESETS:
        raise ConfigError("schedule", f"unknown preset {cfg['schedule']!r}")
    if cfg["data"]["f"] not in (*F_PRESETS, "custom-constant"):
        raise ConfigError("data.f", f"unknown regression function {cfg['data']['f']!r}")
    if cfg["fields"].get("source") not in ("oracle", "fitted"):
        raise ConfigError("fields.source", "must be 'oracle' or 'fitted'")
    conditions = cfg["conditions"]
    if not conditions:
        raise ConfigError("conditions", "must be nonempty")
    k = int(cfg["data"]["k"])
    for i, cond in enumerate(conditions):
        if len(cond) != k:
            raise ConfigError(f"conditions[{i}]", f"expected length {k}")
    if int(cfg["n_samples"]) < 2:
        raise ConfigError("n_samples", "must be >= 2")
    for t in cfg["record_times"]:
        if not 0.0 < float(t) <= 1.0:
            raise ConfigError("record_times", f"time {t} outside (0, 1]")
    return cfg


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fp:
        fp.write(f"# generated: {datetime.now(timezone.utc).isoformat()}\n")
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _interpolation_samples(src: RegressionDataSource, schedule, t: float,
                           n: int) -> np.ndarray:
    point = eval_schedule(schedule, t)
    _, y1 = src.draw_pairs(n)
    y0 = src.draw_y0(n)
    eta = src.draw_eta(n)
    return (point.a * y0 + point.b * y1 + point.gamma * eta)[:, 0]


def _build_problem(cfg: dict, seed: int):
    data = cfg["data"]
    f = resolve_f(data["f"], data.get("constant", 0.0))
    src = RegressionDataSource(f, int(data["k"]), noise_sd=float(data["noise_sd"]),
                               seed=seed, x_low=float(data["x_low"]),
                               x_high=float(data["x_high"]))
    model = RegressionModel(f=f, k=int(data["k"]), noise_sd=float(data["noise_sd"]))
    schedule = get_schedule(cfg["schedule"])
    return src, model, schedule


def _build_fields(cfg: dict, src, model, schedule, seed: int):
    fields = cfg["fields"]
    if fields["source"] == "oracle":
        drift = analytic_drift_field(model, schedule)
        score = analytic_score_field(model, schedule)
        return drift, score
    train_cfg = {**_FITTED_TRAIN, **fields.get("train", {})}
    net_cfg = NetConfig(input_dim=model.k + model.d + 1, output_dim=model.d,
                        hidden_widths=tuple(train_cfg["hidden_widths"]))
    train = TrainConfig(steps=int(train_cfg["steps"]),
                        batch_size=int(train_cfg["batch_size"]),
                        seed=seed, n_tuples=int(train_cfg["n_tuples"]),
                        lr=float(train_cfg["lr"]))
    drift = fit_drift(src, schedule, net_cfg, train)
    score = derived_score_from_drift(drift, schedule)
    return drift, score


def run_experiment(cfg: dict, out_dir, seed: int | None = None) -> dict:
    """Run one sampling experiment and write its report bundle to out_dir."""
    cfg = validate_config(cfg)
    if seed is not None:
        cfg["seed"] = int(seed)
    seed = int(cfg["seed"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    src, model, schedule = _build_problem(cfg, seed)
    drift, score = _build_fields(cfg, src, model, schedule, seed)

    n = int(cfg["n_samples"])
    record_times = sorted({*map(float, cfg["record_times"]), 1.0})
    files: list[str] = []
    metric_records: list[dict] = []

    if drift.params is not None:
        save_field(out / "field_drift.json", drift, seed=seed)
        files.append("field_drift.json")

    for ci, cond in enumerate(cfg["conditions"]):
        x = np.asarray(cond, dtype=np.float64)
        cond_src = RegressionDataSource(
            src.f, src.k, noise_sd=src.noise_sd, seed=seed + 7919 * (ci + 1),
            x_low=src.x_low, x_high=src.x_high, x_fixed=x)

        per_process: dict[str, dict[float, np.ndarray]] = {}

        interp = {t: _interpolation_samples(cond_src, schedule, t, n)
                  for t in record_times}
        per_process["interpolation"] = interp

        samplers_cfg = cfg["samplers"]
        if "ode" in samplers_cfg and samplers_cfg["ode"] is not None:
            spec = SamplerSpec(method=samplers_cfg["ode"].get("method", "ode-euler"),
                               steps=int(samplers_cfg["ode"].get("steps", 1000)),
                               seed=seed + 7919 * (ci + 1) + 1,
                               record_times=tuple(record_times))
            batch = ode_flow_sample(drift, x, n, spec)
            per_process["ode"] = {t: batch.at_time(t)[:, 0] for t in record_times}
        if "sde" in samplers_cfg and samplers_cfg["sde"] is not None:
            spec = SamplerSpec(method="sde-euler-maruyama",
                               steps=int(samplers_cfg["sde"].get("steps", 1000)),
                               u=samplers_cfg["sde"].get("u", "quartic"),
                               seed=seed + 7919 * (ci + 1) + 2,
                               record_times=tuple(record_times))
            batch = sde_diffusion_sample(drift, score, x, n, spec,
                                         schedule=schedule)
            per_process["sde"] = {t: batch.at_time(t)[:, 0] for t in record_times}

        for process, by_time in per_process.items():
            path = out / f"samples_{process}_cond{ci}.csv"
            rows = [[i, repr(t), repr(float(by_time[t][i]))]
                    for t in record_times for i in range(n)]
            _write_csv(path, ["sample_id", "t", "z_1"], rows)
            files.append(path.name)

        fx = model.f_at(x)
        target = cond_src.draw_y0(n)[:, 0] * model.noise_sd + fx  # N(f(x), sd^2)
        for t in record_times:
            for process in ("ode", "sde"):
                if process not in per_process:
                    continue
                gen = per_process[process][t]
                ref = per_process["interpolation"][t]
                metric_records.append({"metric": f"ks_interp_{process}", "t": t,
                                       "condition_id": ci,
                                       "value": mt.ks_stat(ref, gen), "n": n})
                metric_records.append({"metric": f"w2_interp_{process}", "t": t,
                                       "condition_id": ci,
                                       "value": mt.w2_1d(ref, gen), "n": n})
        for process, by_time in per_process.items():
            gen = by_time[1.0]
            stats = mt.summary_stats(gen)
            lo, hi = fx - 5.0, fx + 5.0
            metric_records.extend([
                {"metric": f"terminal_mean_{process}", "t": 1.0, "condition_id": ci,
                 "value": stats["mean"], "n": n},
                {"metric": f"terminal_variance_{process}", "t": 1.0,
                 "condition_id": ci, "value": stats["variance"], "n": n},
                {"metric": f"ks_target_{process}", "t": 1.0, "condition_id": ci,
                 "value": mt.ks_stat(target, gen), "n": n},
                {"metric": f"w2_target_{process}", "t": 1.0, "condition_id": ci,
                 "value": mt.w2_1d(target, gen), "n": n},
                {"metric": f"kl_target_{process}", "t": 1.0, "condition_id": ci,
                 "value": mt.kl_hist(target, gen, bins=50, range=(lo, hi)), "n": n},
            ])
        metric_records.append({"metric": "target_mean", "t": 1.0,
                               "condition_id": ci, "value": fx, "n": n})

    metrics_path = out / "metrics.json"
    metrics_path.write_text(json.dumps(metric_records, sort_keys=True, indent=1))
    files.append(metrics_path.name)

    manifest = {
        "config_hash": config_hash(cfg),
        "seed": seed,
        "files": sorted(files),
        "format": "csi-run-v1",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return {"manifest": manifest, "metrics": metric_records, "out_dir": str(out)}


def rate_study(cfg: dict, n_grid, out_dir, seed: int | None = None) -> dict:
    """Fit the drift at increasing sample sizes, reporting oracle MSEs + slope."""
    n_grid = [int(v) for v in n_grid]
    if len(n_grid) < 2:
        raise ConfigError("n_grid", "needs at least 2 entries")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigError("n_grid", "must be strictly increasing")
    cfg = validate_config(cfg)
    if seed is not None:
        cfg["seed"] = int(seed)
    seed = int(cfg["seed"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    src, model, schedule = _build_problem(cfg, seed)
    probes = probe_grid(src, schedule, n=256, seed=seed)
    train_cfg = {**_FITTED_TRAIN, "steps": 4000, "batch_size": 128,
                 **cfg["fields"].get("train", {})}
    net_cfg = NetConfig(input_dim=model.k + model.d + 1, output_dim=model.d,
                        hidden_widths=tuple(train_cfg["hidden_widths"]))

    rows = []
    for n in n_grid:
        train = TrainConfig(steps=int(train_cfg["steps"]),
                            batch_size=int(train_cfg["batch_size"]),
                            seed=seed, n_tuples=n, lr=float(train_cfg["lr"]))
        drift = fit_drift(src, schedule, net_cfg, train)
        mse_drift, _ = oracle_mse(drift, model, schedule, probes)
        score = derived_score_from_drift(drift, schedule)
        mse_score, _ = oracle_mse(score, model, schedule, probes)
        rows.append((n, mse_drift, mse_score))

    ns = np.array([r[0] for r in rows], dtype=np.float64)
    mses = np.array([r[1] for r in rows], dtype=np.float64)
    slope = float(np.polyfit(np.log(ns), np.log(mses), 1)[0])

    _write_csv(out / "rate_study.csv",
               ["n", "oracle_mse_drift", "oracle_mse_score"],
               [[n, repr(a), repr(b)] for n, a, b in rows])
    summary = {"slope_loglog_drift": slope, "rows": [list(r) for r in rows],
               "config_hash": config_hash(cfg), "seed": seed}
    (out / "rate_study_summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=1))
    return summary
