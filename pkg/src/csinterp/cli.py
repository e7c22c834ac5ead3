"""Command-line interface.

Seed priority: --seed flag > config file value > CSI_SEED environment
variable > the builtin default.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import experiments
from .estimators import TrainConfig, fit_denoiser, fit_drift, save_field
from .exceptions import ConfigError, IntegrationBlowUpError
from .net import NetConfig
from .process import batch_to_csv, draw_training_batch
from .schedules import PRESETS, check_stability_t0, get_schedule, validate_boundary


def _resolve_seed(flag_seed, cfg_seed):
    if flag_seed is not None:
        return int(flag_seed)
    if cfg_seed is not None:
        return int(cfg_seed)
    env = os.environ.get("CSI_SEED")
    if env is not None:
        return int(env)
    return experiments.DEFAULT_CONFIG["seed"]


def _load_config(path):
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


@click.group()
def main():
    """Conditional stochastic interpolation toolkit."""


@main.command("validate-schedule")
@click.option("--schedule", required=True, help=f"one of {sorted(PRESETS)}")
@click.option("--tol", default=1e-12, show_default=True)
def validate_schedule_cmd(schedule, tol):
    """Check boundary conditions and t->0 stability of a schedule preset."""
    s = get_schedule(schedule)
    report = validate_boundary(s, tol)
    for name, residual, ok in report.entries:
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}: residual {residual:.3e}")
    if s.gamma_is_zero:
        click.echo("SKIP  stability check: gamma == 0")
    else:
        stab = check_stability_t0(s)
        click.echo(f"{'PASS' if stab.passed else 'FAIL'}  stability at t->0: "
                   f"(1-a)/gamma -> {stab.limiting_ratio_one_minus_a:.4f}, "
                   f"b/gamma -> {stab.limiting_ratio_b:.4f}")
    if not report.passed:
        sys.exit(1)


@main.command("simulate")
@click.option("--schedule", default="paper-7-1", show_default=True)
@click.option("--n", default=1000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def simulate_cmd(schedule, n, seed, out, config_path):
    """Draw a training batch and dump it as CSV."""
    cfg = experiments.validate_config(_load_config(config_path))
    seed = _resolve_seed(seed, cfg.get("seed") if config_path else None)
    src, _, _ = experiments._build_problem(cfg, seed)
    batch = draw_training_batch(src, get_schedule(schedule), n)
    with open(out, "w") as fp:
        batch_to_csv(batch, fp)
    click.echo(f"wrote {n} tuples to {out}")


@main.command("fit")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--which", type=click.Choice(["drift", "denoiser"]), default="drift")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), required=True)
def fit_cmd(config_path, which, seed, out):
    """Fit a drift or denoiser field and write a csi-net-v1 checkpoint."""
    raw = _load_config(config_path)
    cfg = experiments.validate_config(raw)
    seed = _resolve_seed(seed, raw.get("seed"))
    src, model, schedule = experiments._build_problem(cfg, seed)
    train_cfg = {**experiments._FITTED_TRAIN, **cfg["fields"].get("train", {})}
    net_cfg = NetConfig(input_dim=model.k + model.d + 1, output_dim=model.d,
                        hidden_widths=tuple(train_cfg["hidden_widths"]))
    train = TrainConfig(steps=int(train_cfg["steps"]),
                        batch_size=int(train_cfg["batch_size"]), seed=seed,
                        n_tuples=int(train_cfg["n_tuples"]),
                        lr=float(train_cfg["lr"]))
    fitter = fit_drift if which == "drift" else fit_denoiser
    field = fitter(src, schedule, net_cfg, train)
    save_field(out, field, seed=seed)
    click.echo(f"final loss {field.loss_history[-1]:.6f}; checkpoint at {out}")


@main.command("sample")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), required=True)
def sample_cmd(config_path, seed, out):
    """Run the configured experiment (fields, samplers, metrics)."""
    raw = _load_config(config_path)
    seed = _resolve_seed(seed, raw.get("seed"))
    _run(raw, out, seed)


@main.command("metrics")
@click.option("--p", "p_path", type=click.Path(exists=True), required=True)
@click.option("--q", "q_path", type=click.Path(exists=True), required=True)
@click.option("--column", default="z_1", show_default=True)
@click.option("--bins", default=50, show_default=True)
def metrics_cmd(p_path, q_path, column, bins):
    """Compare two sample CSVs (w2, ks, kl, moments)."""
    from . import metrics as mt

    def load(path):
        import csv as _csv
        with open(path) as fp:
            lines = [ln for ln in fp if not ln.startswith("#")]
        rows = list(_csv.DictReader(lines))
        return np.array([float(r[column]) for r in rows])

    p, q = load(p_path), load(q_path)
    lo = float(min(p.min(), q.min()))
    hi = float(max(p.max(), q.max()))
    result = {
        "ks": mt.ks_stat(p, q),
        "kl_hist": mt.kl_hist(p, q, bins=bins, range=(lo, hi)),
        "p": mt.summary_stats(p),
        "q": mt.summary_stats(q),
    }
    if len(p) == len(q):
        result["w2"] = mt.w2_1d(p, q)
    click.echo(json.dumps(result, sort_keys=True, indent=1))


def _run(raw_cfg, out, seed):
    try:
        result = experiments.run_experiment(raw_cfg, out, seed=seed)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except IntegrationBlowUpError as exc:
        click.echo(f"integration blow-up: {exc}", err=True)
        sys.exit(3)
    click.echo(f"report bundle in {result['out_dir']}")


@main.command("reproduce-fig1")
@click.option("--fitted", is_flag=True, help="use fitted fields instead of oracle")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), required=True)
def reproduce_fig1_cmd(fitted, seed, out):
    """Run the builtin two-condition reproduction experiment."""
    name = "reproduce-fig1-fitted" if fitted else "reproduce-fig1"
    raw = experiments.BUILTIN_CONFIGS[name]
    seed = _resolve_seed(seed, raw.get("seed"))
    _run(raw, out, seed)


@main.command("rate-study")
@click.option("--n-grid", default="512,1024,2048,4096,8192", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), required=True)
def rate_study_cmd(n_grid, config_path, seed, out):
    """Fit the drift at increasing n; report oracle MSEs and log-log slope."""
    raw = (_load_config(config_path) if config_path
           else experiments.BUILTIN_CONFIGS["rate-study-default"])
    seed = _resolve_seed(seed, raw.get("seed"))
    grid = [int(v) for v in str(n_grid).split(",") if v]
    try:
        summary = experiments.rate_study(raw, grid, out, seed=seed)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"log-log slope: {summary['slope_loglog_drift']:.3f}")


if __name__ == "__main__":
    main()
