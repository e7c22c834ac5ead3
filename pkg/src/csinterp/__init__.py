"""Conditional stochastic interpolation: schedules, field estimation, samplers."""

from .schedules import (PRESETS, Schedule, SchedulePoint, T_MIN, capital_A,
                        check_stability_t0, eval_schedule, get_schedule,
                        validate_boundary)
from .process import (PointMassDataSource, RegressionDataSource, TrainingBatch,
                      TrainingTuple, draw_training_batch, sample_yt)
from .oracle import (FieldProbe, RegressionModel, mc_conditional_drift,
                     mc_conditional_score, regression_drift, regression_score)
from .estimators import (FieldModel, TrainConfig, analytic_drift_field,
                         analytic_score_field, fit_denoiser, fit_drift,
                         score_from_denoiser, score_from_drift)
from .samplers import (SamplerSpec, Trajectory, TrajectoryBatch,
                       ode_flow_sample, sde_diffusion_sample, u_preset)
from .metrics import EmpiricalDistribution, kl_hist, ks_stat, summary_stats, w2_1d

__version__ = "0.1.0"
