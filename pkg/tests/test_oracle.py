import numpy as np
import pytest

from csinterp.exceptions import EvaluationError, InsufficientSupportError
from csinterp.experiments import paper_7_1_f
from csinterp.oracle import (FieldProbe, MCEstimate, RegressionModel,
                             mc_conditional_drift, mc_conditional_score, phi,
                             regression_denoiser, regression_drift,
                             regression_score)
from csinterp.process import PointMassDataSource, RegressionDataSource
from csinterp.schedules import capital_A, eval_schedule, get_schedule

MODEL = RegressionModel(f=paper_7_1_f, k=5)
ZERO_F = RegressionModel(f=lambda x: np.zeros(x.shape[:-1]), k=5)


def test_f_preset_values():
    assert MODEL.f_at(np.zeros(5)) == pytest.approx(2.0)
    assert MODEL.f_at(2 * np.ones(5)) == pytest.approx(28 / 3)


def test_drift_zero_f_reduces_to_phi_y():
    s = get_schedule("paper-7-1")
    for t in (0.1, 0.5, 0.9):
        p = FieldProbe(np.ones(5), 1.7, t)
        assert regression_drift(ZERO_F, s, p) == pytest.approx(
            phi(ZERO_F, s, t) * 1.7, rel=1e-12)


def test_drift_paper_7_1_at_t0():
    s = get_schedule("paper-7-1")
    x = 2 * np.ones(5)
    p = FieldProbe(x, -3.3, 0.0)
    assert regression_drift(MODEL, s, p) == pytest.approx(
        (np.pi / 2) * MODEL.f_at(x), abs=1e-9)


def test_drift_linear_sqrt_is_constant_f():
    # da*a + db*b + dgamma*gamma = -(1-t) + t + (1-2t) = 0, so phi vanishes
    s = get_schedule("linear-sqrt")
    x = np.array([1.0, -1.0, 0.5, 0.2, 0.0])
    fx = MODEL.f_at(x)
    for t in (0.05, 0.37, 0.73, 0.95):
        for y in (-2.0, 0.0, 3.5):
            assert regression_drift(MODEL, s, FieldProbe(x, y, t)) == \
                pytest.approx(fx, rel=1e-12)


def test_score_at_t0_is_minus_y():
    for name in ("linear-sqrt", "paper-7-1", "trig-squared"):
        s = get_schedule(name)
        p = FieldProbe(np.zeros(5), 2.4, 0.0)
        assert regression_score(MODEL, s, p) == pytest.approx(-2.4, rel=1e-12)


def test_score_linear_sqrt_closed_form():
    # denominator (1-t)^2 + t^2 + 2t(1-t) = 1 for unit noise variance
    s = get_schedule("linear-sqrt")
    x = np.zeros(5)
    for t in (0.1, 0.5, 0.9):
        for y in (-1.0, 0.4):
            assert regression_score(MODEL, s, FieldProbe(x, y, t)) == \
                pytest.approx(t * 2.0 - y, rel=1e-12)


def test_score_zero_f():
    s = get_schedule("paper-7-1")
    pt = eval_schedule(s, 0.6)
    den = pt.a ** 2 + pt.b ** 2 + pt.gamma ** 2
    assert regression_score(ZERO_F, s, FieldProbe(np.zeros(5), 1.1, 0.6)) == \
        pytest.approx(-1.1 / den, rel=1e-12)


def test_noise_sd_generalization():
    # with noise_sd != 1 the shared denominator picks up b^2 * sd^2
    m = RegressionModel(f=paper_7_1_f, k=5, noise_sd=2.0)
    s = get_schedule("linear-sqrt")
    t, y = 0.5, 1.0
    pt = eval_schedule(s, t)
    den = pt.a ** 2 + pt.b ** 2 * 4.0 + pt.gamma ** 2
    expected = -(y - pt.b * m.f_at(np.zeros(5))) / den
    assert regression_score(m, s, FieldProbe(np.zeros(5), y, t)) == \
        pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("name", ["linear-sqrt", "paper-7-1"])
def test_score_recoverable_from_drift_on_grid(name):
    s = get_schedule(name)
    rng = np.random.default_rng(42)
    xs = rng.uniform(-3, 3, (10, 5))
    worst = 0.0
    for x in xs:
        for y in np.linspace(-3, 3, 10):
            for t in np.linspace(0.05, 0.95, 10):
                probe = FieldProbe(x, y, t)
                drift = regression_drift(MODEL, s, probe)
                score = regression_score(MODEL, s, probe)
                pt = eval_schedule(s, t)
                a_t = capital_A(s, t)
                recon = (pt.b / a_t) * drift - (pt.db / a_t) * y
                worst = max(worst, abs(recon - score))
    assert worst <= 1e-9


def test_boundary_score_near_zero():
    for name in ("linear-sqrt", "trig-squared"):
        s = get_schedule(name)
        assert abs(regression_score(MODEL, s, FieldProbe(np.zeros(5), 0.9, 1e-6))
                   + 0.9) <= 1e-3


def test_denoiser_score_relation():
    s = get_schedule("paper-7-1")
    p = FieldProbe(np.ones(5), 0.3, 0.4)
    g = eval_schedule(s, 0.4).gamma
    assert regression_score(MODEL, s, p) == pytest.approx(
        -regression_denoiser(MODEL, s, p) / g, rel=1e-12)


# --- Monte-Carlo oracle ----------------------------------------------------

def test_mc_drift_matches_closed_form():
    s = get_schedule("linear-sqrt")
    src = RegressionDataSource(paper_7_1_f, 5, seed=42)
    x = np.zeros(5)
    probe = FieldProbe(x, MODEL.f_at(x), 0.5)
    est = mc_conditional_drift(src, s, probe, m=200_000, seed=3)
    truth = regression_drift(MODEL, s, probe)
    assert abs(est.value - truth) <= 4 * est.stderr


def test_mc_drift_point_mass_closed_form():
    # with y1 = c deterministic, y0 is pinned by y_t; drift target is exact
    c, t, y = 1.5, 0.4, 0.9
    s = get_schedule("rectified-flow")
    src = PointMassDataSource(c, k=2, seed=9)
    est = mc_conditional_drift(src, s, FieldProbe(np.zeros(2), y, t), m=50_000,
                               seed=4)
    expected = c - (y - t * c) / (1 - t)
    assert abs(est.value - expected) <= max(4 * est.stderr, 1e-9)


def test_mc_argument_validation():
    s = get_schedule("linear-sqrt")
    src = RegressionDataSource(paper_7_1_f, 5, seed=1)
    with pytest.raises(ValueError):
        mc_conditional_drift(src, s, FieldProbe(np.zeros(5), 0.0, 0.5), m=0)


def test_mc_insufficient_support():
    s = get_schedule("linear-sqrt")
    src = RegressionDataSource(paper_7_1_f, 5, seed=1)
    probe = FieldProbe(np.zeros(5), 1e6, 0.5)
    with pytest.raises(InsufficientSupportError):
        mc_conditional_drift(src, s, probe, m=2000, seed=0)


def test_mc_score_matches_closed_form():
    s = get_schedule("linear-sqrt")
    src = RegressionDataSource(paper_7_1_f, 5, seed=8)
    probe = FieldProbe(np.zeros(5), 1.0, 0.5)
    est = mc_conditional_score(src, s, probe, m=100_000, seed=5)
    truth = regression_score(MODEL, s, probe)
    assert abs(est.value - truth) <= max(4 * est.stderr, 0.05)


def test_mc_convergence_with_sample_size():
    # doubling m shrinks the error in RMS over 20 probes, and a 2-sided sign
    # test at 5% must not find the larger-m estimates significantly worse
    s = get_schedule("linear-sqrt")
    src = RegressionDataSource(paper_7_1_f, 5, seed=17)
    rng = np.random.default_rng(11)
    e_small, e_big = [], []
    for i in range(20):
        x = rng.uniform(-2, 2, 5)
        t = rng.uniform(0.2, 0.8)
        y = MODEL.f_at(x) * t + rng.normal()
        probe = FieldProbe(x, y, t)
        truth = regression_drift(MODEL, s, probe)
        e_small.append(abs(mc_conditional_drift(src, s, probe, m=100_000,
                                                seed=100 + i).value - truth))
        e_big.append(abs(mc_conditional_drift(src, s, probe, m=200_000,
                                              seed=200 + i).value - truth))
    e_small, e_big = np.array(e_small), np.array(e_big)
    assert np.sqrt(np.mean(e_big ** 2)) < np.sqrt(np.mean(e_small ** 2))
    wins = int(np.sum(e_big < e_small))
    # binomial(20, 0.5) two-sided 5% critical region: <= 5 or >= 15
    assert wins > 5


def test_tweedie_kernel_regression_check():
    # E[a y0 + b y1 | x, y_t = y] == y + gamma^2 * score(x, y, t)
    s = get_schedule("paper-7-1")
    src = RegressionDataSource(paper_7_1_f, 5, seed=23)
    rng = np.random.default_rng(29)
    from csinterp.oracle import _kernel_estimate, _silverman
    for i in range(5):
        x = rng.uniform(-2, 2, 5)
        t = float(rng.uniform(0.2, 0.8))
        pt = eval_schedule(s, t)
        y = float(pt.b * MODEL.f_at(x) + rng.normal())
        probe = FieldProbe(x, y, t)
        cond = src.conditioned(x)
        m = 200_000
        _, y1 = cond.draw_pairs(m)
        y0 = cond.draw_y0(m)
        eta = cond.draw_eta(m)
        yt = (pt.a * y0 + pt.b * y1 + pt.gamma * eta)[:, 0]
        interp = (pt.a * y0 + pt.b * y1)[:, 0]
        # half the rule-of-thumb bandwidth: smoothing bias is not captured
        # by the bootstrap SE, so trade it for reported variance
        est = _kernel_estimate(yt, interp, y, 0.5 * _silverman(yt), seed=300 + i)
        expected = y + pt.gamma ** 2 * regression_score(MODEL, s, probe)
        assert abs(est.value - expected) <= 4 * est.stderr
