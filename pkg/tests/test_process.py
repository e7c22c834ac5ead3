import io

import numpy as np
import pytest

from csinterp.exceptions import ShapeError
from csinterp.experiments import paper_7_1_f
from csinterp.process import (RegressionDataSource, batch_to_csv,
                              draw_training_batch, sample_yt)
from csinterp.schedules import eval_schedule, get_schedule


@pytest.fixture
def src():
    return RegressionDataSource(paper_7_1_f, 5, seed=7)


def test_sample_yt_boundaries(src):
    s = get_schedule("paper-7-1")
    y0 = np.array([1.5, -2.0])
    y1 = np.array([0.3, 0.4])
    eta = np.array([9.9, -9.9])
    np.testing.assert_allclose(sample_yt(eval_schedule(s, 0.0), y0, y1, eta), y0,
                               atol=1e-15)
    np.testing.assert_allclose(sample_yt(eval_schedule(s, 1.0), y0, y1, eta), y1,
                               atol=1e-12)


def test_sample_yt_linear_sqrt_midpoint():
    point = eval_schedule(get_schedule("linear-sqrt"), 0.5)
    out = sample_yt(point, np.array([0.0]), np.array([2.0]), np.array([1.0]))
    assert out[0] == pytest.approx(1.7071068, abs=1e-7)


def test_sample_yt_shape_mismatch():
    point = eval_schedule(get_schedule("linear-sqrt"), 0.5)
    with pytest.raises(ShapeError):
        sample_yt(point, np.zeros(2), np.zeros(3), np.zeros(2))


def test_reconstruction_invariant(src):
    s = get_schedule("paper-7-1")
    batch = draw_training_batch(src, s, 500)
    from csinterp.schedules import eval_coefficients
    c = eval_coefficients(s, batch.t)
    recon = (c["a"][:, None] * batch.y0 + c["b"][:, None] * batch.y1
             + c["gamma"][:, None] * batch.eta)
    scale = np.maximum(np.abs(batch.yt), 1.0)
    assert np.max(np.abs(recon - batch.yt) / scale) <= 1e-12
    assert np.all(np.isfinite(batch.drift_target))


def test_rectified_flow_drift_target(src):
    batch = draw_training_batch(src, get_schedule("rectified-flow"), 200)
    np.testing.assert_allclose(batch.drift_target, batch.y1 - batch.y0,
                               atol=1e-14)
    assert not batch.score_usable
    np.testing.assert_array_equal(batch.denoiser_target, batch.eta)


def test_fixed_t_mode(src):
    batch = draw_training_batch(src, get_schedule("linear-sqrt"), 50,
                                t_mode="fixed", t_fixed=0.3)
    assert np.all(batch.t == 0.3)
    batch_clamped = draw_training_batch(src, get_schedule("linear-sqrt"), 5,
                                        t_mode="fixed", t_fixed=0.0)
    assert np.all(batch_clamped.t == 1e-4)


def test_determinism():
    s = get_schedule("paper-7-1")
    a = draw_training_batch(RegressionDataSource(paper_7_1_f, 5, seed=3), s, 3)
    b = draw_training_batch(RegressionDataSource(paper_7_1_f, 5, seed=3), s, 3)
    for name in ("x", "y0", "y1", "eta", "t", "yt", "drift_target"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_stream_independence_of_draw_order():
    # y0 draws do not depend on how many (x, y1) pairs were drawn before them
    s1 = RegressionDataSource(paper_7_1_f, 5, seed=5)
    s2 = RegressionDataSource(paper_7_1_f, 5, seed=5)
    s2.draw_pairs(100)
    np.testing.assert_array_equal(s1.draw_y0(10), s2.draw_y0(10))


def test_empirical_mean_linearity(src):
    s = get_schedule("paper-7-1")
    n = 100_000
    batch = draw_training_batch(src, s, n, t_mode="fixed", t_fixed=0.4)
    point = eval_schedule(s, 0.4)
    expected = point.a * 0.0 + point.b * float(np.mean(batch.y1))
    se = float(np.std(batch.yt)) / np.sqrt(n)
    assert abs(float(np.mean(batch.yt)) - expected) <= 4 * se + 4 / np.sqrt(n)


def test_batch_size_validation(src):
    with pytest.raises(ValueError):
        draw_training_batch(src, get_schedule("linear-sqrt"), 0)


def test_tuple_view(src):
    batch = draw_training_batch(src, get_schedule("linear-sqrt"), 4)
    tup = batch[2]
    assert tup.t == batch.t[2]
    np.testing.assert_array_equal(tup.yt, batch.yt[2])
    assert len(list(batch)) == 4


def test_csv_roundtrip(src):
    batch = draw_training_batch(src, get_schedule("linear-sqrt"), 6)
    buf = io.StringIO()
    batch_to_csv(batch, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0].split(",")[:2] == ["t", "x_1"]
    assert len(lines) == 7
    first = lines[1].split(",")
    assert float(first[0]) == batch.t[0]
    assert float(first[1]) == batch.x[0, 0]
