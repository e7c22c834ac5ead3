import numpy as np
import pytest

from csinterp import net as nn
from csinterp.exceptions import DomainError, ShapeError
from csinterp.experiments import paper_7_1_f
from csinterp.process import RegressionDataSource, draw_training_batch
from csinterp.schedules import get_schedule

CFG = nn.NetConfig(input_dim=7, output_dim=1, hidden_widths=(8, 8))


@pytest.fixture
def batch():
    src = RegressionDataSource(paper_7_1_f, 5, seed=11)
    return draw_training_batch(src, get_schedule("paper-7-1"), 16)


def test_forward_shapes():
    params = nn.init_params(CFG, seed=0)
    out = nn.forward(params, np.zeros((5, 7)))
    assert out.shape == (5, 1)
    single = nn.forward(params, np.zeros(7))
    assert single.shape == (1,)
    with pytest.raises(ShapeError):
        nn.forward(params, np.zeros((5, 6)))


def test_init_deterministic():
    a = nn.init_params(CFG, seed=3)
    b = nn.init_params(CFG, seed=3)
    np.testing.assert_array_equal(a.flat(), b.flat())
    c = nn.init_params(CFG, seed=4)
    assert not np.array_equal(a.flat(), c.flat())


def test_flat_roundtrip():
    params = nn.init_params(CFG, seed=1)
    again = nn.params_from_flat(CFG, params.flat())
    np.testing.assert_array_equal(params.flat(), again.flat())
    with pytest.raises(ShapeError):
        nn.params_from_flat(CFG, params.flat()[:-1])


def _numeric_grad(params, batch, which, clamp, coords, h=1e-6):
    flat = params.flat()
    out = np.empty(len(coords))
    loss = nn.loss_drift if which == "drift" else nn.loss_denoiser
    for j, i in enumerate(coords):
        bumped = flat.copy()
        bumped[i] += h
        hi = loss(nn.params_from_flat(CFG, bumped), batch, clamp)
        bumped[i] -= 2 * h
        lo = loss(nn.params_from_flat(CFG, bumped), batch, clamp)
        out[j] = (hi - lo) / (2 * h)
    return out


@pytest.mark.parametrize("clamp", [None, 20.0])
@pytest.mark.parametrize("which", ["drift", "denoiser"])
def test_gradcheck(batch, clamp, which):
    # central finite differences vs backprop, relative error <= 1e-4
    params = nn.init_params(CFG, seed=7)
    analytic = nn.grad(params, batch, which, clamp).flat()
    rng = np.random.default_rng(5)
    coords = rng.choice(analytic.size, size=60, replace=False)
    numeric = _numeric_grad(params, batch, which, clamp, coords)
    scale = np.maximum(np.abs(analytic[coords]), 1.0)
    assert np.max(np.abs(analytic[coords] - numeric) / scale) <= 1e-4


def test_denoiser_loss_rejects_gamma_zero():
    src = RegressionDataSource(paper_7_1_f, 5, seed=11)
    rect = draw_training_batch(src, get_schedule("rectified-flow"), 8)
    params = nn.init_params(CFG, seed=0)
    with pytest.raises(DomainError):
        nn.loss_denoiser(params, rect)


def test_adam_reduces_loss(batch):
    params = nn.init_params(CFG, seed=2)
    state = nn.AdamState(lr=1e-2)
    first = nn.loss_drift(params, batch)
    for _ in range(200):
        g = nn.grad(params, batch, "drift")
        state, params = nn.adam_step(state, params, g)
    assert nn.loss_drift(params, batch) < 0.5 * first


def test_adam_rejects_nonfinite_gradient(batch):
    params = nn.init_params(CFG, seed=2)
    g = nn.grad(params, batch, "drift")
    g.weights[0][0, 0] = np.nan
    with pytest.raises(ArithmeticError):
        nn.adam_step(nn.AdamState(), params, g)


def test_output_clamp_bounds_range():
    cfg = nn.NetConfig(input_dim=7, output_dim=1, hidden_widths=(8,),
                       output_clamp=3.0)
    params = nn.init_params(cfg, seed=0)
    params.biases[-1][:] = 100.0
    out = nn.forward(params, np.zeros((4, 7)), cfg.output_clamp)
    assert np.all(np.abs(out) <= 3.0)


def test_checkpoint_roundtrip(tmp_path, batch):
    params = nn.init_params(CFG, seed=9)
    path = tmp_path / "net.json"
    nn.save_checkpoint(path, params, CFG, seed=9,
                       loss_tail=[3.0, 2.0, 1.0], role="drift")
    loaded, cfg, doc = nn.load_checkpoint(path)
    assert doc["format"] == "csi-net-v1"
    assert doc["role"] == "drift"
    assert doc["loss_tail"] == [3.0, 2.0, 1.0]
    assert cfg == CFG
    np.testing.assert_array_equal(loaded.flat(), params.flat())
    x = np.linspace(-1, 1, 7)
    np.testing.assert_array_equal(nn.forward(loaded, x), nn.forward(params, x))


def test_checkpoint_rejects_unknown_format(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "other-v9"}')
    with pytest.raises(ValueError):
        nn.load_checkpoint(path)
