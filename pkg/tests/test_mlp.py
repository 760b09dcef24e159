import math

import numpy as np
import pytest

from latentry.errors import DivergedLoss, EmptyBatch, SessionMismatch
from latentry.labels import Condition, Session
from latentry.mlp import (
    AdamState,
    ModelParams,
    SplitMix64,
    TrainConfig,
    adam_step,
    adam_update,
    backward,
    forward,
    init_params,
    load_params,
    loss,
    loss_and_grad,
    predict_m2,
    save_params,
    train,
)
from latentry.pairing import pairs_from_arrays
from latentry.preprocess import LatentPoint

from oracles import central_difference


def test_splitmix_reference_values():
    # published first outputs for seed 1234567
    rng = SplitMix64(1234567)
    assert [rng.next_u64() for _ in range(3)] == [6457827717110365317, 3203168211198807973, 9817491932198370423]


def test_init_shapes_and_determinism():
    p = init_params(7)
    assert [a.shape for a in p.arrays()] == [(16, 8), (16,), (16, 16), (16,), (2, 16), (2,)]
    assert np.all(p.b1 == 0) and np.all(p.b3 == 0)
    assert np.abs(p.w1).max() <= math.sqrt(6 / 24)
    np.testing.assert_array_equal(p.flat(), init_params(7).flat())
    assert not np.array_equal(p.flat(), init_params(8).flat())


def test_forward_by_hand():
    p = ModelParams.zeros()
    w1 = np.zeros((16, 8)); w1[0, 0] = 1.0; w1[1, 0] = -1.0
    w2 = np.zeros((16, 16)); w2[0, 0] = 2.0; w2[1, 1] = 1.0
    w3 = np.zeros((2, 16)); w3[0, 0] = 1.0; w3[1, 1] = 1.0
    p = ModelParams(w1, p.b1, w2, p.b2, w3, np.array([0.5, 0.0]))
    x = np.zeros(8)
    x[0] = 3.0
    np.testing.assert_allclose(forward(p, x), [6.5, 0.0])
    x[0] = -3.0
    np.testing.assert_allclose(forward(p, x), [0.5, 3.0])


def test_loss_definition():
    p = ModelParams.zeros()
    x = np.zeros((2, 8))
    y = np.array([[3.0, 4.0], [0.0, 1.0]])
    # mean over pairs of the squared Euclidean error: (25 + 1) / 2
    assert loss(p, (x, y)) == 13.0
    with pytest.raises(EmptyBatch):
        loss(p, (np.zeros((0, 8)), np.zeros((0, 2))))


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_difference(seed):
    rng = np.random.default_rng(seed)
    p = init_params(seed).map(lambda a: a + rng.normal(scale=0.1, size=a.shape))
    x, y = rng.normal(size=(6, 8)), rng.normal(size=(6, 2))
    _, g = loss_and_grad(p, x, y)
    num = central_difference(lambda th: loss(p.from_flat(th), (x, y)), p.flat())
    err = np.abs(g.flat() - num) / np.maximum(np.maximum(np.abs(g.flat()), np.abs(num)), 1e-8)
    assert err.max() < 1e-5


def test_adam_first_step_closed_form():
    theta, _, _ = adam_update(0.0, 1.0, 0.0, 0.0, 1, 0.001, 0.9, 0.999, 1e-8)
    assert abs(theta - (-0.001 / (1 + 1e-8))) < 1e-12


def test_adam_second_step_closed_form():
    th, m, v = adam_update(0.0, 1.0, 0.0, 0.0, 1, 0.1, 0.9, 0.999, 0.0)
    th, m, v = adam_update(th, 3.0, m, v, 2, 0.1, 0.9, 0.999, 0.0)
    m_hat = (0.9 * 0.1 + 0.1 * 3.0) / (1 - 0.81)
    v_hat = (0.999 * 0.001 + 0.001 * 9.0) / (1 - 0.999 ** 2)
    assert abs(th - (-0.1 - 0.1 * m_hat / math.sqrt(v_hat))) < 1e-12


def test_adam_step_on_params():
    p = init_params(0)
    g = p.map(np.ones_like)
    q, s = adam_step(p, g, AdamState.fresh(p))
    assert s.step == 1
    np.testing.assert_allclose(q.flat() - p.flat(), -0.001 / (1 + 1e-8), rtol=0, atol=1e-15)


def _pairs(n=20, seed=0):
    rng = np.random.default_rng(seed)
    m1 = rng.normal(size=(n, 2))
    return pairs_from_arrays(m1, m1 @ np.array([[0.5, 0.2], [-0.3, 1.0]]) + [1.0, -2.0], Condition.OC3)


def test_training_is_deterministic():
    cfg = TrainConfig(epochs=50, seed=3)
    p1, h1 = train(_pairs(), cfg)
    p2, h2 = train(_pairs(), cfg)
    assert h1 == h2
    np.testing.assert_array_equal(p1.flat(), p2.flat())
    assert len(h1) == 50


def test_training_learns_affine_map():
    pairs = _pairs()
    _, hist = train(pairs, TrainConfig(epochs=800, seed=1, lr=0.01))
    assert hist[-1] < 0.05 * hist[0]


def test_memorizes_single_pair():
    pairs = pairs_from_arrays(np.array([[0.3, -0.2]]), np.array([[1.5, 0.7]]), Condition.ONL)
    p, hist = train(pairs, TrainConfig())
    assert hist[-1] < 1e-3
    assert loss(p, pairs) < 1e-3


def test_divergence_raises():
    pairs = pairs_from_arrays(np.array([[1e200, 1e200]]), np.array([[0.0, 0.0]]), Condition.ONL)
    with pytest.raises(DivergedLoss):
        train(pairs, TrainConfig(epochs=5))


def test_backward_agrees_with_loss_and_grad():
    pairs = _pairs(5)
    p = init_params(2)
    from latentry.pairing import design
    np.testing.assert_array_equal(backward(p, pairs).flat(), loss_and_grad(p, *design(pairs))[1].flat())


def test_predict_m2(tmp_path):
    p = init_params(0)
    pts = [LatentPoint(0.1, 0.2, Condition.OC3, Session.M1)]
    out = predict_m2(p, pts, Condition.OC3)
    assert out[0].session is Session.M2 and out[0].condition is Condition.OC3
    with pytest.raises(SessionMismatch):
        predict_m2(p, pts, Condition.ONL)
    save_params(p, TrainConfig(), tmp_path / "m.json")
    q, cfg = load_params(tmp_path / "m.json")
    assert cfg == TrainConfig()
    np.testing.assert_array_equal(q.flat(), p.flat())
