import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import on_crossbar, random_network
from memlstm.device import Partition
from memlstm.network import (
    FcLayerSpec,
    FloatEngine,
    LayerMapping,
    LstmLayerSpec,
    LstmState,
    classify_final_step,
    fc_forward,
    lstm_step,
    lstm_step_per_gate,
    sequence_forward,
    sigmoid,
    softmax,
    split_lstm_blocks,
)


def test_spec_shapes():
    assert LstmLayerSpec(1, 15, True).shape == (17, 60)
    assert LstmLayerSpec(50, 14, False).shape == (64, 56)
    assert FcLayerSpec(15, 1, True).shape == (16, 1)
    assert LstmLayerSpec(2, 3, False).gate_cols("f") == slice(6, 9)
    with pytest.raises(ValueError):
        FcLayerSpec(3, 2, True, "relu")


def test_zero_parameter_fixed_point():
    spec = LstmLayerSpec(2, 3, True)
    h, st_, e = lstm_step(spec, FloatEngine(np.zeros(spec.shape)), LstmState.zeros(3), np.array([0.7, -0.2]))
    assert np.all(e.a == 0) and np.all(h == 0) and np.all(st_.c_hat == 0)
    assert np.all(e.i == 0.5) and np.all(e.f == 0.5) and np.all(e.o == 0.5)


def test_scalar_step_oracle():
    spec = LstmLayerSpec(1, 1, False)
    w = np.zeros(spec.shape)
    w[0, 0] = 1.0  # W_a
    h, state, e = lstm_step(spec, FloatEngine(w), LstmState.zeros(1), np.array([1.0]))
    assert e.a[0] == pytest.approx(0.76159416, abs=1e-8)
    assert state.c_hat[0] == pytest.approx(0.38079708, abs=1e-8)
    # tanh(0.38080) = 0.36340, so h = 0.18170
    assert e.c[0] == pytest.approx(math.tanh(0.5 * math.tanh(1.0)), rel=1e-14)
    assert e.c[0] == pytest.approx(0.36340, abs=1e-5)
    assert h[0] == pytest.approx(0.18170, abs=1e-5)


def test_step_input_checks():
    spec = LstmLayerSpec(2, 1, False)
    eng = FloatEngine(np.zeros(spec.shape))
    with pytest.raises(ValueError):
        lstm_step(spec, eng, LstmState.zeros(1), np.zeros(3))
    with pytest.raises(ValueError):
        lstm_step(spec, eng, LstmState.zeros(1), np.array([np.nan, 0]))
    with pytest.raises(ValueError):
        fc_forward(FcLayerSpec(2, 1, False), FloatEngine(np.zeros((2, 1))), np.zeros(3))


def test_fc_zero_params():
    y, yh = fc_forward(FcLayerSpec(3, 1, True), FloatEngine(np.zeros((4, 1))), np.ones(3))
    assert y[0] == 0.5
    y, _ = fc_forward(FcLayerSpec(3, 8, False, "softmax"), FloatEngine(np.zeros((3, 8))), np.ones(3))
    assert np.allclose(y, 1 / 8, rtol=0, atol=1e-15)


def test_fc_dense_oracle(rng):
    W, b, h = rng.normal(size=(4, 3)), rng.normal(size=4), rng.normal(size=3)
    y, yh = fc_forward(FcLayerSpec(3, 4, True, "softmax"), FloatEngine(np.vstack([W.T, b])), h)
    ref = W @ h + b
    assert np.allclose(yh, ref, rtol=1e-13)
    assert np.allclose(y, np.exp(ref) / np.exp(ref).sum(), rtol=1e-13)


@given(st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_activation_ranges_and_softmax(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, scale=3.0, activation="softmax", n_out=5)
    y, cache = sequence_forward(net, rng.uniform(-1, 1, (2, 6, 3)))
    for name in ("i", "f", "o"):
        v = cache.stacked(name)
        assert np.all((v > 0) & (v < 1))
    for name in ("a", "c", "h"):
        assert np.all(np.abs(cache.stacked(name)) < 1)
    assert np.all(y > 0)
    assert np.allclose(y.sum(axis=-1), 1, rtol=0, atol=1e-12)


def test_softmax_stable_for_large_inputs():
    y = softmax(np.array([1000.0, 1000.0, -1000.0]))
    assert np.allclose(y, [0.5, 0.5, 0])


def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5


def test_sequence_T1_matches_step(rng):
    net = random_network(rng)
    x = rng.uniform(-1, 1, 3)
    y, cache = sequence_forward(net, x[None, :])
    h, _, _ = lstm_step(net.lstm_spec, net.lstm, LstmState.zeros(4), x)
    y_ref, _ = fc_forward(net.fc_spec, net.fc, h)
    assert np.array_equal(y[0], y_ref)
    assert len(cache) == 1


def test_sequence_zero_net():
    net = random_network(np.random.default_rng(0), scale=0.0)
    y, _ = sequence_forward(net, np.ones((5, 3)))
    assert np.all(y == 0.5)


def test_sequence_unrolled_oracle(rng):
    net = random_network(rng)
    xs = rng.uniform(-1, 1, (3, 3))
    y, cache = sequence_forward(net, xs)
    blocks = split_lstm_blocks(net.lstm_spec, net.lstm.weights)
    state = LstmState.zeros(4)
    W = net.fc.weights
    for t in range(3):
        h, state = lstm_step_per_gate(blocks, state, xs[t])
        assert np.allclose(y[t], sigmoid(h @ W[:4] + W[4]), rtol=1e-13)
    with pytest.raises(ValueError):
        sequence_forward(net, np.zeros((0, 3)))


def test_cache_recomputes(rng):
    net = random_network(rng)
    _, cache = sequence_forward(net, rng.uniform(-1, 1, (4, 3)))
    for e in cache.steps:
        assert np.allclose(e.c_hat, e.i * e.a + e.f * e.c_hat_prev, rtol=1e-14)
        assert np.allclose(e.h, e.o * np.tanh(e.c_hat), rtol=1e-14)
    assert np.array_equal(cache[1].h_prev, cache[0].h)


@given(st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_crossbar_forward_matches_float(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, scale=0.5)
    xnet = on_crossbar(net)
    x = rng.uniform(-1, 1, (2, 5, 3))
    y_f, c_f = sequence_forward(net, x)
    y_x, c_x = sequence_forward(xnet, x)
    assert np.allclose(y_x, y_f, rtol=1e-8, atol=0)
    assert np.allclose(c_x.stacked("h"), c_f.stacked("h"), rtol=1e-8, atol=1e-15)


def test_crossbar_backward_matches_float(rng):
    net = random_network(rng)
    xnet = on_crossbar(net)
    d = rng.normal(size=(3, 16)) * 1e3
    assert np.allclose(xnet.lstm.backward(d), net.lstm.backward(d), rtol=1e-10, atol=1e-9)


def test_classify_final_step():
    assert classify_final_step(np.array([[0.1, 0.7, 0.2]])) == 1
    assert classify_final_step(np.full((2, 8), 1 / 8)) == 0
    assert classify_final_step(np.array([[[0, 1.0]], [[1.0, 0]]])).tolist() == [1, 0]


def test_mapping_shape_assertion():
    m = LayerMapping.for_layer("lstm", LstmLayerSpec(1, 15, True))
    assert m.partition.shape == (34, 60)
    m = LayerMapping.for_layer("fc", FcLayerSpec(14, 8, False, "softmax"), 0, 56)
    assert m.partition == Partition(0, 28, 56, 8)
    with pytest.raises(ValueError):
        LayerMapping("fc", Partition(0, 30, 56, 8), 14, 8)
