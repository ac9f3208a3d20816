import numpy as np
import pytest

from memlstm import codec as cd
from memlstm.device import Crossbar, DeviceParams
from memlstm.network import CrossbarEngine, FcLayerSpec, FloatEngine, LayerMapping, LstmLayerSpec, Network, sequence_forward

ACCEPTANCE = {}


def random_network(rng, n_in=3, hidden=4, n_out=2, bias=True, activation="sigmoid", scale=0.5):
    ls = LstmLayerSpec(n_in, hidden, bias)
    fs = FcLayerSpec(hidden, n_out, bias, activation)
    return Network(
        ls, fs,
        FloatEngine(rng.uniform(-scale, scale, ls.shape)),
        FloatEngine(rng.uniform(-scale, scale, fs.shape)),
    )


def on_crossbar(net, g_per_w=1e-4, v_full_scale=0.2):
    """Crossbar-backed copy of a float network, LSTM and FC side by side."""
    ls, fs = net.lstm_spec, net.fc_spec
    rows = 2 * max(ls.n_inputs, fs.n_inputs)
    cols = ls.n_outputs + fs.n_outputs
    xb = Crossbar(rows, cols, allow_oversize=True)
    wc = cd.WeightCodec(g_per_w, DeviceParams().g_max)
    vc = cd.VoltageCodec(v_full_scale=v_full_scale)
    lstm = CrossbarEngine(xb, LayerMapping.for_layer("lstm", ls), wc, vc)
    fc = CrossbarEngine(xb, LayerMapping.for_layer("fc", fs, 0, ls.n_outputs), wc, vc)
    lstm.program_weights(net.lstm.weights)
    fc.program_weights(net.fc.weights)
    return Network(ls, fs, lstm, fc)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


def fd_gradients(net, task, x, targets, step=1e-5):
    """Central-difference gradients of the sequence loss for float engines."""
    from memlstm.train import sequence_loss

    out = {}
    for name, eng in net.engines.items():
        g = np.zeros_like(eng.w)
        for idx in np.ndindex(eng.w.shape):
            keep = eng.w[idx]
            eng.w[idx] = keep + step
            up = sequence_loss(task, sequence_forward(net, x)[0], targets)
            eng.w[idx] = keep - step
            down = sequence_loss(task, sequence_forward(net, x)[0], targets)
            eng.w[idx] = keep
            g[idx] = (up - down) / (2 * step)
        out[name] = g
    return out


def _ld_loss(net, task, x, targets, w_lstm, w_fc):
    """Sequence loss from an independent long-double forward pass."""
    L = np.longdouble
    H = net.lstm_spec.hidden_dim
    x, targets = x.astype(L), np.asarray(targets).astype(L)
    sig = lambda z: L(1) / (L(1) + np.exp(-z))
    h = np.zeros(x.shape[:-2] + (H,), L)
    c_hat = np.zeros_like(h)
    ys = []
    for t in range(x.shape[-2]):
        z = np.concatenate([x[..., t, :], h], axis=-1)
        if net.lstm_spec.has_bias:
            z = np.concatenate([z, np.ones(z.shape[:-1] + (1,), L)], axis=-1)
        p = z @ w_lstm
        a, i, f, o = np.tanh(p[..., :H]), sig(p[..., H:2 * H]), sig(p[..., 2 * H:3 * H]), sig(p[..., 3 * H:])
        c_hat = i * a + f * c_hat
        h = o * np.tanh(c_hat)
        hz = np.concatenate([h, np.ones(h.shape[:-1] + (1,), L)], axis=-1) if net.fc_spec.has_bias else h
        yh = hz @ w_fc
        if net.fc_spec.activation == "sigmoid":
            ys.append(sig(yh))
        else:
            e = np.exp(yh - yh.max(axis=-1, keepdims=True))
            ys.append(e / e.sum(axis=-1, keepdims=True))
    if task == "regression":
        y = np.stack(ys, axis=-2)
        return L(0.5) * np.sum((y - targets) ** 2) / L(len(ys))
    return -np.sum(targets * np.log(ys[-1]))


def fd_gradients_longdouble(net, task, x, targets, step=1e-5):
    """Central differences with the same step, free of float64 round-off."""
    w = {k: v.astype(np.longdouble) for k, v in net.weights().items()}
    out = {}
    for name in w:
        g = np.zeros(w[name].shape)
        for idx in np.ndindex(w[name].shape):
            keep = w[name][idx]
            w[name][idx] = keep + np.longdouble(step)
            up = _ld_loss(net, task, x, targets, w["lstm"], w["fc"])
            w[name][idx] = keep - np.longdouble(step)
            down = _ld_loss(net, task, x, targets, w["lstm"], w["fc"])
            w[name][idx] = keep
            g[idx] = float((up - down) / (2 * np.longdouble(step)))
        out[name] = g
    return out


def gradient_check(rng, hidden=None, T=None, task=None, oracle=fd_gradients):
    """Worst relative BPTT vs finite-difference error for one random net."""
    from memlstm.train import CLASSIFICATION, REGRESSION, bptt, output_deltas

    hidden = hidden or int(rng.integers(1, 5))
    T = T or int(rng.integers(1, 6))
    task = task or (REGRESSION, CLASSIFICATION)[int(rng.integers(2))]
    n_in, n_out, batch = int(rng.integers(1, 4)), int(rng.integers(2, 4)), int(rng.integers(1, 3))
    act = "sigmoid" if task == REGRESSION else "softmax"
    net = random_network(rng, n_in, hidden, n_out, bool(rng.integers(2)), act, scale=1.0)
    x = rng.uniform(-1, 1, (batch, T, n_in))
    if task == REGRESSION:
        targets = rng.uniform(0, 1, (batch, T, n_out))
    else:
        targets = np.eye(n_out)[rng.integers(n_out, size=batch)]
    y, cache = sequence_forward(net, x)
    grads = bptt(net, cache, output_deltas(task, y, targets)).as_dict()
    fd = oracle(net, task, x, targets)
    worst = 0.0
    for name in grads:
        g = grads[name]
        err = np.abs(g - fd[name]) / np.maximum(1e-8, np.abs(g))
        worst = max(worst, float(err.max()))
    return worst
