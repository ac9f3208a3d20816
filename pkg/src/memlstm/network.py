"""Two-layer recurrent network: one LSTM layer followed by a dense read-out.

Each layer computes its linear part through an *engine*: either a plain
float matrix (:class:`FloatEngine`) or a crossbar partition
(:class:`CrossbarEngine`). Engines see the layer input already augmented
with a constant ``1`` for the bias row, and expose

* ``forward(z)``  -> ``z @ W``   (row voltages in, column currents out)
* ``backward(d)`` -> ``d @ W.T`` (column voltages in, row currents out)
* ``weights``     -> current weight matrix, shape ``(n_inputs, n_outputs)``
* ``apply_update(dW)``

Weight matrices are stored in crossbar orientation: rows are inputs
``[x; h; 1]`` and columns are the gate blocks ``(a, i, f, o)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import codec as cd
from .device import Crossbar, Partition, program_two_pulse, read_conductances, read_mvm, read_mvm_transposed

GATES = ("a", "i", "f", "o")


@dataclass(frozen=True)
class LstmLayerSpec:
    input_dim: int
    hidden_dim: int
    has_bias: bool = True

    @property
    def n_inputs(self) -> int:
        return self.input_dim + self.hidden_dim + int(self.has_bias)

    @property
    def n_outputs(self) -> int:
        return 4 * self.hidden_dim

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_inputs, self.n_outputs)

    def gate_cols(self, gate: str) -> slice:
        k = GATES.index(gate)
        return slice(k * self.hidden_dim, (k + 1) * self.hidden_dim)


@dataclass(frozen=True)
class FcLayerSpec:
    input_dim: int
    output_dim: int
    has_bias: bool = True
    activation: str = "sigmoid"

    def __post_init__(self):
        if self.activation not in ("sigmoid", "softmax"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_inputs(self) -> int:
        return self.input_dim + int(self.has_bias)

    @property
    def n_outputs(self) -> int:
        return self.output_dim

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_inputs, self.n_outputs)


@dataclass(frozen=True)
class LayerMapping:
    """Placement of a layer's weight matrix on a crossbar partition.

    Logical input ``k`` occupies the row pair ``(2k, 2k + 1)`` of the
    partition; logical output ``j`` is column ``j``. Bias rows come last.
    """

    name: str
    partition: Partition
    n_inputs: int
    n_outputs: int
    n_bias: int = 0

    def __post_init__(self):
        want = (2 * self.n_inputs, self.n_outputs)
        if self.partition.shape != want:
            raise ValueError(
                f"{self.name}: partition {self.partition.shape} does not hold a "
                f"{self.n_inputs}x{self.n_outputs} differential layout {want}"
            )

    @classmethod
    def for_layer(cls, name, spec, row_start: int = 0, col_start: int = 0):
        part = Partition(row_start, 2 * spec.n_inputs, col_start, spec.n_outputs)
        return cls(name, part, spec.n_inputs, spec.n_outputs, int(spec.has_bias))


def sigmoid(x):
    return expit(x)


def softmax(x):
    e = np.exp(x - np.max(x, axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _activate(name, x):
    return sigmoid(x) if name == "sigmoid" else softmax(x)


class FloatEngine:
    def __init__(self, weights):
        self.w = np.array(weights, dtype=float)

    @property
    def weights(self):
        return self.w.copy()

    def forward(self, z):
        return z @ self.w

    def backward(self, d):
        return d @ self.w.T

    def apply_update(self, dw):
        self.w += dw


class CrossbarEngine:
    """Layer weights held as differential conductance pairs on a crossbar."""

    def __init__(self, xbar: Crossbar, mapping: LayerMapping, wcodec: cd.WeightCodec, vcodec: cd.VoltageCodec):
        self.xbar = xbar
        self.mapping = mapping
        self.wcodec = wcodec
        self.vcodec = vcodec

    @property
    def weights(self):
        g_plus, g_minus = cd.unpair_rows(read_conductances(self.xbar, self.mapping.partition))
        return cd.decode_weights(g_plus, g_minus, self.wcodec)

    def forward(self, z):
        volts = cd.row_voltages(z, self.vcodec)
        amps = read_mvm(self.xbar, self.mapping.partition, volts)
        return cd.currents_to_values(amps, self.wcodec, self.vcodec)

    def backward(self, d):
        # deltas have no natural bound, so each sample is rescaled to full
        # scale before driving the columns and scaled back after readout
        d = np.asarray(d, dtype=float)
        scale = np.max(np.abs(d), axis=-1, keepdims=True)
        scale = np.where(scale > 0, scale, 1.0)
        volts = self.vcodec.v_full_scale * (d / scale)
        amps = read_mvm_transposed(self.xbar, self.mapping.partition, volts)
        diff = amps[..., 0::2] - amps[..., 1::2]
        return cd.currents_to_values(diff, self.wcodec, self.vcodec) * scale

    def program_weights(self, weights, mask=None):
        """Two-pulse program the given weights (optionally only where ``mask``)."""
        g_plus, g_minus, clamped = cd.encode_weights(weights, self.wcodec)
        cell_mask = None if mask is None else cd.pair_rows(mask, mask).astype(bool)
        report = program_two_pulse(
            self.xbar, self.mapping.partition, cd.pair_rows(g_plus, g_minus), cell_mask
        )
        report.weights_clamped = clamped if mask is None else clamped & mask
        return report

    def apply_update(self, dw):
        dw = np.asarray(dw, dtype=float)
        return self.program_weights(self.weights + dw, mask=dw != 0)


@dataclass
class LstmState:
    h: np.ndarray
    c_hat: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int, batch: tuple = ()):
        return cls(np.zeros(batch + (hidden_dim,)), np.zeros(batch + (hidden_dim,)))


@dataclass
class CacheEntry:
    x: np.ndarray
    h_prev: np.ndarray
    c_hat_prev: np.ndarray
    a: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    c_hat: np.ndarray
    c: np.ndarray
    h: np.ndarray
    y_hat: np.ndarray | None = None
    y: np.ndarray | None = None


@dataclass
class LstmCache:
    steps: list[CacheEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def __getitem__(self, t):
        return self.steps[t]

    def stacked(self, name: str):
        """Field ``name`` across time, time on axis ``-2``."""
        return np.stack([getattr(s, name) for s in self.steps], axis=-2)


def _augment(parts, has_bias):
    if has_bias:
        parts = list(parts) + [np.ones(parts[0].shape[:-1] + (1,))]
    return np.concatenate(parts, axis=-1)


def lstm_step(spec: LstmLayerSpec, engine, state: LstmState, x):
    """Advance one time step using the stacked gate product.

    All four gate pre-activations come out of one engine read over
    ``[x; h_prev; 1]``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.input_dim:
        raise ValueError(f"input has {x.shape[-1]} features, layer expects {spec.input_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    z = _augment([x, state.h], spec.has_bias)
    pre = engine.forward(z)
    H = spec.hidden_dim
    a = np.tanh(pre[..., 0:H])
    i = sigmoid(pre[..., H : 2 * H])
    f = sigmoid(pre[..., 2 * H : 3 * H])
    o = sigmoid(pre[..., 3 * H : 4 * H])
    c_hat = i * a + f * state.c_hat
    c = np.tanh(c_hat)
    h = o * c
    entry = CacheEntry(x, state.h, state.c_hat, a, i, f, o, c_hat, c, h)
    return h, LstmState(h, c_hat), entry


def split_lstm_blocks(spec: LstmLayerSpec, weights):
    """Per-gate ``W_g``, ``U_g``, ``b_g`` in (hidden, fan-in) orientation."""
    weights = np.asarray(weights)
    n_x, H = spec.input_dim, spec.hidden_dim
    blocks = {}
    for g in GATES:
        col = weights[:, spec.gate_cols(g)]
        blocks[f"W_{g}"] = col[:n_x].T
        blocks[f"U_{g}"] = col[n_x : n_x + H].T
        blocks[f"b_{g}"] = col[n_x + H] if spec.has_bias else np.zeros(H)
    return blocks


def lstm_step_per_gate(blocks: dict, state: LstmState, x):
    """Same step written gate by gate with separate W, U, b matrices."""

    def pre(g):
        return x @ blocks[f"W_{g}"].T + state.h @ blocks[f"U_{g}"].T + blocks[f"b_{g}"]

    a = np.tanh(pre("a"))
    i = sigmoid(pre("i"))
    f = sigmoid(pre("f"))
    o = sigmoid(pre("o"))
    c_hat = i * a + f * state.c_hat
    h = o * np.tanh(c_hat)
    return h, LstmState(h, c_hat)


def fc_forward(spec: FcLayerSpec, engine, h):
    h = np.asarray(h, dtype=float)
    if h.shape[-1] != spec.input_dim:
        raise ValueError(f"fc input has {h.shape[-1]} features, layer expects {spec.input_dim}")
    y_hat = engine.forward(_augment([h], spec.has_bias))
    return _activate(spec.activation, y_hat), y_hat


@dataclass
class Network:
    lstm_spec: LstmLayerSpec
    fc_spec: FcLayerSpec
    lstm: object
    fc: object

    def __post_init__(self):
        if self.lstm_spec.hidden_dim != self.fc_spec.input_dim:
            raise ValueError("fc input_dim must equal the LSTM hidden_dim")

    @property
    def engines(self) -> dict:
        return {"lstm": self.lstm, "fc": self.fc}

    def weights(self) -> dict:
        return {name: eng.weights for name, eng in self.engines.items()}


def sequence_forward(net: Network, inputs, state: LstmState | None = None):
    """Run a batch of sequences shaped ``(..., T, input_dim)`` from zero state.

    Returns outputs ``y`` shaped ``(..., T, output_dim)`` and the cache.
    """
    inputs = np.asarray(inputs, dtype=float)
    T = inputs.shape[-2]
    if T < 1:
        raise ValueError("need at least one time step")
    if state is None:
        state = LstmState.zeros(net.lstm_spec.hidden_dim, inputs.shape[:-2])
    cache = LstmCache()
    ys = []
    for t in range(T):
        h, state, entry = lstm_step(net.lstm_spec, net.lstm, state, inputs[..., t, :])
        entry.y, entry.y_hat = fc_forward(net.fc_spec, net.fc, h)
        cache.steps.append(entry)
        ys.append(entry.y)
    return np.stack(ys, axis=-2), cache


def classify_final_step(outputs):
    """Index of the largest final-step output; ties go to the lowest index."""
    outputs = np.asarray(outputs)
    return np.argmax(outputs[..., -1, :], axis=-1)
