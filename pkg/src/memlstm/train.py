"""Losses, backpropagation through time, optimizers and the training loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .network import LstmCache, Network, sequence_forward, split_lstm_blocks

log = logging.getLogger(__name__)

REGRESSION = "regression"
CLASSIFICATION = "classification"


# -- losses --------------------------------------------------------------------


def loss_mse_sequence(outputs, targets):
    """Half squared error summed over samples and steps, divided by ``T``.

    Arrays are shaped ``(..., T, k)``.
    """
    outputs = np.asarray(outputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if outputs.shape != targets.shape:
        raise ValueError(f"outputs {outputs.shape} and targets {targets.shape} differ")
    T = outputs.shape[-2]
    return float(0.5 * np.sum((outputs - targets) ** 2) / T)


def loss_crossentropy_final(y_final, target_onehot):
    y_final = np.asarray(y_final, dtype=float)
    target_onehot = np.asarray(target_onehot, dtype=float)
    if y_final.shape != target_onehot.shape:
        raise ValueError(f"prediction {y_final.shape} and target {target_onehot.shape} differ")
    if np.any(y_final <= 0) or not np.allclose(y_final.sum(axis=-1), 1.0, atol=1e-9):
        raise ValueError("y_final must be a strictly positive probability vector")
    return float(-np.sum(target_onehot * np.log(y_final)))


def output_delta(task: str, y_t, target_t, t: int, T: int):
    """Gradient of the loss w.r.t. the read-out pre-activation at step ``t``.

    ``t`` counts from 1. Regression uses the sigmoid derivative written in
    terms of the output and carries the ``1/T`` of the loss; classification
    only has a delta at the final step.
    """
    y_t = np.asarray(y_t, dtype=float)
    if task == REGRESSION:
        return (y_t - target_t) * y_t * (1.0 - y_t) / T
    if task == CLASSIFICATION:
        if t < T:
            return np.zeros_like(y_t)
        return y_t - target_t
    raise ValueError(f"unknown task {task!r}")


def output_deltas(task: str, outputs, targets):
    """Deltas for whole sequences ``(..., T, k)``.

    For classification ``targets`` is the one-hot label ``(..., k)``.
    """
    outputs = np.asarray(outputs, dtype=float)
    T = outputs.shape[-2]
    if task == REGRESSION:
        return output_delta(task, outputs, np.asarray(targets, dtype=float), T, T)
    deltas = np.zeros_like(outputs)
    deltas[..., -1, :] = output_delta(task, outputs[..., -1, :], targets, T, T)
    return deltas


def sequence_loss(task: str, outputs, targets):
    if task == REGRESSION:
        return loss_mse_sequence(outputs, targets)
    return loss_crossentropy_final(np.asarray(outputs)[..., -1, :], targets)


# -- gradients -----------------------------------------------------------------


@dataclass
class GradientSet:
    lstm: np.ndarray
    fc: np.ndarray

    @classmethod
    def zeros_like(cls, net: Network):
        return cls(np.zeros(net.lstm_spec.shape), np.zeros(net.fc_spec.shape))

    def as_dict(self) -> dict:
        return {"lstm": self.lstm, "fc": self.fc}

    def __add__(self, other: GradientSet) -> GradientSet:
        return GradientSet(self.lstm + other.lstm, self.fc + other.fc)

    def blocks(self, net: Network) -> dict:
        """Named blocks: ``W_a`` ... ``b_o`` plus ``W_FC`` and ``b_FC``."""
        out = split_lstm_blocks(net.lstm_spec, self.lstm)
        H = net.fc_spec.input_dim
        out["W_FC"] = self.fc[:H].T
        out["b_FC"] = self.fc[H] if net.fc_spec.has_bias else np.zeros(self.fc.shape[1])
        return out


def _outer_sum(left, right):
    """Sum of outer products ``left_n^T right_n`` over all leading axes."""
    return left.reshape(-1, left.shape[-1]).T @ right.reshape(-1, right.shape[-1])


def _with_bias(v, has_bias):
    if not has_bias:
        return v
    return np.concatenate([v, np.ones(v.shape[:-1] + (1,))], axis=-1)


def bptt(net: Network, cache: LstmCache, deltas) -> GradientSet:
    """Backpropagate read-out deltas ``(..., T, k)`` through the unrolled net.

    The two transposed products (read-out weights back onto ``h`` and the
    stacked gate weights back onto ``[x; h_prev]``) go through the layer
    engines, so a crossbar-backed network evaluates them as transposed
    array reads.
    """
    deltas = np.asarray(deltas, dtype=float)
    T = deltas.shape[-2]
    if len(cache) != T:
        raise ValueError(f"cache holds {len(cache)} steps, deltas have {T}")
    lspec, fspec = net.lstm_spec, net.fc_spec
    H, n_x = lspec.hidden_dim, lspec.input_dim
    grads = GradientSet.zeros_like(net)

    dh_next = np.zeros(deltas.shape[:-2] + (H,))
    dc_next = np.zeros_like(dh_next)
    for t in reversed(range(T)):
        e = cache[t]
        dy = deltas[..., t, :]
        if e.h is None or e.c is None:
            raise ValueError(f"cache entry {t} is incomplete")
        grads.fc += _outer_sum(_with_bias(e.h, fspec.has_bias), dy)

        dh = dh_next
        if np.any(dy):
            dh = dh + net.fc.backward(dy)[..., :H]
        d_o = dh * e.c * e.o * (1.0 - e.o)
        dc = dh * e.o * (1.0 - e.c**2) + dc_next
        d_a = dc * e.i * (1.0 - e.a**2)
        d_i = dc * e.a * e.i * (1.0 - e.i)
        d_f = dc * e.c_hat_prev * e.f * (1.0 - e.f)
        dc_next = dc * e.f

        d_gates = np.concatenate([d_a, d_i, d_f, d_o], axis=-1)
        z = _with_bias(np.concatenate([e.x, e.h_prev], axis=-1), lspec.has_bias)
        grads.lstm += _outer_sum(z, d_gates)
        if t > 0:
            dh_next = net.lstm.backward(d_gates)[..., n_x : n_x + H]
    return grads


# -- optimizers ----------------------------------------------------------------


@dataclass
class OptimizerState:
    """Hyperparameters plus per-parameter velocity and mean-square buffers.

    ``velocity`` holds the positive running step, so the applied update is
    ``-velocity``.
    """

    lr: float = 0.01
    momentum: float = 0.0
    decay: float = 0.9
    eps: float = 1e-8
    velocity: dict = field(default_factory=dict)
    mean_square: dict = field(default_factory=dict)


def _as_dict(grad):
    return grad.as_dict() if isinstance(grad, GradientSet) else grad


def sgdm_step(state: OptimizerState, grad) -> dict:
    updates = {}
    for name, g in _as_dict(grad).items():
        v = state.velocity.get(name, np.zeros_like(g))
        v = state.momentum * v + state.lr * g
        state.velocity[name] = v
        updates[name] = -v
    return updates


def rmsprop_step(state: OptimizerState, grad) -> dict:
    updates = {}
    for name, g in _as_dict(grad).items():
        ms = state.mean_square.get(name, np.zeros_like(g))
        ms = state.decay * ms + (1.0 - state.decay) * g**2
        state.mean_square[name] = ms
        v = state.velocity.get(name, np.zeros_like(g))
        v = state.momentum * v + state.lr * g / (np.sqrt(ms) + state.eps)
        state.velocity[name] = v
        updates[name] = -v
    return updates


OPTIMIZERS = {"sgdm": sgdm_step, "rmsprop": rmsprop_step}


def insitu_update(net: Network, updates: dict) -> dict:
    """Push weight updates into each layer engine.

    For crossbar engines this decodes the present conductances, adds the
    update, re-encodes and two-pulse programs the touched cells. Returns the
    programming reports keyed by layer (``None`` for float engines).
    """
    return {name: eng.apply_update(updates[name]) for name, eng in net.engines.items()}


# -- training loop -------------------------------------------------------------


@dataclass
class Record:
    kind: str  # "batch" or "epoch"
    epoch: int
    batch: int
    loss: float | None = None
    metric: float | None = None


LOG_FIELDS = ("kind", "epoch", "batch", "loss", "metric")


@dataclass
class TrainingLog:
    records: list[Record] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def batch_losses(self) -> list[float]:
        return [r.loss for r in self.records if r.kind == "batch"]

    def epoch_losses(self) -> list[float]:
        """Sample-weighted mean batch loss per epoch."""
        return [r.loss for r in self.records if r.kind == "epoch"]

    def metrics(self) -> list[float]:
        return [r.metric for r in self.records if r.kind == "epoch"]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_FIELDS)
            for r in self.records:
                w.writerow([
                    r.kind, r.epoch, r.batch,
                    "" if r.loss is None else repr(float(r.loss)),
                    "" if r.metric is None else repr(float(r.metric)),
                ])

    @classmethod
    def read_csv(cls, path) -> TrainingLog:
        out = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                out.records.append(Record(
                    row["kind"], int(row["epoch"]), int(row["batch"]),
                    float(row["loss"]) if row["loss"] else None,
                    float(row["metric"]) if row["metric"] else None,
                ))
        return out


@dataclass
class Dataset:
    """Training sequences plus targets.

    ``inputs`` is ``(N, T, input_dim)``. Regression targets are
    ``(N, T, output_dim)``; classification targets are integer labels ``(N,)``.
    """

    task: str
    inputs: np.ndarray
    targets: np.ndarray
    n_classes: int | None = None

    def __len__(self):
        return len(self.inputs)

    def batch_targets(self, idx):
        if self.task == REGRESSION:
            return self.targets[idx]
        return np.eye(self.n_classes)[self.targets[idx]]


def train_loop(
    net: Network,
    data: Dataset,
    *,
    epochs: int,
    optimizer: str = "sgdm",
    opt_state: OptimizerState | None = None,
    batch_size: int | None = None,
    shuffle: bool = False,
    rng: np.random.Generator | None = None,
    evaluate: Callable[[Network], float] | None = None,
) -> TrainingLog:
    """Mini-batch BPTT training with one in-situ update per batch.

    ``evaluate`` is called after every epoch and its value logged as the
    epoch metric.
    """
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    step = OPTIMIZERS[optimizer]
    opt_state = opt_state or OptimizerState()
    rng = rng or np.random.default_rng(0)
    n = len(data)
    batch_size = batch_size or n
    log_ = TrainingLog()

    for epoch in range(1, epochs + 1):
        order = rng.permutation(n) if shuffle else np.arange(n)
        total = 0.0
        for b, start in enumerate(range(0, n, batch_size), start=1):
            idx = order[start : start + batch_size]
            targets = data.batch_targets(idx)
            outputs, cache = sequence_forward(net, data.inputs[idx])
            loss = sequence_loss(data.task, outputs, targets)
            grads = bptt(net, cache, output_deltas(data.task, outputs, targets))
            insitu_update(net, step(opt_state, grads))
            total += loss
            log_.records.append(Record("batch", epoch, b, loss / len(idx)))
        metric = evaluate(net) if evaluate else None
        log_.records.append(Record("epoch", epoch, 0, total / n, metric))
        if epoch == 1 or epoch % 50 == 0 or epoch == epochs:
            log.info("epoch %d loss %.6g metric %s", epoch, total / n, metric)
    return log_
