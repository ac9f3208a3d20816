"""Conversions between network quantities and crossbar physics.

A signed weight ``w`` is stored as two conductances in the same column,
``g_plus - g_minus = w * g_per_w``, on adjacent rows (plus row ``2k``, minus
row ``2k + 1``). Driving the plus row with ``+v`` and the minus row with
``-v`` makes the column current carry the signed product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WeightCodec:
    g_per_w: float
    g_max: float

    def __post_init__(self):
        if self.g_per_w <= 0:
            raise ValueError("g_per_w must be positive")
        if self.g_max <= 0:
            raise ValueError("g_max must be positive")

    @property
    def w_max(self) -> float:
        """Largest representable weight magnitude."""
        return self.g_max / self.g_per_w


@dataclass(frozen=True)
class VoltageCodec:
    v_full_scale: float = 0.2
    value_min: float = -1.0
    value_max: float = 1.0
    v_read: float = 0.2

    def __post_init__(self):
        if not 0 < self.v_full_scale <= self.v_read:
            raise ValueError(
                f"v_full_scale={self.v_full_scale} V must lie in (0, v_read={self.v_read}]"
            )
        if not self.value_min < self.value_max:
            raise ValueError("value_min must be below value_max")

    @property
    def value_scale(self) -> float:
        return max(abs(self.value_min), abs(self.value_max))

    @property
    def bias_volts(self) -> float:
        """Fixed amplitude on bias rows, identical for every sample and step."""
        return self.v_full_scale


def encode_weights(weights, codec: WeightCodec):
    """Split signed weights into one-sided differential conductance targets.

    Returns ``(g_plus, g_minus, clamped)``. Magnitudes beyond ``codec.w_max``
    are clamped to the bound and flagged.
    """
    w = np.asarray(weights, dtype=float)
    clamped = np.abs(w) > codec.w_max
    g = np.clip(w, -codec.w_max, codec.w_max) * codec.g_per_w
    g_plus = np.where(g > 0, g, 0.0)
    g_minus = np.where(g < 0, -g, 0.0)
    return g_plus, g_minus, clamped


def decode_weights(g_plus, g_minus, codec: WeightCodec):
    g_plus = np.asarray(g_plus, dtype=float)
    g_minus = np.asarray(g_minus, dtype=float)
    if g_plus.shape != g_minus.shape:
        raise ValueError(f"shape mismatch: {g_plus.shape} vs {g_minus.shape}")
    return (g_plus - g_minus) / codec.g_per_w


def pair_rows(plus, minus):
    """Interleave plus/minus matrices into a ``(2n, ...)`` row-paired block."""
    plus = np.asarray(plus, dtype=float)
    out = np.empty((2 * plus.shape[0],) + plus.shape[1:])
    out[0::2] = plus
    out[1::2] = minus
    return out


def unpair_rows(block):
    block = np.asarray(block)
    if block.shape[0] % 2:
        raise ValueError("row-paired block needs an even number of rows")
    return block[0::2], block[1::2]


def values_to_voltages(x, codec: VoltageCodec, signed: bool = True):
    """Row-pair voltages ``(v_plus, v_minus)`` for input values.

    ``signed=False`` additionally rejects negative inputs (unipolar data).
    """
    x = np.asarray(x, dtype=float)
    lo = codec.value_min if signed else max(codec.value_min, 0.0)
    if x.size and (x.min() < lo or x.max() > codec.value_max):
        raise ValueError(
            f"values outside [{lo}, {codec.value_max}]: range [{x.min():.4g}, {x.max():.4g}]"
        )
    v = codec.v_full_scale * (x / codec.value_scale)
    return v, -v


def row_voltages(x, codec: VoltageCodec, n_bias: int = 0, signed: bool = True):
    """Full interleaved row-voltage vector, with bias rows appended last."""
    x = np.asarray(x, dtype=float)
    if n_bias:
        ones = np.full(x.shape[:-1] + (n_bias,), codec.value_scale)
        x = np.concatenate([x, ones], axis=-1)
    v_plus, v_minus = values_to_voltages(x, codec, signed)
    out = np.empty(x.shape[:-1] + (2 * x.shape[-1],))
    out[..., 0::2] = v_plus
    out[..., 1::2] = v_minus
    return out


def currents_to_values(i, wcodec: WeightCodec, vcodec: VoltageCodec):
    """Undo the composed weight and voltage scaling on column currents."""
    return np.asarray(i, dtype=float) / (wcodec.g_per_w * vcodec.v_full_scale)
