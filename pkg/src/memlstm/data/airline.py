"""Monthly international airline passengers, Jan 1949 - Dec 1960 (thousands)."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

BUNDLED = "airline_passengers.csv"
BUNDLED_SHA256 = "eda0181c2450975f5ad68556dcf14367541b22553f0c628b9747334cfdc6c96c"
N_TRAIN = 96


@dataclass(frozen=True)
class AirlineSeries:
    months: tuple[str, ...]
    values: np.ndarray
    n_train: int = N_TRAIN

    @property
    def train(self) -> np.ndarray:
        return self.values[: self.n_train]

    @property
    def test(self) -> np.ndarray:
        return self.values[self.n_train :]


def load_airline(source=None, n_train: int = N_TRAIN) -> AirlineSeries:
    """Load the series; the bundled copy is checked against its pinned hash."""
    if source is None:
        raw = resources.files(__package__).joinpath(BUNDLED).read_bytes()
        digest = hashlib.sha256(raw).hexdigest()
        if digest != BUNDLED_SHA256:
            raise ValueError(f"bundled airline data is corrupt (sha256 {digest})")
    else:
        raw = Path(source).read_bytes()
    rows = list(csv.DictReader(raw.decode().splitlines()))
    try:
        months = tuple(r["month"] for r in rows)
        values = np.array([float(r["passengers_thousands"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise ValueError("malformed airline data file") from exc
    if len(values) == 0 or np.any(values <= 0) or not 0 < n_train < len(values):
        raise ValueError("airline data must be positive with a non-empty train/test split")
    return AirlineSeries(months, values, n_train)


@dataclass(frozen=True)
class MinMaxScaler:
    """Affine map fitted on training data only.

    The training range ``[lo, hi]`` is stretched by ``headroom`` and sent to
    ``[out_lo, out_hi]``, so unseen values up to ``lo + headroom * (hi - lo)``
    stay inside the output interval. A constant fit maps to the midpoint.
    """

    lo: float
    hi: float
    headroom: float = 1.0
    out_lo: float = 0.0
    out_hi: float = 1.0

    @classmethod
    def fit(cls, values, headroom: float = 1.0, out_lo: float = 0.0, out_hi: float = 1.0) -> MinMaxScaler:
        values = np.asarray(values, dtype=float)
        return cls(float(values.min()), float(values.max()), headroom, out_lo, out_hi)

    @property
    def span(self) -> float:
        return (self.hi - self.lo) * self.headroom

    def transform(self, values):
        values = np.asarray(values, dtype=float)
        if self.span == 0:
            return np.full_like(values, 0.5 * (self.out_lo + self.out_hi))
        return self.out_lo + (self.out_hi - self.out_lo) * (values - self.lo) / self.span

    def inverse(self, normed):
        normed = np.asarray(normed, dtype=float)
        if self.span == 0:
            return np.full_like(normed, self.lo)
        return self.lo + (normed - self.out_lo) / (self.out_hi - self.out_lo) * self.span


def make_regression_pairs(series: AirlineSeries, headroom: float = 1.0, signed_inputs: bool = False):
    """Next-month pairs over the whole series, scaled with training statistics.

    Returns ``(inputs, targets, input_scaler, target_scaler)`` with
    ``len(values) - 1`` pairs; the first ``n_train - 1`` pairs lie entirely
    inside the training split. Targets land in ``[0, 1]`` (sigmoid read-out);
    ``signed_inputs`` sends inputs to ``[-1, 1]`` instead.
    """
    out_scaler = MinMaxScaler.fit(series.train, headroom)
    in_scaler = MinMaxScaler.fit(series.train, headroom, -1.0 if signed_inputs else 0.0, 1.0)
    return (
        in_scaler.transform(series.values[:-1]),
        out_scaler.transform(series.values[1:]),
        in_scaler,
        out_scaler,
    )


def sliding_windows(values, length: int):
    """All stride-1 windows of ``length`` consecutive values, ``(N, length)``."""
    values = np.asarray(values)
    if length > len(values):
        raise ValueError("window longer than the series")
    return np.lib.stride_tricks.sliding_window_view(values, length).copy()
