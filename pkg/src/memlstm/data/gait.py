"""Gait preprocessing and a synthetic silhouette generator.

Pipeline, per video of binary silhouettes (128 x 88 pixels):

1. :func:`width_profile` - silhouette width at each of the 128 heights
2. :func:`downsample_profile` - area-weighted rebinning to 50 values
3. :func:`detect_gait_cycles` - low-pass the per-frame total width and take
   its local minima as cycle boundaries
4. :func:`segment_sequences` - cut 25-frame windows starting at cycle starts

:func:`synth_gait_generator` renders parametric walkers and runs them
through the same pipeline, standing in for a real silhouette corpus.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

FRAME_SHAPE = (128, 88)
PROFILE_DIM = 50
SEQ_LEN = 25
N_CLASSES = 8


@dataclass(frozen=True)
class GaitSequence:
    frames: np.ndarray  # (25, 50) widths in pixels
    label: int
    video: int = -1
    start: int = 0


def width_profile(frame) -> np.ndarray:
    """Extent of the foreground in every row; 0 for empty rows."""
    frame = np.asarray(frame, dtype=bool)
    if frame.shape != FRAME_SHAPE:
        raise ValueError(f"frame must be {FRAME_SHAPE}, got {frame.shape}")
    filled = frame.any(axis=1)
    left = np.argmax(frame, axis=1)
    right = frame.shape[1] - 1 - np.argmax(frame[:, ::-1], axis=1)
    return np.where(filled, right - left + 1, 0).astype(float)


def downsample_profile(profile, n_out: int = PROFILE_DIM) -> np.ndarray:
    """Rebin a 128-vector to ``n_out`` bins, each the mean over its span.

    Input bins are treated as a piecewise-constant function; output bins
    straddling an input boundary take fractional weights from both sides.
    """
    profile = np.asarray(profile, dtype=float)
    if profile.shape != (FRAME_SHAPE[0],):
        raise ValueError(f"profile must have length {FRAME_SHAPE[0]}, got {profile.shape}")
    n_in = len(profile)
    cum = np.concatenate([[0.0], np.cumsum(profile)])
    edges = np.linspace(0.0, n_in, n_out + 1)
    integral = np.interp(edges, np.arange(n_in + 1), cum)
    return np.diff(integral) * (n_out / n_in)


def lowpass(signal, n_harmonics: int = 3) -> np.ndarray:
    """Keep the mean and the lowest ``n_harmonics`` frequencies."""
    coeffs = np.fft.rfft(signal)
    coeffs[n_harmonics + 1 :] = 0
    return np.fft.irfft(coeffs, n=len(signal))


def detect_gait_cycles(total_widths, n_harmonics: int = 3) -> np.ndarray:
    """Frame indices of the local minima of the low-passed width signal."""
    s = np.asarray(total_widths, dtype=float)
    if s.ndim != 1 or len(s) < 8:
        raise ValueError("need a 1-d signal of at least 8 frames")
    smooth = lowpass(s, n_harmonics)
    if np.ptp(smooth) <= 1e-9 * max(1.0, np.abs(smooth).max()):
        return np.array([], dtype=int)
    mid = smooth[1:-1]
    is_min = (mid < smooth[:-2]) & (mid <= smooth[2:])
    return np.flatnonzero(is_min) + 1


def segment_sequences(frames, boundaries, label: int = 0, length: int = SEQ_LEN, video: int = -1):
    """Fixed-length windows starting at frame 0 and at every boundary.

    Windows that would run past the last frame are dropped.
    """
    frames = np.asarray(frames)
    starts = sorted({0, *(int(b) for b in boundaries)})
    return [
        GaitSequence(frames[s : s + length], label, video, s)
        for s in starts
        if s >= 0 and s + length <= len(frames)
    ]


# -- synthetic walkers -----------------------------------------------------------


@dataclass(frozen=True)
class WalkerParams:
    height: float  # pixels from crown to sole
    head: float  # head height, pixels
    head_width: float
    torso_width: float
    leg_frac: float  # share of height below the hip
    leg_width: float
    stride: float  # maximum foot separation, pixels
    arm_swing: float  # horizontal arm reach at full swing, pixels
    period: float  # frames per cycle of the width signal
    skew: float  # asymmetry of the swing profile

    @classmethod
    def draw(cls, rng: np.random.Generator) -> WalkerParams:
        return cls(
            height=rng.uniform(100, 122),
            head=rng.uniform(12, 18),
            head_width=rng.uniform(9, 15),
            torso_width=rng.uniform(14, 24),
            leg_frac=rng.uniform(0.44, 0.54),
            leg_width=rng.uniform(5, 9),
            stride=rng.uniform(14, 34),
            arm_swing=rng.uniform(2, 10),
            period=rng.uniform(30, 40),
            skew=rng.uniform(-0.6, 0.6),
        )


@dataclass(frozen=True)
class Covariates:
    """Per-video nuisance settings: shoe type, surface and viewpoint."""

    shoe: int
    surface: int
    view: int


def render_walker(p: WalkerParams, cov: Covariates, t, rng: np.random.Generator, phase0=0.0, x0=44.0):
    """Render one binary silhouette at time ``t`` (frames)."""
    rows, cols = FRAME_SHAPE
    scale = 1.0 if cov.view == 0 else 0.93
    period = p.period * (1.0 if cov.shoe == 0 else 1.05)
    stride = p.stride * (1.0 if cov.shoe == 0 else 0.92)
    phi = 2 * np.pi * t / period + phase0
    swing = 0.5 - 0.5 * np.cos(phi + p.skew * np.sin(phi))
    bounce = (1.5 if cov.surface == 1 else 0.5) * np.cos(2 * phi)

    height = p.height * scale
    top = rows - 2 - height + bounce
    head_end = top + p.head * scale
    hip = rows - 2 - height * p.leg_frac
    y = np.arange(rows) + 0.5

    half = np.zeros(rows)
    head = (y >= top) & (y < head_end)
    u = (y[head] - top) / (p.head * scale)
    half[head] = 0.5 * p.head_width * scale * np.sqrt(np.clip(1 - (2 * u - 1) ** 2, 0.15, 1))
    torso = (y >= head_end) & (y < hip)
    half[torso] = 0.5 * p.torso_width * scale
    arms = torso & (y < head_end + 0.6 * (hip - head_end))
    reach = np.clip((y - head_end) / (0.6 * (hip - head_end) + 1e-9), 0, 1)
    left = x0 - half
    right = x0 + half
    arm_ext = p.arm_swing * scale * swing * reach
    right = np.where(arms, right + arm_ext, right)
    left = np.where(arms, left - 0.5 * arm_ext, left)

    legs = (y >= hip) & (y <= rows - 2 + bounce)
    depth = np.clip((y - hip) / (rows - 2 - hip), 0, 1)
    sep = 0.5 * stride * scale * swing * depth
    lw = 0.5 * p.leg_width * scale
    left = np.where(legs, x0 - sep - lw, left)
    right = np.where(legs, x0 + sep + lw, right)
    body = head | torso | legs

    jitter = rng.integers(-1, 2, size=(2, rows)) * (rng.random((2, rows)) < 0.15)
    lo = np.clip(np.round(left) + jitter[0], 0, cols - 1)
    hi = np.clip(np.round(right) + jitter[1], 0, cols - 1)
    c = np.arange(cols)
    frame = body[:, None] & (c >= lo[:, None]) & (c <= hi[:, None])
    if cov.view == 1:
        frame = frame[:, ::-1]
    return frame


def video_features(frames):
    """Downsampled width profiles and per-frame total width for a video."""
    profiles = np.array([width_profile(f) for f in frames])
    feats = np.array([downsample_profile(p) for p in profiles])
    return feats, profiles.sum(axis=1)


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature min-max map onto ``[-1, 1]`` fitted on training sequences.

    Unseen values are clipped so row voltages never leave full scale.
    """

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, x) -> FeatureScaler:
        x = np.asarray(x, dtype=float).reshape(-1, np.shape(x)[-1])
        return cls(x.min(axis=0), x.max(axis=0))

    def transform(self, x):
        span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        return np.clip(2.0 * (np.asarray(x, dtype=float) - self.lo) / span - 1.0, -1.0, 1.0)


@dataclass
class GaitDataset:
    train: list[GaitSequence]
    test: list[GaitSequence]
    n_classes: int = N_CLASSES

    @staticmethod
    def arrays(seqs, scale: float = 1.0 / FRAME_SHAPE[1]):
        """``(N, 25, 50)`` features scaled to ``[0, 1]`` and ``(N,)`` labels."""
        x = np.array([s.frames for s in seqs]) * scale
        y = np.array([s.label for s in seqs], dtype=int)
        return x, y

    def save(self, path):
        """One line per sequence: split, label, then 25 x 50 values."""
        with open(path, "w") as fh:
            for split, seqs in (("train", self.train), ("test", self.test)):
                for s in seqs:
                    vals = " ".join(f"{v:.17g}" for v in s.frames.ravel())
                    fh.write(f"{split} {s.label} {vals}\n")

    @classmethod
    def load(cls, path, n_classes: int = N_CLASSES) -> GaitDataset:
        out = cls([], [], n_classes)
        for line in Path(path).read_text().splitlines():
            split, label, *vals = line.split()
            frames = np.array([float(v) for v in vals]).reshape(SEQ_LEN, PROFILE_DIM)
            getattr(out, split).append(GaitSequence(frames, int(label)))
        return out


def synth_gait_generator(
    seed: int = 0,
    n_classes: int = N_CLASSES,
    n_sequences: int = 664,
    test_fraction: float = 0.1,
    n_harmonics: int = 3,
) -> GaitDataset:
    """Labelled 25 x 50 sequences from rendered walkers, split per class."""
    if n_classes < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(seed)
    walkers = [WalkerParams.draw(rng) for _ in range(n_classes)]
    per_class = [n_sequences // n_classes + (k < n_sequences % n_classes) for k in range(n_classes)]
    combos = [Covariates(s, g, v) for s in (0, 1) for g in (0, 1) for v in (0, 1)]

    train, test = [], []
    video = 0
    for label, (walker, want) in enumerate(zip(walkers, per_class)):
        seqs = []
        while len(seqs) < want:
            cov = combos[video % len(combos)]
            n_frames = int(rng.integers(60, 91))
            phase0 = rng.uniform(0, 2 * np.pi)
            x0 = rng.uniform(34, 54)
            frames = [render_walker(walker, cov, t, rng, phase0, x0) for t in range(n_frames)]
            feats, totals = video_features(frames)
            bounds = detect_gait_cycles(totals, n_harmonics)
            seqs += segment_sequences(feats, bounds, label, video=video)
            video += 1
        seqs = seqs[:want]
        order = rng.permutation(len(seqs))
        n_test = int(round(test_fraction * len(seqs)))
        test += [seqs[i] for i in order[:n_test]]
        train += [seqs[i] for i in order[n_test:]]
    return GaitDataset(train, test, n_classes)
