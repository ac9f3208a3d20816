"""Datasets and preprocessing for the regression and gait experiments."""

from .airline import AirlineSeries, MinMaxScaler, load_airline, make_regression_pairs, sliding_windows
from .gait import (
    FRAME_SHAPE,
    FeatureScaler,
    GaitDataset,
    GaitSequence,
    detect_gait_cycles,
    downsample_profile,
    segment_sequences,
    synth_gait_generator,
    width_profile,
)

__all__ = [
    "AirlineSeries",
    "FRAME_SHAPE",
    "FeatureScaler",
    "GaitDataset",
    "GaitSequence",
    "MinMaxScaler",
    "detect_gait_cycles",
    "downsample_profile",
    "load_airline",
    "make_regression_pairs",
    "sliding_windows",
    "segment_sequences",
    "synth_gait_generator",
    "width_profile",
]
