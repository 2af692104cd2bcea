"""Summary-statistic node features, the ablation counterpart of signatures.

Per channel, in this order:

    mean, std (ddof=1), min, max, median, skewness, excess kurtosis,
    autocorrelation at lags 1, 5, 10, mean crossings, linear trend slope,
    energy (mean of squares)

Channel blocks are concatenated, so a stream with ``n`` channels yields
``13 * n`` features. Skewness and kurtosis are plain (biased) moment ratios.
Zero-variance channels report 0 for skewness, kurtosis and every
autocorrelation. Autocorrelations at lags not shorter than the stream are 0.
The slope is fitted against the sample index.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, ShapeError
from .signature import Stream

STAT_NAMES = (
    "mean", "std", "min", "max", "median", "skewness", "kurtosis",
    "acf_lag1", "acf_lag5", "acf_lag10", "mean_crossings", "slope", "energy",
)
ACF_LAGS = (1, 5, 10)


def _channel_stats(x: np.ndarray) -> list[float]:
    m = x.size
    mean = x.mean()
    dev = x - mean
    m2 = np.mean(dev * dev)
    if m2 > 0:
        skew = np.mean(dev**3) / m2**1.5
        kurt = np.mean(dev**4) / m2**2 - 3.0
        denom = np.sum(dev * dev)
        acf = [float(np.sum(dev[:-k] * dev[k:]) / denom) if k < m else 0.0 for k in ACF_LAGS]
    else:
        skew = kurt = 0.0
        acf = [0.0] * len(ACF_LAGS)
    above = x > mean
    crossings = int(np.count_nonzero(above[1:] != above[:-1]))
    idx = np.arange(m, dtype=np.float64)
    ic = idx - idx.mean()
    slope = float(np.sum(ic * dev) / np.sum(ic * ic))
    return [
        float(mean), float(np.std(x, ddof=1)), float(x.min()), float(x.max()),
        float(np.median(x)), float(skew), float(kurt), *acf,
        float(crossings), slope, float(np.mean(x * x)),
    ]


def summary_features(stream: Stream) -> np.ndarray:
    if stream.length < 2:
        raise InsufficientDataError(
            f"summary statistics need at least 2 samples, stream has {stream.length}"
        )
    return np.array([s for c in stream.values.T for s in _channel_stats(c)])


def spatio_temporal_summary(streams: Sequence[Stream]) -> np.ndarray:
    """Row ``i`` is :func:`summary_features` of node ``i``."""
    if len(streams) == 0:
        raise ShapeError("no streams given")
    channels = {s.channels for s in streams}
    if len(channels) != 1:
        raise ShapeError(f"streams disagree on channel count: {sorted(channels)}")
    return np.vstack([summary_features(s) for s in streams])


def feature_names(channels: int) -> list[str]:
    return [f"ch{c}_{name}" for c in range(channels) for name in STAT_NAMES]
