"""Node featurization shared by the experiment runners and the CLI."""

from __future__ import annotations

import numpy as np

from .baselines import spatio_temporal_summary
from .signature import Stream, path_signature_matrix, spatio_temporal_signature

FEATURIZERS = ("signature", "summary")


def standardize_columns(x: np.ndarray) -> np.ndarray:
    """Z-score every column over all nodes; constant columns become 0."""
    x = np.asarray(x, dtype=np.float64)
    sd = x.std(axis=0)
    out = (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    out[:, sd == 0] = 0.0
    return out


def standardize_streams(streams: list[Stream]) -> list[Stream]:
    """Divide each channel by its pooled spread across all streams.

    The spread is the standard deviation of ``values - values[0]`` pooled over
    every stream, so station offsets do not inflate it.
    """
    rel = np.vstack([s.values - s.values[0] for s in streams])
    sd = rel.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return [Stream(s.timestamps, s.values / sd) for s in streams]


def node_features(streams, featurizer="signature", depth=4, augment_time=False,
                  standardize_paths=False, scale_columns=True) -> np.ndarray:
    """``N x F`` node features from one stream per node."""
    if featurizer not in FEATURIZERS:
        raise ValueError(f"unknown featurizer {featurizer!r}")
    if standardize_paths:
        streams = standardize_streams(streams)
    if featurizer == "signature":
        x = spatio_temporal_signature(streams, depth, augment_time)
    else:
        x = spatio_temporal_summary(streams)
    return standardize_columns(x) if scale_columns else x


def trajectory_features(traj, featurizer="signature", depth=4, augment_time=False,
                        scale_columns=True) -> np.ndarray:
    """Node features of simulated ``(u_i, v_i)`` paths."""
    if featurizer == "signature":
        paths = traj.paths()
        if augment_time:
            t = np.broadcast_to(traj.times[None, :, None], paths.shape[:2] + (1,))
            paths = np.concatenate([t, paths], axis=-1)
        x = path_signature_matrix(paths, depth)
        return standardize_columns(x) if scale_columns else x
    streams = [Stream(traj.times, p) for p in traj.paths()]
    return node_features(streams, featurizer, depth, augment_time, False, scale_columns)
