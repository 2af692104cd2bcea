"""Truncated path signatures of piecewise-linear streams.

Coefficients are stored dense and graded-lexicographic: every length-1 word in
lexicographic order, then every length-2 word, and so on up to the truncation
depth. The empty word (always 1) is implicit. Within one level the layout is
the C-order ravel of the level tensor, so ``np.outer(a, b).ravel()`` is the
level of the concatenated words and Chen products need no index bookkeeping.

Internally signatures are handled as lists of level arrays with arbitrary
leading batch axes, shape ``(..., n**k)`` for level ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, InsufficientDataError, ShapeError

# Segments folded per vectorized tree reduction before the sequential pass.
_BLOCK = 256


def signature_length(dim: int, depth: int) -> int:
    """Number of stored coefficients, ``n + n**2 + ... + n**p``."""
    if dim < 1 or depth < 1:
        raise ValueError("dim and depth must be >= 1")
    return sum(dim**k for k in range(1, depth + 1))


def _level_offsets(dim: int, depth: int) -> list[int]:
    offsets = [0]
    for k in range(1, depth + 1):
        offsets.append(offsets[-1] + dim**k)
    return offsets


def word_index(word: Sequence[int], dim: int, depth: int) -> int:
    """Offset of a word into the flat coefficient vector.

    Letters are 1-based channel indices, e.g. ``(2, 1)`` is ``e_2 (x) e_1``.
    """
    k = len(word)
    if not 1 <= k <= depth:
        raise IndexError(f"word length {k} outside 1..{depth}")
    offset = sum(dim**j for j in range(1, k))
    pos = 0
    for letter in word:
        if not 1 <= letter <= dim:
            raise IndexError(f"letter {letter} outside 1..{dim}")
        pos = pos * dim + (letter - 1)
    return offset + pos


def index_word(offset: int, dim: int, depth: int) -> tuple[int, ...]:
    """Inverse of :func:`word_index`."""
    if not 0 <= offset < signature_length(dim, depth):
        raise IndexError(f"offset {offset} out of range")
    k = 1
    while offset >= dim**k:
        offset -= dim**k
        k += 1
    letters = []
    for _ in range(k):
        offset, r = divmod(offset, dim)
        letters.append(r + 1)
    return tuple(reversed(letters))


@dataclass(frozen=True)
class Stream:
    """Timestamped multichannel samples at one node.

    Args:
        timestamps: strictly increasing times, shape ``(m,)``.
        values: samples, shape ``(m, n)``; a 1-D array is read as one channel.
    """

    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.float64)
        x = np.asarray(self.values, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if t.ndim != 1 or x.ndim != 2 or x.shape[0] != t.shape[0]:
            raise ShapeError(
                f"timestamps {t.shape} and values {x.shape} are inconsistent"
            )
        if x.shape[1] < 1:
            raise ShapeError("stream needs at least one channel")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
            raise DataError("stream contains non-finite entries")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise DataError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "values", x)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    def augmented(self) -> "Stream":
        """Same stream with time prepended as channel 0."""
        return Stream(self.timestamps, np.column_stack([self.timestamps, self.values]))

    def path(self, augment_time: bool = False) -> np.ndarray:
        if augment_time:
            return np.column_stack([self.timestamps, self.values])
        return self.values


@dataclass(frozen=True)
class TruncatedSignature:
    """Signature coefficients of words of length 1..depth over ``dim`` letters."""

    dim: int
    depth: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (signature_length(self.dim, self.depth),):
            raise ShapeError(
                f"expected {signature_length(self.dim, self.depth)} coefficients, got {c.shape}"
            )
        object.__setattr__(self, "coeffs", c)

    def __getitem__(self, word: Sequence[int]) -> float:
        return float(self.coeffs[word_index(tuple(word), self.dim, self.depth)])

    def level(self, k: int) -> np.ndarray:
        """Level-``k`` coefficients as an ``n x ... x n`` tensor."""
        off = _level_offsets(self.dim, self.depth)
        return self.coeffs[off[k - 1] : off[k]].reshape((self.dim,) * k)

    def levels(self) -> list[np.ndarray]:
        return _split_levels(self.coeffs, self.dim, self.depth)

    @classmethod
    def zeros(cls, dim: int, depth: int) -> "TruncatedSignature":
        """Signature of the constant path (the tensor-algebra identity)."""
        return cls(dim, depth, np.zeros(signature_length(dim, depth)))


def _split_levels(flat: np.ndarray, dim: int, depth: int) -> list[np.ndarray]:
    off = _level_offsets(dim, depth)
    return [flat[..., off[k] : off[k + 1]] for k in range(depth)]


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a[..., :, None] * b[..., None, :]).reshape(*a.shape[:-1], -1)


def _segment_levels(delta: np.ndarray, depth: int) -> list[np.ndarray]:
    levels = [delta]
    for k in range(2, depth + 1):
        levels.append(_outer(levels[-1], delta) / k)
    return levels


def _chen_levels(a: list[np.ndarray], b: list[np.ndarray]) -> list[np.ndarray]:
    depth = len(a)
    out = []
    for k in range(1, depth + 1):
        c = a[k - 1] + b[k - 1]
        for i in range(1, k):
            c = c + _outer(a[i - 1], b[k - i - 1])
        out.append(c)
    return out


def _tree_reduce(levels: list[np.ndarray]) -> list[np.ndarray]:
    """Chen-multiply along axis -2 in order, pairwise, until one element is left."""
    while levels[0].shape[-2] > 1:
        s = levels[0].shape[-2]
        even = s - (s % 2)
        left = [lv[..., 0:even:2, :] for lv in levels]
        right = [lv[..., 1:even:2, :] for lv in levels]
        merged = _chen_levels(left, right)
        if s % 2:
            merged = [
                np.concatenate([m, lv[..., even:, :]], axis=-2)
                for m, lv in zip(merged, levels)
            ]
        levels = merged
    return [lv[..., 0, :] for lv in levels]


def _increments_signature(increments: np.ndarray, depth: int) -> np.ndarray:
    """Signature of the polyline with the given increments, shape ``(..., s, n)``.

    Returns the flat graded coefficients, shape ``(..., F)``. Segments are
    tree-reduced within blocks, then the block results are folded left.
    """
    s = increments.shape[-2]
    n = increments.shape[-1]
    batch = increments.shape[:-2]
    acc = [np.zeros(batch + (n**k,)) for k in range(1, depth + 1)]
    for start in range(0, s, _BLOCK):
        block = _segment_levels(increments[..., start : start + _BLOCK, :], depth)
        acc = _chen_levels(acc, _tree_reduce(block))
    return np.concatenate(acc, axis=-1)


def segment_signature(displacement, depth: int) -> TruncatedSignature:
    """Signature of a single straight segment: word coefficient ``prod(delta_i) / k!``."""
    delta = np.atleast_1d(np.asarray(displacement, dtype=np.float64))
    if delta.ndim != 1:
        raise ShapeError("displacement must be a vector")
    if not np.all(np.isfinite(delta)):
        raise DataError("displacement must be finite")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return TruncatedSignature(
        delta.size, depth, np.concatenate(_segment_levels(delta, depth))
    )


def chen_product(a: TruncatedSignature, b: TruncatedSignature) -> TruncatedSignature:
    """Truncated tensor product; the signature of the concatenated path."""
    if a.dim != b.dim or a.depth != b.depth:
        raise ShapeError(
            f"cannot multiply (dim={a.dim}, depth={a.depth}) by (dim={b.dim}, depth={b.depth})"
        )
    levels = _chen_levels(a.levels(), b.levels())
    return TruncatedSignature(a.dim, a.depth, np.concatenate(levels))


def signature(stream: Stream, depth: int, augment_time: bool = False) -> TruncatedSignature:
    """Truncated signature of the linear interpolation of ``stream``."""
    if stream.length < 2:
        raise InsufficientDataError(
            f"signature needs at least 2 samples, stream has {stream.length}"
        )
    if depth < 1:
        raise ValueError("depth must be >= 1")
    path = stream.path(augment_time)
    coeffs = _increments_signature(np.diff(path, axis=0), depth)
    return TruncatedSignature(path.shape[1], depth, coeffs)


def spatio_temporal_signature(
    streams: Sequence[Stream], depth: int, augment_time: bool = False
) -> np.ndarray:
    """Stack per-node signatures into an ``N x F`` matrix (row ``i`` = node ``i``).

    Streams may have different lengths; shorter ones are padded with zero
    increments, which are the identity under the Chen product.
    """
    if len(streams) == 0:
        raise ShapeError("no streams given")
    channels = {s.channels for s in streams}
    if len(channels) != 1:
        raise ShapeError(f"streams disagree on channel count: {sorted(channels)}")
    for i, s in enumerate(streams):
        if s.length < 2:
            raise InsufficientDataError(f"node {i} has {s.length} sample(s), need 2")
    n = channels.pop() + (1 if augment_time else 0)
    longest = max(s.length for s in streams) - 1
    inc = np.zeros((len(streams), longest, n))
    for i, s in enumerate(streams):
        d = np.diff(s.path(augment_time), axis=0)
        inc[i, : d.shape[0]] = d
    return _increments_signature(inc, depth)


def path_signature_matrix(paths: np.ndarray, depth: int) -> np.ndarray:
    """Signatures of equal-length paths given as one array ``(N, m, n)``."""
    paths = np.asarray(paths, dtype=np.float64)
    if paths.ndim != 3 or paths.shape[1] < 2:
        raise ShapeError("paths must have shape (N, m >= 2, n)")
    return _increments_signature(np.diff(paths, axis=1), depth)
