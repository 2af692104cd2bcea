"""Radius-thresholded proximity graphs and the GCN shift operator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError

EARTH_RADIUS_KM = 6371.0
METRICS = ("euclidean", "haversine-km")


@dataclass(frozen=True)
class PointSet:
    """Node locations.

    For ``metric="haversine-km"`` the columns are (longitude, latitude) in degrees.
    """

    coords: np.ndarray
    metric: str = "euclidean"

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64)
        if c.ndim != 2:
            raise ShapeError(f"coords must be N x d, got shape {c.shape}")
        if self.metric not in METRICS:
            raise DomainError(f"unknown metric {self.metric!r}")
        if not np.all(np.isfinite(c)):
            raise DomainError("coordinates must be finite")
        if self.metric == "haversine-km":
            if c.shape[1] != 2:
                raise ShapeError("haversine points need (lon, lat) columns")
            lon, lat = c[:, 0], c[:, 1]
            if np.any(np.abs(lon) > 180) or np.any(np.abs(lat) > 90):
                raise DomainError("longitude must lie in [-180, 180], latitude in [-90, 90]")
        object.__setattr__(self, "coords", c)

    def __len__(self):
        return self.coords.shape[0]


@dataclass(frozen=True)
class ProximityGraph:
    node_count: int
    radius: float
    edges: tuple[tuple[int, int], ...]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count))
        if self.edges:
            i, j = np.array(self.edges).T
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a

    def laplacian(self) -> np.ndarray:
        a = self.adjacency()
        return np.diag(a.sum(axis=1)) - a

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def pairwise_distance(points: PointSet) -> np.ndarray:
    c = points.coords
    if points.metric == "euclidean":
        diff = c[:, None, :] - c[None, :, :]
        d = np.sqrt(np.sum(diff * diff, axis=-1))
    else:
        lon = np.radians(c[:, 0])
        lat = np.radians(c[:, 1])
        dlat = lat[None, :] - lat[:, None]
        dlon = lon[None, :] - lon[:, None]
        h = np.sin(dlat / 2) ** 2 + np.cos(lat[:, None]) * np.cos(lat[None, :]) * np.sin(dlon / 2) ** 2
        d = 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))
    # exact symmetry regardless of rounding in the two directions
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return d


def build_proximity_graph(points: PointSet, radius: float) -> ProximityGraph:
    """Connect every pair of distinct nodes at distance ``<= radius``."""
    if not radius >= 0:
        raise DomainError(f"radius must be >= 0, got {radius}")
    d = pairwise_distance(points)
    i, j = np.nonzero(np.triu(d <= radius, k=1))
    edges = tuple(zip(i.tolist(), j.tolist()))
    return ProximityGraph(len(points), float(radius), edges)


def gcn_shift(graph: ProximityGraph) -> np.ndarray:
    """Renormalized adjacency ``D~^-1/2 (A + I) D~^-1/2``; the identity for an edgeless graph."""
    a_tilde = graph.adjacency() + np.eye(graph.node_count)
    d = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return d[:, None] * a_tilde * d[None, :]


def apply_shift(shift: np.ndarray, x: np.ndarray) -> np.ndarray:
    shift = np.asarray(shift)
    x = np.asarray(x)
    if shift.ndim != 2 or shift.shape[1] != x.shape[0]:
        raise ShapeError(f"cannot apply shift {shift.shape} to features {x.shape}")
    return shift @ x
