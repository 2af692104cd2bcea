"""GPS-style dataset ingestion, export and a synthetic stand-in generator.

On-disk layout (one directory per dataset)::

    stations.csv         station_id,lon,lat
    streams/<id>.csv     date,east_mm,north_mm,up_mm   (ISO-8601 days)
    labels.csv           station_id,label              (linear | nonlinear)

Stream times are converted to days since the earliest date in the dataset.
Stations missing from ``labels.csv`` are unlabeled.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .signature import Stream

log = logging.getLogger(__name__)

LABELS = {"linear": 0, "nonlinear": 1}
LABEL_NAMES = {v: k for k, v in LABELS.items()}
STREAM_HEADER = ["date", "east_mm", "north_mm", "up_mm"]


class ReferenceDataError(DataError):
    """A file refers to a station that does not exist."""


@dataclass
class GeoDataset:
    station_ids: list[str]
    coords: np.ndarray  # (N, 2) lon, lat in degrees
    streams: list[Stream]
    labels: dict[str, int] = field(default_factory=dict)
    epoch: dt.date = dt.date(2000, 1, 1)

    @property
    def node_count(self) -> int:
        return len(self.station_ids)

    def labeled_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Node indices carrying a label, and their labels."""
        idx = [i for i, s in enumerate(self.station_ids) if s in self.labels]
        return np.array(idx, dtype=int), np.array([self.labels[self.station_ids[i]] for i in idx], dtype=int)


def _read_csv(path: Path, header: list[str]):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        return []
    if [h.strip() for h in rows[0]] != header:
        raise DataError(f"{path}:1: expected header {','.join(header)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        out.append((lineno, [c.strip() for c in row]))
    return out


def _parse_float(text, path, lineno):
    try:
        x = float(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: not a number: {text!r}") from None
    if not math.isfinite(x):
        raise DataError(f"{path}:{lineno}: non-finite value {text!r}")
    return x


def read_stations(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    ids, coords = [], []
    for lineno, (sid, lon, lat) in _read_csv(path, ["station_id", "lon", "lat"]):
        if not sid:
            raise DataError(f"{path}:{lineno}: empty station_id")
        if sid in ids:
            raise DataError(f"{path}:{lineno}: duplicate station_id {sid!r}")
        lo, la = _parse_float(lon, path, lineno), _parse_float(lat, path, lineno)
        if not (-180 <= lo <= 180 and -90 <= la <= 90):
            raise DataError(f"{path}:{lineno}: coordinates out of range")
        ids.append(sid)
        coords.append((lo, la))
    return ids, np.array(coords, dtype=np.float64).reshape(-1, 2)


def read_stream(path) -> tuple[list[dt.date], np.ndarray]:
    path = Path(path)
    dates, vals = [], []
    for lineno, row in _read_csv(path, STREAM_HEADER):
        try:
            d = dt.date.fromisoformat(row[0])
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad date {row[0]!r}") from None
        if dates and d <= dates[-1]:
            raise DataError(f"{path}:{lineno}: dates must be strictly increasing")
        dates.append(d)
        vals.append([_parse_float(x, path, lineno) for x in row[1:]])
    return dates, np.array(vals, dtype=np.float64).reshape(-1, 3)


def read_labels(path, known_ids) -> dict[str, int]:
    path = Path(path)
    known = set(known_ids)
    labels = {}
    for lineno, (sid, lab) in _read_csv(path, ["station_id", "label"]):
        if sid not in known:
            raise ReferenceDataError(f"{path}:{lineno}: unknown station {sid!r}")
        if lab not in LABELS:
            raise DataError(f"{path}:{lineno}: label must be linear or nonlinear, got {lab!r}")
        if sid in labels:
            raise DataError(f"{path}:{lineno}: duplicate label for {sid!r}")
        labels[sid] = LABELS[lab]
    return labels


def ingest(stations_file, streams_dir, labels_file=None) -> GeoDataset:
    """Load and validate a dataset; stations with fewer than 2 readings are dropped."""
    ids, coords = read_stations(stations_file)
    streams_dir = Path(streams_dir)
    if not streams_dir.is_dir():
        raise DataError(f"{streams_dir} is not a directory")
    files = {p.stem: p for p in sorted(streams_dir.glob("*.csv"))}
    unknown = sorted(set(files) - set(ids))
    if unknown:
        raise ReferenceDataError(f"{streams_dir}: stream files without a station: {unknown}")
    raw = {sid: read_stream(files[sid]) if sid in files else ([], np.zeros((0, 3))) for sid in ids}
    labels = read_labels(labels_file, ids) if labels_file is not None and Path(labels_file).exists() else {}

    keep = []
    for i, sid in enumerate(ids):
        if len(raw[sid][0]) < 2:
            log.warning("dropping station %s: %d reading(s), need 2", sid, len(raw[sid][0]))
            labels.pop(sid, None)
        else:
            keep.append(i)
    if not keep:
        raise DataError("no station has at least 2 readings")
    epoch = min(raw[ids[i]][0][0] for i in keep)
    streams = []
    for i in keep:
        dates, vals = raw[ids[i]]
        t = np.array([(d - epoch).days for d in dates], dtype=np.float64)
        streams.append(Stream(t, vals))
    return GeoDataset([ids[i] for i in keep], coords[keep], streams, labels, epoch)


def ingest_dir(directory) -> GeoDataset:
    d = Path(directory)
    return ingest(d / "stations.csv", d / "streams", d / "labels.csv")


def export_dataset(ds: GeoDataset, directory) -> Path:
    """Write ``ds`` in the layout read by :func:`ingest_dir`."""
    d = Path(directory)
    (d / "streams").mkdir(parents=True, exist_ok=True)
    with open(d / "stations.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["station_id", "lon", "lat"])
        for sid, (lon, lat) in zip(ds.station_ids, ds.coords):
            w.writerow([sid, repr(float(lon)), repr(float(lat))])
    for sid, s in zip(ds.station_ids, ds.streams):
        with open(d / "streams" / f"{sid}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(STREAM_HEADER)
            for t, row in zip(s.timestamps, s.values):
                day = ds.epoch + dt.timedelta(days=int(t))
                w.writerow([day.isoformat(), *(repr(float(x)) for x in row)])
    with open(d / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["station_id", "label"])
        for sid in ds.station_ids:
            if sid in ds.labels:
                w.writerow([sid, LABEL_NAMES[ds.labels[sid]]])
    return d


def synthetic_geonet(
    n_stations: int = 80,
    n_labeled: int = 64,
    seed: int = 0,
    interaction_km: float = 40.0,
    n_sources: int = 6,
    days: int = 720,
    signal: float = 2.0,
    outage_rate: float = 0.05,
    extent_km: float = 250.0,
) -> GeoDataset:
    """A GPS-like dataset with spatially planted labels.

    A station is ``nonlinear`` when it lies within ``interaction_km`` of one
    of ``n_sources`` random source points, so labels are a smooth function of
    position. Every station records a drifting random walk in (east, north,
    up); nonlinear stations additionally trace episodic elliptical loops in
    the horizontal plane whose amplitude, relative to the noise, is set by
    ``signal``. The per-station evidence is weak by design, so a model that
    ignores the graph stays well short of what neighbourhood pooling reaches.
    """
    rng = np.random.default_rng(seed)
    lon0, lat0 = 177.5, -38.5
    km_lat = 111.195
    km_lon = km_lat * math.cos(math.radians(lat0))
    xy = rng.uniform(-extent_km / 2, extent_km / 2, size=(n_stations, 2))
    src = rng.uniform(-extent_km / 2, extent_km / 2, size=(n_sources, 2))
    dist = np.sqrt(((xy[:, None, :] - src[None, :, :]) ** 2).sum(-1)).min(axis=1)
    truth = (dist <= interaction_km).astype(int)
    coords = np.column_stack([lon0 + xy[:, 0] / km_lon, lat0 + xy[:, 1] / km_lat])

    t_full = np.arange(days, dtype=np.float64)
    streams = []
    for i in range(n_stations):
        drift = rng.normal(0.0, 0.01, size=3)
        steps = rng.normal(0.0, 1.0, size=(days, 3))
        vals = np.cumsum(steps, axis=0) + drift * t_full[:, None]
        if truth[i]:
            period = rng.uniform(60, 120)
            phase = rng.uniform(0, 2 * np.pi)
            env = np.clip(np.sin(2 * np.pi * t_full / (3 * period) + phase), 0, None)
            amp = signal * 4.0
            vals[:, 0] += amp * env * np.cos(2 * np.pi * t_full / period)
            vals[:, 1] += amp * env * np.sin(2 * np.pi * t_full / period)
        keep = rng.uniform(size=days) >= outage_rate
        keep[[0, -1]] = True
        streams.append(Stream(t_full[keep], vals[keep]))

    ids = [f"S{i:03d}" for i in range(n_stations)]
    labeled = np.sort(rng.choice(n_stations, size=min(n_labeled, n_stations), replace=False))
    labels = {ids[i]: int(truth[i]) for i in labeled}
    return GeoDataset(ids, coords, streams, labels, dt.date(2015, 1, 1))
