"""Experiment runners: diffusivity sweep, radius sweep, featurizer ablation.

Every random draw is seeded by :func:`derive_seed` from the master seed and
the coordinates of the cell it belongs to, e.g. ``("init", model, D, trial,
fold)``. Running a subset of a sweep therefore reproduces the matching rows of
the full sweep exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gcnn
from .config import ExperimentConfig
from .data import GeoDataset
from .errors import DataError, DivergenceError
from .features import node_features, trajectory_features
from .proximity import PointSet, build_proximity_graph, gcn_shift
from .reaction_diffusion import PARAM_RANGE, SimConfig, sample_parameters, simulate

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REGRESSION_METRICS = ("mse", "mae")
CLASSIFICATION_METRICS = ("accuracy", "precision", "recall", "f1")


def derive_seed(master: int, *coords) -> int:
    """64-bit seed: BLAKE2b-8 of ``repr`` of the master seed and coordinates joined by ``|``."""
    key = "|".join(repr(c) for c in (int(master), *coords)).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


@dataclass
class ExperimentResult:
    tag: str
    config: dict
    records: list[dict]
    x_key: str
    metrics: tuple[str, ...]
    notes: dict = field(default_factory=dict)

    def aggregates(self) -> list[dict]:
        """Mean and population std over all (trial, fold) records per x value."""
        groups: dict = {}
        for r in self.records:
            groups.setdefault(r[self.x_key], []).append(r)
        out = []
        for x in sorted(groups, key=_sort_key):
            for m in self.metrics:
                vals = np.array([r[m] for r in groups[x]], dtype=np.float64)
                out.append({"x": x, "metric": m, "mean": float(vals.mean()), "std": float(vals.std())})
        return out

    def summary(self, metric: str) -> dict:
        return {a["x"]: (a["mean"], a["std"]) for a in self.aggregates() if a["metric"] == metric}


def _sort_key(x):
    return (0, x, "") if isinstance(x, (int, float)) else (1, 0.0, str(x))


def _record_key(r):
    return tuple(_sort_key(r[k]) for k in sorted(r) if k in ("arm", "model", "D", "rho", "trial", "fold"))


# simulated regression -------------------------------------------------------

def simulate_cell(cfg: ExperimentConfig, model: str, diffusivity: float, trial: int):
    """Points, graph, parameters and trajectory for one (model, D, trial) cell.

    A divergent simulation is redrawn with the next retry seed.

    Returns:
        ``(graph, trajectory, retries)``
    """
    for retry in range(cfg.max_retries + 1):
        base = derive_seed(cfg.seed, "sim", model, float(diffusivity), trial, retry)
        pts = np.random.default_rng(derive_seed(base, "points")).uniform(size=(cfg.nodes, 2))
        graph = build_proximity_graph(PointSet(pts), cfg.radius)
        params = sample_parameters(model, cfg.nodes, derive_seed(base, "params"))
        sim = SimConfig(
            dt=cfg.dt,
            horizon=cfg.horizon,
            diffusivity=(diffusivity, diffusivity),
            noise=(cfg.noise, cfg.noise),
            seed=derive_seed(base, "dynamics"),
            nonnegative=cfg.lv_nonnegative and model == "LV",
        )
        try:
            traj = simulate(graph, params, sim)
        except DivergenceError as exc:
            log.warning("%s D=%g trial %d retry %d diverged at step %s", model, diffusivity, trial, retry, exc.step)
            continue
        traj.meta["points"] = pts
        return graph, traj, retry
    raise DivergenceError(
        f"{model} D={diffusivity} trial {trial}: all {cfg.max_retries + 1} simulations diverged"
    )


def regression_folds(cfg: ExperimentConfig, shift, x, params, split_seed, init_coords):
    """Train and score one regressor per fold. Returns a list of metric dicts."""
    lo, hi = PARAM_RANGE
    target = params.values
    unit = (target - lo) / (hi - lo)
    n = target.shape[0]
    tc = gcnn.TrainConfig(
        learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay, epochs=cfg.epochs,
        task="regression", folds=cfg.folds, trials=cfg.trials,
    )
    out = []
    for fold, (train_m, test_m) in enumerate(gcnn.kfold_split(np.arange(n), cfg.folds, split_seed)):
        model = gcnn.GcnModel.init(x.shape[1], target.shape[1], "regression",
                                   seed=derive_seed(cfg.seed, "init", *init_coords, fold))
        model, _ = gcnn.train(model, shift, x, unit, {"train": train_m}, tc)
        m = gcnn.evaluate(model, shift, x, target, test_m, "regression",
                          unscale=lambda o: lo + (hi - lo) * o)
        out.append(m)
    return out


def _simulated_records(cfg: ExperimentConfig, model: str, diffusivity: float, notes: dict):
    records = []
    for trial in range(cfg.trials):
        graph, traj, retries = simulate_cell(cfg, model, diffusivity, trial)
        notes["divergences"] = notes.get("divergences", 0) + retries
        notes.setdefault("edges", []).append(graph.edge_count)
        x = trajectory_features(traj, cfg.featurizer, cfg.depth, cfg.augment_time)
        split_seed = derive_seed(cfg.seed, "split", model, float(diffusivity), trial)
        per_fold = regression_folds(cfg, gcn_shift(graph), x, traj.params, split_seed,
                                    (model, float(diffusivity), trial))
        for fold, m in enumerate(per_fold):
            records.append({"model": model, "D": float(diffusivity), "trial": trial, "fold": fold, **m})
    return records


def run_diffusivity_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """Regression MSE/MAE as a function of the diffusivity ``D = D_u = D_v``."""
    notes: dict = {}
    records = []
    for d in cfg.diffusivities:
        records += _simulated_records(cfg, cfg.model, float(d), notes)
    records.sort(key=_record_key)
    return ExperimentResult("diffusivity", cfg.to_dict(), records, "D", REGRESSION_METRICS, notes)


# real-format classification -------------------------------------------------

def _require_labels(dataset: GeoDataset):
    idx, y = dataset.labeled_nodes()
    if idx.size == 0:
        raise DataError("dataset has no labeled stations; classification cannot run")
    return idx, y


def classification_folds(cfg: ExperimentConfig, shift, x, dataset: GeoDataset, trial, init_coords):
    idx, y = _require_labels(dataset)
    labels = np.zeros(dataset.node_count, dtype=int)
    labels[idx] = y
    tc = gcnn.TrainConfig(
        learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay, epochs=cfg.epochs,
        task="classification", folds=cfg.folds, trials=cfg.trials,
    )
    splits = gcnn.kfold_split(idx, cfg.folds, derive_seed(cfg.seed, "split", trial),
                              labels=y, node_count=dataset.node_count)
    out = []
    for fold, (train_m, test_m) in enumerate(splits):
        model = gcnn.GcnModel.init(x.shape[1], 2, "classification",
                                   seed=derive_seed(cfg.seed, "init", *init_coords, trial, fold))
        model, _ = gcnn.train(model, shift, x, labels, {"train": train_m}, tc)
        out.append(gcnn.evaluate(model, shift, x, labels, test_m, "classification"))
    return out


def dataset_features(dataset: GeoDataset, cfg: ExperimentConfig) -> np.ndarray:
    return node_features(dataset.streams, cfg.featurizer, cfg.depth, cfg.augment_time,
                         cfg.standardize_paths)


def _radius_records(dataset, cfg, radii, x, use_graph=True):
    points = PointSet(dataset.coords, "haversine-km")
    records = []
    for rho in radii:
        rho = float(rho)
        shift = gcn_shift(build_proximity_graph(points, rho)) if use_graph else None
        for trial in range(cfg.trials):
            for fold, m in enumerate(classification_folds(cfg, shift, x, dataset, trial, (rho,))):
                records.append({"rho": rho, "trial": trial, "fold": fold, **m})
    records.sort(key=_record_key)
    return records


def run_radius_sweep(dataset: GeoDataset, radii, cfg: ExperimentConfig) -> ExperimentResult:
    """Classification metrics as a function of the proximity radius (km)."""
    _require_labels(dataset)
    x = dataset_features(dataset, cfg)
    records = _radius_records(dataset, cfg, radii, x)
    echo = cfg.replace(radii=tuple(float(r) for r in radii)).to_dict()
    return ExperimentResult("radius", echo, records, "rho", CLASSIFICATION_METRICS)


def run_mlp_baseline(dataset: GeoDataset, cfg: ExperimentConfig) -> ExperimentResult:
    """The radius-sweep protocol with no graph aggregation, seeded as the ``rho = 0`` column."""
    _require_labels(dataset)
    x = dataset_features(dataset, cfg)
    records = _radius_records(dataset, cfg, [0.0], x, use_graph=False)
    return ExperimentResult("mlp", cfg.to_dict(), records, "rho", CLASSIFICATION_METRICS)


# ablation -------------------------------------------------------------------

ARMS = ("signature", "summary")


def run_ablation(cfg: ExperimentConfig, dataset: GeoDataset | None = None) -> ExperimentResult:
    """Same network and seeds, signature vs summary-statistic node features.

    Without ``dataset`` the simulated ``cfg.model`` regression at
    ``cfg.diffusivity`` is used; with one, the real-format classifier at
    radius ``cfg.radius`` km.
    """
    records = []
    echoes = {}
    notes: dict = {}
    for arm in ARMS:
        arm_cfg = cfg.replace(featurizer=arm)
        echoes[arm] = arm_cfg.to_dict()
        if dataset is None:
            rows = _simulated_records(arm_cfg, cfg.model, float(cfg.diffusivity), notes)
        else:
            rows = _radius_records(dataset, arm_cfg, [cfg.radius], dataset_features(dataset, arm_cfg))
        records += [{"arm": arm, **r} for r in rows]
    records.sort(key=_record_key)
    metrics = REGRESSION_METRICS if dataset is None else ("accuracy", "f1", "precision", "recall")
    tag = f"ablation-{cfg.model}" if dataset is None else "ablation-real"
    if dataset is None:
        # both arms simulate the same cells
        notes["divergences"] = notes.get("divergences", 0) // 2
        notes["edges"] = notes.get("edges", [])[: cfg.trials]
    return ExperimentResult(tag, {"arms": echoes}, records, "arm", metrics, notes)


# output ---------------------------------------------------------------------

def result_lines(result: ExperimentResult) -> list[str]:
    head = {"type": "experiment", "schema_version": SCHEMA_VERSION, "tag": result.tag,
            "config": result.config, "notes": result.notes}
    lines = [json.dumps(head, sort_keys=True)]
    for r in sorted(result.records, key=_record_key):
        lines.append(json.dumps({"type": "record", "schema_version": SCHEMA_VERSION, **r}, sort_keys=True))
    for a in result.aggregates():
        lines.append(json.dumps({"type": "aggregate", "schema_version": SCHEMA_VERSION, **a}, sort_keys=True))
    return lines


def emit_results(result: ExperimentResult, out_dir) -> list[Path]:
    """Write ``records.jsonl`` and one ``plot_<metric>.csv`` (``x,metric,mean,std``) per metric."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "records.jsonl"]
        written[0].write_text("\n".join(result_lines(result)) + "\n")
        aggs = result.aggregates()
        for m in result.metrics:
            path = out / f"plot_{m}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["x", "metric", "mean", "std"])
                for a in aggs:
                    if a["metric"] == m:
                        w.writerow([a["x"], m, repr(a["mean"]), repr(a["std"])])
            written.append(path)
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return written


def load_records(path) -> tuple[dict, list[dict], list[dict]]:
    """Read ``records.jsonl`` back as ``(header, records, aggregates)``."""
    head, recs, aggs = None, [], []
    for line in Path(path).read_text().splitlines():
        obj = json.loads(line)
        kind = obj.pop("type")
        if kind == "experiment":
            head = obj
        elif kind == "record":
            recs.append(obj)
        else:
            aggs.append(obj)
    return head, recs, aggs
