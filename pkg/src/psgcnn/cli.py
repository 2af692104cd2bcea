"""Command-line entry point: ``psgcnn <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import gcnn
from .baselines import feature_names as summary_feature_names
from .config import CLASSIFIER_DEFAULTS, ExperimentConfig, config_help, load_config
from .data import GeoDataset, export_dataset, ingest_dir, synthetic_geonet
from .errors import DataError, NumericalError
from .experiments import (
    emit_results,
    run_ablation,
    run_diffusivity_sweep,
    run_mlp_baseline,
    run_radius_sweep,
    simulate_cell,
)
from .features import node_features, standardize_columns, trajectory_features
from .proximity import PointSet, build_proximity_graph, gcn_shift
from .reaction_diffusion import PARAM_RANGE, export_trajectory, load_trajectory
from .signature import index_word, signature_length

log = logging.getLogger("psgcnn")

FILE_FORMATS = """\
file formats:
  stations.csv          station_id,lon,lat
  streams/<id>.csv      date,east_mm,north_mm,up_mm   (one file per station)
  labels.csv            station_id,label              (label: linear | nonlinear)
  trajectory CSV        node_id,t,u,v
  <stem>_params.csv     node_id,alpha,beta,delta,gamma (LV) | node_id,epsilon,a,b (FHN)
  <stem>_nodes.csv      node_id,x,y                   (unit-square positions)
  features CSV          node_id,<one column per feature>
  results               records.jsonl + plot_<metric>.csv (x,metric,mean,std)
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _bool(text):
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


_ARG_TYPES = {"int": int, "float": float, "bool": _bool, "str": str}


def _add_config_flags(p):
    p.add_argument("--config", help="flat key = value config file; flags override it")
    for f in dataclasses.fields(ExperimentConfig):
        kind = _floats if f.type.startswith("tuple") else _ARG_TYPES[f.type]
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=kind, default=None)


def _config(args, base=None) -> ExperimentConfig:
    names = [f.name for f in dataclasses.fields(ExperimentConfig)]
    return load_config(args.config, base=base, **{n: getattr(args, n) for n in names})


def _write_features(path, x, names):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", *names])
        for i, row in enumerate(x):
            w.writerow([i, *(repr(float(v)) for v in row)])


def _read_features(path):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read features {path}: {exc}") from exc
    return data[np.argsort(data[:, 0]), 1:]


def _signature_names(dim, depth):
    return ["sig_" + "_".join(map(str, index_word(i, dim, depth))) for i in range(signature_length(dim, depth))]


def _nodes_path(traj_path):
    p = Path(traj_path)
    return p.with_name(p.stem + "_nodes.csv")


def _load_task(args, cfg):
    """Targets, shift and task for train/evaluate from --trajectory or --dataset."""
    if bool(args.trajectory) == bool(args.dataset):
        raise UsageError("give exactly one of --trajectory or --dataset")
    if args.trajectory:
        traj = load_trajectory(args.trajectory)
        try:
            nodes = np.loadtxt(_nodes_path(args.trajectory), delimiter=",", skiprows=1, ndmin=2)
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read node positions: {exc}") from exc
        pts = PointSet(nodes[np.argsort(nodes[:, 0]), 1:])
        shift = gcn_shift(build_proximity_graph(pts, cfg.radius))
        mask = np.ones(traj.node_count, dtype=bool)
        return "regression", shift, traj.params.values, mask
    ds = ingest_dir(args.dataset)
    idx, y = ds.labeled_nodes()
    if idx.size == 0:
        raise DataError("dataset has no labeled stations; classification cannot run")
    labels = np.zeros(ds.node_count, dtype=int)
    labels[idx] = y
    mask = np.zeros(ds.node_count, dtype=bool)
    mask[idx] = True
    shift = gcn_shift(build_proximity_graph(PointSet(ds.coords, "haversine-km"), cfg.radius))
    return "classification", shift, labels, mask


def _print_summary(result, metric):
    for x, (mean, std) in result.summary(metric).items():
        print(f"{result.x_key}={x}\t{metric}={mean:.4f} +/- {std:.4f}")


# subcommands ------------------------------------------------------------------

def cmd_simulate(args):
    cfg = _config(args)
    graph, traj, retries = simulate_cell(cfg, cfg.model, cfg.diffusivity, 0)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    path, side = export_trajectory(traj, out)
    with open(_nodes_path(out), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "x", "y"])
        for i, (x, y) in enumerate(traj.meta["points"]):
            w.writerow([i, repr(float(x)), repr(float(y))])
    print(f"wrote {path}, {side}, {_nodes_path(out)} ({graph.edge_count} edges, {retries} redraws)")


def cmd_featurize(args):
    cfg = _config(args)
    if bool(args.trajectory) == bool(args.dataset):
        raise UsageError("give exactly one of --trajectory or --dataset")
    if args.trajectory:
        traj = load_trajectory(args.trajectory)
        x = trajectory_features(traj, cfg.featurizer, cfg.depth, cfg.augment_time, scale_columns=False)
        channels = 2
    else:
        ds = ingest_dir(args.dataset)
        x = node_features(ds.streams, cfg.featurizer, cfg.depth, cfg.augment_time,
                          cfg.standardize_paths, scale_columns=False)
        channels = 3
    if cfg.featurizer == "signature":
        names = _signature_names(channels + int(cfg.augment_time), cfg.depth)
    else:
        names = summary_feature_names(channels)
    _write_features(args.out, x, names)
    print(f"wrote {args.out}: {x.shape[0]} nodes x {x.shape[1]} features")


def _standardized(path):
    return standardize_columns(_read_features(path))


def cmd_train(args):
    base = ExperimentConfig(**CLASSIFIER_DEFAULTS) if args.dataset else None
    cfg = _config(args, base)
    task, shift, targets, mask = _load_task(args, cfg)
    x = _standardized(args.features)
    if x.shape[0] != mask.size:
        raise DataError(f"features have {x.shape[0]} rows for {mask.size} nodes")
    if task == "regression":
        lo, hi = PARAM_RANGE
        fit_targets, out_dim = (targets - lo) / (hi - lo), targets.shape[1]
    else:
        fit_targets, out_dim = targets, 2
    tc = gcnn.TrainConfig(learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay,
                          epochs=cfg.epochs, task=task, seed=cfg.seed)
    model = gcnn.GcnModel.init(x.shape[1], out_dim, task, seed=cfg.seed)
    model, curve = gcnn.train(model, shift, x, fit_targets, {"train": mask}, tc)
    gcnn.save_checkpoint(model, args.out)
    final = curve["train"][-1] if curve["train"] else float("nan")
    print(f"wrote {args.out}; final training loss {final:.6f}")


def cmd_evaluate(args):
    base = ExperimentConfig(**CLASSIFIER_DEFAULTS) if args.dataset else None
    cfg = _config(args, base)
    task, shift, targets, mask = _load_task(args, cfg)
    model = gcnn.load_checkpoint(args.checkpoint)
    x = _standardized(args.features)
    lo, hi = PARAM_RANGE
    metrics = gcnn.evaluate(model, shift, x, targets, mask, task, unscale=lambda o: lo + (hi - lo) * o)
    print(json.dumps(metrics, sort_keys=True))


def cmd_sweep_diffusivity(args):
    cfg = _config(args)
    result = run_diffusivity_sweep(cfg)
    emit_results(result, args.out)
    _print_summary(result, "mse")


def _dataset(args) -> GeoDataset:
    if args.dataset:
        return ingest_dir(args.dataset)
    return synthetic_geonet(seed=args.synthetic_seed)


def cmd_sweep_radius(args):
    cfg = _config(args, ExperimentConfig(**CLASSIFIER_DEFAULTS))
    ds = _dataset(args)
    result = run_mlp_baseline(ds, cfg) if args.mlp else run_radius_sweep(ds, cfg.radii, cfg)
    emit_results(result, args.out)
    _print_summary(result, "accuracy")


def cmd_ablation(args):
    if args.dataset or args.synthetic:
        cfg = _config(args, ExperimentConfig(**CLASSIFIER_DEFAULTS, radius=40.0))
        result = run_ablation(cfg, _dataset(args))
        metric = "accuracy"
    else:
        cfg = _config(args)
        result = run_ablation(cfg)
        metric = "mse"
    emit_results(result, args.out)
    _print_summary(result, metric)


def cmd_ingest_check(args):
    ds = ingest_dir(args.dataset)
    idx, y = ds.labeled_nodes()
    lengths = [s.length for s in ds.streams]
    print(f"stations: {ds.node_count}")
    print(f"readings per station: min {min(lengths)}, max {max(lengths)}")
    print(f"labeled: {idx.size} (nonlinear {int(y.sum())}, linear {int(idx.size - y.sum())})")
    print(f"epoch: {ds.epoch.isoformat()}")


def cmd_make_synthetic(args):
    ds = synthetic_geonet(seed=args.synthetic_seed)
    export_dataset(ds, args.out)
    print(f"wrote synthetic dataset with {ds.node_count} stations to {args.out}")


def build_parser():
    parser = _Parser(
        prog="psgcnn",
        description="Path-signature graph convolutional networks on sensor networks.",
        epilog=FILE_FORMATS + "\n" + config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text,
                           epilog=FILE_FORMATS + "\n" + config_help(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(func=func)
        _add_config_flags(p)
        return p

    p = add("simulate", cmd_simulate, "simulate a reaction-diffusion dataset (trial 0 of the config)")
    p.add_argument("--out", required=True, help="trajectory CSV; sidecars are written next to it")

    p = add("featurize", cmd_featurize, "compute node features (unscaled) to a CSV")
    p.add_argument("--trajectory")
    p.add_argument("--dataset")
    p.add_argument("--out", required=True)

    for name, func, text in (("train", cmd_train, "train a GCNN on all labeled nodes"),
                             ("evaluate", cmd_evaluate, "score a checkpoint on all labeled nodes")):
        p = add(name, func, text)
        p.add_argument("--features", required=True)
        p.add_argument("--trajectory")
        p.add_argument("--dataset")
        if name == "train":
            p.add_argument("--out", required=True, help="checkpoint path (.npz)")
        else:
            p.add_argument("--checkpoint", required=True)

    p = add("sweep-diffusivity", cmd_sweep_diffusivity, "regression MSE across diffusivities")
    p.add_argument("--out", required=True)

    p = add("sweep-radius", cmd_sweep_radius, "classification metrics across proximity radii (km)")
    p.add_argument("--dataset")
    p.add_argument("--synthetic-seed", type=int, default=0)
    p.add_argument("--mlp", action="store_true", help="run the graph-free baseline instead")
    p.add_argument("--out", required=True)

    p = add("ablation", cmd_ablation, "signature vs summary-statistic node features")
    p.add_argument("--dataset")
    p.add_argument("--synthetic", action="store_true", help="use the synthetic stand-in dataset")
    p.add_argument("--synthetic-seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("ingest-check", cmd_ingest_check, "validate a dataset directory and summarize it")
    p.add_argument("--dataset", required=True)

    p = add("make-synthetic", cmd_make_synthetic, "write the synthetic stand-in dataset")
    p.add_argument("--synthetic-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"psgcnn: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"psgcnn: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"psgcnn: data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"psgcnn: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
