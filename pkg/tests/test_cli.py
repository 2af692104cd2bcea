import json
import subprocess
import sys

import numpy as np
import pytest

from psgcnn.cli import main
from psgcnn.experiments import load_records

SMALL = ["--nodes", "12", "--horizon", "1", "--epochs", "5", "--trials", "1", "--noise", "0.5", "--radius", "0.3"]


def test_help_documents_formats(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    assert "date,east_mm,north_mm,up_mm" in out and "node_id,t,u,v" in out and "learning_rate" in out


@pytest.mark.parametrize("argv", [[], ["no-such-command"], ["simulate"], ["simulate", "--out", "x", "--seed", "abc"]])
def test_usage_errors_exit_1(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 1


def test_conflicting_sources_exit_1(tmp_path):
    assert main(["featurize", "--out", str(tmp_path / "f.csv")]) == 1


def test_data_errors_exit_2(tmp_path):
    assert main(["ingest-check", "--dataset", str(tmp_path / "missing")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "t.csv")]) == 2


def test_numerical_failure_exit_3(tmp_path):
    argv = ["simulate", "--model", "LV", "--noise", "10", "--lv-nonnegative", "false", "--max-retries", "0",
            "--nodes", "8", "--out", str(tmp_path / "t.csv")]
    assert main(argv) == 3


def test_simulate_featurize_train_evaluate(tmp_path, capsys):
    traj = tmp_path / "traj.csv"
    feats = tmp_path / "feat.csv"
    ckpt = tmp_path / "model.npz"
    assert main(["simulate", *SMALL, "--model", "FHN", "--out", str(traj)]) == 0
    assert (tmp_path / "traj_params.csv").exists() and (tmp_path / "traj_nodes.csv").exists()
    assert main(["featurize", "--trajectory", str(traj), "--depth", "3", "--out", str(feats)]) == 0
    header = feats.read_text().splitlines()[0].split(",")
    assert header[:3] == ["node_id", "sig_1", "sig_2"] and len(header) == 1 + 14
    assert main(["train", *SMALL, "--features", str(feats), "--trajectory", str(traj), "--out", str(ckpt)]) == 0
    capsys.readouterr()
    assert main(["evaluate", *SMALL, "--features", str(feats), "--trajectory", str(traj), "--checkpoint", str(ckpt)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert set(metrics) == {"mse", "mae"} and np.isfinite(metrics["mse"])


def test_real_format_pipeline(tmp_path, capsys):
    ds = tmp_path / "geo"
    assert main(["make-synthetic", "--synthetic-seed", "1", "--out", str(ds)]) == 0
    assert main(["ingest-check", "--dataset", str(ds)]) == 0
    assert "stations: 80" in capsys.readouterr().out
    feats = tmp_path / "f.csv"
    assert main(["featurize", "--dataset", str(ds), "--featurizer", "summary", "--out", str(feats)]) == 0
    assert len(feats.read_text().splitlines()[0].split(",")) == 1 + 39
    ckpt = tmp_path / "m.npz"
    assert main(["train", "--features", str(feats), "--dataset", str(ds), "--radius", "40", "--epochs", "5",
                 "--out", str(ckpt)]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--features", str(feats), "--dataset", str(ds), "--radius", "40",
                 "--checkpoint", str(ckpt)]) == 0
    assert "accuracy" in json.loads(capsys.readouterr().out)


def test_sweeps_write_results(tmp_path):
    out = tmp_path / "diff"
    assert main(["sweep-diffusivity", *SMALL, "--model", "FHN", "--diffusivities", "0.02,0.08", "--out", str(out)]) == 0
    head, recs, aggs = load_records(out / "records.jsonl")
    assert head["tag"] == "diffusivity" and len(recs) == 2 * 4
    out = tmp_path / "rad"
    assert main(["sweep-radius", "--radii", "0,40", "--trials", "1", "--epochs", "5", "--out", str(out)]) == 0
    assert (out / "plot_accuracy.csv").read_text().startswith("x,metric,mean,std\n")
    out = tmp_path / "abl"
    assert main(["ablation", *SMALL, "--model", "FHN", "--out", str(out)]) == 0
    assert load_records(out / "records.jsonl")[0]["tag"] == "ablation-FHN"


def test_config_file_flags_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model = FHN\nnodes = 10\nhorizon = 1\nepochs = 3\ntrials = 1\nnoise = 0.5\ndiffusivities = 0.05\n")
    out = tmp_path / "r"
    assert main(["sweep-diffusivity", "--config", str(cfg), "--nodes", "9", "--out", str(out)]) == 0
    head = load_records(out / "records.jsonl")[0]
    assert head["config"]["nodes"] == 9 and head["config"]["model"] == "FHN"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "psgcnn", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep-radius" in proc.stdout
