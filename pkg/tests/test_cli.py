import json
import subprocess
import sys

import numpy as np
import pytest
from conftest import synthetic_record

from gatenet import cli
from gatenet.ecg import aami
from gatenet.ecg.dataset import FeatureSet, write_binary_features, write_real_features
from gatenet.ecg.features import binary_from_real
from gatenet.ecg.wfdb_io import write_csv_record, write_wfdb_record
from gatenet.network import build_network, checkpoint_bytes, load_checkpoint


@pytest.fixture(scope="module")
def record_dirs(tmp_path_factory):
    base = tmp_path_factory.mktemp("records")
    ds1, ds2 = aami.split_inter_patient()
    cycle = ["N", "N", "A", "N", "V", "N", "F", "N", "j", "N"]
    for rid in (*ds1, *ds2):
        rec = synthetic_record(rid, n_beats=16, jitter=30, seed=rid,
                               symbols=[cycle[(rid + k) % len(cycle)] for k in range(16)])
        write_wfdb_record(base / "wfdb", rec)
        write_csv_record(base / "csv", rec)
    return base


@pytest.fixture(scope="module")
def feature_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("feats")
    rng = np.random.default_rng(0)

    def make(n):
        real = rng.random((n, 89))
        y = np.clip((real[:, 0] * 4).astype(int), 0, 3)
        b = np.stack([binary_from_real(r) for r in real])
        return FeatureSet(b, real, y, np.full(n, 100), np.arange(n))

    train, test = make(300), make(120)
    write_binary_features(d / "train.bin", train)
    write_binary_features(d / "test.bin", test)
    write_real_features(d / "train.csv", train)
    write_real_features(d / "test.csv", test)
    return d


def write_config(path, data_dir, **extra):
    cfg = {"train_data": data_dir / "train.bin", "test_data": data_dir / "test.bin",
           "layer_sizes": "200", "epochs": 2, "seeds": "0", "temperature": 4,
           "heldout_size": 50, "output_dir": path.parent / "out", **extra}
    path.write_text("# test run\n" + "".join(f"{k} = {v}\n" for k, v in cfg.items()))
    return path


def test_features_wfdb_and_csv_agree(record_dirs, tmp_path):
    assert cli.main(["features", str(record_dirs / "wfdb"), str(tmp_path / "w")]) == 0
    assert cli.main(["features", str(record_dirs / "csv"), str(tmp_path / "c"),
                     "--format", "csv"]) == 0
    for name in ("ds1.bin", "ds2.bin", "ds1.csv", "ds2.csv", "counts.csv"):
        assert (tmp_path / "w" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()
    assert (tmp_path / "w" / "manifest_features.json").exists()
    assert "reference" in (tmp_path / "w" / "counts.txt").read_text()


def test_features_empty_directory_lists_all_records(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert cli.main(["features", str(tmp_path / "empty"), str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    ds1, ds2 = aami.split_inter_patient()
    assert "44 of 44" in err
    assert all(str(r) in err for r in (*ds1, *ds2))


def test_train_outputs_and_determinism(feature_files, tmp_path):
    (tmp_path / "a").mkdir()
    cfg = write_config(tmp_path / "a" / "run.cfg", feature_files)
    assert cli.main(["train", str(cfg)]) == 0
    out = tmp_path / "a" / "out"
    for name in ("seed0/checkpoint.gnz", "seed0/train_log.csv", "seed0/loss.png",
                 "seed0/test_metrics_hard.csv", "summary.csv", "manifest_train.json"):
        assert (out / name).exists(), name
    log = (out / "seed0" / "train_log.csv").read_text().splitlines()
    assert log[0] == "epoch,train_loss,heldout_loss,heldout_accuracy" and len(log) == 4
    manifest = json.loads((out / "manifest_train.json").read_text())
    assert manifest["seeds"] == [0] and len(manifest["config_sha256"]) == 64
    first = (out / "seed0" / "checkpoint.gnz").read_bytes()
    metrics_first = (out / "seed0" / "test_metrics_hard.csv").read_bytes()
    assert cli.main(["train", str(cfg)]) == 0
    assert (out / "seed0" / "checkpoint.gnz").read_bytes() == first
    assert (out / "seed0" / "test_metrics_hard.csv").read_bytes() == metrics_first


def test_zero_epochs_checkpoint_is_initialization(feature_files, tmp_path):
    cfg = write_config(tmp_path / "run.cfg", feature_files, epochs=0, seeds="3")
    assert cli.main(["train", str(cfg)]) == 0
    net = load_checkpoint(tmp_path / "out" / "seed3" / "checkpoint.gnz")
    assert checkpoint_bytes(net) == checkpoint_bytes(build_network(net.config))


@pytest.mark.parametrize("bad", ["layer_sizes = 201", "neuron_kind = tree", "colour = red",
                                 "epochs = many", "encoding = spikes", "no equals sign"])
def test_train_config_errors(feature_files, tmp_path, bad):
    cfg = write_config(tmp_path / "run.cfg", feature_files)
    text = cfg.read_text()
    key = bad.split("=")[0].strip()
    lines = [l for l in text.splitlines() if not l.startswith(key + " ")]
    cfg.write_text("\n".join(lines + [bad]) + "\n")
    assert cli.main(["train", str(cfg)]) == 1
    assert not (tmp_path / "out" / "seed0").exists()


def test_set_overrides(feature_files, tmp_path):
    cfg = write_config(tmp_path / "run.cfg", feature_files)
    assert cli.main(["train", str(cfg), "--set", "epochs=0", "--set", "seeds=4,5"]) == 0
    assert (tmp_path / "out" / "seed5" / "checkpoint.gnz").exists()
    assert cli.main(["train", str(cfg), "--set", "nope=1"]) == 1


def test_missing_training_data_is_data_error(tmp_path):
    (tmp_path / "run.cfg").write_text("train_data = absent.bin\nlayer_sizes = 8\n")
    assert cli.main(["train", str(tmp_path / "run.cfg")]) == 2


@pytest.fixture(scope="module")
def trained(feature_files, tmp_path_factory):
    d = tmp_path_factory.mktemp("trained")
    cfg = write_config(d / "run.cfg", feature_files, epochs=3)
    assert cli.main(["train", str(cfg)]) == 0
    return d / "out" / "seed0" / "checkpoint.gnz"


def test_eval_modes_and_idempotence(trained, feature_files, tmp_path):
    test = str(feature_files / "test.bin")
    assert cli.main(["eval", str(trained), test, "--out", str(tmp_path)]) == 0
    first = (tmp_path / "metrics_hard.csv").read_bytes()
    assert cli.main(["eval", str(trained), test, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "metrics_hard.csv").read_bytes() == first
    assert cli.main(["eval", str(trained), test, "--rate", "1", "--out", str(tmp_path)]) == 0
    # Binary inputs make a length-1 stream identical to hard inference.
    assert (tmp_path / "metrics_rate1.csv").read_bytes() == first
    assert (tmp_path / "confusion_rate1.csv").read_bytes() == (tmp_path / "confusion_hard.csv").read_bytes()
    assert cli.main(["eval", str(trained), test, "--soft", "--out", str(tmp_path)]) == 0
    for name in ("metrics_soft.csv", "confusion_soft.csv", "confusion_soft.png",
                 "report_soft.txt", "manifest_eval.json"):
        assert (tmp_path / name).exists()
    header = (tmp_path / "metrics_soft.csv").read_text().splitlines()
    assert header[0] == "metric,value" and any(l.startswith("jk_index,") for l in header)


def test_eval_width_mismatch(trained, feature_files, tmp_path, capsys):
    code = cli.main(["eval", str(trained), str(feature_files / "test.csv"), "--encoding", "rate",
                     "--out", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err
    assert "89" in err and "138" in err


def test_eval_perfect_features(tmp_path):
    # Class-indicator bits 0..3 wired straight through pass-through gates.
    from gatenet import logic
    from gatenet.network import HardNetwork, NetworkConfig, save_checkpoint
    net = HardNetwork(NetworkConfig((4,), 138, 4), [np.array([[c, c] for c in range(4)])],
                      [logic.TRUTH_TABLES[[3] * 4]], [np.full(4, 3, np.uint8)])
    save_checkpoint(net, tmp_path / "id.gnz")
    y = np.repeat(np.arange(4), 5)
    bits = np.zeros((20, 138), np.uint8)
    bits[np.arange(20), y] = 1
    write_binary_features(tmp_path / "onehot.bin",
                          FeatureSet(bits, np.zeros((20, 89)), y, np.zeros(20, int), np.arange(20)))
    assert cli.main(["eval", str(tmp_path / "id.gnz"), str(tmp_path / "onehot.bin"),
                     "--out", str(tmp_path)]) == 0
    assert "jk_index,1.000000" in (tmp_path / "metrics_hard.csv").read_text()


def test_sweep_cost_export(trained, feature_files, tmp_path):
    test = str(feature_files / "test.csv")
    assert cli.main(["sweep", str(trained), test, "--lengths", "1,8,64", "--seeds", "0,1",
                     "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "L,accuracy,jk_index,seed" and len(lines) == 10
    assert (tmp_path / "sweep.png").exists()
    assert cli.main(["cost", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "cost.csv").read_text()
    assert "LGN 1x8k,80," in text and ",3780," in text and text.rstrip().endswith(",139")
    assert cli.main(["cost", "--checkpoint", str(trained), "--out", str(tmp_path / "c2")]) == 0
    assert "flops_network,2" in (tmp_path / "c2" / "cost.csv").read_text()
    assert cli.main(["export", str(trained), str(tmp_path / "hw" / "net.v")]) == 0
    from gatenet.netlist import simulate_netlist
    from gatenet.network import discretize, forward_hard
    x = np.random.default_rng(0).integers(0, 2, (200, 138)).astype(np.uint8)
    hard = discretize(load_checkpoint(trained))
    assert np.array_equal(simulate_netlist((tmp_path / "hw" / "net.v").read_text(), x),
                          forward_hard(hard, x)[0])
    assert (tmp_path / "hw" / "manifest_export.json").exists()


def test_bad_arguments_exit_one(trained, feature_files):
    assert cli.main(["sweep", str(trained), str(feature_files / "test.bin"),
                     "--lengths", "0,4"]) == 1
    with pytest.raises(SystemExit) as err:
        cli.main(["train"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        cli.main(["sweep", str(trained), "x.bin", "--lengths", "a,b"])
    assert err.value.code == 1


def test_corrupt_checkpoint_is_data_error(feature_files, tmp_path):
    (tmp_path / "bad.gnz").write_bytes(b"not a zip")
    assert cli.main(["export", str(tmp_path / "bad.gnz"), str(tmp_path / "x.v")]) == 2


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gatenet.cli", "cost", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "6-LUTN" in proc.stdout
