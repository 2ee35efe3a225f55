import json

import pytest
import yaml

from mtjsnn import config as cfgmod
from mtjsnn.cli import main


def write_cfg(tmp_path, doc):
    p = tmp_path / "run.yaml"
    p.write_text(yaml.safe_dump(doc))
    return str(p)


def test_defaults_validate():
    cfg = cfgmod.load()
    assert cfg["network"]["weights"] == "bundled:lenet6-12"
    assert len(cfgmod.config_hash(cfg)) == 16


def test_unknown_key_rejected(tmp_path, capsys):
    path = write_cfg(tmp_path, {"seed": 1, "bogus": 2})
    assert main(["retention", "--config", path, "--out", str(tmp_path / "o")]) == 2
    assert "bogus" in capsys.readouterr().err


def test_bad_yaml_and_missing_file(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("seed: [1,\n")
    assert main(["retention", "--config", str(p)]) == 2
    assert main(["retention", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_usage_errors():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["simulate", "--time", "0"]) == 2
    assert main(["simulate", "--mode", "fast"]) == 2


def test_retention_command(tmp_path):
    out = tmp_path / "o"
    assert main(["retention", "--out", str(out)]) == 0
    lines = (out / "retention.csv").read_text().splitlines()
    assert lines[0] == "delta_kbt,retention_time_s,failure_probability"
    row = [r for r in lines[1:] if r.startswith("4.6,")][0]
    assert float(row.split(",")[2]) == pytest.approx(0.01, abs=1e-3)
    man = json.loads((out / "manifest.json").read_text())
    side = json.loads((out / "retention.json").read_text())
    assert man["config_hash"] == side["config_hash"]
    assert "retention.csv" in man["files"]


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MTJSNN_OUT", str(tmp_path / "env"))
    assert main(["retention"]) == 0
    assert (tmp_path / "env" / "retention.csv").exists()


def test_characterize_empty_device_list_is_noop(tmp_path, capsys):
    assert main(["characterize", "--out", str(tmp_path / "o")]) == 0
    assert "no devices" in capsys.readouterr().err


def test_characterize_small_device(tmp_path):
    path = write_cfg(tmp_path, {
        "devices": [{"name": "d1", "preset": 1}],
        "simulation": {"n_trials": 100, "currents_ua": [-10, -2.5, 5, 12.5, 20], "warmup_ns": 1.0}})
    out = tmp_path / "o"
    assert main(["characterize", "--config", path, "--out", str(out)]) == 0
    assert (out / "d1_switching.csv").read_text().startswith("current_A,p_switch,n_trials")
    side = json.loads((out / "d1_switching.json").read_text())
    assert side["delta_kbt"] == pytest.approx(0.98, abs=0.01)
    assert "config_hash" in side
    # fit the characteristic we just wrote
    path2 = write_cfg(tmp_path, {"fit": {"inputs": [str(out / "d1_switching.csv")]}})
    assert main(["fit", "--config", path2, "--out", str(tmp_path / "f")]) == 0
    assert (tmp_path / "f" / "fits.csv").exists()


def test_invalid_device_is_config_error(tmp_path):
    path = write_cfg(tmp_path, {"devices": [{"name": "x", "preset": 1, "free_layer_thickness": -1}]})
    assert main(["characterize", "--config", path, "--out", str(tmp_path / "o")]) == 2


def test_simulate_missing_weights(tmp_path):
    path = write_cfg(tmp_path, {"network": {"weights": str(tmp_path / "none.json")}})
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "o")]) == 2


def test_simulate_is_reproducible(tmp_path):
    args = ["simulate", "--mode", "sync", "--time", "40", "--n-images", "20", "--seed", "3",
            "--workers", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for f in ("accuracy.csv", "energy.json", "manifest.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert (tmp_path / "a" / "accuracy.csv").read_text().startswith("time_ns,accuracy")
    e = json.loads((tmp_path / "a" / "energy.json").read_text())
    assert e["mode"] == "sync" and e["neuron_j"] >= 0


def test_sweep_command(tmp_path):
    path = write_cfg(tmp_path, {"sweep": {"kind": "synapse_sigma", "values": [0, 5, 10, 15, 20],
                                          "n_mc": 1},
                                "network": {"n_images": 10, "time_ns": 16}})
    out = tmp_path / "o"
    assert main(["sweep", "--config", path, "--out", str(out), "--workers", "1"]) == 0
    lines = (out / "sweep_synapse_sigma.csv").read_text().splitlines()
    assert lines[0] == "sweep_value,mean_accuracy,std_accuracy"
    assert len(lines) == 6
    assert all(float(r.split(",")[2]) == 0.0 for r in lines[1:])


def test_sweep_unknown_kind(tmp_path):
    path = write_cfg(tmp_path, {"sweep": {"kind": "humidity", "values": [1]}})
    assert main(["sweep", "--config", path, "--out", str(tmp_path / "o")]) == 2
