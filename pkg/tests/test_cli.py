import csv
import json
import shutil
from pathlib import Path

import pytest

from theftgru.cli import EXIT_ABORTED, EXIT_CONFIG, EXIT_MISSING, main
from theftgru.config import ConfigError, load_config

SMOKE = {
    "seed": 7,
    "data": {"synthetic": {"customer_count": 2, "days": 8}},
    "train": {"epochs": 1, "batch_size": 64, "from_search": True},
    "search": {"iterations": 3, "k_folds": 2,
               "space": {"layer_counts": [1, 2], "neuron_range": [2, 4],
                         "optimizers": ["Adam", "Adamax"], "hidden_activations": ["sigmoid", "tanh"]}},
}


def write_config(tmp_path, doc=SMOKE, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run(cfg, out, *cmds, extra=()):
    for c in cmds:
        rc = main([c, "--config", cfg, "--out", str(out), *extra])
        if rc:
            return rc
    return 0


def test_search_then_report_rows(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert run(cfg, out, "synth", "attack", "preprocess", "search", "report") == 0
    report = (out / "report.md").read_text()
    rows = [l for l in report.splitlines() if l.startswith("| ") and l[2].isdigit() or l.startswith("| **")]
    assert len(rows) == 3
    with open(out / "search_results.csv") as fp:
        assert len(list(csv.DictReader(fp))) == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest) >= {"synth", "attack", "preprocess", "search", "report", "config"}
    assert manifest["search"]["seed"] == 7


def test_pipeline_replay_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(cfg, a, "pipeline") == 0
    assert run(cfg, b, "pipeline") == 0
    for name in ("search_results.csv", "metrics.json", "model.json", "dataset.csv", "loss_trace.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    metrics = json.loads((a / "metrics.json").read_text())
    assert "model" in metrics and "MD1" in metrics


def test_seed_override_changes_results(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    run(cfg, a, "synth")
    run(cfg, b, "synth", extra=["--seed", "8"])
    assert (a / "consumption.csv").read_bytes() != (b / "consumption.csv").read_bytes()


def test_evaluate_without_scaler(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    doc = dict(SMOKE, train={"epochs": 1, "batch_size": 64})
    cfg = write_config(tmp_path, doc)
    assert run(cfg, out, "synth", "attack", "preprocess", "train") == 0
    (out / "scaler.json").unlink()
    assert main(["evaluate", "--config", cfg, "--out", str(out)]) == EXIT_MISSING
    assert "scaler.json" in capsys.readouterr().err


def test_missing_upstream_named(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["preprocess", "--config", cfg, "--out", str(tmp_path / "empty")]) == EXIT_MISSING
    err = capsys.readouterr().err
    assert "dataset.csv" in err and "attack" in err


def test_config_errors_have_paths(tmp_path, capsys):
    bad = dict(SMOKE, model={"N": 0, "hidden_activation": "softmax"}, bogus=1)
    cfg = write_config(tmp_path, bad)
    assert main(["synth", "--config", cfg]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "model.N" in err and "model.hidden_activation" in err and "bogus" in err
    assert main(["synth", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_config_requires_one_source():
    with pytest.raises(ConfigError, match="exactly one"):
        load_config(json.dumps({"seed": 1, "data": {}}))
    with pytest.raises(ConfigError, match="seed"):
        load_config(json.dumps({"data": {"synthetic": {}}}))


def test_flag_overrides():
    cfg = load_config(json.dumps(SMOKE), {"model.literal_layer_softmax": True,
                                          "preprocess.adasyn_after_split": True, "jobs": 2})
    assert cfg.model.literal_layer_softmax and cfg.preprocess.adasyn_after_split and cfg.jobs == 2


def test_literal_and_adasyn_after_split_flags(tmp_path):
    # ~3 honest training rows per customer after the split, so k must be small
    cfg = write_config(tmp_path, dict(SMOKE, preprocess={"k_neighbors": 2}))
    out = tmp_path / "run"
    assert run(cfg, out, "pipeline", extra=["--literal-layer-softmax", "--adasyn-after-split"]) == 0
    model = json.loads((out / "model.json").read_text())
    assert model["literal_layer_softmax"] is True
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["preprocess"]["adasyn_after_split"] is True
    with open(out / "test.csv") as fp:
        assert all(r["provenance"] != "7" for r in csv.DictReader(fp))


def test_parallel_search_matches_serial(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    run(cfg, a, "synth", "attack", "preprocess")
    shutil.copytree(a, b)
    assert run(cfg, a, "search") == 0
    assert run(cfg, b, "search", extra=["--jobs", "2"]) == 0
    assert (a / "search_results.csv").read_bytes() == (b / "search_results.csv").read_bytes()


def test_training_abort_exit_code(tmp_path, capsys):
    doc = dict(SMOKE, model={"L": 1, "N": 3, "hidden_activation": "relu"},
               train={"epochs": 1, "batch_size": 64, "optimizer": {"kind": "SGD", "learning_rate": 1e300}})
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "run"
    assert run(cfg, out, "synth", "attack", "preprocess") == 0
    assert main(["train", "--config", cfg, "--out", str(out)]) == EXIT_ABORTED
    assert "epoch" in capsys.readouterr().err


def test_meter_file_source(tmp_path):
    lines = [f"{m} {d:03d}{t:02d} {0.1 * (t % 7) + m * 0.01:.3f}\n"
             for m in (100, 200) for d in range(1, 7) for t in range(1, 50)]
    meter = tmp_path / "meters.txt"
    meter.write_text("".join(lines))
    doc = {"seed": 3, "data": {"meter_file": str(meter)}, "train": {"epochs": 1}}
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "run"
    assert run(cfg, out, "attack") == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["attack"]["dst_records_dropped"] == 12
    assert manifest["attack"]["rows"] == 2 * 6 * 7


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    cfg = write_config(tmp_path)
    r = subprocess.run([sys.executable, "-m", "theftgru", "synth", "--config", cfg, "--out", str(tmp_path / "m")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and Path(tmp_path / "m" / "consumption.csv").exists()


@pytest.mark.parametrize("name", ["desk.json", "smoke.json", "cer.json"])
def test_shipped_configs_validate(name):
    root = Path(__file__).resolve().parents[1]
    load_config((root / "configs" / name).read_text())
