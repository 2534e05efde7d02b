"""File-to-file pipeline stages behind the CLI subcommands.

Every stage reads named artifacts from the run directory, writes its own, and
records seeds, config digest and artifact hashes in ``manifest.json``.
"""

import hashlib
import json
import logging
import math
from pathlib import Path

from . import kernels
from .attacks import HONEST, LabeledSet, build_labeled_dataset, read_dataset_csv, write_dataset_csv
from .data import (generate_synthetic_profiles, parse_meter_file,
                   read_consumption_csv, validate_matrix, write_consumption_csv)
from .nn import init_model, load_checkpoint, save_checkpoint
from .optim import OptimizerConfig
from .preprocessing import Scaler, adasyn_oversample, apply_scaler, fit_scaler, split_train_test
from .search import (HyperParams, random_search, read_results_json, select_top, write_results_csv,
                     write_results_json)
from .seeding import stream
from .training import evaluate, train

log = logging.getLogger(__name__)

CONSUMPTION = "consumption.csv"
DATASET = "dataset.csv"
TRAIN = "train.csv"
TEST = "test.csv"
SCALER = "scaler.json"
MODEL = "model.json"
LOSS_TRACE = "loss_trace.csv"
SEARCH_CSV = "search_results.csv"
SEARCH_JSON = "search_results.json"
METRICS = "metrics.json"
MANIFEST = "manifest.json"
REPORT = "report.md"


class MissingArtifact(FileNotFoundError):
    def __init__(self, path, producer):
        super().__init__(f"missing artifact {path} (produced by `{producer}`)")
        self.path = path


def _need(out, name, producer):
    p = Path(out) / name
    if not p.exists():
        raise MissingArtifact(p, producer)
    return p


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _record(cfg, command, inputs, outputs, **extra):
    out = Path(cfg.out)
    path = out / MANIFEST
    manifest = json.loads(path.read_text()) if path.exists() else {}
    manifest[command] = {
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "kernel_backend": kernels.BACKEND,
        "inputs": {Path(p).name: _sha(p) for p in inputs},
        "outputs": {Path(p).name: _sha(p) for p in outputs},
        **extra,
    }
    manifest["config"] = json.loads(cfg.model_dump_json())
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _write_text(path, writer, obj):
    with open(path, "w", newline="") as fp:
        writer(obj, fp)
    return path


def cmd_synth(cfg):
    if cfg.data.synthetic is None:
        raise ValueError("synth needs a data.synthetic section")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    matrices = generate_synthetic_profiles(cfg.synthetic_config())
    dst = _write_text(out / CONSUMPTION, write_consumption_csv, matrices)
    _record(cfg, "synth", [], [dst], customers=len(matrices),
            rows=sum(m.days for m in matrices))
    return matrices


def _load_consumption(cfg):
    if cfg.data.meter_file is not None:
        src = Path(cfg.data.meter_file)
        if not src.exists():
            raise MissingArtifact(src, "data.meter_file")
        with open(src, "rb") as fp:
            result = parse_meter_file(fp, cfg.data.periods_per_day, cfg.data.meter_ids)
        matrices = result.matrices
        if cfg.data.max_meters:
            matrices = matrices[:cfg.data.max_meters]
        return matrices, src, {"dst_records_dropped": result.dst_records_dropped,
                               "incomplete_days_dropped": result.incomplete_days_dropped}
    src = _need(cfg.out, CONSUMPTION, "synth")
    with open(src, newline="") as fp:
        return read_consumption_csv(fp), src, {}


def cmd_attack(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    matrices, src, stats = _load_consumption(cfg)
    if not matrices:
        raise ValueError("no consumption data")
    sets = []
    for m in matrices:
        report = validate_matrix(m)
        if not report.ok:
            raise ValueError(f"customer {m.customer_id}: {report.violations[:3]}")
        sets.append(build_labeled_dataset(m, stream(cfg.seed, "attack", m.customer_id)))
    rows = LabeledSet.concat(sets)
    dst = _write_text(out / DATASET, write_dataset_csv, rows)
    _record(cfg, "attack", [src], [dst], rows=len(rows), customers=len(matrices), **stats)
    return rows


def _read_rows(path):
    with open(path, newline="") as fp:
        return read_dataset_csv(fp)


def cmd_preprocess(cfg):
    out = Path(cfg.out)
    src = _need(out, DATASET, "attack")
    rows = _read_rows(src)
    k = cfg.preprocess.k_neighbors
    per_customer = rows.by_customer()
    split_rng = stream(cfg.seed, "split")
    if cfg.preprocess.adasyn_after_split:
        split = split_train_test(per_customer, split_rng)
        balanced = [adasyn_oversample(r, k, stream(cfg.seed, "adasyn", cid))
                    for cid, r in split.train.by_customer().items()]
        train_rows, test_rows = LabeledSet.concat(balanced), split.test
    else:
        balanced = {cid: adasyn_oversample(r, k, stream(cfg.seed, "adasyn", cid))
                    for cid, r in per_customer.items()}
        split = split_train_test(balanced, split_rng)
        train_rows, test_rows = split.train, split.test
    scaler = fit_scaler(train_rows)
    tr = _write_text(out / TRAIN, write_dataset_csv, train_rows)
    te = _write_text(out / TEST, write_dataset_csv, test_rows)
    sc = out / SCALER
    sc.write_text(scaler.to_json() + "\n")
    _record(cfg, "preprocess", [src], [tr, te, sc], train_rows=len(train_rows),
            test_rows=len(test_rows),
            train_honest=int((train_rows.labels == HONEST).sum()),
            adasyn_after_split=cfg.preprocess.adasyn_after_split)
    return train_rows, test_rows, scaler


def _scaled(out, name, producer):
    src = _need(out, name, producer)
    sc = _need(out, SCALER, "preprocess")
    scaler = Scaler.from_json(sc.read_text())
    return apply_scaler(scaler, _read_rows(src)), [src, sc]


def cmd_search(cfg):
    out = Path(cfg.out)
    rows, inputs = _scaled(out, TRAIN, "preprocess")
    s = cfg.search
    records = random_search(rows, cfg.search_space(), s.iterations, s.k_folds, cfg.train_config(),
                            cfg.seed, reinit_per_fold=s.reinit_per_fold,
                            literal_layer_softmax=cfg.model.literal_layer_softmax, jobs=cfg.jobs)
    csv_path = _write_text(out / SEARCH_CSV, write_results_csv, records)
    json_path = _write_text(out / SEARCH_JSON, write_results_json, records)
    _record(cfg, "search", inputs, [csv_path, json_path], iterations=len(records),
            failed=sum(r.failed for r in records))
    return records


def _train_one(cfg, rows, hp, tag):
    m = cfg.model
    model = init_model(hp.L, hp.N, rows.T, hp.hidden_activation, hp.output_activation,
                       rng=stream(cfg.seed, "model", tag),
                       literal_layer_softmax=m.literal_layer_softmax)
    tc = cfg.train_config()
    if tc.optimizer.kind != hp.optimizer:
        tc.optimizer = OptimizerConfig(hp.optimizer)
    result = train(model, rows, tc, rng=stream(cfg.seed, "train", tag))
    return model, result


def _write_trace(path, traces):
    with open(path, "w") as fp:
        fp.write("model,epoch,batch,loss\n")
        for tag, result in traces:
            M = result.batches_per_epoch
            for i, loss in enumerate(result.losses):
                fp.write(f"{tag},{i // M},{i % M},{loss!r}\n")
    return path


def cmd_train(cfg):
    out = Path(cfg.out)
    rows, inputs = _scaled(out, TRAIN, "preprocess")
    jobs = []
    if cfg.train.from_search:
        src = _need(out, SEARCH_JSON, "search")
        inputs.append(src)
        with open(src) as fp:
            records = read_results_json(fp)
        picks = [r for r in select_top(records, per_layer_count=True) if not r.failed]
        if not picks:
            raise ValueError("search produced no successful configuration")
        best = select_top(picks, per_layer_count=False, top=1)[0]
        jobs = [(f"MD{i + 1}", r.hyperparams) for i, r in enumerate(picks)]
        best_tag = jobs[picks.index(best)][0]
    else:
        best_tag = "model"
        m, o = cfg.model, cfg.train.optimizer
        jobs = [("model", HyperParams.from_dict({"L": m.L, "N": m.N, "optimizer": o.kind,
                                                 "hidden_activation": m.hidden_activation,
                                                 "output_activation": m.output_activation}))]
    outputs, traces = [], []
    for tag, hp in jobs:
        model, result = _train_one(cfg, rows, hp, tag)
        text = save_checkpoint(model) + "\n"
        if tag != "model":
            (out / f"model_{tag}.json").write_text(text)
            outputs.append(out / f"model_{tag}.json")
        if tag == best_tag:
            (out / MODEL).write_text(text)
        traces.append((tag, result))
    outputs.append(out / MODEL)
    outputs.append(_write_trace(out / LOSS_TRACE, traces))
    _record(cfg, "train", inputs, outputs, train_rows=len(rows), models=[t for t, _ in jobs],
            best=best_tag)
    return outputs


def cmd_evaluate(cfg):
    out = Path(cfg.out)
    rows, inputs = _scaled(out, TEST, "preprocess")
    manifest = json.loads((out / MANIFEST).read_text()) if (out / MANIFEST).exists() else {}
    tags = [t for t in manifest.get("train", {}).get("models", []) if t != "model"]
    model_paths = [_need(out, MODEL, "train")] + [_need(out, f"model_{t}.json", "train") for t in tags]
    metrics = {}
    for path in model_paths:
        tag = "model" if path.name == MODEL else path.stem.removeprefix("model_")
        model = load_checkpoint(path.read_text())
        report = evaluate(model, rows)
        metrics[tag] = {"hyperparams": {"L": model.L, "N": model.N,
                                        "hidden_activation": model.hidden_activation.value,
                                        "output_activation": model.output_activation.value},
                        **report.to_dict()}
    dst = out / METRICS
    dst.write_text(json.dumps(metrics, indent=1, sort_keys=True) + "\n")
    _record(cfg, "evaluate", inputs + model_paths, [dst], test_rows=len(rows))
    return metrics


def _fmt(x, digits=3):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.{digits}f}"


def render_report(records, metrics=None):
    lines = ["## Random search results (k-fold means)", "",
             "| L | N | A_H | A_O | O | DR | FA | HD | Accuracy |",
             "|---|---|---|---|---|---|---|---|---|"]
    top = {id(r) for r in select_top(records, per_layer_count=True)}
    for r in sorted(records, key=lambda r: (r.hyperparams.L, r.iteration)):
        hp = r.hyperparams
        mark = "**" if id(r) in top else ""
        cells = [hp.L, hp.N, hp.hidden_activation.label, hp.output_activation.label,
                 hp.optimizer.value, _fmt(r.mean_dr), _fmt(r.mean_fa), _fmt(r.mean_hd),
                 _fmt(r.mean_accuracy)]
        if r.failed:
            cells[-1] += " (failed)"
        lines.append("| " + " | ".join(f"{mark}{c}{mark}" for c in cells) + " |")
    if metrics:
        tags = [t for t in sorted(metrics) if t.startswith("MD")] or ["model"]
        lines += ["", "## Test-set performance (%)", "",
                  "| | " + " | ".join(tags) + " |", "|---|" + "---|" * len(tags)]
        for key, label in (("dr", "DR"), ("fa", "FA"), ("hd", "HD")):
            lines.append(f"| {label} | " + " | ".join(_fmt(100 * metrics[t][key], 1) for t in tags) + " |")
    return "\n".join(lines) + "\n"


def cmd_report(cfg):
    out = Path(cfg.out)
    src = _need(out, SEARCH_JSON, "search")
    with open(src) as fp:
        records = read_results_json(fp)
    inputs = [src]
    metrics = None
    if (out / METRICS).exists():
        inputs.append(out / METRICS)
        metrics = json.loads((out / METRICS).read_text())
    text = render_report(records, metrics)
    dst = out / REPORT
    dst.write_text(text)
    _record(cfg, "report", inputs, [dst], rows=len(records))
    return text


def cmd_pipeline(cfg):
    if cfg.data.synthetic is not None:
        cmd_synth(cfg)
    cmd_attack(cfg)
    cmd_preprocess(cfg)
    cmd_search(cfg)
    cmd_train(cfg)
    cmd_evaluate(cfg)
    return cmd_report(cfg)


COMMANDS = {
    "synth": cmd_synth,
    "attack": cmd_attack,
    "preprocess": cmd_preprocess,
    "search": cmd_search,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "pipeline": cmd_pipeline,
}

