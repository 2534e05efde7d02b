"""Random hyper-parameter search with k-fold cross-validation."""

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .nn import HIDDEN_ACTIVATIONS, OUTPUT_ACTIVATIONS, Activation, init_model
from .optim import OptimizerConfig, OptimizerKind
from .seeding import stream
from .training import MetricsReport, TrainingAborted, evaluate, train

log = logging.getLogger(__name__)


@dataclass
class SearchSpace:
    layer_counts: tuple = (2, 3, 4)
    neuron_range: tuple = (100, 500)
    optimizers: tuple = tuple(OptimizerKind)
    hidden_activations: tuple = HIDDEN_ACTIVATIONS
    output_activations: tuple = OUTPUT_ACTIVATIONS

    def __post_init__(self):
        self.layer_counts = tuple(int(x) for x in self.layer_counts)
        self.neuron_range = tuple(int(x) for x in self.neuron_range)
        self.optimizers = tuple(OptimizerKind.parse(o) for o in self.optimizers)
        self.hidden_activations = tuple(Activation.parse(a) for a in self.hidden_activations)
        self.output_activations = tuple(Activation.parse(a) for a in self.output_activations)
        for name in ("layer_counts", "optimizers", "hidden_activations", "output_activations"):
            if not getattr(self, name):
                raise ValueError(f"search space {name} is empty")
        lo, hi = self.neuron_range
        if lo < 1 or hi < lo:
            raise ValueError(f"invalid neuron_range {self.neuron_range}")
        if min(self.layer_counts) < 1:
            raise ValueError("layer counts must be >= 1")
        if any(a not in HIDDEN_ACTIVATIONS for a in self.hidden_activations):
            raise ValueError("invalid hidden activation in search space")
        if any(a not in OUTPUT_ACTIVATIONS for a in self.output_activations):
            raise ValueError("invalid output activation in search space")


@dataclass
class HyperParams:
    L: int
    N: int
    optimizer: OptimizerKind
    hidden_activation: Activation
    output_activation: Activation

    def to_dict(self):
        return {"L": self.L, "N": self.N, "optimizer": self.optimizer.value,
                "hidden_activation": self.hidden_activation.value,
                "output_activation": self.output_activation.value}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["L"]), int(d["N"]), OptimizerKind.parse(d["optimizer"]),
                   Activation.parse(d["hidden_activation"]), Activation.parse(d["output_activation"]))


def _pick(seq, rng):
    return seq[int(rng.integers(len(seq)))]


def sample_hyperparams(space, rng):
    """One independent uniform draw per component; N uniform on the integer range."""
    lo, hi = space.neuron_range
    return HyperParams(
        L=_pick(space.layer_counts, rng),
        N=int(rng.integers(lo, hi, endpoint=True)),
        optimizer=_pick(space.optimizers, rng),
        hidden_activation=_pick(space.hidden_activations, rng),
        output_activation=_pick(space.output_activations, rng),
    )


def kfold_split(n, K, rng):
    """K (train_idx, val_idx) pairs over a shuffled range(n); fold sizes differ by <= 1."""
    if K < 2:
        raise ValueError("K must be >= 2")
    if n < K:
        raise ValueError(f"cannot make {K} folds from {n} rows")
    folds = np.array_split(rng.permutation(n), K)
    return [(np.concatenate(folds[:i] + folds[i + 1:]), folds[i]) for i in range(K)]


@dataclass
class SearchRecord:
    iteration: int
    hyperparams: HyperParams
    fold_metrics: list = field(default_factory=list)
    failed: bool = False
    error: str = ""

    def _mean(self, attr):
        if self.failed or not self.fold_metrics:
            return math.nan
        return float(np.mean([getattr(m, attr) for m in self.fold_metrics]))

    @property
    def mean_dr(self):
        return self._mean("dr")

    @property
    def mean_fa(self):
        return self._mean("fa")

    @property
    def mean_hd(self):
        return self._mean("hd")

    @property
    def mean_accuracy(self):
        return self._mean("accuracy")

    def to_dict(self):
        return {"iteration": self.iteration, "hyperparams": self.hyperparams.to_dict(),
                "fold_metrics": [m.to_dict() for m in self.fold_metrics],
                "mean_dr": self.mean_dr, "mean_fa": self.mean_fa, "mean_hd": self.mean_hd,
                "mean_accuracy": self.mean_accuracy, "failed": self.failed, "error": self.error}

    @classmethod
    def from_dict(cls, d):
        return cls(d["iteration"], HyperParams.from_dict(d["hyperparams"]),
                   [MetricsReport(**m) for m in d["fold_metrics"]], d["failed"], d["error"])


def _fold_config(train_config, hp):
    opt = train_config.optimizer
    if opt.kind != hp.optimizer:
        opt = OptimizerConfig(hp.optimizer)
    return replace(train_config, optimizer=opt)


def run_iteration(i, X, y, space, K, train_config, seed, reinit_per_fold=True,
                  literal_layer_softmax=False):
    rng = stream(seed, "search", i)
    hp = sample_hyperparams(space, rng)
    record = SearchRecord(i, hp)
    folds = kfold_split(len(X), K, stream(seed, "folds"))
    config = _fold_config(train_config, hp)
    model = None
    for j, (tr, va) in enumerate(folds):
        if model is None or reinit_per_fold:
            model = init_model(hp.L, hp.N, X.shape[1], hp.hidden_activation, hp.output_activation,
                               rng=stream(seed, "search", i, "init", j),
                               literal_layer_softmax=literal_layer_softmax)
        try:
            train(model, (X[tr], y[tr]), config, rng=stream(seed, "search", i, "train", j))
        except TrainingAborted as exc:
            record.failed = True
            record.error = f"fold {j}: {exc}"
            log.warning("iteration %d %s", i, record.error)
            break
        record.fold_metrics.append(evaluate(model, (X[va], y[va])))
    log.info("iteration %d L=%d N=%d %s/%s %s HD=%.3f", i, hp.L, hp.N, hp.hidden_activation.value,
             hp.output_activation.value, hp.optimizer.value, record.mean_hd)
    return record


def random_search(rows, space, iterations, K, train_config, seed, reinit_per_fold=True,
                  literal_layer_softmax=False, jobs=1):
    """Evaluate ``iterations`` sampled configurations by K-fold CV on ``rows``.

    Iteration i draws from its own named stream, so results are identical for
    any ``jobs``. Aborted trainings are kept as failed records.
    """
    X, y = rows.features, rows.labels
    args = (X, y, space, K, train_config, seed, reinit_per_fold, literal_layer_softmax)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_iteration, i, *args) for i in range(iterations)]
            return [f.result() for f in futures]
    return [run_iteration(i, *args) for i in range(iterations)]


def _rank_key(r):
    hd = r.mean_hd
    fa = r.mean_fa
    return (-(hd if not math.isnan(hd) else -math.inf),
            fa if not math.isnan(fa) else math.inf,
            r.hyperparams.N, r.iteration)


def select_top(records, per_layer_count=True, top=3):
    """Rank by mean HD (ties: lower FA, then lower N).

    With ``per_layer_count`` return the best record for each layer count in
    ascending L order; otherwise the global top ``top``.
    """
    if not records:
        raise ValueError("no records to rank")
    ranked = sorted(records, key=_rank_key)
    if not per_layer_count:
        return ranked[:top]
    best = {}
    for r in ranked:
        best.setdefault(r.hyperparams.L, r)
    return [best[L] for L in sorted(best)]


RESULT_COLUMNS = ["iteration", "L", "N", "A_H", "A_O", "O", "DR", "FA", "HD", "Accuracy", "failed"]


def write_results_csv(records, fp):
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in records:
        hp = r.hyperparams
        w.writerow([r.iteration, hp.L, hp.N, hp.hidden_activation.label, hp.output_activation.label,
                    hp.optimizer.value, repr(r.mean_dr), repr(r.mean_fa), repr(r.mean_hd),
                    repr(r.mean_accuracy), int(r.failed)])


def write_results_json(records, fp):
    json.dump([r.to_dict() for r in records], fp, indent=1)


def read_results_json(fp):
    return [SearchRecord.from_dict(d) for d in json.load(fp)]
