"""Mini-batch training loop and detection metrics."""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .attacks import LabeledSet
from .nn import cross_entropy, model_backward, model_forward, one_hot, predict_classes
from .optim import Optimizer, OptimizerConfig

log = logging.getLogger(__name__)

EVAL_BATCH = 2048


class TrainingAborted(FloatingPointError):
    def __init__(self, epoch, batch, reason):
        super().__init__(f"training aborted at epoch {epoch}, batch {batch}: {reason}")
        self.epoch = epoch
        self.batch = batch


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 350
    dropout_rate: float = 0.2
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if isinstance(self.optimizer, dict):
            self.optimizer = OptimizerConfig(**self.optimizer)
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")


@dataclass
class TrainResult:
    model: object
    losses: list  # one entry per mini-batch, epoch-major
    batches_per_epoch: int

    def epoch_means(self):
        m = self.batches_per_epoch
        return [float(np.mean(self.losses[i:i + m])) for i in range(0, len(self.losses), m)]


def _as_arrays(rows):
    if isinstance(rows, LabeledSet):
        return rows.features, rows.labels
    X, y = rows
    return np.asarray(X, dtype=np.float64), np.asarray(y)


def train(model, rows, config, rng=None):
    """Fit ``model`` in place on scaled rows; returns the per-batch loss trace.

    Each epoch reshuffles and walks ceil(S / batch_size) mini-batches (the
    last may be short): forward with dropout, loss, BPTT, optimizer step.
    """
    X, labels = _as_arrays(rows)
    S = len(X)
    if S == 0:
        raise ValueError("empty training set")
    if config.batch_size > S:
        log.info("batch_size %d exceeds %d rows; using one batch", config.batch_size, S)
    K = min(config.batch_size, S)
    M = math.ceil(S / K)
    Y = one_hot(labels)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    opt = Optimizer(config.optimizer)
    params = model.tensors()
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(S)
        for m in range(M):
            idx = order[m * K:(m + 1) * K]
            # overflow is caught just below and turned into TrainingAborted
            with np.errstate(over="ignore", invalid="ignore"):
                probs, cache = model_forward(model, X[idx], training=True,
                                             dropout_rate=config.dropout_rate, rng=rng)
                loss = cross_entropy(probs, Y[idx])
            if not math.isfinite(loss) or not np.isfinite(probs).all():
                raise TrainingAborted(epoch, m, f"non-finite loss {loss}")
            grads = model_backward(model, cache, Y[idx])
            try:
                opt.step(params, grads)
            except FloatingPointError as exc:
                raise TrainingAborted(epoch, m, str(exc)) from exc
            model.version += 1
            losses.append(loss)
        log.debug("epoch %d mean loss %.5f", epoch, np.mean(losses[-M:]))
    return TrainResult(model, losses, M)


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    dr: float
    fa: float
    hd: float
    accuracy: float

    def to_dict(self):
        return asdict(self)


def metrics_from_counts(tp, fp, tn, fn):
    """Malicious is the positive class. Empty denominators give 0."""
    total = tp + fp + tn + fn
    if total == 0:
        raise ValueError("no rows evaluated")
    dr = tp / (tp + fn) if tp + fn else 0.0
    fa = fp / (fp + tn) if fp + tn else 0.0
    return MetricsReport(int(tp), int(fp), int(tn), int(fn), dr, fa, dr - fa, (tp + tn) / total)


def confusion_metrics(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    tp = int(((y_true == 1) & (y_pred == 1)).sum())
    fp = int(((y_true == 0) & (y_pred == 1)).sum())
    tn = int(((y_true == 0) & (y_pred == 0)).sum())
    fn = int(((y_true == 1) & (y_pred == 0)).sum())
    return metrics_from_counts(tp, fp, tn, fn)


def predict_proba(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    out = [model_forward(model, X[i:i + EVAL_BATCH])[0] for i in range(0, len(X), EVAL_BATCH)]
    return np.vstack(out) if out else np.empty((0, 2))


def evaluate(model, rows):
    X, labels = _as_arrays(rows)
    if len(X) == 0:
        raise ValueError("nothing to evaluate")
    return confusion_metrics(labels, predict_classes(predict_proba(model, X)))


def predict(model, day):
    """Class label (1 malicious, 0 honest) and the (malicious, honest) probabilities."""
    day = np.asarray(day, dtype=np.float64)
    if day.ndim != 1 or day.size != model.seq_len:
        raise ValueError(f"expected a day vector of length {model.seq_len}")
    p = predict_proba(model, day)
    return int(predict_classes(p)[0]), (float(p[0, 0]), float(p[0, 1]))
