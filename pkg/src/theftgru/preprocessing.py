"""Class balancing (ADASYN), per-customer train/test split and feature scaling."""

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .attacks import HONEST, LabeledSet, Provenance

log = logging.getLogger(__name__)

DEGENERATE_STD = 1e-12


class AdasynError(ValueError):
    pass


def _largest_remainder(weights, total):
    """Integer allocation of ``total`` proportional to ``weights`` (sums exactly)."""
    raw = weights * total
    counts = np.floor(raw).astype(np.int64)
    short = int(total - counts.sum())
    if short:
        # stable order keeps ties deterministic
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def _nearest(dist, k):
    return np.argsort(dist, axis=1, kind="stable")[:, :k]


def adasyn_oversample(rows, k_neighbors=5, rng=None):
    """Oversample the honest minority class until both classes are equal.

    Each minority row x_i receives a share of the deficit proportional to the
    fraction of majority rows among its ``k_neighbors`` nearest neighbours
    (Euclidean, whole dataset). Its synthetic rows are drawn on segments
    ``x_i + lam * (x_z - x_i)`` with ``x_z`` one of its k nearest minority
    neighbours and ``lam ~ U(0, 1)``. Synthetic rows are appended after the
    originals with provenance ADASYN.
    """
    if rng is None:
        raise ValueError("an explicit rng is required")
    if k_neighbors < 1:
        raise AdasynError("k_neighbors must be >= 1")
    labels = rows.labels
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise AdasynError("ADASYN needs both classes present")
    if counts[0] == counts[1]:
        return rows
    minority = classes[np.argmin(counts)]
    if minority != HONEST:
        raise AdasynError("minority class is malicious; only honest rows are synthesized")
    X = rows.features
    min_idx = np.flatnonzero(labels == minority)
    ms, ml = len(min_idx), len(labels) - len(min_idx)
    if ms < k_neighbors + 1:
        raise AdasynError(
            f"minority class has {ms} rows, need >= {k_neighbors + 1}; use a smaller k_neighbors")

    Xmin = X[min_idx]
    d_all = cdist(Xmin, X, "sqeuclidean")
    d_all[np.arange(ms), min_idx] = np.inf  # exclude self
    nn_all = _nearest(d_all, k_neighbors)
    ratio = (labels[nn_all] != minority).sum(axis=1) / k_neighbors
    if ratio.sum() > 0:
        density = ratio / ratio.sum()
    else:
        # no majority neighbours anywhere: fall back to uniform allocation
        density = np.full(ms, 1.0 / ms)
    per_point = _largest_remainder(density, ml - ms)

    d_min = cdist(Xmin, Xmin, "sqeuclidean")
    np.fill_diagonal(d_min, np.inf)
    nn_min = _nearest(d_min, k_neighbors)

    src = np.repeat(np.arange(ms), per_point)
    partner = nn_min[src, rng.integers(0, k_neighbors, size=len(src))]
    lam = rng.uniform(0.0, 1.0, size=(len(src), 1))
    synth = Xmin[src] + lam * (Xmin[partner] - Xmin[src])

    extra = LabeledSet(synth, np.full(len(src), HONEST), np.full(len(src), Provenance.ADASYN),
                       rows.customer_ids[min_idx][src])
    return LabeledSet.concat([rows, extra])


@dataclass
class SplitDataset:
    train: LabeledSet
    test: LabeledSet


def split_train_test(per_customer, rng):
    """Shuffle each customer's rows and send the first floor(3n/5) to train.

    ``per_customer`` maps customer id to a LabeledSet. Customers with fewer
    than five rows go entirely to train.
    """
    train, test = [], []
    T = None
    for cid, rows in per_customer.items():
        T = rows.T
        n = len(rows)
        perm = rng.permutation(n)
        if n < 5:
            log.warning("customer %s has only %d rows; assigning all to train", cid, n)
            cut = n
        else:
            cut = 3 * n // 5
        train.append(rows[perm[:cut]])
        test.append(rows[perm[cut:]])
    if T is None:
        raise ValueError("no customers to split")
    return SplitDataset(LabeledSet.concat(train), LabeledSet.concat(test))


@dataclass
class Scaler:
    means: np.ndarray
    stds: np.ndarray

    @property
    def T(self):
        return len(self.means)

    def to_json(self):
        return json.dumps({"T": self.T, "means": self.means.tolist(), "stds": self.stds.tolist()},
                          indent=1)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        s = cls(np.array(doc["means"], dtype=np.float64), np.array(doc["stds"], dtype=np.float64))
        if s.T != doc["T"] or len(s.stds) != s.T:
            raise ValueError("scaler document dimensions disagree")
        if not (s.stds > 0).all():
            raise ValueError("scaler stds must be positive")
        return s


def fit_scaler(rows):
    """Per-period population mean and std; zero-variance periods scale by 1."""
    X = rows.features if isinstance(rows, LabeledSet) else np.asarray(rows, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise ValueError("fit_scaler needs at least two training rows")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds[stds < DEGENERATE_STD] = 1.0
    return Scaler(means, stds)


class AlreadyScaled(RuntimeError):
    pass


def apply_scaler(scaler, rows):
    """Z-score ``rows`` with train-time scores.

    Scaling is not idempotent, so a LabeledSet that was already scaled is
    refused; plain arrays are transformed unconditionally.
    """
    if isinstance(rows, LabeledSet):
        if getattr(rows, "scaled", False):
            raise AlreadyScaled("rows are already scaled")
        if rows.T != scaler.T:
            raise ValueError(f"scaler has T={scaler.T}, rows have T={rows.T}")
        out = rows.with_features((rows.features - scaler.means) / scaler.stds)
        out.scaled = True
        return out
    X = np.asarray(rows, dtype=np.float64)
    if X.shape[-1] != scaler.T:
        raise ValueError(f"scaler has T={scaler.T}, rows have T={X.shape[-1]}")
    return (X - scaler.means) / scaler.stds
