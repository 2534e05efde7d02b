"""Electricity-theft attack functions and labeled dataset assembly.

Six attack functions turn an honest day of readings into a reduced report:

    F1  alpha * E(t)                      flat fraction, one alpha per matrix
    F2  beta(d,t) * E(t)                  per-reading fraction
    F3  0 inside [t_i, t_f], else E(t)    zeroed window (1-based, inclusive)
    F4  mean(E)                           flat daily mean
    F5  beta(d,t) * mean(E)
    F6  E(T - t + 1)                      time reversal
"""

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .data import period_columns

FRACTION_LOW, FRACTION_HIGH = 0.1, 0.8
T_START_MAX = 42
DURATION_MIN, DURATION_MAX = 8, 48


class AttackKind(enum.IntEnum):
    F1 = 1
    F2 = 2
    F3 = 3
    F4 = 4
    F5 = 5
    F6 = 6


class Provenance(enum.IntEnum):
    REAL = 0
    F1 = 1
    F2 = 2
    F3 = 3
    F4 = 4
    F5 = 5
    F6 = 6
    ADASYN = 7


HONEST, MALICIOUS = 0, 1


class InvalidParams(ValueError):
    pass


@dataclass
class AttackParams:
    """Parameters of one attacked matrix.

    ``beta`` is a (days, T) grid; ``t_start``/``duration`` hold one value per
    day. Only the fields used by ``kind`` need to be set.
    """

    kind: AttackKind
    alpha: float = None
    beta: np.ndarray = None
    t_start: np.ndarray = None
    duration: np.ndarray = None

    def check(self, days, T):
        k = self.kind
        if k == AttackKind.F1:
            if self.alpha is None:
                raise InvalidParams("F1 requires alpha")
            if not FRACTION_LOW <= self.alpha <= FRACTION_HIGH:
                raise InvalidParams(f"alpha={self.alpha} outside [0.1, 0.8]")
        elif k in (AttackKind.F2, AttackKind.F5):
            if self.beta is None:
                raise InvalidParams(f"{k.name} requires a beta grid")
            beta = np.asarray(self.beta)
            if beta.shape != (days, T):
                raise InvalidParams(f"beta grid shape {beta.shape}, expected {(days, T)}")
            if beta.min() < FRACTION_LOW or beta.max() > FRACTION_HIGH:
                raise InvalidParams("beta values outside [0.1, 0.8]")
        elif k == AttackKind.F3:
            if self.t_start is None or self.duration is None:
                raise InvalidParams("F3 requires t_start and duration")
            ts, du = np.asarray(self.t_start), np.asarray(self.duration)
            if ts.shape != (days,) or du.shape != (days,):
                raise InvalidParams("t_start/duration need one entry per day")
            # support [0,42] x [8,48] is enforced at sampling; any non-empty window applies
            if (ts < 0).any() or (du < 1).any():
                raise InvalidParams("t_start must be >= 0 and duration >= 1")


def _window_mask(t_start, duration, T):
    """Boolean (days, T) mask of zeroed periods, from 1-based inclusive windows."""
    t_start = np.asarray(t_start)
    t_i = np.maximum(t_start, 1)
    t_f = np.minimum(t_start + np.asarray(duration), T)
    periods = np.arange(1, T + 1)
    return (periods >= t_i[:, None]) & (periods <= t_f[:, None])


def apply_attack_matrix(values, params):
    """Apply one attack to every day (row) of ``values``."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"expected a (days, T) matrix, got shape {values.shape}")
    days, T = values.shape
    params.check(days, T)
    k = params.kind
    if k == AttackKind.F1:
        return params.alpha * values
    if k == AttackKind.F2:
        return np.asarray(params.beta) * values
    if k == AttackKind.F3:
        out = values.copy()
        out[_window_mask(params.t_start, params.duration, T)] = 0.0
        return out
    mean = values.mean(axis=1, keepdims=True)
    if k == AttackKind.F4:
        return np.repeat(mean, T, axis=1)
    if k == AttackKind.F5:
        return np.asarray(params.beta) * mean
    if k == AttackKind.F6:
        return values[:, ::-1].copy()
    raise InvalidParams(f"unknown attack kind {k!r}")


def _day_value(v, day_index):
    return v if np.ndim(v) == 0 else np.asarray(v)[day_index]


def apply_attack(day, params, day_index=0):
    """Attack a single day vector using row ``day_index`` of ``params``."""
    day = np.asarray(day, dtype=np.float64)
    if day.ndim != 1:
        raise ValueError(f"expected a day vector, got shape {day.shape}")
    T = day.size
    k = params.kind
    row = AttackParams(k, alpha=params.alpha)
    if params.beta is not None:
        beta = np.asarray(params.beta)
        beta = beta[day_index] if beta.ndim == 2 else beta
        if beta.shape != (T,):
            raise ValueError(f"beta row length {beta.shape}, day length {T}")
        row.beta = beta[None, :]
    if params.t_start is not None:
        row.t_start = np.array([_day_value(params.t_start, day_index)])
        row.duration = np.array([_day_value(params.duration, day_index)])
    return apply_attack_matrix(day[None, :], row)[0]


def sample_attack_params(kind, day_count, T, rng):
    """Draw parameters for one attacked matrix.

    One alpha per matrix; a fresh beta per (day, period); for F3 a per-day
    integer start in [0, 42] and duration in [8, 48].
    """
    kind = AttackKind(kind)
    p = AttackParams(kind)
    if kind == AttackKind.F1:
        p.alpha = float(rng.uniform(FRACTION_LOW, FRACTION_HIGH))
    elif kind in (AttackKind.F2, AttackKind.F5):
        p.beta = rng.uniform(FRACTION_LOW, FRACTION_HIGH, size=(day_count, T))
    elif kind == AttackKind.F3:
        p.t_start = rng.integers(0, T_START_MAX, size=day_count, endpoint=True)
        p.duration = rng.integers(DURATION_MIN, DURATION_MAX, size=day_count, endpoint=True)
    return p


@dataclass
class LabeledDay:
    features: np.ndarray
    label: int
    provenance: Provenance
    customer_id: str


class LabeledSet:
    """Columnar store of labeled day rows.

    Iterating yields :class:`LabeledDay` views; numeric stages work on the
    arrays directly.
    """

    def __init__(self, features, labels, provenance, customer_ids):
        self.features = np.asarray(features, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.provenance = np.asarray(provenance, dtype=np.int64)
        self.customer_ids = np.asarray(customer_ids, dtype=object)
        n = len(self.features)
        if self.features.ndim != 2:
            raise ValueError("features must be 2-D (rows, T)")
        if not (len(self.labels) == len(self.provenance) == len(self.customer_ids) == n):
            raise ValueError("column lengths differ")

    @classmethod
    def empty(cls, T):
        return cls(np.empty((0, T)), [], [], [])

    @classmethod
    def concat(cls, sets):
        sets = list(sets)
        return cls(np.vstack([s.features for s in sets]),
                   np.concatenate([s.labels for s in sets]),
                   np.concatenate([s.provenance for s in sets]),
                   np.concatenate([s.customer_ids for s in sets]))

    @property
    def T(self):
        return self.features.shape[1]

    def __len__(self):
        return len(self.features)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return LabeledDay(self.features[idx], int(self.labels[idx]),
                              Provenance(self.provenance[idx]), self.customer_ids[idx])
        return LabeledSet(self.features[idx], self.labels[idx],
                          self.provenance[idx], self.customer_ids[idx])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def with_features(self, features):
        return LabeledSet(features, self.labels, self.provenance, self.customer_ids)

    def by_customer(self):
        """Split into per-customer sets, in order of first appearance."""
        order = dict.fromkeys(self.customer_ids.tolist())
        return {c: self[self.customer_ids == c] for c in order}

    def check(self):
        honest = np.isin(self.provenance, [Provenance.REAL, Provenance.ADASYN])
        if not np.array_equal(honest, self.labels == HONEST):
            raise ValueError("label/provenance mismatch")
        if not np.isfinite(self.features).all():
            raise ValueError("non-finite feature values")


def build_labeled_dataset(m, rng):
    """Honest days of ``m`` followed by six attacked copies (F1..F6)."""
    values = np.asarray(m.values, dtype=np.float64)
    D, T = values.shape
    blocks = [values]
    prov = [np.full(D, Provenance.REAL)]
    for kind in AttackKind:
        params = sample_attack_params(kind, D, T, rng)
        blocks.append(apply_attack_matrix(values, params))
        prov.append(np.full(D, Provenance(int(kind))))
    prov = np.concatenate(prov)
    labels = np.where(prov == Provenance.REAL, HONEST, MALICIOUS)
    return LabeledSet(np.vstack(blocks), labels, prov, np.full(len(prov), m.customer_id, dtype=object))


def write_dataset_csv(rows, fp):
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(["customer_id", "provenance", "label"] + period_columns(rows.T))
    for cid, prov, label, feats in zip(rows.customer_ids, rows.provenance, rows.labels, rows.features):
        w.writerow([cid, Provenance(prov).name, int(label)] + [repr(float(v)) for v in feats])


def read_dataset_csv(fp):
    reader = csv.reader(fp)
    header = next(reader)
    if header[:3] != ["customer_id", "provenance", "label"]:
        raise ValueError(f"unexpected header {header[:3]}")
    cids, prov, labels, feats = [], [], [], []
    for rec in reader:
        cids.append(rec[0])
        prov.append(Provenance[rec[1]])
        labels.append(int(rec[2]))
        feats.append([float(v) for v in rec[3:]])
    T = len(header) - 3
    if not feats:
        return LabeledSet.empty(T)
    return LabeledSet(np.array(feats), labels, prov, np.array(cids, dtype=object))
