import numpy as np
import pytest
from hypothesis import given, strategies as st

from theftgru.nn import init_model
from theftgru.optim import OptimizerConfig
from theftgru.training import (TrainConfig, TrainingAborted, confusion_metrics, evaluate,
                               metrics_from_counts, predict, train)


def toy_task(n=600, T=12, seed=0, margin=1.0):
    """Separable days: the labelled half (second for class 1) is lifted by ``margin``."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, T))
    y = rng.integers(0, 2, n)
    X[y == 1, T // 2:] += margin
    X[y == 0, :T // 2] += margin
    assert ((X[:, T // 2:].sum(1) > X[:, :T // 2].sum(1)) == y).all()
    return X, y


def toy_config(**kw):
    base = dict(epochs=10, batch_size=32, dropout_rate=0.0, seed=1,
                optimizer=OptimizerConfig("Adam"))
    base.update(kw)
    return TrainConfig(**base)


def test_toy_task_learned():
    X, y = toy_task()
    model = init_model(1, 8, X.shape[1], "sigmoid", "softmax", rng=np.random.default_rng(0))
    result = train(model, (X, y), toy_config())
    assert evaluate(model, (X, y)).accuracy >= 0.95
    means = result.epoch_means()
    assert len(result.losses) == 10 * result.batches_per_epoch
    assert means[-1] < means[0]


def test_single_batch_per_epoch():
    X, y = toy_task(50)
    model = init_model(1, 3, 12, rng=np.random.default_rng(0))
    result = train(model, (X, y), toy_config(epochs=3, batch_size=50))
    assert result.batches_per_epoch == 1 and len(result.losses) == 3
    model = init_model(1, 3, 12, rng=np.random.default_rng(0))
    assert train(model, (X, y), toy_config(epochs=1, batch_size=15)).batches_per_epoch == 4


def test_training_deterministic():
    X, y = toy_task(120)
    weights = []
    for _ in range(2):
        model = init_model(2, 4, 12, "tanh", "sigmoid", rng=np.random.default_rng(3))
        train(model, (X, y), toy_config(epochs=2, dropout_rate=0.2))
        weights.append(b"".join(a.tobytes() for a in model.tensors().values()))
    assert weights[0] == weights[1]


def test_empty_and_divergent_training():
    model = init_model(1, 2, 4, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        train(model, (np.empty((0, 4)), np.empty(0, dtype=int)), toy_config())
    X = np.random.default_rng(0).normal(0, 1e200, (10, 4))
    model = init_model(1, 2, 4, "relu", "softmax", rng=np.random.default_rng(0))
    model.layers[0].W[:] = 1e200
    with pytest.raises(TrainingAborted) as exc:
        train(model, (X, np.arange(10) % 2), toy_config(epochs=1))
    assert exc.value.epoch == 0 and exc.value.batch == 0


def test_metric_examples():
    m = metrics_from_counts(tp=3, fp=1, tn=3, fn=1)
    assert (m.dr, m.fa, m.hd, m.accuracy) == (0.75, 0.25, 0.5, 0.75)
    m = metrics_from_counts(tp=946, fn=54, fp=36, tn=964)
    assert (m.dr, m.fa) == (0.946, 0.036)
    assert round(m.hd, 12) == 0.91
    m = metrics_from_counts(tp=942, fn=58, fp=28, tn=972)
    assert round(m.hd, 12) == 0.914
    with pytest.raises(ValueError):
        metrics_from_counts(0, 0, 0, 0)


def test_constant_honest_predictor():
    model = init_model(1, 2, 4, rng=np.random.default_rng(0))
    model.b_o[:] = [-30.0, 30.0]
    y = np.arange(101) % 2
    m = evaluate(model, (np.random.default_rng(0).normal(0, 1, (101, 4)), y))
    assert (m.dr, m.fa, m.hd) == (0.0, 0.0, 0.0)
    assert abs(m.accuracy - 0.5) <= 1 / 101


def test_predict_examples():
    model = init_model(1, 2, 4, rng=np.random.default_rng(0))
    model.V[:] = 0
    model.b_o[:] = [np.log(0.9), np.log(0.1)]
    cls, (p_mal, p_hon) = predict(model, np.ones(4))
    assert cls == 1 and p_mal == pytest.approx(0.9)
    model.b_o[:] = 0
    assert predict(model, np.ones(4)) == (0, (0.5, 0.5))
    assert predict(model, np.ones(4)) == predict(model, np.ones(4))
    with pytest.raises(ValueError):
        predict(model, np.ones(5))


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50),
       st.integers(0, 2**32))
def test_metrics_order_invariant_and_hd_identity(pairs, seed):
    y, p = np.array(pairs).T
    a = confusion_metrics(y, p)
    perm = np.random.default_rng(seed).permutation(len(y))
    b = confusion_metrics(y[perm], p[perm])
    assert a == b
    assert a.hd == a.dr - a.fa


def test_evaluate_order_invariant():
    X, y = toy_task(80)
    model = init_model(1, 3, 12, rng=np.random.default_rng(0))
    perm = np.random.default_rng(1).permutation(80)
    assert evaluate(model, (X, y)) == evaluate(model, (X[perm], y[perm]))
