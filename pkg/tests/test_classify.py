import numpy as np
import pytest

from irisrec.classify import (MLP, TrainConfig, accuracy, metrics_from_predictions,
                              parameter_count, stratified_split, train)
from irisrec.errors import DimensionMismatch

import oracles


def test_parameter_count_formula():
    assert parameter_count([100, 1000, 400, 200]) == 581_600
    assert MLP([3, 4, 2]).parameter_count() == 3 * 4 + 4 + 4 * 2 + 2


def test_zero_weights_give_uniform_probabilities(rng):
    net = MLP([5, 6, 4])
    net.set_parameters([np.zeros_like(p) for p in net.parameters()])
    assert np.allclose(net.forward(rng.standard_normal((3, 5))), 0.25)


def test_probabilities_sum_to_one_and_inference_is_deterministic(rng):
    net = MLP([7, 20, 10, 5], seed=4)
    x = rng.standard_normal((9, 7)) * 10
    p = net.forward(x)
    assert np.allclose(p.sum(axis=1), 1)
    assert np.array_equal(p, net.forward(x))
    assert not np.array_equal(net.forward(x, training=True, rng=np.random.default_rng(1)), p)


def test_gradients_with_dropout_mask(rng):
    net = MLP([4, 8, 3], dropout=0.0, seed=2)
    x = rng.standard_normal((5, 4))
    y = rng.integers(0, 3, 5)
    assert oracles.gradient_check(net, x, y) < 1e-4


def test_separable_toy_set_is_learned():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((100, 2))
    y = (x[:, 0] + 0.5 * x[:, 1] > 0).astype(int)
    x = x + np.where(y[:, None] == 1, 0.5, -0.5)
    net = MLP([2, 16, 2], seed=1)
    cfg = TrainConfig(max_epochs=50, learning_rate=1e-2, dropout=0.0, batch_size=8)
    hist = train(net, x, y, cfg)
    assert len(hist) <= 50 and accuracy(net, x, y) == 1.0


def test_training_is_reproducible(rng):
    x = rng.standard_normal((30, 6))
    y = rng.integers(0, 3, 30)
    cfg = TrainConfig(max_epochs=5, learning_rate=1e-3)
    a, b = MLP([6, 10, 3], seed=9), MLP([6, 10, 3], seed=9)
    ha, hb = train(a, x, y, cfg, x[:6], y[:6]), train(b, x, y, cfg, x[:6], y[:6])
    assert ha == hb
    assert all(np.array_equal(p, q) for p, q in zip(a.parameters(), b.parameters()))


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        MLP([3, 2]).forward(np.zeros((1, 4)))


def test_bad_config():
    with pytest.raises(ValueError):
        TrainConfig(train_frac=0.5, val_frac=0.2, test_frac=0.2)
    with pytest.raises(ValueError):
        TrainConfig(dropout=1.0)


def test_metrics_perfect_and_single_class():
    m = metrics_from_predictions([0, 1, 2, 2], [0, 1, 2, 2])
    assert m.accuracy == 1 and m.macro_precision == 1 and m.macro_f_score == 1
    m = metrics_from_predictions([4, 4, 4], [4, 4, 4])
    assert m.classes == [4] and m.precision == [1.0] and m.sensitivity == [1.0] and m.f_score == [1.0]


def test_metrics_match_confusion_oracle(rng):
    for _ in range(20):
        t = rng.integers(0, 3, 25)
        p = rng.integers(0, 3, 25)
        m = metrics_from_predictions(t, p)
        conf = np.zeros((3, 3), int)
        for a, b in zip(t, p):
            conf[a, b] += 1
        for k, c in enumerate(m.classes):
            tp = conf[c, c]
            prec = tp / conf[:, c].sum() if conf[:, c].sum() else 0.0
            rec = tp / conf[c].sum()
            f = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
            assert m.precision[k] == prec and m.sensitivity[k] == rec and m.f_score[k] == f
        assert m.accuracy == np.trace(conf) / 25


def test_stratified_split_counts():
    labels = np.repeat(np.arange(20), 10)
    tr, va, te = stratified_split(labels, TrainConfig(seed=3))
    assert (len(tr), len(va), len(te)) == (120, 40, 40)
    assert len(set(tr) | set(va) | set(te)) == 200
    for part, k in ((tr, 6), (va, 2), (te, 2)):
        assert np.all(np.bincount(labels[part], minlength=20) == k)
    again = stratified_split(labels, TrainConfig(seed=3))
    assert all(np.array_equal(a, b) for a, b in zip((tr, va, te), again))
