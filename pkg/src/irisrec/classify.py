"""Fully connected ReLU network with dropout, trained by Adam on cross-entropy.

Everything is plain numpy in float64 so runs are reproducible from a seed.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionMismatch, NumericalDivergence


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    batch_size: int = 8
    learning_rate: float = 1e-4
    dropout: float = 0.2
    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    early_stop_patience: int = 10

    def __post_init__(self):
        if abs(self.train_frac + self.val_frac + self.test_frac - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if min(self.learning_rate, self.batch_size, self.max_epochs) <= 0:
            raise ValueError("learning rate, batch size and epochs must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")

    def to_dict(self):
        return asdict(self)


def parameter_count(layer_sizes):
    return sum(a * b + b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


def log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class MLP:
    """``layer_sizes = [inputs, hidden..., classes]``; ReLU hidden units, softmax output."""

    def __init__(self, layer_sizes, dropout=0.2, seed=0, zero_output=False):
        self.layer_sizes = [int(s) for s in layer_sizes]
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        self.dropout = float(dropout)
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for i, (fan_in, fan_out) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            last = i == len(self.layer_sizes) - 2
            if last and zero_output:
                w = np.zeros((fan_in, fan_out))
            else:
                limit = np.sqrt(6.0 / fan_in)   # He-uniform
                w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def n_classes(self):
        return self.layer_sizes[-1]

    def parameters(self):
        """Flat list ``[W1, b1, W2, b2, ...]`` (views, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_parameters(self, params):
        params = [np.array(p, dtype=np.float64) for p in params]
        self.weights = params[0::2]
        self.biases = params[1::2]

    def parameter_count(self):
        return sum(p.size for p in self.parameters())

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.layer_sizes[0]:
            raise DimensionMismatch(f"expected {self.layer_sizes[0]} inputs, got {x.shape[-1]}")
        return x

    def _forward(self, x, rng=None, dropout=None):
        """Returns the logits and per-layer caches ``(input, pre-activation, mask)``."""
        rate = self.dropout if dropout is None else dropout
        caches = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if i == last:
                caches.append((h, z, None))
                return z, caches
            a = np.maximum(z, 0.0)
            mask = None
            if rng is not None and rate > 0:
                # inverted dropout keeps the expected activation unchanged
                mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
                a = a * mask
            caches.append((h, z, mask))
            h = a

    def forward(self, x, training=False, rng=None):
        """Class probabilities; dropout is applied only when ``training`` is set."""
        x = self._check(x)
        if training and rng is None:
            rng = np.random.default_rng()
        logits, _ = self._forward(x, rng if training else None)
        return softmax(logits)

    def predict(self, x):
        return np.argmax(self.forward(x), axis=-1)

    def loss_and_grads(self, x, y, rng=None, dropout=None):
        """Mean cross-entropy over the batch and its gradient for every parameter."""
        x = self._check(np.atleast_2d(x))
        y = np.asarray(y, dtype=np.int64)
        logits, caches = self._forward(x, rng, dropout)
        logp = log_softmax(logits)
        n = x.shape[0]
        loss = -logp[np.arange(n), y].mean()
        delta = np.exp(logp)
        delta[np.arange(n), y] -= 1.0
        delta /= n
        grads = []
        for i in range(len(self.weights) - 1, -1, -1):
            h, z, _ = caches[i]
            gw = h.T @ delta
            gb = delta.sum(axis=0)
            grads = [gw, gb] + grads
            if i == 0:
                break
            delta = delta @ self.weights[i].T
            _, z_prev, mask_prev = caches[i - 1]
            if mask_prev is not None:
                delta = delta * mask_prev
            delta = delta * (z_prev > 0)
        return float(loss), grads


class Adam:
    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def cross_entropy(model, x, y):
    logp = log_softmax(model._forward(model._check(x))[0])
    return float(-logp[np.arange(len(y)), np.asarray(y)].mean())


def accuracy(model, x, y):
    return float(np.mean(model.predict(x) == np.asarray(y)))


def train(model, x, y, cfg=None, x_val=None, y_val=None):
    """Minibatch Adam with early stopping on validation loss.

    Without a validation set the training loss is monitored instead. The
    parameters with the best monitored loss are restored at the end. Returns
    the per-epoch history as a list of dicts.
    """
    cfg = cfg or TrainConfig()
    x = model._check(x)
    y = np.asarray(y, dtype=np.int64)
    model.dropout = cfg.dropout
    rng = np.random.default_rng([cfg.seed, 1])
    opt = Adam(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    have_val = x_val is not None and len(x_val) > 0
    best = np.inf
    best_params = [p.copy() for p in model.parameters()]
    stale = 0
    history = []
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(x))
        losses = []
        for start in range(0, len(x), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = model.loss_and_grads(x[idx], y[idx], rng)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise NumericalDivergence(epoch)
            opt.step(model.parameters(), grads)
            losses.append(loss * len(idx))
        record = {
            "epoch": epoch,
            "train_loss": float(np.sum(losses) / len(x)),
            "val_loss": cross_entropy(model, x_val, y_val) if have_val else float("nan"),
            "train_acc": accuracy(model, x, y),
            "val_acc": accuracy(model, x_val, y_val) if have_val else float("nan"),
        }
        history.append(record)
        monitored = record["val_loss"] if have_val else record["train_loss"]
        if not np.isfinite(monitored):
            raise NumericalDivergence(epoch)
        if monitored < best:
            best = monitored
            best_params = [p.copy() for p in model.parameters()]
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break
    model.set_parameters(best_params)
    return history


@dataclass
class Metrics:
    accuracy: float
    classes: list
    precision: list
    sensitivity: list
    f_score: list
    support: list
    macro_precision: float
    macro_sensitivity: float
    macro_f_score: float
    total_support: int = field(default=0)

    def to_dict(self):
        return asdict(self)


def metrics_from_predictions(y_true, y_pred):
    """Per-class and macro precision / sensitivity / F-score.

    Only classes present in ``y_true`` enter the macro averages; a ratio with
    a zero denominator counts as 0.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.size == 0:
        raise ValueError("empty test set")
    classes = np.unique(y_true)
    prec, sens, f1, sup = [], [], [], []
    for c in classes:
        tp = int(np.sum((y_pred == c) & (y_true == c)))
        fp = int(np.sum((y_pred == c) & (y_true != c)))
        fn = int(np.sum((y_pred != c) & (y_true == c)))
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        prec.append(p)
        sens.append(r)
        f1.append(2 * p * r / (p + r) if p + r else 0.0)
        sup.append(tp + fn)
    return Metrics(
        accuracy=float(np.mean(y_true == y_pred)),
        classes=[int(c) for c in classes],
        precision=prec, sensitivity=sens, f_score=f1, support=sup,
        macro_precision=float(np.mean(prec)),
        macro_sensitivity=float(np.mean(sens)),
        macro_f_score=float(np.mean(f1)),
        total_support=int(y_true.size),
    )


def evaluate(model, x, y):
    return metrics_from_predictions(y, model.predict(x))


def stratified_split(labels, cfg=None, seed=None):
    """Per-class shuffle, then ``round(train*n)`` / ``round(val*n)`` / rest.

    Returns sorted index arrays ``(train, val, test)``; every class with at
    least one sample lands in the training part.
    """
    cfg = cfg or TrainConfig()
    seed = cfg.seed if seed is None else seed
    labels = np.asarray(labels)
    rng = np.random.default_rng([seed, 2])
    parts = ([], [], [])
    for c in np.unique(labels):
        idx = np.nonzero(labels == c)[0]
        idx = idx[rng.permutation(idx.size)]
        n = idx.size
        n_train = max(1, int(np.floor(cfg.train_frac * n + 0.5)))
        n_val = min(n - n_train, int(np.floor(cfg.val_frac * n + 0.5)))
        parts[0].extend(idx[:n_train])
        parts[1].extend(idx[n_train:n_train + n_val])
        parts[2].extend(idx[n_train + n_val:])
    return tuple(np.sort(np.array(p, dtype=np.int64)) for p in parts)
