"""Softmax cross-entropy training by backpropagation through time.

A training sample is a pair ``(streams, target)``: a list of token sequences
(one per model stream, all the same length) and the gold class index.
Gradients are returned as a zero-initialised copy of the model whose ``theta``
holds dLoss/dtheta, so they share the model's named views.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .cells import lstm_backward
from .errors import NumericError, UsageError
from .networks import BlstmModel, LstmModel, PlstmModel, forward, predict_batch
from .tensor import log_softmax, softmax


@dataclass
class Hyperparams:
    learning_rate: float = 0.1
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    clip_norm: float = 5.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise UsageError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_epochs < 1:
            raise UsageError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 0:
            raise UsageError(f"patience must be >= 0, got {self.patience}")
        if not self.clip_norm > 0:
            raise UsageError(f"clip_norm must be positive, got {self.clip_norm}")


def cross_entropy(logits, target):
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= target < logits.size:
        raise UsageError(f"target {target} outside {logits.size} classes")
    return float(-log_softmax(logits)[target])


def bptt_gradients(model, sample):
    """Forward pass, then backpropagate the final-step loss through time.

    Returns ``(loss, grads)``.
    """
    streams, target = sample
    logits, trace = forward(model, streams)
    loss = cross_entropy(logits, target)
    dy = softmax(logits)
    dy[target] -= 1.0

    g = model.zeros_like()
    g.b_y[...] = dy
    if isinstance(model, PlstmModel):
        # the output sum routes dy to every stream, each then unrolls alone
        for s, gs, tr in zip(model.streams, g.streams, trace):
            gs.w_hy[...] = np.outer(dy, tr[-1].h)
            lstm_backward(s.cell, tr, s.w_hy.T @ dy, gs.cell)
    elif isinstance(model, BlstmModel):
        fwd, bwd = trace
        g.w_fwd_y[...] = np.outer(dy, fwd[-1].h)
        g.w_bwd_y[...] = np.outer(dy, bwd[-1].h)
        lstm_backward(model.fwd_cell, fwd, model.w_fwd_y.T @ dy, g.fwd_cell)
        lstm_backward(model.bwd_cell, bwd, model.w_bwd_y.T @ dy, g.bwd_cell)
    elif isinstance(model, LstmModel):
        g.w_hy[...] = np.outer(dy, trace[-1].h)
        lstm_backward(model.cell, trace, model.w_hy.T @ dy, g.cell)
    else:
        raise UsageError(f"unsupported model type {type(model).__name__}")
    return loss, g


def sample_loss(model, sample):
    streams, target = sample
    logits, _ = forward(model, streams)
    return cross_entropy(logits, target)


def _extended_loss(model, sample):
    streams, target = sample
    logits, _ = forward(model, streams)
    shifted = logits - logits.max()
    return np.log(np.exp(shifted).sum()) - shifted[target]


def finite_diff(model, sample, eps=1e-5):
    """Central-difference gradient, one parameter at a time.

    Losses are evaluated in extended precision (``np.longdouble``) on a copy
    of the parameters: with eps=1e-5 a float64 loss carries round-off of
    order 1e-11 in each quotient, too coarse for components near 1e-8.
    """
    if not eps > 0:
        raise UsageError(f"eps must be positive, got {eps}")
    ext = model.with_theta(model.theta.astype(np.longdouble))
    theta = ext.theta
    step = np.longdouble(eps)
    g = model.zeros_like()
    for k in range(theta.size):
        old = theta[k]
        theta[k] = old + step
        up = _extended_loss(ext, sample)
        theta[k] = old - step
        down = _extended_loss(ext, sample)
        theta[k] = old
        g.theta[k] = float((up - down) / (2 * step))
    return g


def relative_error(analytic, numeric):
    a = np.asarray(analytic)
    n = np.asarray(numeric)
    return np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))


def sgd_step(model, grads, hp):
    """In-place update ``theta -= lr * clip(g)``; returns the model."""
    g = grads.theta
    if not np.all(np.isfinite(g)):
        bad = int(np.flatnonzero(~np.isfinite(g))[0])
        raise NumericError(f"non-finite gradient at {model.locate(bad)}")
    norm = math.sqrt(float(g @ g))
    if norm > hp.clip_norm:
        g = g * (hp.clip_norm / norm)
    model.theta -= hp.learning_rate * g
    return model


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    valid_error_rate: float


def _token_array(samples):
    return np.array([s[0] for s in samples], dtype=np.intp)


def error_rate_on(model, samples, tokens=None):
    tokens = _token_array(samples) if tokens is None else tokens
    gold = np.array([s[1] for s in samples])
    return float(np.mean(predict_batch(model, tokens) != gold))


def train(model, train_set, valid_set, hp, log=None):
    """Pure SGD with early stopping on validation error rate.

    Returns the parameters of the best validation epoch and the per-epoch
    history. The input model is not modified.
    """
    if not train_set or not valid_set:
        raise UsageError("training and validation folds must be nonempty")
    model = model.copy()
    rng = np.random.default_rng(hp.seed)
    valid_tokens = _token_array(valid_set)
    best_theta, best_err = model.theta.copy(), math.inf
    since_best = 0
    history = []
    for epoch in range(1, hp.max_epochs + 1):
        total = 0.0
        for idx in rng.permutation(len(train_set)):
            loss, g = bptt_gradients(model, train_set[idx])
            sgd_step(model, g, hp)
            total += loss
        err = error_rate_on(model, valid_set, valid_tokens)
        history.append(EpochRecord(epoch, total / len(train_set), err))
        if log is not None:
            log(f"epoch {epoch}: train_loss={total / len(train_set):.6f} valid_error={err:.4f}")
        if err < best_err:
            best_err, best_theta, since_best = err, model.theta.copy(), 0
        else:
            since_best += 1
        if since_best >= hp.patience:
            break
    return model.with_theta(best_theta), history


def write_history_csv(path, history):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "valid_error_rate"])
        for r in history:
            w.writerow([r.epoch, repr(r.train_loss), repr(r.valid_error_rate)])


GRADCHECK_ARCHITECTURES = ("lstm", "blstm", "plstm-1", "plstm-2", "plstm-4")


def random_instance(arch, seed, input_size=5, hidden_size=6, n_classes=4, length=4,
                    scale=0.5):
    """Random model and sample for gradient checking.

    Parameters are drawn from U(-scale, scale), wider than the training
    initialisation so every gradient component is comfortably above round-off.
    """
    rng = np.random.default_rng(seed)
    if arch == "lstm":
        model, n = LstmModel(input_size, hidden_size, n_classes), 1
    elif arch == "blstm":
        model, n = BlstmModel(input_size, hidden_size, n_classes), 1
    elif arch.startswith("plstm-"):
        n = int(arch.split("-", 1)[1])
        model = PlstmModel([input_size] * n, [hidden_size] * n, n_classes)
    else:
        raise UsageError(f"unknown architecture {arch!r}")
    model.theta[...] = rng.uniform(-scale, scale, size=model.theta.size)
    streams = [list(rng.integers(0, input_size, size=length)) for _ in range(n)]
    return model, (streams, int(rng.integers(0, n_classes)))


@dataclass(frozen=True)
class GradcheckResult:
    arch: str
    max_rel_error: float
    worst_seed: int
    worst_param: tuple


def gradcheck(arch, seeds, eps=1e-5, corrupt=False, **sizes):
    """Worst relative error between BPTT and central differences over seeds.

    ``corrupt`` perturbs one analytic component, to prove the check can fail.
    """
    worst = (-1.0, None, None)
    for seed in seeds:
        model, sample = random_instance(arch, seed, **sizes)
        _, ga = bptt_gradients(model, sample)
        if corrupt:
            ga.theta[0] += 1e-2
        gn = finite_diff(model, sample, eps)
        rel = relative_error(ga.theta, gn.theta)
        k = int(np.argmax(rel))
        if rel[k] > worst[0]:
            worst = (float(rel[k]), seed, model.locate(k))
    return GradcheckResult(arch, *worst)
