"""Sequence classifiers built on the peephole LSTM cell.

Three architectures, each reading a window of one-hot tokens and emitting
class logits at the final step only:

* ``LstmModel``  one stream, ``logits = W_hy h_T + b_y``
* ``BlstmModel`` one stream read in both directions,
  ``logits = W_fwd h_fwd[T] + W_bwd h_bwd[1] + b_y``
* ``PlstmModel`` N synchronous streams, each through its own LSTM,
  ``logits = sum_n W_n h^n_T + b_y`` with one shared bias.

Every model stores all of its parameters in one contiguous float64 vector
``theta``; the named arrays are views into it. Gradients use the same layout,
which keeps SGD, clipping, finite differences and serialization uniform.
"""

import base64
import math

import numpy as np

from .cells import INIT_SCALE, LstmParams, fill_lstm, lstm_step_token
from .errors import ShapeError, SynchronizationError, UsageError, VocabularyError


def _carve(theta, shapes):
    views, off = [], 0
    for s in shapes:
        n = math.prod(s)
        views.append(theta[off:off + n].reshape(s))
        off += n
    return views


def _lstm_names(prefix):
    return [f"{prefix}wx", f"{prefix}wh", f"{prefix}peep", f"{prefix}b"]


class _Network:
    kind = None

    def __init__(self, theta=None):
        shapes = self.shapes()
        size = sum(math.prod(s) for s in shapes)
        if theta is None:
            theta = np.zeros(size)
        elif (theta.dtype not in (np.float64, np.longdouble) or theta.ndim != 1
              or not theta.flags.c_contiguous):
            raise ShapeError("theta must be a contiguous 1-d float64 array")
        if theta.size != size:
            raise ShapeError(f"theta has {theta.size} entries, layout needs {size}")
        self.theta = theta
        self._bind(_carve(theta, shapes))

    def layout(self):
        return list(zip(self.names(), self.shapes()))

    def copy(self):
        return type(self)(**self.dims(), theta=self.theta.copy())

    def zeros_like(self):
        return type(self)(**self.dims())

    def with_theta(self, theta):
        return type(self)(**self.dims(), theta=theta)

    def locate(self, index):
        """Map a flat theta index to (array name, multi-index)."""
        off = 0
        for name, shape in self.layout():
            n = math.prod(shape)
            if index < off + n:
                return name, tuple(int(v) for v in np.unravel_index(index - off, shape))
            off += n
        raise IndexError(index)


class LstmModel(_Network):
    kind = "lstm"

    def __init__(self, input_size, hidden_size, n_classes, theta=None):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.n_classes = n_classes
        super().__init__(theta)

    def dims(self):
        return dict(input_size=self.input_size, hidden_size=self.hidden_size,
                    n_classes=self.n_classes)

    def shapes(self):
        return LstmParams.shapes(self.input_size, self.hidden_size) + [
            (self.n_classes, self.hidden_size), (self.n_classes,)]

    def names(self):
        return _lstm_names("cell.") + ["w_hy", "b_y"]

    def _bind(self, views):
        self.cell = LstmParams(*views[:4])
        self.w_hy, self.b_y = views[4:]

    @classmethod
    def init(cls, input_size, hidden_size, n_classes, seed):
        m = cls(input_size, hidden_size, n_classes)
        rng = np.random.default_rng(seed)
        fill_lstm(m.cell, rng)
        m.w_hy[...] = rng.uniform(-INIT_SCALE, INIT_SCALE, size=m.w_hy.shape)
        return m


class BlstmModel(_Network):
    kind = "blstm"

    def __init__(self, input_size, hidden_size, n_classes, theta=None):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.n_classes = n_classes
        super().__init__(theta)

    def dims(self):
        return dict(input_size=self.input_size, hidden_size=self.hidden_size,
                    n_classes=self.n_classes)

    def shapes(self):
        cell = LstmParams.shapes(self.input_size, self.hidden_size)
        proj = (self.n_classes, self.hidden_size)
        return cell + cell + [proj, proj, (self.n_classes,)]

    def names(self):
        return _lstm_names("fwd_cell.") + _lstm_names("bwd_cell.") + [
            "w_fwd_y", "w_bwd_y", "b_y"]

    def _bind(self, views):
        self.fwd_cell = LstmParams(*views[:4])
        self.bwd_cell = LstmParams(*views[4:8])
        self.w_fwd_y, self.w_bwd_y, self.b_y = views[8:]

    @classmethod
    def init(cls, input_size, hidden_size, n_classes, seed):
        m = cls(input_size, hidden_size, n_classes)
        rng = np.random.default_rng(seed)
        fill_lstm(m.fwd_cell, rng)
        fill_lstm(m.bwd_cell, rng)
        for w in (m.w_fwd_y, m.w_bwd_y):
            w[...] = rng.uniform(-INIT_SCALE, INIT_SCALE, size=w.shape)
        return m


class StreamParams:
    """One PLSTM stream: its LSTM cell and its projection into the class space."""

    def __init__(self, cell, w_hy):
        self.cell = cell
        self.w_hy = w_hy


class PlstmModel(_Network):
    kind = "plstm"

    def __init__(self, input_sizes, hidden_sizes, n_classes, theta=None):
        if len(input_sizes) != len(hidden_sizes) or not input_sizes:
            raise UsageError("need one input size and one hidden size per stream")
        self.input_sizes = list(input_sizes)
        self.hidden_sizes = list(hidden_sizes)
        self.n_classes = n_classes
        super().__init__(theta)

    @property
    def n_streams(self):
        return len(self.input_sizes)

    def dims(self):
        return dict(input_sizes=self.input_sizes, hidden_sizes=self.hidden_sizes,
                    n_classes=self.n_classes)

    def shapes(self):
        out = []
        for d, h in zip(self.input_sizes, self.hidden_sizes):
            out += LstmParams.shapes(d, h) + [(self.n_classes, h)]
        return out + [(self.n_classes,)]

    def names(self):
        out = []
        for n in range(self.n_streams):
            out += _lstm_names(f"streams[{n}].cell.") + [f"streams[{n}].w_hy"]
        return out + ["b_y"]

    def _bind(self, views):
        self.streams = [
            StreamParams(LstmParams(*views[5 * n:5 * n + 4]), views[5 * n + 4])
            for n in range(self.n_streams)
        ]
        self.b_y = views[-1]

    @classmethod
    def init(cls, input_sizes, hidden_sizes, n_classes, seed):
        m = cls(input_sizes, hidden_sizes, n_classes)
        rng = np.random.default_rng(seed)
        for s in m.streams:
            fill_lstm(s.cell, rng)
            s.w_hy[...] = rng.uniform(-INIT_SCALE, INIT_SCALE, size=s.w_hy.shape)
        return m


def _check_tokens(seq, vocab_size, input_size):
    tokens = [int(t) for t in seq]
    if not tokens:
        raise UsageError("sequence must contain at least one token")
    if vocab_size != input_size:
        raise ShapeError(f"vocabulary size {vocab_size} does not match input size {input_size}")
    for t in tokens:
        if not 0 <= t < vocab_size:
            raise VocabularyError(f"token {t} outside vocabulary of size {vocab_size}")
    return tokens


def run_stream(cell, tokens):
    """Run one LSTM from the zero state; returns the per-step caches."""
    h = np.zeros(cell.hidden_size)
    c = np.zeros(cell.hidden_size)
    trace = []
    for tok in tokens:
        step = lstm_step_token(cell, tok, h, c)
        trace.append(step)
        h, c = step.h, step.c
    return trace


def lstm_forward(m, seq, vocab_size=None):
    vocab_size = m.input_size if vocab_size is None else vocab_size
    tokens = _check_tokens(seq, vocab_size, m.input_size)
    trace = run_stream(m.cell, tokens)
    return m.w_hy @ trace[-1].h + m.b_y, trace


def blstm_forward(m, seq, vocab_size=None):
    vocab_size = m.input_size if vocab_size is None else vocab_size
    tokens = _check_tokens(seq, vocab_size, m.input_size)
    fwd = run_stream(m.fwd_cell, tokens)
    # bwd[k] holds the state at original position T-1-k, so bwd[-1] is h_bwd[1]
    bwd = run_stream(m.bwd_cell, tokens[::-1])
    logits = m.w_fwd_y @ fwd[-1].h + m.w_bwd_y @ bwd[-1].h + m.b_y
    return logits, (fwd, bwd)


def plstm_forward(m, seqs, vocab_sizes=None):
    if len(seqs) != m.n_streams:
        raise UsageError(f"model has {m.n_streams} streams, got {len(seqs)} sequences")
    vocab_sizes = m.input_sizes if vocab_sizes is None else list(vocab_sizes)
    if len(vocab_sizes) != m.n_streams:
        raise UsageError(f"need {m.n_streams} vocabulary sizes, got {len(vocab_sizes)}")
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise SynchronizationError(f"streams have differing lengths {sorted(lengths)}")
    traces = []
    for stream, seq, k in zip(m.streams, seqs, vocab_sizes):
        tokens = _check_tokens(seq, k, stream.cell.input_size)
        traces.append(run_stream(stream.cell, tokens))
    acc = None
    for stream, trace in zip(m.streams, traces):
        part = stream.w_hy @ trace[-1].h
        acc = part if acc is None else acc + part
    return acc + m.b_y, traces


def forward(m, streams):
    """Dispatch on architecture; ``streams`` is a list of token sequences."""
    if isinstance(m, PlstmModel):
        return plstm_forward(m, streams)
    if len(streams) != 1:
        raise UsageError(f"{m.kind} model takes one stream, got {len(streams)}")
    if isinstance(m, BlstmModel):
        return blstm_forward(m, streams[0])
    return lstm_forward(m, streams[0])


def predict(logits):
    """Argmax with ties resolved to the lowest index."""
    logits = np.asarray(logits)
    if logits.size == 0:
        raise UsageError("cannot predict from empty logits")
    return int(np.argmax(logits))


def _final_hidden_batch(cell, tokens):
    # tokens: (B, T) int array; state kept as (H, B) columns
    h_size = cell.hidden_size
    batch = tokens.shape[0]
    h = np.zeros((h_size, batch))
    c = np.zeros((h_size, batch))
    wh = cell.wh.reshape(4 * h_size, h_size)
    b = cell.b[:, :, None]
    peep = cell.peep[:, :, None]
    for t in range(tokens.shape[1]):
        z = cell.wx[:, :, tokens[:, t]] + (wh @ h).reshape(4, h_size, batch) + b
        i = 1.0 / (1.0 + np.exp(-(z[0] + peep[0] * c)))
        f = 1.0 / (1.0 + np.exp(-(z[1] + peep[1] * c)))
        c = f * c + i * np.tanh(z[2])
        o = 1.0 / (1.0 + np.exp(-(z[3] + peep[2] * c)))
        h = o * np.tanh(c)
    return h


def logits_batch(m, tokens):
    """Logits for a batch; ``tokens`` has shape (B, n_streams, T).

    Numerically equivalent to the per-sample forwards up to summation order,
    used for fast evaluation only (training always goes through ``forward``).
    """
    tokens = np.asarray(tokens, dtype=np.intp)
    if tokens.ndim != 3:
        raise ShapeError(f"expected (batch, streams, time) tokens, got shape {tokens.shape}")
    with np.errstate(over="ignore"):
        if isinstance(m, PlstmModel):
            if tokens.shape[1] != m.n_streams:
                raise UsageError(f"model has {m.n_streams} streams, got {tokens.shape[1]}")
            out = sum(s.w_hy @ _final_hidden_batch(s.cell, tokens[:, n])
                      for n, s in enumerate(m.streams))
        elif isinstance(m, BlstmModel):
            seq = tokens[:, 0]
            out = (m.w_fwd_y @ _final_hidden_batch(m.fwd_cell, seq)
                   + m.w_bwd_y @ _final_hidden_batch(m.bwd_cell, seq[:, ::-1]))
        else:
            out = m.w_hy @ _final_hidden_batch(m.cell, tokens[:, 0])
    return (out + m.b_y[:, None]).T


def predict_batch(m, tokens, chunk=2048):
    tokens = np.asarray(tokens, dtype=np.intp)
    preds = [np.argmax(logits_batch(m, tokens[s:s + chunk]), axis=1)
             for s in range(0, len(tokens), chunk)]
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.intp)


ARCHITECTURES = {cls.kind: cls for cls in (LstmModel, BlstmModel, PlstmModel)}


def network_to_dict(m):
    """Self-describing dict: kind, dimensions, layout and the raw theta bytes."""
    return {
        "kind": m.kind,
        "dims": m.dims(),
        "layout": [[name, list(shape)] for name, shape in m.layout()],
        "theta": base64.b64encode(m.theta.astype("<f8").tobytes()).decode("ascii"),
    }


def network_from_dict(d):
    try:
        cls = ARCHITECTURES[d["kind"]]
    except KeyError:
        raise UsageError(f"unknown architecture kind {d.get('kind')!r}") from None
    theta = np.frombuffer(base64.b64decode(d["theta"]), dtype="<f8").astype(np.float64)
    m = cls(**d["dims"], theta=theta)
    if [[n, list(s)] for n, s in m.layout()] != d["layout"]:
        raise ShapeError("stored parameter layout does not match the declared dimensions")
    return m
