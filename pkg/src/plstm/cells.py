"""Single-timestep recurrences: the plain tanh RNN and the peephole LSTM.

LSTM weights are kept gate-stacked in the order (input, forget, cell, output)
so one matrix-vector product serves all four gates. The named per-gate
matrices (``w_xi``, ``w_hf``, ...) are views into those stacks. Peephole
weights are length-H vectors because cell-to-gate connections are diagonal.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ShapeError
from .tensor import as_vector

GATES = ("i", "f", "c", "o")
PEEPHOLES = ("ci", "cf", "co")

INIT_SCALE = 0.08
FORGET_BIAS = 1.0


@dataclass
class RnnParams:
    w_xh: np.ndarray
    w_hh: np.ndarray
    b_h: np.ndarray

    def __post_init__(self):
        h = self.b_h.shape[0]
        if self.w_hh.shape != (h, h) or self.w_xh.shape[0] != h:
            raise ShapeError(
                f"inconsistent RNN shapes w_xh={self.w_xh.shape} "
                f"w_hh={self.w_hh.shape} b_h={self.b_h.shape}"
            )


def rnn_step(p, x_t, h_prev):
    x_t = as_vector(x_t, "x_t")
    h_prev = as_vector(h_prev, "h_prev")
    if x_t.size != p.w_xh.shape[1]:
        raise ShapeError(f"x_t has length {x_t.size}, expected {p.w_xh.shape[1]}")
    if h_prev.size != p.b_h.size:
        raise ShapeError(f"h_prev has length {h_prev.size}, expected {p.b_h.size}")
    return np.tanh(p.w_xh @ x_t + p.w_hh @ h_prev + p.b_h)


class LstmParams:
    """Parameters of one peephole LSTM cell with input size D and hidden size H.

    Arrays: ``wx`` (4, H, D), ``wh`` (4, H, H), ``peep`` (3, H), ``b`` (4, H).
    They may be views into a caller-owned flat buffer; nothing here copies.
    """

    def __init__(self, wx, wh, peep, b):
        n_gates, h, d = wx.shape
        if n_gates != 4 or wh.shape != (4, h, h) or peep.shape != (3, h) or b.shape != (4, h):
            raise ShapeError(
                f"inconsistent LSTM shapes wx={wx.shape} wh={wh.shape} "
                f"peep={peep.shape} b={b.shape}"
            )
        self.wx = wx
        self.wh = wh
        self.peep = peep
        self.b = b
        self._wh_flat = wh.reshape(4 * h, h)

    @staticmethod
    def shapes(d, h):
        return [(4, h, d), (4, h, h), (3, h), (4, h)]

    @property
    def input_size(self):
        return self.wx.shape[2]

    @property
    def hidden_size(self):
        return self.wx.shape[1]

    def arrays(self):
        return [self.wx, self.wh, self.peep, self.b]

    def named(self):
        """Per-gate arrays keyed by their conventional names."""
        out = {}
        for k, g in enumerate(GATES):
            out[f"w_x{g}"] = self.wx[k]
            out[f"w_h{g}"] = self.wh[k]
            out[f"b_{g}"] = self.b[k]
        for k, name in enumerate(PEEPHOLES):
            out[f"p_{name}"] = self.peep[k]
        return out

    def __getattr__(self, name):
        if name.startswith(("w_x", "w_h", "b_", "p_")):
            named = self.named()
            if name in named:
                return named[name]
        raise AttributeError(name)


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    c: np.ndarray


def zero_state(h):
    return LstmState(np.zeros(h), np.zeros(h))


def _gates(p, zx, h_prev, c_prev):
    # zx is the input contribution for all four gates, shape (4, H)
    z = zx + (p._wh_flat @ h_prev).reshape(zx.shape) + p.b
    i = expit(z[0] + p.peep[0] * c_prev)
    f = expit(z[1] + p.peep[1] * c_prev)
    g = np.tanh(z[2])
    c = f * c_prev + i * g
    o = expit(z[3] + p.peep[2] * c)
    tc = np.tanh(c)
    return i, f, g, o, c, tc, o * tc


def lstm_step(p, x_t, s_prev):
    """Advance one step on a dense input vector; returns the new LstmState."""
    x_t = as_vector(x_t, "x_t")
    if x_t.size != p.input_size:
        raise ShapeError(f"x_t has length {x_t.size}, expected {p.input_size}")
    if s_prev.h.shape != (p.hidden_size,) or s_prev.c.shape != (p.hidden_size,):
        raise ShapeError(
            f"state shapes h={s_prev.h.shape} c={s_prev.c.shape}, "
            f"expected ({p.hidden_size},)"
        )
    *_, c, _, h = _gates(p, p.wx @ x_t, s_prev.h, s_prev.c)
    return LstmState(h, c)


@dataclass
class StepCache:
    """Activations of one step, kept for backpropagation through time."""

    token: int
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tc: np.ndarray
    h: np.ndarray


def lstm_step_token(p, token, h_prev, c_prev):
    """One step on a one-hot input given by its index; returns a StepCache."""
    i, f, g, o, c, tc, h = _gates(p, p.wx[:, :, token], h_prev, c_prev)
    return StepCache(token, h_prev, c_prev, i, f, g, o, c, tc, h)


def lstm_step_backward(p, cache, dh, dc_next, grads):
    """Backpropagate one step.

    ``dh`` is the total gradient reaching h_t, ``dc_next`` the gradient reaching
    c_t through c_{t+1}. ``grads`` is an LstmParams of gradient accumulators;
    every array except ``wh`` is updated here. Returns (dh_prev, dc_prev, dz)
    where ``dz`` (4, H) holds the gate pre-activation gradients, from which
    the caller forms the ``wh`` gradient as an outer product with h_{t-1}.
    """
    i, f, g, o, c, tc = cache.i, cache.f, cache.g, cache.o, cache.c, cache.tc
    dzo = dh * tc * o * (1.0 - o)
    dc = dc_next + dh * o * (1.0 - tc * tc) + dzo * p.peep[2]
    dzi = dc * g * i * (1.0 - i)
    dzf = dc * cache.c_prev * f * (1.0 - f)
    dzg = dc * i * (1.0 - g * g)
    dc_prev = dc * f + dzi * p.peep[0] + dzf * p.peep[1]

    dz = np.stack((dzi, dzf, dzg, dzo))
    grads.wx[:, :, cache.token] += dz
    grads.b += dz
    grads.peep[0] += dzi * cache.c_prev
    grads.peep[1] += dzf * cache.c_prev
    grads.peep[2] += dzo * c
    dh_prev = dz.reshape(-1) @ p._wh_flat
    return dh_prev, dc_prev, dz


def lstm_backward(p, trace, dh_last, grads):
    """Backpropagation through time from a gradient on the final hidden state."""
    dh = dh_last
    dc = np.zeros_like(dh_last)
    dzs = []
    for step in reversed(trace):
        dh, dc, dz = lstm_step_backward(p, step, dh, dc, grads)
        dzs.append(dz.reshape(-1))
    h_prevs = np.array([step.h_prev for step in reversed(trace)])
    grads._wh_flat += np.array(dzs).T @ h_prevs
    return dh, dc


def init_lstm(d, h, seed):
    """Uniform(-0.08, 0.08) weights and peepholes, zero biases, forget bias 1."""
    if d < 1 or h < 1:
        raise ShapeError(f"input and hidden sizes must be >= 1, got d={d} h={h}")
    rng = np.random.default_rng(seed)
    p = LstmParams(*(np.zeros(s) for s in LstmParams.shapes(d, h)))
    fill_lstm(p, rng)
    return p


def fill_lstm(p, rng):
    """Draw initial values into an existing (possibly view-backed) LstmParams."""
    for arr in (p.wx, p.wh, p.peep):
        arr[...] = rng.uniform(-INIT_SCALE, INIT_SCALE, size=arr.shape)
    p.b[...] = 0.0
    p.b[1] = FORGET_BIAS
