"""Dense float64 primitives: the affine map and the three nonlinearities.

Vectors are 1-d ``numpy.ndarray`` and matrices 2-d, always float64.
"""

import numpy as np
from scipy.special import expit

from .errors import ShapeError


def as_vector(x, name="x"):
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError(f"{name} must be a nonempty vector, got shape {v.shape}")
    return v


def as_matrix(w, name="W"):
    m = np.asarray(w, dtype=np.float64)
    if m.ndim != 2 or 0 in m.shape:
        raise ShapeError(f"{name} must be a nonempty matrix, got shape {m.shape}")
    return m


def affine(W, x, b):
    """Return ``W @ x + b``.

    Raises ShapeError naming the mismatched dimensions.
    """
    W = as_matrix(W, "W")
    x = as_vector(x, "x")
    b = as_vector(b, "b")
    if W.shape[1] != x.size:
        raise ShapeError(f"W has {W.shape[1]} columns but x has length {x.size}")
    if W.shape[0] != b.size:
        raise ShapeError(f"W has {W.shape[0]} rows but b has length {b.size}")
    return W @ x + b


def sigmoid(x):
    return expit(np.asarray(x, dtype=np.float64))


def tanh_v(x):
    return np.tanh(np.asarray(x, dtype=np.float64))


def softmax(x):
    """Max-shifted softmax; invariant to adding a constant to every logit."""
    x = as_vector(x)
    e = np.exp(x - x.max())
    return e / e.sum()


def log_softmax(x):
    x = as_vector(x)
    shifted = x - x.max()
    return shifted - np.log(np.exp(shifted).sum())
