#!/usr/bin/env python3
"""Walk through one peephole LSTM step, a parallel forward pass, and a gradient check."""

import numpy as np

from plstm import LstmState, PlstmModel, init_lstm, lstm_step, plstm_forward
from plstm.training import bptt_gradients, finite_diff, relative_error, random_instance

np.set_printoptions(precision=4, suppress=True)

# %% A single cell: three inputs, two hidden units, fresh initialisation.
cell = init_lstm(3, 2, seed=0)
print("forget bias starts at", cell.b_f)

state = LstmState(np.zeros(2), np.zeros(2))
for x in np.eye(3):
    state = lstm_step(cell, x, state)
    print("h =", state.h, " c =", state.c)

# %% Three streams of tokens, each read by its own LSTM; logits are summed.
model = PlstmModel.init([5, 5, 5], [4, 4, 4], n_classes=3, seed=1)
streams = [[0, 1, 2, 3], [4, 4, 0, 1], [2, 2, 2, 2]]
logits, traces = plstm_forward(model, streams)
print("\nlogits:", logits)
parts = [s.w_hy @ t[-1].h for s, t in zip(model.streams, traces)]
print("per-stream contributions:", np.array(parts))

# %% Gradients: BPTT against central differences on a small random instance.
model, sample = random_instance("plstm-2", seed=3)
loss, grads = bptt_gradients(model, sample)
numeric = finite_diff(model, sample)
rel = relative_error(grads.theta, numeric.theta)
worst = int(np.argmax(rel))
print(f"\nloss {loss:.6f}; {model.theta.size} parameters")
print(f"worst relative error {rel[worst]:.2e} at {model.locate(worst)}")
