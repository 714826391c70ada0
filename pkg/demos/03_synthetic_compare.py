#!/usr/bin/env python3
"""Generate a coupled multistream corpus and compare the five systems at one history size.

Runs in well under a minute; raise ``LENGTH`` or ``EPOCHS`` for cleaner separation.
"""

import numpy as np

from plstm import SynthSpec, synth_generate
from plstm.data import label_frequencies
from plstm.experiment import default_systems, run_grid
from plstm.training import Hyperparams

LENGTH, EPOCHS, HISTORY = 8000, 3, 3

corpus = synth_generate(SynthSpec(n_channels=4, length=LENGTH, coupling=0.9), seed=1)
freq = label_frequencies(corpus)["ch1"]
total = sum(freq.values())
print("output channel label shares (%):",
      {k: round(100 * v / total, 1) for k, v in freq.items()})

# %% Every system sees the same folds; neural ones share seeds and epochs.
result = run_grid(corpus, default_systems(4), [HISTORY], hidden_size=40,
                  hp=Hyperparams(max_epochs=EPOCHS, patience=2), log=print)

print(f"\n{'system':10s} {'error %':>8s} {'F1 %':>8s} {'F1 -2 %':>8s} {'seconds':>8s}")
for (name, L), rep in result.reports.items():
    print(f"{name:10s} {100 * rep.error_rate:8.2f} {100 * rep.macro_f1:8.2f} "
          f"{100 * rep.macro_f1_excluded:8.2f} {result.seconds[name, L]:8.1f}")

# %% Where does the single-stream LSTM go wrong? Rows are gold, columns predicted.
cm = result.confusions["LSTM", HISTORY]
print("\nLSTM confusion (rows gold):")
print(np.array(cm.counts))
