"""Parallel LSTM multistream sequence classification, with LSTM, BLSTM and
n-gram baselines, a synthetic multistream corpus generator and an
evaluation harness. Pure numpy, float64 throughout.
"""

from .cells import LstmParams, LstmState, RnnParams, init_lstm, lstm_step, rnn_step
from .data import (GenreVocab, MultistreamCorpus, Sample, SynthSpec, filter_labels,
                   load_corpus, stratified_split, synth_generate, window_samples,
                   write_corpus)
from .evaluation import (ConfusionMatrix, confusion, emit_report, error_rate,
                         least_frequent, macro_f1)
from .networks import (BlstmModel, LstmModel, PlstmModel, blstm_forward, lstm_forward,
                       plstm_forward, predict)
from .ngram import NgramModel, predict_next, prob
from .tensor import affine, sigmoid, softmax, tanh_v
from .training import (Hyperparams, bptt_gradients, cross_entropy, finite_diff, sgd_step,
                       train)

__version__ = "0.1.0"
