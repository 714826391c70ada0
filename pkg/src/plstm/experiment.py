"""End-to-end protocol: folds, fitting each system, persistence, evaluation, grids.

Fold protocol for one history size L:

1. window the corpus into samples (history L on every channel);
2. hold out the chronologically last ``test_fraction`` as the test fold;
3. drop targets with fewer than two remaining samples, then split the rest
   into train/valid with a stratified shuffle split;
4. keep only targets present in all three folds.

Systems: ``ngram`` (mono-channel counts), ``multingram`` (all channels),
``lstm``, ``blstm`` and ``plstm`` (``n_streams`` channels, output channel
first, then the remaining channels in file order).
"""

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ngram
from .data import (GenreVocab, chronological_split, drop_rare_targets, filter_labels,
                   stratified_split, window_samples)
from .errors import CompatibilityError, ConfigError, FormatError, UsageError
from .evaluation import confusion, emit_report, evaluate
from .networks import (BlstmModel, LstmModel, PlstmModel, network_from_dict,
                       network_to_dict, predict_batch)
from .training import Hyperparams, train

FORMAT_NAME = "plstm-model"
FORMAT_VERSION = 1

NEURAL_KINDS = ("lstm", "blstm", "plstm")
KINDS = ("ngram", "multingram") + NEURAL_KINDS


@dataclass
class Folds:
    train: list
    valid: list
    test: list
    input_vocab: GenreVocab
    target_vocab: GenreVocab
    channels: list
    output_channel: int
    history: int

    def dense_target(self, s):
        return self.target_vocab.index[self.input_vocab.labels[s.target]]


def prepare_folds(corpus, history, output_channel=0, test_fraction=0.2, valid_ratio=0.3,
                  split_seed=0):
    out = corpus.channel_index(output_channel)
    samples = window_samples(corpus, history, out)
    rest, test = chronological_split(samples, test_fraction)
    rest = drop_rare_targets(rest)
    if not rest:
        raise UsageError("no class has enough samples before the test segment")
    train_set, valid = stratified_split(rest, 1.0 - valid_ratio, split_seed)
    (train_set, valid, test), target_vocab = filter_labels(train_set, valid, test,
                                                           corpus.vocab)
    return Folds(train_set, valid, test, corpus.vocab, target_vocab, list(corpus.channels),
                 out, history)


def stream_channels(n_channels, output_channel, n_streams):
    if not 1 <= n_streams <= n_channels:
        raise ConfigError(f"n_streams={n_streams} but the corpus has {n_channels} channels")
    others = [c for c in range(n_channels) if c != output_channel]
    return [output_channel] + others[:n_streams - 1]


@dataclass
class Classifier:
    """A fitted system together with everything needed to apply it to a new corpus."""

    kind: str
    model: object
    channels: list
    streams: list
    output_channel: int
    history: int
    input_labels: list
    target_labels: list
    test_fraction: float = 0.2

    def predict(self, samples):
        if not samples:
            return np.zeros(0, dtype=np.int64)
        if self.kind in NEURAL_KINDS:
            tokens = np.array([[s.inputs[c] for c in self.streams] for s in samples],
                              dtype=np.intp)
            return predict_batch(self.model, tokens).astype(np.int64)
        return np.array([ngram.predict_next(self.model, s.inputs) for s in samples],
                        dtype=np.int64)

    def meta(self):
        return {
            "kind": self.kind,
            "channels": self.channels,
            "streams": self.streams,
            "output_channel": self.output_channel,
            "history": self.history,
            "input_labels": self.input_labels,
            "target_labels": self.target_labels,
            "test_fraction": self.test_fraction,
        }


def neural_samples(folds, fold, streams):
    return [([s.inputs[c] for c in streams], folds.dense_target(s)) for s in fold]


def fit_system(kind, folds, hidden_size=80, hp=None, n_streams=1, test_fraction=0.2, log=None):
    """Fit one system on ``folds``; returns ``(Classifier, history)``.

    ``history`` is the per-epoch training record, empty for count models.
    """
    hp = hp or Hyperparams()
    k_in = len(folds.input_vocab)
    k_out = len(folds.target_vocab)
    n_channels = len(folds.channels)
    out = folds.output_channel
    if kind in ("ngram", "multingram"):
        model = ngram.fit_samples(folds.train, folds.history, k_out, n_channels, out,
                                  multichannel=kind == "multingram",
                                  target_of=folds.dense_target)
        streams, history = [out], []
    elif kind in NEURAL_KINDS:
        streams = stream_channels(n_channels, out, n_streams if kind == "plstm" else 1)
        if kind == "plstm":
            init = PlstmModel.init([k_in] * len(streams), [hidden_size] * len(streams),
                                   k_out, hp.seed)
        elif kind == "blstm":
            init = BlstmModel.init(k_in, hidden_size, k_out, hp.seed)
        else:
            init = LstmModel.init(k_in, hidden_size, k_out, hp.seed)
        model, history = train(init, neural_samples(folds, folds.train, streams),
                               neural_samples(folds, folds.valid, streams), hp, log=log)
    else:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {', '.join(KINDS)}")
    clf = Classifier(kind, model, folds.channels, streams, out, folds.history,
                     list(folds.input_vocab.labels), list(folds.target_vocab.labels),
                     test_fraction)
    return clf, history


def save_classifier(path, clf):
    doc = {"format": FORMAT_NAME, "format_version": FORMAT_VERSION, "meta": clf.meta()}
    if clf.kind in NEURAL_KINDS:
        doc["network"] = network_to_dict(clf.model)
    else:
        doc["ngram"] = clf.model.to_dict()
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def load_classifier(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read model {path}: {exc}") from exc
    if doc.get("format") != FORMAT_NAME:
        raise FormatError(f"{path} is not a {FORMAT_NAME} file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {doc.get('format_version')}")
    meta = doc["meta"]
    if meta["kind"] in NEURAL_KINDS:
        model = network_from_dict(doc["network"])
    else:
        model = ngram.NgramModel.from_dict(doc["ngram"])
    return Classifier(model=model, **meta)


def eval_samples_for(clf, corpus, test_fraction=None):
    """Window ``corpus`` the way ``clf`` was trained and re-index it into the model's vocabularies.

    Samples whose target the model cannot emit are dropped; returns
    ``(samples, golds, n_dropped)`` with golds as dense class indices.
    """
    if list(corpus.channels) != list(clf.channels):
        raise CompatibilityError(f"corpus channels {corpus.channels} differ from the "
                                 f"model's {clf.channels}")
    model_index = {lab: i for i, lab in enumerate(clf.input_labels)}
    unknown = [lab for lab in corpus.vocab.labels if lab not in model_index]
    if unknown:
        raise CompatibilityError(f"corpus labels unknown to the model: {unknown}")
    remap = np.array([model_index[lab] for lab in corpus.vocab.labels], dtype=np.int64)
    samples = window_samples(corpus, clf.history, clf.output_channel)
    frac = clf.test_fraction if test_fraction is None else test_fraction
    if frac < 1.0:
        _, samples = chronological_split(samples, frac)
    target_index = {lab: i for i, lab in enumerate(clf.target_labels)}
    kept, golds = [], []
    for s in samples:
        lab = corpus.vocab.labels[s.target]
        if lab in target_index:
            inputs = tuple(tuple(int(remap[t]) for t in w) for w in s.inputs)
            kept.append(type(s)(inputs, int(remap[s.target]), s.position))
            golds.append(target_index[lab])
    return kept, np.array(golds, dtype=np.int64), len(samples) - len(kept)


def evaluate_classifier(clf, samples, golds, exclude_k=2):
    preds = clf.predict(samples)
    cm = confusion(preds, golds, len(clf.target_labels), clf.target_labels)
    return cm, evaluate(cm, exclude_k)


def evaluate_on_folds(clf, folds, exclude_k=2):
    golds = np.array([folds.dense_target(s) for s in folds.test], dtype=np.int64)
    return evaluate_classifier(clf, folds.test, golds, exclude_k)


@dataclass(frozen=True)
class SystemSpec:
    """A column of the comparison grid."""

    name: str
    kind: str
    n_streams: int = 1


def default_systems(n_channels):
    """The five columns of the comparison: n-gram, Nn-gram, LSTM, P2LSTM, PN LSTM."""
    systems = [SystemSpec("n-gram", "ngram"),
               SystemSpec(f"{n_channels}n-gram", "multingram", n_channels),
               SystemSpec("LSTM", "lstm")]
    if n_channels >= 2:
        systems.append(SystemSpec("P2LSTM", "plstm", 2))
    if n_channels > 2:
        systems.append(SystemSpec(f"P{n_channels}LSTM", "plstm", n_channels))
    return systems


def parse_system(token, n_channels):
    """Map names like ``ngram``, ``4n-gram``, ``lstm``, ``p2lstm`` to a SystemSpec."""
    t = token.strip().lower()
    if t in ("ngram", "n-gram"):
        return SystemSpec("n-gram", "ngram")
    if t in ("multingram", f"{n_channels}n-gram", f"{n_channels}ngram"):
        return SystemSpec(f"{n_channels}n-gram", "multingram", n_channels)
    if t == "lstm":
        return SystemSpec("LSTM", "lstm")
    if t == "blstm":
        return SystemSpec("BLSTM", "blstm")
    if t.startswith("p") and t.endswith("lstm") and t[1:-4].isdigit():
        n = int(t[1:-4])
        stream_channels(n_channels, 0, n)
        return SystemSpec(f"P{n}LSTM", "plstm", n)
    raise ConfigError(f"unknown system {token!r}")


@dataclass
class GridResult:
    reports: dict
    confusions: dict
    seconds: dict
    histories: dict


def run_grid(corpus, systems, history_sizes, output_channel=0, hidden_size=80, hp=None,
             test_fraction=0.2, valid_ratio=0.3, split_seed=0, exclude_k=2, log=None):
    """Fit and test every (system, history) cell on shared folds and seeds."""
    hp = hp or Hyperparams()
    result = GridResult({}, {}, {}, {})
    for L in history_sizes:
        folds = prepare_folds(corpus, L, output_channel, test_fraction, valid_ratio, split_seed)
        for spec in systems:
            if log:
                log(f"fitting {spec.name} with history {L}")
            start = time.perf_counter()
            clf, history = fit_system(spec.kind, folds, hidden_size, hp, spec.n_streams,
                                      test_fraction)
            result.seconds[spec.name, L] = time.perf_counter() - start
            cm, report = evaluate_on_folds(clf, folds, exclude_k)
            result.reports[spec.name, L] = report
            result.confusions[spec.name, L] = cm
            result.histories[spec.name, L] = history
    return result


def write_grid(result, out_dir):
    """Metric tables, per-cell timings, and confusion matrices for the largest history."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    markdown, csv_text = emit_report(result.reports, out)
    lines = ["model,seq_size,train_seconds"]
    for (name, L), secs in result.seconds.items():
        lines.append(f"{name},{L},{secs:.3f}")
    (out / "timings.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    largest = max(L for _, L in result.confusions)
    for (name, L), cm in result.confusions.items():
        if L == largest:
            (out / f"confusion_{_slug(name)}_L{L}.csv").write_text(cm.to_csv(), encoding="utf-8")
    return markdown, csv_text


def _slug(name):
    return "".join(ch if ch.isalnum() else "_" for ch in name.lower())


