"""Multistream corpora, history windows, the fold protocol and a synthetic generator.

A corpus is N index-aligned label sequences (slot ``s`` is simultaneous on
every channel) over one shared label vocabulary. The on-disk format is a
plain CSV::

    slot,<channel-1>,...,<channel-N>
    0,News,Weather,...

Labels may not contain commas; there is no quoting.
"""

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ProtocolError, StratificationError, UsageError


class GenreVocab:
    """Bijection between label strings and dense indices ``0..K-1``."""

    def __init__(self, labels):
        self.labels = list(labels)
        self.index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self.index) != len(self.labels):
            raise UsageError("vocabulary labels must be distinct")

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        return isinstance(other, GenreVocab) and self.labels == other.labels

    def __repr__(self):
        return f"GenreVocab({self.labels!r})"

    def encode(self, label):
        return self.index[label]


@dataclass
class MultistreamCorpus:
    channels: list
    events: list  # one int array per channel
    vocab: GenreVocab

    def __post_init__(self):
        self.events = [np.asarray(e, dtype=np.int64) for e in self.events]
        if len(self.events) != len(self.channels) or not self.channels:
            raise UsageError("need one event sequence per channel")
        lengths = {len(e) for e in self.events}
        if len(lengths) != 1:
            raise UsageError(f"channel sequences have differing lengths {sorted(lengths)}")
        for name, e in zip(self.channels, self.events):
            if e.size and (e.min() < 0 or e.max() >= len(self.vocab)):
                raise UsageError(f"channel {name} holds indices outside the vocabulary")

    def __len__(self):
        return len(self.events[0])

    @property
    def n_channels(self):
        return len(self.channels)

    def channel_index(self, channel):
        if isinstance(channel, (int, np.integer)):
            if not 0 <= channel < self.n_channels:
                raise UsageError(f"channel index {channel} out of range")
            return int(channel)
        try:
            return self.channels.index(channel)
        except ValueError:
            raise UsageError(f"unknown channel {channel!r}; have {self.channels}") from None

    def __eq__(self, other):
        return (isinstance(other, MultistreamCorpus) and self.channels == other.channels
                and self.vocab == other.vocab
                and all(np.array_equal(a, b) for a, b in zip(self.events, other.events)))


def load_corpus(path):
    """Parse a corpus CSV; the vocabulary follows first appearance in file order."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read corpus {path}: {exc}") from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = lines[0].split(",")
    if header[0] != "slot" or len(header) < 2 or any(not h for h in header[1:]):
        raise FormatError(f"{path}:1: header must be 'slot,<channel-1>,...', got {lines[0]!r}")
    channels = header[1:]
    if len(set(channels)) != len(channels):
        raise FormatError(f"{path}:1: duplicate channel names")
    labels, index = [], {}
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(cells)}")
        row = []
        for name, lab in zip(channels, cells[1:]):
            if not lab:
                raise FormatError(f"{path}:{lineno}: empty label for channel {name}")
            if lab not in index:
                index[lab] = len(labels)
                labels.append(lab)
            row.append(index[lab])
        rows.append(row)
    if not rows:
        raise FormatError(f"{path}: no slots after the header")
    events = np.array(rows, dtype=np.int64).T
    vocab = GenreVocab(labels)
    return MultistreamCorpus(channels, list(events), vocab), vocab


def write_corpus(path, corpus):
    labels = corpus.vocab.labels
    for lab in labels:
        if "," in lab or "\n" in lab or not lab:
            raise UsageError(f"label {lab!r} cannot be written to a corpus file")
    out = ["slot," + ",".join(corpus.channels)]
    cols = [e.tolist() for e in corpus.events]
    for s, row in enumerate(zip(*cols)):
        out.append(f"{s}," + ",".join(labels[i] for i in row))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(out) + "\n")


@dataclass(frozen=True)
class Sample:
    """History windows for every channel plus the next label on the output channel."""

    inputs: tuple  # per channel, a tuple of L label indices ending at position-1
    target: int
    position: int


def window_samples(corpus, history, output_channel=0):
    """One sample per position ``t`` in ``[history, len(corpus))``."""
    out = corpus.channel_index(output_channel)
    n = len(corpus)
    if not 1 <= history < n:
        raise UsageError(f"history must lie in [1, {n - 1}], got {history}")
    cols = [e.tolist() for e in corpus.events]
    target_col = cols[out]
    return [
        Sample(tuple(tuple(c[t - history:t]) for c in cols), target_col[t], t)
        for t in range(history, n)
    ]


def chronological_split(samples, test_fraction):
    """Hold out the last ``test_fraction`` of samples (by position) for testing."""
    if not 0 < test_fraction < 1:
        raise UsageError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    ordered = sorted(samples, key=lambda s: s.position)
    n_test = int(round(test_fraction * len(ordered)))
    if n_test == 0 or n_test == len(ordered):
        raise UsageError(f"test_fraction {test_fraction} leaves an empty fold")
    return ordered[:-n_test], ordered[-n_test:]


def stratified_split(samples, ratio, seed):
    """Split so each class sends ``floor(ratio * count)`` samples to the first fold."""
    if not 0 < ratio < 1:
        raise UsageError(f"ratio must lie in (0, 1), got {ratio}")
    by_class = defaultdict(list)
    for s in samples:
        by_class[s.target].append(s)
    small = sorted(c for c, group in by_class.items() if len(group) < 2)
    if small:
        raise StratificationError(f"classes with fewer than 2 samples: {small}")
    rng = np.random.default_rng(seed)
    fold_a, fold_b = [], []
    for c in sorted(by_class):
        group = by_class[c]
        order = rng.permutation(len(group))
        k = math.floor(ratio * len(group) + 1e-9)
        fold_a += [group[i] for i in order[:k]]
        fold_b += [group[i] for i in order[k:]]
    fold_a = [fold_a[i] for i in rng.permutation(len(fold_a))]
    fold_b = [fold_b[i] for i in rng.permutation(len(fold_b))]
    return fold_a, fold_b


def drop_rare_targets(samples, minimum=2):
    counts = Counter(s.target for s in samples)
    return [s for s in samples if counts[s.target] >= minimum]


def filter_labels(train, valid, test, vocab=None):
    """Keep only samples whose target occurs in all three folds.

    Returns ``((train, valid, test), target_vocab)`` where ``target_vocab``
    lists the surviving labels in original index order; a target's dense
    class index is its position there. Input windows are left untouched.
    """
    if not train or not valid or not test:
        raise ProtocolError("all three folds must be nonempty")
    kept = sorted({s.target for s in train} & {s.target for s in valid}
                  & {s.target for s in test})
    if not kept:
        raise ProtocolError("no target label is present in all three folds")
    keep = set(kept)
    folds = tuple([s for s in fold if s.target in keep] for fold in (train, valid, test))
    names = kept if vocab is None else [vocab.labels[i] for i in kept]
    return folds, GenreVocab(names)


@dataclass
class SynthSpec:
    """Parameters of the synthetic multistream generator.

    ``coupling`` is the probability that the output channel's next label comes
    from a fixed rule over the previous slot of all channels instead of its own
    Markov chain. ``skew`` makes label popularity decay geometrically with the
    label index so class frequencies are imbalanced.
    """

    n_channels: int = 4
    length: int = 1000
    vocab_size: int = 11
    coupling: float = 0.8
    concentration: float = 1.0
    skew: float = 1.0
    output_channel: int = 0
    channel_names: list = field(default=None)

    def __post_init__(self):
        if self.n_channels < 1:
            raise UsageError(f"n_channels must be >= 1, got {self.n_channels}")
        if self.length < 2:
            raise UsageError(f"length must be >= 2, got {self.length}")
        if self.vocab_size < 2:
            raise UsageError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if not 0.0 <= self.coupling <= 1.0:
            raise UsageError(f"coupling must lie in [0, 1], got {self.coupling}")
        if not self.concentration > 0:
            raise UsageError(f"concentration must be positive, got {self.concentration}")
        if self.skew < 0:
            raise UsageError(f"skew must be >= 0, got {self.skew}")
        if not 0 <= self.output_channel < self.n_channels:
            raise UsageError(f"output_channel must index one of {self.n_channels} channels")
        if self.channel_names is not None and len(self.channel_names) != self.n_channels:
            raise UsageError("need one channel name per channel")


def synth_tables(spec, rng):
    """Draw the base transition matrices and the coupling rule's score tables."""
    k = spec.vocab_size
    popularity = np.exp(-spec.skew * np.arange(k) / (k - 1))
    popularity /= popularity.sum()
    chains = rng.dirichlet(spec.concentration * k * popularity, size=(spec.n_channels, k))
    scores = rng.normal(size=(spec.n_channels, k, k)) + np.log(popularity)
    return chains, scores


def coupling_rule(scores, prev):
    """Deterministic next label given the previous slot of every channel."""
    total = scores[np.arange(len(prev)), prev].sum(axis=0)
    return int(np.argmax(total))


def synth_generate(spec, seed):
    rng = np.random.default_rng(seed)
    n, k, length = spec.n_channels, spec.vocab_size, spec.length
    chains, scores = synth_tables(spec, rng)
    cum = np.cumsum(chains, axis=2)
    events = np.empty((length, n), dtype=np.int64)
    events[0] = rng.integers(0, k, size=n)
    draws = rng.random((length, n))
    coins = rng.random(length)
    chan = np.arange(n)
    out = spec.output_channel
    for t in range(1, length):
        prev = events[t - 1]
        step = (cum[chan, prev] <= draws[t][:, None]).sum(axis=1)
        events[t] = np.minimum(step, k - 1)
        if coins[t] < spec.coupling:
            events[t, out] = coupling_rule(scores, prev)
    width = len(str(k - 1))
    vocab = GenreVocab([f"g{i:0{width}d}" for i in range(k)])
    names = spec.channel_names or [f"ch{i + 1}" for i in range(n)]
    return MultistreamCorpus(list(names), list(events.T.copy()), vocab)


def label_frequencies(corpus):
    """Per-channel label counts as ``{channel: {label: count}}``."""
    return {
        name: {corpus.vocab.labels[i]: int(c)
               for i, c in enumerate(np.bincount(e, minlength=len(corpus.vocab)))}
        for name, e in zip(corpus.channels, corpus.events)
    }
