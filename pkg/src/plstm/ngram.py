"""Count-based next-label baselines with Witten-Bell interpolation.

Two variants share one model type:

* mono-channel: the context is the output channel's last L labels;
* multichannel: the context concatenates every channel's last L labels in
  channel order, and backing off shortens all of them by one step at once.

Smoothing, from order 0 upward::

    P_-1(w)      = 1 / K
    P_l(w | ctx) = lam * c(ctx, w) / c(ctx) + (1 - lam) * P_{l-1}(w | ctx')
    lam          = c(ctx) / (c(ctx) + T(ctx))

where ``T(ctx)`` is the number of distinct labels seen after ``ctx`` and an
unseen context has ``lam = 0``.
"""

from collections import defaultdict

import numpy as np

from .errors import UsageError


class NgramModel:
    def __init__(self, order, vocab_size, multichannel=False, n_channels=1, output_channel=0):
        if not 0 <= order <= 4:
            raise UsageError(f"order must lie in [0, 4], got {order}")
        if vocab_size < 1:
            raise UsageError(f"vocab_size must be >= 1, got {vocab_size}")
        self.order = order
        self.vocab_size = vocab_size
        self.multichannel = multichannel
        self.n_channels = n_channels
        self.output_channel = output_channel
        # counts[l][ctx][label]; ctx is a flat tuple of label indices
        self.counts = [defaultdict(dict) for _ in range(order + 1)]
        self.totals = [defaultdict(int) for _ in range(order + 1)]

    @property
    def context_channels(self):
        return self.n_channels if self.multichannel else 1

    def continuation_count(self, level, ctx):
        return len(self.counts[level].get(ctx, ()))

    def _add(self, histories, label):
        avail = min(len(h) for h in histories)
        for level in range(min(avail, self.order) + 1):
            ctx = _subkey(histories, level)
            row = self.counts[level][ctx]
            row[label] = row.get(label, 0) + 1
            self.totals[level][ctx] += 1

    def _histories(self, per_channel):
        if self.multichannel:
            if len(per_channel) != self.n_channels:
                raise UsageError(f"expected {self.n_channels} channel histories, "
                                 f"got {len(per_channel)}")
            return [tuple(h) for h in per_channel]
        if len(per_channel) == 1:
            return [tuple(per_channel[0])]
        return [tuple(per_channel[self.output_channel])]

    def distribution(self, context):
        """Smoothed distribution over all K labels for a flat order-L context."""
        context = tuple(context)
        width = self.order * self.context_channels
        if len(context) != width:
            raise UsageError(f"context must hold {width} labels, got {len(context)}")
        chunks = _split(context, self.context_channels)
        p = np.full(self.vocab_size, 1.0 / self.vocab_size)
        for level in range(self.order + 1):
            ctx = _subkey(chunks, level)
            total = self.totals[level].get(ctx, 0)
            if total == 0:
                continue
            row = self.counts[level][ctx]
            lam = total / (total + len(row))
            ml = np.zeros(self.vocab_size)
            for lab, c in row.items():
                ml[lab] = c / total
            p = lam * ml + (1.0 - lam) * p
        return p

    def dump_text(self):
        """One ``order<TAB>context<TAB>label<TAB>count`` line per stored count, sorted."""
        rows = []
        for level, table in enumerate(self.counts):
            for ctx, row in table.items():
                for lab, c in row.items():
                    rows.append((level, ctx, lab, c))
        rows.sort()
        return "".join(
            f"{level}\t{' '.join(map(str, ctx)) or '-'}\t{lab}\t{c}\n"
            for level, ctx, lab, c in rows
        )

    def to_dict(self):
        return {
            "order": self.order,
            "vocab_size": self.vocab_size,
            "multichannel": self.multichannel,
            "n_channels": self.n_channels,
            "output_channel": self.output_channel,
            "counts": sorted(
                [level, list(ctx), lab, c]
                for level, table in enumerate(self.counts)
                for ctx, row in table.items()
                for lab, c in row.items()
            ),
        }

    @classmethod
    def from_dict(cls, d):
        m = cls(d["order"], d["vocab_size"], d["multichannel"], d["n_channels"],
                d["output_channel"])
        for level, ctx, lab, c in d["counts"]:
            m.counts[level][tuple(ctx)][lab] = c
            m.totals[level][tuple(ctx)] += c
        return m


def _split(context, n_chunks):
    size = len(context) // n_chunks
    return [context[k * size:(k + 1) * size] for k in range(n_chunks)]


def _subkey(histories, level):
    out = ()
    for h in histories:
        out += tuple(h[len(h) - level:]) if level else ()
    return out


def fit(corpus, order, output_channel=0, multichannel=False):
    """Count every position of ``corpus`` at every order up to ``order``.

    Position ``t`` contributes to order ``l`` whenever ``t >= l``, so lower
    orders also see the first few events.
    """
    out = corpus.channel_index(output_channel)
    n = len(corpus)
    if n == 0:
        raise UsageError("cannot fit an n-gram model on an empty corpus")
    if order > n - 1:
        raise UsageError(f"order {order} needs at least {order + 1} events, corpus has {n}")
    m = NgramModel(order, len(corpus.vocab), multichannel, corpus.n_channels, out)
    cols = [e.tolist() for e in corpus.events]
    chans = cols if multichannel else [cols[out]]
    target = cols[out]
    for t in range(n):
        lo = max(0, t - order)
        m._add([c[lo:t] for c in chans], target[t])
    return m


def fit_samples(samples, order, vocab_size, n_channels, output_channel=0,
                multichannel=False, target_of=None):
    """Fit from windowed samples (e.g. one training fold).

    ``target_of`` maps a sample to its class index, defaulting to ``s.target``.
    """
    if not samples:
        raise UsageError("cannot fit an n-gram model on an empty fold")
    m = NgramModel(order, vocab_size, multichannel, n_channels, output_channel)
    for s in samples:
        label = s.target if target_of is None else target_of(s)
        hist = s.inputs if multichannel else [s.inputs[output_channel]]
        m._add([h[len(h) - order:] if order else () for h in hist], label)
    return m


def prob(m, context, label):
    if not 0 <= label < m.vocab_size:
        raise UsageError(f"label {label} outside vocabulary of size {m.vocab_size}")
    return float(m.distribution(context)[label])


def predict_next(m, histories):
    """Most probable next label; ``histories`` holds one tuple per channel."""
    hist = m._histories(histories)
    for h in hist:
        if len(h) != m.order:
            raise UsageError(f"each history must hold {m.order} labels, got {len(h)}")
    context = sum(hist, ())
    return int(np.argmax(m.distribution(context)))
