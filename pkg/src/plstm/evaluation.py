"""Confusion matrices, error rate and macro-F1, and the comparison tables.

Rows of a confusion matrix are gold classes, columns predicted classes.
Macro-F1 is the unweighted mean of per-class F1; a class whose precision or
recall denominator is zero scores 0 on that quantity, so rare classes that
are never predicted drag the average down. The error rate is computed
separately from the diagonal and never derived from F1.
"""

import csv
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .errors import UsageError


@dataclass
class ConfusionMatrix:
    counts: np.ndarray
    class_names: list = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = self.counts.shape[0]
        if self.counts.shape != (k, k):
            raise UsageError(f"confusion matrix must be square, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise UsageError("confusion counts must be non-negative")
        if self.class_names is None:
            self.class_names = [str(i) for i in range(k)]

    @property
    def n_classes(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    def __add__(self, other):
        return ConfusionMatrix(self.counts + other.counts, self.class_names)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gold\\pred"] + list(self.class_names))
        for name, row in zip(self.class_names, self.counts.tolist()):
            w.writerow([name] + row)
        return buf.getvalue()


def confusion(preds, golds, n_classes, class_names=None):
    preds = np.asarray(preds, dtype=np.int64)
    golds = np.asarray(golds, dtype=np.int64)
    if preds.shape != golds.shape:
        raise UsageError(f"{preds.size} predictions but {golds.size} gold labels")
    for name, arr in (("prediction", preds), ("gold label", golds)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise UsageError(f"{name} index outside {n_classes} classes")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (golds, preds), 1)
    return ConfusionMatrix(counts, class_names)


def error_rate(cm):
    if cm.total == 0:
        raise UsageError("error rate of an empty confusion matrix is undefined")
    return 1.0 - int(np.trace(cm.counts)) / cm.total


def accuracy(cm):
    return 1.0 - error_rate(cm)


def per_class_scores(cm):
    """Precision, recall and F1 arrays, zero wherever a denominator vanishes."""
    tp = np.diag(cm.counts).astype(np.float64)
    pred = cm.counts.sum(axis=0).astype(np.float64)
    gold = cm.counts.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, pred, out=np.zeros_like(tp), where=pred > 0)
    recall = np.divide(tp, gold, out=np.zeros_like(tp), where=gold > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return precision, recall, f1


def macro_f1(cm, excluded=()):
    excluded = set(excluded)
    keep = [c for c in range(cm.n_classes) if c not in excluded]
    if not keep:
        raise UsageError("every class is excluded from the average")
    _, _, f1 = per_class_scores(cm)
    return float(np.mean(f1[keep]))


def least_frequent(counts, k):
    """Indices of the ``k`` smallest counts; on ties the higher index goes first."""
    counts = list(counts)
    if not 0 <= k < len(counts):
        raise UsageError(f"k must lie in [0, {len(counts) - 1}], got {k}")
    order = sorted(range(len(counts)), key=lambda c: (counts[c], -c))
    return set(order[:k])


@dataclass
class EvalReport:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_f1: float
    macro_f1_excluded: float
    error_rate: float
    excluded: list
    n_samples: int
    class_names: list = field(default_factory=list)


def evaluate(cm, exclude_k=2):
    """Full report for one system; exclusions are the ``exclude_k`` rarest gold classes."""
    gold = cm.counts.sum(axis=1)
    excluded = sorted(least_frequent(gold, min(exclude_k, cm.n_classes - 1)))
    p, r, f1 = per_class_scores(cm)
    return EvalReport(
        precision=p, recall=r, f1=f1,
        macro_f1=macro_f1(cm),
        macro_f1_excluded=macro_f1(cm, excluded),
        error_rate=error_rate(cm),
        excluded=[cm.class_names[c] for c in excluded],
        n_samples=cm.total,
        class_names=list(cm.class_names),
    )


def percent(x):
    """Fraction to a percentage string, two decimals, half rounded up."""
    return str((Decimal(repr(float(x))) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


REPORT_COLUMNS = ["model", "seq_size", "f1", "error_rate", "f1_excluded"]


def emit_report(cells, out_dir=None, stem="metrics"):
    """Render ``{(model_name, seq_size): EvalReport}`` as markdown and CSV.

    Model columns keep first-appearance order, rows are sorted by history size.
    Returns ``(markdown, csv_text)`` and writes ``<stem>.md``/``<stem>.csv``
    when ``out_dir`` is given.
    """
    if not cells:
        raise UsageError("nothing to report")
    models = list(dict.fromkeys(m for m, _ in cells))
    sizes = sorted({s for _, s in cells})

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for s in sizes:
        for m in models:
            if (m, s) in cells:
                r = cells[m, s]
                w.writerow([m, s, percent(r.macro_f1), percent(r.error_rate),
                            percent(r.macro_f1_excluded)])
    csv_text = buf.getvalue()

    sections = []
    for title, attr in (("F1-score (%)", "macro_f1"),
                        ("Error rate (%)", "error_rate"),
                        ("F1-score (%) without the least frequent classes",
                         "macro_f1_excluded")):
        lines = [f"### {title}", "", "| Seq. size | " + " | ".join(models) + " |",
                 "|---|" + "---|" * len(models)]
        for s in sizes:
            vals = [percent(getattr(cells[m, s], attr)) if (m, s) in cells else ""
                    for m in models]
            lines.append(f"| {s} | " + " | ".join(vals) + " |")
        sections.append("\n".join(lines))
    markdown = "\n\n".join(sections) + "\n"

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}.md").write_text(markdown, encoding="utf-8")
        (out / f"{stem}.csv").write_text(csv_text, encoding="utf-8")
    return markdown, csv_text
