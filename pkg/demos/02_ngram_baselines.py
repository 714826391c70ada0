#!/usr/bin/env python3
"""Count baselines on a toy schedule: what smoothing does, and what extra channels buy."""

from plstm import GenreVocab, MultistreamCorpus, prob
from plstm.ngram import fit, predict_next

vocab = GenreVocab(["A", "B"])
tiny = MultistreamCorpus(["tv"], [[0, 1, 0, 1, 0]], vocab)

# After "A" the corpus only ever shows "B", yet smoothing keeps some mass on "A".
bigram = fit(tiny, order=1)
print("P(B | A) =", prob(bigram, [0], 1), " (17/21 =", 17 / 21, ")")
print("P(A | A) =", prob(bigram, [0], 0))
print(bigram.dump_text())

# %% Two channels where the second one announces what the first will air next.
labels = GenreVocab(["News", "Film", "Sport"])
enc = lambda names: [labels.encode(n) for n in names.split()]
first = enc("News Film News Sport News Film News Sport News Film")
second = enc("Film News Sport News Film News Sport News Film News")
corpus = MultistreamCorpus(["main", "rival"], [first, second], labels)

mono = fit(corpus, order=1)
joint = fit(corpus, order=1, multichannel=True)
history = [(labels.encode("News"),), (labels.encode("Sport"),)]
print("mono-channel guess after News:  ", labels.labels[predict_next(mono, history)])
print("two-channel guess (rival Sport):", labels.labels[predict_next(joint, history)])
