"""Bigram language model training, ARPA serialization, and beam fusion.

Shows how a word-level Kneser-Ney bigram breaks a tie the acoustic
evidence leaves open: the recognizer is undecided between two final
characters, and the language model picks the word it has seen.
"""

import numpy as np

from scriptorium.corpus import Charset
from scriptorium.decode import DecodeConfig, beam_decode, greedy_decode
from scriptorium.lm import export_arpa, train_ngram

# scribes abbreviate "versus" to the single letter "v" -- the corpus knows
# which one-letter word follows "se", the recognizer does not
corpus = [
    "optulit se v",
    "optulit se v",
    "se v eum de placito",
    "de placito terre q",
]
lm = train_ngram(corpus, n=2)
print("perplexity on its own training lines:",
      f"{lm.perplexity(corpus):.2f} (uniform would be {len(lm.prediction_vocab())})")
print("\nfirst lines of the ARPA serialization:")
print("\n".join(export_arpa(lm).splitlines()[:10]), "\n...")

# A toy charset and a logit matrix spelling "se " then an ambiguous char:
# the acoustic model slightly prefers "q", the LM has only seen "se v".
cs = Charset([" ", "e", "q", "s", "v"])
frames = []
for ch in "se ":
    row = np.full(cs.num_classes, 0.01)
    row[cs.index(ch)] = 0.95
    frames.append(row)
tie = np.full(cs.num_classes, 0.02)
tie[cs.index("q")] = 0.46
tie[cs.index("v")] = 0.44
frames.append(tie)
logits = np.log(np.array(frames) / np.array(frames).sum(axis=1, keepdims=True))

print("\ngreedy decode:            ", repr(greedy_decode(logits, cs)))
cfg = DecodeConfig(beam_width=20, lm_alpha=0.8, word_bonus=0.5, n_best=2)
for label, model in (("beam without LM", None), ("beam with bigram LM", lm)):
    results = beam_decode(logits, cs, lm=model, cfg=cfg)
    print(f"{label:26}", [(t, round(s, 2)) for t, s in results])
