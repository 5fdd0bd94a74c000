"""CTC decoding: greedy collapse and beam search with LM shallow fusion.

The beam tracks (prefix, last emitted class) states, where the last class is
either the blank or the prefix's final character; the two states per prefix
hold the classic blank / non-blank probability masses.  Probabilities of
paths reaching the same state are summed.  Pruning keeps the best states, so
a width-1 beam makes exactly the per-frame argmax transitions of greedy
decoding, while an exhaustive beam computes the true posterior of every
collapsed string.

With a language model, completing a word (emitting a space) adds
``lm_alpha * log10 P(word | previous word) + word_bonus`` to the hypothesis
score used for ranking and pruning; the CTC mass itself stays pure.  Final
hypotheses also score their trailing word.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Charset
from .lm import NGramModel, SENT_START


@dataclass
class DecodeConfig:
    beam_width: int = 100
    lm_alpha: float = 0.5
    word_bonus: float = 1.5
    prune_threshold: float = -12.0  # natural-log frame prob below which a class is skipped
    n_best: int = 1

    def __post_init__(self) -> None:
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")


def greedy_decode(logits: np.ndarray, charset: Charset) -> str:
    """Per-frame argmax, collapse repeats, drop blanks."""
    best = np.asarray(logits).argmax(axis=1)
    blank = charset.blank_index
    out = []
    prev = -1
    for k in best:
        if k != prev and k != blank:
            out.append(charset.chars[k])
        prev = int(k)
    return "".join(out)


@dataclass
class _Beam:
    """One (prefix, last emitted class) search state."""

    text: str
    last: int  # class index; blank means the prefix is 'closed'
    log_p: float  # total CTC mass of paths reaching this state
    lm_score: float  # accumulated fusion bonus (0 without an LM)
    context: tuple[str, ...] = ()  # completed words, most recent last
    partial: str = ""  # word in progress

    def rank_score(self) -> float:
        return self.log_p + self.lm_score


def _lm_word_score(lm: NGramModel, context: tuple[str, ...], word: str) -> float:
    history = [SENT_START, *context]
    return lm.score(history, word)


def beam_decode(
    logits: np.ndarray,
    charset: Charset,
    lm: NGramModel | None = None,
    cfg: DecodeConfig | None = None,
) -> list[tuple[str, float]]:
    """N-best beam search over a (frames, classes) log-probability matrix.

    Returns (text, score) pairs sorted by descending score, where score is
    the collapsed-string log-probability plus any LM fusion bonus.
    """
    cfg = cfg or DecodeConfig()
    y = np.asarray(logits, dtype=np.float64)
    n, c = y.shape
    blank = charset.blank_index
    if c != charset.num_classes:
        raise ValueError(f"logits have {c} classes, charset expects {charset.num_classes}")
    space = charset.chars.index(" ") if " " in charset.chars else None
    fuse = lm is not None and space is not None

    beams: dict[tuple[str, int], _Beam] = {
        ("", blank): _Beam(text="", last=blank, log_p=0.0, lm_score=0.0)
    }

    for t in range(n):
        frame = y[t]
        keep = [k for k in range(c) if frame[k] > cfg.prune_threshold]
        if not keep:
            keep = [int(frame.argmax())]
        next_beams: dict[tuple[str, int], _Beam] = {}

        def accumulate(key, text, last, log_p, lm_score, context, partial):
            cur = next_beams.get(key)
            if cur is None:
                next_beams[key] = _Beam(text, last, log_p, lm_score, context, partial)
            else:
                cur.log_p = np.logaddexp(cur.log_p, log_p)

        for beam in beams.values():
            for k in keep:
                p = frame[k]
                if k == blank:
                    accumulate((beam.text, blank), beam.text, blank, beam.log_p + p,
                               beam.lm_score, beam.context, beam.partial)
                elif k == beam.last:
                    # same class twice in a row collapses into the same prefix
                    accumulate((beam.text, k), beam.text, k, beam.log_p + p,
                               beam.lm_score, beam.context, beam.partial)
                else:
                    ch = charset.chars[k]
                    text = beam.text + ch
                    lm_score = beam.lm_score
                    context, partial = beam.context, beam.partial
                    if fuse:
                        if k == space:
                            if partial:
                                lm_score += cfg.lm_alpha * _lm_word_score(lm, context, partial)
                                lm_score += cfg.word_bonus
                                context = (*context, partial)
                            partial = ""
                        else:
                            partial = partial + ch
                    accumulate((text, k), text, k, beam.log_p + p,
                               lm_score, context, partial)

        ranked = sorted(next_beams.values(), key=_Beam.rank_score, reverse=True)
        beams = {(b.text, b.last): b for b in ranked[: cfg.beam_width]}

    # merge the blank/non-blank states of each prefix (sum their CTC mass;
    # the fusion bonus is a function of the text alone) and settle trailing words
    mass: dict[str, float] = {}
    bonus: dict[str, float] = {}
    for beam in beams.values():
        extra = beam.lm_score
        if fuse and beam.partial:
            extra += cfg.lm_alpha * _lm_word_score(lm, beam.context, beam.partial)
            extra += cfg.word_bonus
        if beam.text in mass:
            mass[beam.text] = float(np.logaddexp(mass[beam.text], beam.log_p))
        else:
            mass[beam.text] = beam.log_p
            bonus[beam.text] = extra
    results = [(text, mass[text] + bonus[text]) for text in mass]
    results.sort(key=lambda pair: pair[1], reverse=True)
    return results[: cfg.n_best]
