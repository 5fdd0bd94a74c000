"""Word-level backoff n-gram language model (default bigram).

Training uses interpolated modified Kneser-Ney: the top order keeps raw
counts, lower orders use continuation (distinct-predecessor) counts, and
three discount values per order are estimated from count-of-counts with a
0.75 fallback when the estimates are degenerate.  The unigram level is
interpolated with a uniform distribution over the prediction vocabulary, so
every conditional distribution sums to one exactly and unseen words receive
mass through ``<unk>``.

Models are stored the ARPA way: log10 probabilities per seen n-gram and
log10 backoff weights per context; ``score`` follows the standard backoff
chain.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

SENT_START = "<s>"
SENT_END = "</s>"
UNK = "<unk>"

LOG10_ZERO = -99.0  # ARPA convention for the unpredictable <s>
FALLBACK_DISCOUNT = 0.75


class LmError(Exception):
    pass


class ArpaParseError(LmError):
    pass


Gram = tuple[str, ...]


@dataclass
class NGramModel:
    order: int
    vocab: set[str]
    # probs[k][gram] = log10 P(gram[-1] | gram[:-1]) for k-grams, k = 1..order
    probs: dict[int, dict[Gram, float]]
    # backoffs[k][gram] = log10 bow(gram) for k-gram contexts, k = 1..order-1
    backoffs: dict[int, dict[Gram, float]] = field(default_factory=dict)

    def prediction_vocab(self) -> list[str]:
        return sorted(self.vocab - {SENT_START})

    def _lookup(self, word: str) -> str:
        return word if word in self.vocab else UNK

    def score(self, context: list[str], word: str) -> float:
        """log10 P(word | context) via the ARPA backoff chain."""
        word = self._lookup(word)
        ctx = tuple(self._lookup(w) for w in context)[max(0, len(context) - (self.order - 1)):]
        return self._score(ctx, word)

    def _score(self, ctx: Gram, word: str) -> float:
        gram = (*ctx, word)
        k = len(gram)
        if gram in self.probs.get(k, {}):
            return self.probs[k][gram]
        if not ctx:
            # closed vocabulary: every word maps to an existing unigram
            return self.probs[1].get((word,), LOG10_ZERO)
        bow = self.backoffs.get(len(ctx), {}).get(ctx, 0.0)
        return bow + self._score(ctx[1:], word)

    def perplexity(self, lines: list[str]) -> float:
        total = 0.0
        events = 0
        for line in lines:
            tokens = line.split()
            history = [SENT_START]
            for token in [*tokens, SENT_END]:
                total += self.score(history, token)
                history.append(token)
                events += 1
        if events == 0:
            raise LmError("empty corpus")
        return 10.0 ** (-total / events)


def score(model: NGramModel, context: list[str], word: str) -> float:
    return model.score(context, word)


def _count_grams(corpus: list[str], order: int) -> dict[int, dict[Gram, int]]:
    counts: dict[int, dict[Gram, int]] = {k: {} for k in range(1, order + 1)}
    for line in corpus:
        tokens = [SENT_START, *line.split(), SENT_END]
        for k in range(1, order + 1):
            for i in range(len(tokens) - k + 1):
                gram = tuple(tokens[i:i + k])
                counts[k][gram] = counts[k].get(gram, 0) + 1
    return counts


def _discounts(values: list[int]) -> tuple[float, float, float]:
    """Modified KN discounts for counts 1, 2, and 3+, from count-of-counts.

    The estimates need all of n1..n4 to be populated; a zero anywhere gives
    a discount at the edge of its valid range (e.g. D3 = 3, which erases
    count-3 types completely), so sparse statistics fall back to 0.75.
    """
    n = [0, 0, 0, 0]  # n1..n4
    for v in values:
        if 1 <= v <= 4:
            n[v - 1] += 1
    n1, n2, n3, n4 = n
    if min(n1, n2, n3, n4) == 0:
        return (FALLBACK_DISCOUNT,) * 3
    y = n1 / (n1 + 2 * n2)
    d1 = 1.0 - 2.0 * y * n2 / n1
    d2 = 2.0 - 3.0 * y * n3 / n2
    d3 = 3.0 - 4.0 * y * n4 / n3
    if min(d1, d2, d3) <= 0 or d1 >= 1 or d2 >= 2 or d3 >= 3:
        return (FALLBACK_DISCOUNT,) * 3
    return d1, d2, d3


def _discount_for(count: int, d: tuple[float, float, float]) -> float:
    if count >= 3:
        return d[2]
    if count == 2:
        return d[1]
    if count == 1:
        return d[0]
    return 0.0


def train_ngram(corpus: list[str], n: int = 2) -> NGramModel:
    """Interpolated modified Kneser-Ney over whitespace tokens.

    Each corpus line is one sentence wrapped in sentence markers.  A corpus
    with a single word type falls back to add-one smoothing (KN count-of-
    count statistics are meaningless there) with a warning.
    """
    if not corpus or not any(line.split() for line in corpus):
        raise LmError("empty corpus")
    if n < 1:
        raise LmError("order must be >= 1")

    raw = _count_grams(corpus, n)
    word_types = {g[0] for g in raw[1]} - {SENT_START, SENT_END}
    vocab = word_types | {SENT_START, SENT_END, UNK}

    if len(word_types) == 1:
        warnings.warn("single-type corpus: falling back to add-one smoothing")
        return _train_add_one(raw, vocab, n)

    pred_vocab = sorted(vocab - {SENT_START})
    v = len(pred_vocab)

    # adjusted counts: raw at the top order, continuation types below
    adjusted: dict[int, dict[Gram, int]] = {n: dict(raw[n])}
    for k in range(n - 1, 0, -1):
        cont: dict[Gram, int] = {}
        for gram in adjusted[k + 1]:
            suffix = gram[1:]
            cont[suffix] = cont.get(suffix, 0) + 1
        # keep entries for every raw k-gram so context chains stay intact
        for gram in raw[k]:
            cont.setdefault(gram, 0)
        adjusted[k] = cont

    # interpolated probabilities, bottom up
    prob_lower: dict[Gram, float] = {}
    probs: dict[int, dict[Gram, float]] = {}
    backoffs: dict[int, dict[Gram, float]] = {}
    for k in range(1, n + 1):
        level = adjusted[k]
        if k == 1:
            # <s> is context-only: it must not soak up unigram mass
            level = {g: c for g, c in level.items() if g != (SENT_START,)}
        d = _discounts([c for c in level.values() if c > 0])
        by_context: dict[Gram, list[Gram]] = {}
        for gram in level:
            by_context.setdefault(gram[:-1], []).append(gram)

        level_probs: dict[Gram, float] = {}
        level_bows: dict[Gram, float] = {}
        for ctx, grams in by_context.items():
            total = sum(level[g] for g in grams)
            if total == 0:
                # context exists only through raw bookkeeping; pure backoff
                level_bows[ctx] = 0.0
                for gram in grams:
                    level_probs[gram] = _lower_prob(gram, k, prob_lower, v)
                continue
            discount_mass = sum(_discount_for(level[g], d) for g in grams)
            gamma = discount_mass / total
            for gram in grams:
                c = level[gram]
                p = max(c - _discount_for(c, d), 0.0) / total
                p += gamma * _lower_prob(gram, k, prob_lower, v)
                level_probs[gram] = p
            level_bows[ctx] = gamma

        if k == 1:
            # every predictable word needs a unigram entry; <s> is context-only
            for word in pred_vocab:
                gram = (word,)
                if gram not in level_probs:
                    gamma = level_bows.get((), 0.0)
                    level_probs[gram] = gamma * (1.0 / v)
            level_probs[(SENT_START,)] = 0.0  # log10 -> LOG10_ZERO on conversion
        probs[k] = level_probs
        if k > 1:
            # the bows computed at this level belong to its (k-1)-gram contexts
            backoffs[k - 1] = dict(level_bows)
        prob_lower = level_probs

    return _to_log10(NGramModelBuilder(n, vocab, probs, backoffs))


def _lower_prob(gram: Gram, k: int, prob_lower: dict[Gram, float], v: int) -> float:
    if k == 1:
        return 1.0 / v
    return prob_lower.get(gram[1:], 0.0)


@dataclass
class NGramModelBuilder:
    order: int
    vocab: set[str]
    probs: dict[int, dict[Gram, float]]  # linear probabilities
    backoffs: dict[int, dict[Gram, float]]


def _to_log10(builder: NGramModelBuilder) -> NGramModel:
    probs = {}
    for k, level in builder.probs.items():
        out = {}
        for gram, p in level.items():
            if gram == (SENT_START,):
                out[gram] = LOG10_ZERO
            else:
                out[gram] = math.log10(p) if p > 0 else LOG10_ZERO
        probs[k] = out
    backoffs = {}
    for k, level in builder.backoffs.items():
        backoffs[k] = {
            gram: (math.log10(b) if b > 0 else 0.0) for gram, b in level.items()
        }
    return NGramModel(order=builder.order, vocab=builder.vocab, probs=probs, backoffs=backoffs)


def _train_add_one(raw, vocab: set[str], n: int) -> NGramModel:
    pred_vocab = sorted(vocab - {SENT_START})
    v = len(pred_vocab)
    probs: dict[int, dict[Gram, float]] = {}
    backoffs: dict[int, dict[Gram, float]] = {}
    unigram_total = sum(c for g, c in raw[1].items() if g != (SENT_START,))
    probs[1] = {}
    for word in pred_vocab:
        c = raw[1].get((word,), 0)
        probs[1][(word,)] = (c + 1) / (unigram_total + v)
    probs[1][(SENT_START,)] = 0.0
    for k in range(2, n + 1):
        level: dict[Gram, float] = {}
        contexts = {g[:-1] for g in raw[k]}
        for ctx in contexts:
            total = sum(c for g, c in raw[k].items() if g[:-1] == ctx)
            for word in pred_vocab:
                c = raw[k].get((*ctx, word), 0)
                level[(*ctx, word)] = (c + 1) / (total + v)
        probs[k] = level
        backoffs[k - 1] = {}
    return _to_log10(NGramModelBuilder(n, vocab, probs, backoffs))


# ---------------------------------------------------------------------------
# ARPA interop
# ---------------------------------------------------------------------------


def export_arpa(model: NGramModel) -> str:
    lines = ["\\data\\"]
    for k in range(1, model.order + 1):
        lines.append(f"ngram {k}={len(model.probs.get(k, {}))}")
    lines.append("")
    for k in range(1, model.order + 1):
        lines.append(f"\\{k}-grams:")
        for gram in sorted(model.probs.get(k, {})):
            logp = model.probs[k][gram]
            row = f"{logp:.7f}\t{' '.join(gram)}"
            if k < model.order:
                bow = model.backoffs.get(k, {}).get(gram, None)
                if bow is not None and bow != 0.0:
                    row += f"\t{bow:.7f}"
            lines.append(row)
        lines.append("")
    lines.append("\\end\\")
    return "\n".join(lines) + "\n"


def import_arpa(text: str) -> NGramModel:
    lines = text.splitlines()
    idx = 0

    def fail(message: str, lineno: int):
        raise ArpaParseError(f"line {lineno + 1}: {message}")

    while idx < len(lines) and lines[idx].strip() != "\\data\\":
        if lines[idx].strip():
            fail(f"expected \\data\\, found {lines[idx]!r}", idx)
        idx += 1
    if idx >= len(lines):
        raise ArpaParseError("missing \\data\\ section")
    idx += 1

    declared: dict[int, int] = {}
    while idx < len(lines):
        row = lines[idx].strip()
        if not row:
            idx += 1
            continue
        if row.startswith("ngram"):
            try:
                spec = row.split(None, 1)[1]
                k_str, count_str = spec.split("=")
                declared[int(k_str)] = int(count_str)
            except (IndexError, ValueError):
                fail(f"bad ngram declaration {row!r}", idx)
            idx += 1
        else:
            break
    if not declared:
        raise ArpaParseError("no ngram declarations in \\data\\")
    order = max(declared)

    probs: dict[int, dict[Gram, float]] = {k: {} for k in declared}
    backoffs: dict[int, dict[Gram, float]] = {k: {} for k in range(1, order)}
    saw_end = False
    current_k: int | None = None
    while idx < len(lines):
        row = lines[idx].strip()
        if not row:
            idx += 1
            continue
        if row == "\\end\\":
            saw_end = True
            break
        if row.startswith("\\") and row.endswith("-grams:"):
            try:
                current_k = int(row[1:].split("-")[0])
            except ValueError:
                fail(f"bad section header {row!r}", idx)
            if current_k not in declared:
                fail(f"section \\{current_k}-grams: not declared", idx)
            idx += 1
            continue
        if current_k is None:
            fail(f"entry outside any n-gram section: {row!r}", idx)
        parts = row.split("\t") if "\t" in row else row.split()
        if "\t" in row:
            tokens_part = parts[1].split()
            extras = parts[2:]
        else:
            tokens_part = parts[1:1 + current_k]
            extras = parts[1 + current_k:]
        try:
            logp = float(parts[0])
        except ValueError:
            fail(f"bad probability in {row!r}", idx)
        if len(tokens_part) != current_k:
            fail(f"expected {current_k} tokens in {row!r}", idx)
        gram = tuple(tokens_part)
        probs[current_k][gram] = logp
        if extras:
            try:
                backoffs.setdefault(current_k, {})[gram] = float(extras[0])
            except ValueError:
                fail(f"bad backoff in {row!r}", idx)
        idx += 1
    if not saw_end:
        raise ArpaParseError("missing \\end\\ marker")

    vocab = {g[0] for g in probs.get(1, {})} | {SENT_START, SENT_END, UNK}
    return NGramModel(order=order, vocab=vocab, probs=probs, backoffs={k: v for k, v in backoffs.items() if k < order})
