import math

import pytest

from scriptorium.lm import (
    ArpaParseError,
    LmError,
    SENT_END,
    SENT_START,
    UNK,
    export_arpa,
    import_arpa,
    train_ngram,
)

# Hand-worked Kneser-Ney fixture over the corpus ["a b", "a b"]:
#   bigram types (<s>,a), (a,b), (b,</s>) each with count 2 -> count-of-counts
#   n1=0, so discounts fall back to 0.75; every context has total 2 and one
#   following type, so each backoff weight is 0.75/2 = 0.375.
#   Continuation counts: a, b, </s> each 1 of 3 bigram types; <unk> 0.
#   Prediction vocabulary {a, b, </s>, <unk>} -> uniform base 1/4.
#   P1(b) = (1-0.75)/3 + 0.75*(1/4) = 0.2708333; P1(<unk>) = 0.1875
#   P(b|a) = (2-0.75)/2 + 0.375*P1(b) = 0.625 + 0.1015625 = 0.7265625
#   P(a|a) = 0.375 * P1(a) = 0.375 * 0.2708333 = 0.1015625
AB_CORPUS = ["a b", "a b"]

# Second fixture with non-degenerate modified-KN discounts (worked by hand):
#   bigram count-of-counts n1=5, n2=4, n3=1, n4=1 -> Y = 5/13,
#   D1 = 5/13 = 0.3846154, D2 = 89/52 = 1.7115385, D3 = 19/13 = 1.4615385.
#   Context (a,): counts a:1 b:4 </s>:2, total 7,
#   gamma(a) = (D1+D2+D3)/7 = 0.5082418
#   Unigram continuation counts a:4 b:2 c:2 </s>:3 of 11 types, order-1
#   discounts fall back to 0.75 (its n1=0), gamma_1 = 0.75*4/11 = 3/11.
#   P1(a) = 3.25/11 + (3/11)/5 = 0.35, P1(b) = P1(c) = 0.1681818,
#   P1(</s>) = 0.2590909, P1(<unk>) = 0.0545455.
#   P(b|a) = (4-D3)/7 + gamma*P1(b) = 0.3626374 + 0.0854770 = 0.4481144
#   P(a|a) = (1-D1)/7 + gamma*P1(a) = 0.0879121 + 0.1778846 = 0.2657967
#   P(</s>|a) = (2-D2)/7 + gamma*P1(</s>) = 0.0412088 + 0.1316807 = 0.1728895
MIXED_CORPUS = ["a a b", "a b c", "b c a", "c a b", "a b a"]


def linear(model, context, word):
    return 10.0 ** model.score(context, word)


class TestTrainNgram:
    def test_hand_computed_two_sentence_corpus(self):
        model = train_ngram(AB_CORPUS, n=2)
        assert linear(model, ["a"], "b") == pytest.approx(0.7265625, abs=1e-6)
        assert linear(model, ["a"], "a") == pytest.approx(0.1015625, abs=1e-6)
        assert linear(model, ["a"], "b") > linear(model, ["a"], "a")
        # unigram continuation mass is positive
        assert model.score([], "b") > -10

    def test_hand_computed_mixed_corpus(self):
        model = train_ngram(MIXED_CORPUS, n=2)
        assert linear(model, ["a"], "b") == pytest.approx(0.4481144, abs=1e-6)
        assert linear(model, ["a"], "a") == pytest.approx(0.2657967, abs=1e-6)
        assert linear(model, ["a"], SENT_END) == pytest.approx(0.1728895, abs=1e-6)
        assert linear(model, [], "a") == pytest.approx(0.35, abs=1e-6)

    def test_unseen_word_has_finite_logprob(self):
        model = train_ngram(AB_CORPUS, n=2)
        assert model.score(["a"], "never_seen") > -20
        assert model.score(["never_seen"], "b") > -20

    def test_training_beats_uniform_perplexity(self):
        model = train_ngram(MIXED_CORPUS, n=2)
        uniform_ppl = len(model.prediction_vocab())
        assert model.perplexity(MIXED_CORPUS) < uniform_ppl

    def test_bigram_not_worse_than_unigram_on_training_text(self):
        bigram = train_ngram(MIXED_CORPUS, n=2)
        unigram = train_ngram(MIXED_CORPUS, n=1)
        assert bigram.perplexity(MIXED_CORPUS) <= unigram.perplexity(MIXED_CORPUS)

    def test_single_type_corpus_falls_back_to_add_one(self):
        with pytest.warns(UserWarning, match="add-one"):
            model = train_ngram(["a a a"], n=2)
        # add-one over context (a,): counts a:2, </s>:1, vocab size 3
        assert linear(model, ["a"], "a") == pytest.approx(3 / 6, abs=1e-6)
        assert linear(model, ["a"], SENT_END) == pytest.approx(2 / 6, abs=1e-6)

    def test_empty_corpus_rejected(self):
        with pytest.raises(LmError):
            train_ngram([], n=2)
        with pytest.raises(LmError):
            train_ngram(["   "], n=2)

    def test_deterministic_and_order_independent_of_lines(self):
        a = export_arpa(train_ngram(MIXED_CORPUS, n=2))
        b = export_arpa(train_ngram(list(reversed(MIXED_CORPUS)), n=2))
        assert a == b


class TestNormalization:
    @pytest.mark.parametrize("corpus", [AB_CORPUS, MIXED_CORPUS, ["x y z", "z y x", "y?! x"]])
    def test_conditionals_sum_to_one_for_seen_contexts(self, corpus):
        model = train_ngram(corpus, n=2)
        contexts = {g[0] for g in model.probs[2]}
        for ctx in contexts:
            total = sum(linear(model, [ctx], w) for w in model.prediction_vocab())
            assert total == pytest.approx(1.0, abs=1e-4), ctx

    def test_unigram_distribution_sums_to_one(self):
        model = train_ngram(MIXED_CORPUS, n=2)
        total = sum(linear(model, [], w) for w in model.prediction_vocab())
        assert total == pytest.approx(1.0, abs=1e-4)


class TestArpa:
    def test_round_trip_score_equality(self):
        model = train_ngram(MIXED_CORPUS, n=2)
        again = import_arpa(export_arpa(model))
        probes = [([], "a"), (["a"], "b"), (["a"], "a"), (["c"], SENT_END),
                  ([SENT_START], "a"), (["b"], "zzz")]
        for ctx, w in probes:
            assert again.score(ctx, w) == pytest.approx(model.score(ctx, w), abs=1e-6)

    def test_sections_present(self):
        text = export_arpa(train_ngram(AB_CORPUS, n=2))
        assert "\\data\\" in text
        assert "\\1-grams:" in text
        assert "\\2-grams:" in text
        assert text.rstrip().endswith("\\end\\")

    def test_missing_end_marker_rejected(self):
        text = export_arpa(train_ngram(AB_CORPUS, n=2)).replace("\\end\\", "")
        with pytest.raises(ArpaParseError, match="end"):
            import_arpa(text)

    def test_malformed_header_reports_line(self):
        with pytest.raises(ArpaParseError, match="line 2"):
            import_arpa("\\data\\\nngram oops\n\\end\\\n")

    def test_hand_written_external_fixture_agrees(self):
        # The MIXED_CORPUS model written out independently from hand
        # arithmetic (log10 of the worked values).  Backoffs:
        #   gamma(b) = (D1 + 2*D2)/5        = 0.7615385   (followers a:1 c:2 </s>:2)
        #   gamma(c) = (D1 + D2)/3          = 0.6987179   (followers </s>:1 a:2)
        #   gamma(<s>) = (2*D1 + D3)/5      = 0.4461538   (followers a:3 b:1 c:1)
        # Worked bigrams, e.g. P(a|b) = (1-D1)/5 + gamma(b)*P1(a) = 0.3896154.
        fixture = "\n".join([
            "\\data\\",
            "ngram 1=5",
            "ngram 2=11",
            "",
            "\\1-grams:",
            f"{math.log10(0.35):.7f}\ta\t{math.log10(0.5082418):.7f}",
            f"{math.log10(0.1681818):.7f}\tb\t{math.log10(0.7615385):.7f}",
            f"{math.log10(0.1681818):.7f}\tc\t{math.log10(0.6987179):.7f}",
            f"{math.log10(0.2590909):.7f}\t</s>",
            f"-99\t<s>\t{math.log10(0.4461538):.7f}",
            "",
            "\\2-grams:",
            f"{math.log10(0.2657967):.7f}\ta a",
            f"{math.log10(0.4481144):.7f}\ta b",
            f"{math.log10(0.1728895):.7f}\ta </s>",
            f"{math.log10(0.3896154):.7f}\tb a",
            f"{math.log10(0.1857692):.7f}\tb c",
            f"{math.log10(0.2550000):.7f}\tb </s>",
            f"{math.log10(0.3407051):.7f}\tc a",
            f"{math.log10(0.3861591):.7f}\tc </s>",
            f"{math.log10(0.4638462):.7f}\t<s> a",
            f"{math.log10(0.1981119):.7f}\t<s> b",
            f"{math.log10(0.1981119):.7f}\t<s> c",
            "",
            "\\end\\",
        ]) + "\n"
        external = import_arpa(fixture)
        trained = train_ngram(MIXED_CORPUS, n=2)
        for ctx in ([], ["a"], ["b"], ["c"], [SENT_START]):
            for w in ("a", "b", "c", SENT_END):
                assert trained.score(ctx, w) == pytest.approx(
                    external.score(ctx, w), abs=1e-3
                ), (ctx, w)


class TestScoreChain:
    def test_seen_bigram_uses_stored_value(self):
        model = train_ngram(MIXED_CORPUS, n=2)
        assert model.score(["a"], "b") == model.probs[2][("a", "b")]

    def test_unseen_bigram_backs_off(self):
        model = train_ngram(MIXED_CORPUS, n=2)
        expected = model.backoffs[1][("c",)] + model.probs[1][("b",)]
        assert model.score(["c"], "b") == pytest.approx(expected, abs=1e-9)

    def test_long_context_truncated_to_order(self):
        model = train_ngram(MIXED_CORPUS, n=2)
        assert model.score(["x", "y", "a"], "b") == model.score(["a"], "b")

    def test_oov_context_mapped_to_unk(self):
        model = train_ngram(MIXED_CORPUS, n=2)
        assert model.score(["qqq"], "a") == model.score([UNK], "a")


class TestHigherOrders:
    def test_trigram_trains_and_normalizes(self):
        corpus = ["a b c", "a b d", "b c a", "a b c"]
        model = train_ngram(corpus, n=3)
        contexts = {g[:2] for g in model.probs[3]}
        for ctx in contexts:
            total = sum(linear(model, list(ctx), w) for w in model.prediction_vocab())
            assert total == pytest.approx(1.0, abs=1e-4), ctx

    def test_unigram_model_scores(self):
        model = train_ngram(MIXED_CORPUS, n=1)
        total = sum(linear(model, [], w) for w in model.prediction_vocab())
        assert total == pytest.approx(1.0, abs=1e-4)
