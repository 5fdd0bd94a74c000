import random
from functools import lru_cache

import pytest
from hypothesis import given, strategies as st

from scriptorium.corpus import Charset, DatasetManifest, PageDocument, PageMetadata, TextLineRecord
from scriptorium.evaluate import cer, edit_distance, evaluate_cases, wer


def brute_force_distance(a, b):
    """Independent oracle: the textbook recursive definition."""

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            rec(i - 1, j) + 1,
            rec(i, j - 1) + 1,
            rec(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
        )

    return rec(len(a), len(b))


class TestEditDistance:
    def test_identical(self):
        assert edit_distance("abc", "abc") == 0
        assert edit_distance([], []) == 0

    def test_single_substitution(self):
        assert edit_distance("abc", "abd") == 1

    def test_against_brute_force(self):
        rng = random.Random(7)
        alphabet = "abc"
        for _ in range(300):
            a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 6)))
            b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 6)))
            assert edit_distance(a, b) == brute_force_distance(a, b)

    @given(st.text("ab", max_size=8), st.text("ab", max_size=8))
    def test_symmetry(self, a, b):
        assert edit_distance(a, b) == edit_distance(b, a)

    @given(st.text("ab", max_size=8), st.text("ab", max_size=8))
    def test_identity_of_indiscernibles(self, a, b):
        assert (edit_distance(a, b) == 0) == (a == b)

    @given(st.text("ab", max_size=6), st.text("ab", max_size=6), st.text("ab", max_size=6))
    def test_triangle_inequality(self, a, b, c):
        assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)


class TestRates:
    def test_perfect(self):
        assert cer("ab cd", "ab cd") == 0.0
        assert wer("ab cd", "ab cd") == 0.0

    def test_hand_example(self):
        # 1 char edit over 5 chars (space included); 1 word edit over 2 words
        assert cer("ab cd", "ab ce") == pytest.approx(20.0)
        assert wer("ab cd", "ab ce") == pytest.approx(50.0)

    def test_empty_reference_rule(self):
        assert wer("", "x") == pytest.approx(100.0)
        assert cer("", "x") == pytest.approx(100.0)
        assert wer("", "x y") == pytest.approx(200.0)
        assert wer("", "") == 0.0

    def test_can_exceed_100(self):
        assert wer("a", "b c d") == pytest.approx(300.0)


def manifest_with_cases(case_lines):
    """case_lines: {case_id: [line texts]} -> manifest with one page per case."""
    pages = {}
    test = []
    for case_id, lines in case_lines.items():
        page = PageDocument(
            image_ref=f"{case_id}.png", width_px=1000, height_px=1000,
            metadata=PageMetadata(roll=case_id.split("-")[0], case=case_id),
        )
        for i, text in enumerate(lines, 1):
            page.lines.append(
                TextLineRecord(id=f"l{i}", baseline=[(0, 20 * i), (900, 20 * i)], transcription=text)
            )
            test.append((case_id, f"l{i}"))
        pages[case_id] = page
    return DatasetManifest(train=[], test=test, charset=Charset(["a"]), pages=pages)


class TestEvaluateCases:
    def test_perfect_transcriber(self):
        manifest = manifest_with_cases({"KB27-1m1": ["ab cd", "e"], "CP40-2m2": ["fg"]})
        report = evaluate_cases(manifest, lambda p, l: manifest.transcription(p, l))
        assert all(c.cer == 0.0 and c.wer == 0.0 for c in report.cases)
        assert report.aggregate_wer == 0.0

    def test_empty_transcriber_gives_wer_100(self):
        manifest = manifest_with_cases({"KB27-1m1": ["ab cd", "e"]})
        report = evaluate_cases(manifest, lambda p, l: "")
        assert all(c.wer == pytest.approx(100.0) for c in report.cases)

    def test_micro_average_is_edit_sum_over_length_sum(self):
        manifest = manifest_with_cases({"KB27-1m1": ["aaaa"], "CP40-2m2": ["bb"]})
        hyps = {("KB27-1m1", "l1"): "aaaa", ("CP40-2m2", "l1"): "cc"}
        report = evaluate_cases(manifest, lambda p, l: hyps[(p, l)])
        # 0 + 2 edits over 4 + 2 chars -> 33.3%, not the mean of 0% and 100%
        assert report.aggregate_cer == pytest.approx(100.0 * 2 / 6)
        by_case = {c.case_id: c for c in report.cases}
        assert by_case["KB27-1m1"].cer == 0.0
        assert by_case["CP40-2m2"].cer == pytest.approx(100.0)

    def test_transcriber_failure_flagged(self):
        manifest = manifest_with_cases({"KB27-1m1": ["ab", "cd"]})

        def flaky(page_id, line_id):
            if line_id == "l2":
                raise RuntimeError("boom")
            return "ab"

        report = evaluate_cases(manifest, flaky)
        assert report.cases[0].failed_lines == ["KB27-1m1/l2"]

    def test_report_formats(self):
        manifest = manifest_with_cases({"KB27-1m1": ["ab cd"]})
        report = evaluate_cases(manifest, lambda p, l: "ab ce", case_types={"KB27-1m1": "Standard"})
        tsv = report.to_tsv()
        assert tsv.splitlines()[0] == "case\ttype\tlines\tcer\twer"
        assert "KB27-1m1\tStandard\t1\t20.0\t50.0" in tsv
        assert '"wer": 50.0' in report.to_json()
