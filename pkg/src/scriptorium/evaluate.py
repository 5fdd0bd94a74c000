"""CER/WER metrics and per-case evaluation reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .corpus import DatasetManifest, words


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[len(b)]


def cer(ref: str, hyp: str) -> float:
    """Character error rate in percent: 100 * edits / len(ref).

    An empty reference with a non-empty hypothesis counts every hypothesis
    character as an error against a unit length (100 * len(hyp)).
    """
    if not ref:
        return 100.0 * len(hyp)
    return 100.0 * edit_distance(ref, hyp) / len(ref)


def wer(ref: str, hyp: str) -> float:
    """Word error rate in percent over whitespace-delimited tokens."""
    ref_words = words(ref)
    hyp_words = words(hyp)
    if not ref_words:
        return 100.0 * len(hyp_words)
    return 100.0 * edit_distance(ref_words, hyp_words) / len(ref_words)


@dataclass
class CaseResult:
    case_id: str
    type_label: str
    line_count: int
    cer: float
    wer: float
    char_edits: int
    char_len: int
    word_edits: int
    word_len: int
    failed_lines: list[str] = field(default_factory=list)


@dataclass
class EvalReport:
    """Per-case rows plus micro-averaged aggregates.

    Aggregates are total edits divided by total reference length, not the
    mean of per-case rates.
    """

    cases: list[CaseResult]

    @property
    def aggregate_cer(self) -> float:
        total_len = sum(c.char_len for c in self.cases)
        if total_len == 0:
            return 0.0
        return 100.0 * sum(c.char_edits for c in self.cases) / total_len

    @property
    def aggregate_wer(self) -> float:
        total_len = sum(c.word_len for c in self.cases)
        if total_len == 0:
            return 0.0
        return 100.0 * sum(c.word_edits for c in self.cases) / total_len

    def to_tsv(self) -> str:
        out = ["case\ttype\tlines\tcer\twer"]
        for c in self.cases:
            out.append(f"{c.case_id}\t{c.type_label}\t{c.line_count}\t{c.cer:.1f}\t{c.wer:.1f}")
        out.append(f"ALL\t\t{sum(c.line_count for c in self.cases)}"
                   f"\t{self.aggregate_cer:.1f}\t{self.aggregate_wer:.1f}")
        return "\n".join(out) + "\n"

    def to_json(self) -> str:
        payload = {
            "cases": [
                {
                    "case": c.case_id,
                    "type": c.type_label,
                    "lines": c.line_count,
                    "cer": round(c.cer, 1),
                    "wer": round(c.wer, 1),
                    "failed_lines": c.failed_lines,
                }
                for c in self.cases
            ],
            "aggregate": {
                "cer": round(self.aggregate_cer, 1),
                "wer": round(self.aggregate_wer, 1),
            },
        }
        return json.dumps(payload, indent=2)


def evaluate_cases(
    manifest: DatasetManifest,
    transcriber: Callable[[str, str], str],
    case_types: dict[str, str] | None = None,
) -> EvalReport:
    """Run ``transcriber(page_id, line_id)`` over the test split, per case.

    Case text is the newline-join of its lines in manifest order, so a
    disagreement about line boundaries costs at most the affected words.  A
    transcriber exception is recorded as an empty hypothesis and flagged.
    """
    case_types = case_types or {}
    by_case: dict[str, list[tuple[str, str]]] = {}
    for page_id, line_id in manifest.test:
        page = manifest.pages[page_id]
        case_id = page.metadata.case or page.id
        by_case.setdefault(case_id, []).append((page_id, line_id))

    results = []
    for case_id, refs in by_case.items():
        ref_lines, hyp_lines, failed = [], [], []
        for page_id, line_id in refs:
            ref_lines.append(manifest.transcription(page_id, line_id))
            try:
                hyp_lines.append(transcriber(page_id, line_id))
            except Exception:
                hyp_lines.append("")
                failed.append(f"{page_id}/{line_id}")
        ref_text = "\n".join(ref_lines)
        hyp_text = "\n".join(hyp_lines)
        char_edits = edit_distance(ref_text, hyp_text)
        word_edits = edit_distance(words(ref_text), words(hyp_text))
        results.append(
            CaseResult(
                case_id=case_id,
                type_label=case_types.get(case_id, ""),
                line_count=len(refs),
                cer=cer(ref_text, hyp_text),
                wer=wer(ref_text, hyp_text),
                char_edits=char_edits,
                char_len=len(ref_text),
                word_edits=word_edits,
                word_len=len(words(ref_text)),
                failed_lines=failed,
            )
        )
    return EvalReport(cases=results)
