"""PageXML corpus handling: parse/write pages, manifests, charsets, statistics.

Pages follow the PAGE schema (both the 2013-07-15 and 2019-07-15 namespaces
are accepted on input; output always uses 2019-07-15).  A page holds ordered
text lines, each with a baseline polyline and an optional transcription.
"""

from __future__ import annotations

import json
import unicodedata
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

PAGE_NS_2013 = "http://schema.primaresearch.org/PAGE/gts/pagecontent/2013-07-15"
PAGE_NS_2019 = "http://schema.primaresearch.org/PAGE/gts/pagecontent/2019-07-15"
KNOWN_NAMESPACES = (PAGE_NS_2013, PAGE_NS_2019)


class CorpusError(Exception):
    """Raised for unrecoverable corpus problems (bad XML, bad manifest)."""


class PageParseError(CorpusError):
    """Malformed XML; carries the underlying line/column when known."""


def normalize_transcription(text: str) -> str:
    """Canonical transcription form: NFC, single spaces, no outer whitespace.

    Control characters (including newlines) are rejected: a transcription is
    always a single line of text.
    """
    text = unicodedata.normalize("NFC", text)
    text = " ".join(text.split())
    for ch in text:
        if unicodedata.category(ch) == "Cc":
            raise CorpusError(f"control character {ch!r} in transcription")
    return text


def words(text: str) -> list[str]:
    """Whitespace-delimited tokens; punctuation stays attached."""
    return text.split()


@dataclass
class TextLineRecord:
    """One text line: id, baseline polyline, optional polygon and text."""

    id: str
    baseline: list[tuple[int, int]]
    polygon: list[tuple[int, int]] | None = None
    transcription: str | None = None

    def validate(self) -> None:
        if len(self.baseline) < 2:
            raise CorpusError(f"line {self.id!r}: baseline needs >= 2 points")
        xs = [x for x, _ in self.baseline]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise CorpusError(
                f"line {self.id!r}: baseline x-coordinates must be strictly increasing"
            )
        if self.transcription is not None:
            if self.transcription != normalize_transcription(self.transcription):
                raise CorpusError(f"line {self.id!r}: transcription not normalized")


@dataclass
class PageMetadata:
    """Free-form provenance strings attached to a page."""

    roll: str = ""
    case: str = ""
    membrane: str = ""


@dataclass
class PageDocument:
    """A page image with its text lines."""

    image_ref: str
    width_px: int
    height_px: int
    lines: list[TextLineRecord] = field(default_factory=list)
    metadata: PageMetadata = field(default_factory=PageMetadata)

    @property
    def id(self) -> str:
        return Path(self.image_ref).stem

    def line_by_id(self, line_id: str) -> TextLineRecord:
        for line in self.lines:
            if line.id == line_id:
                return line
        raise KeyError(line_id)

    def validate(self) -> None:
        if self.width_px <= 0 or self.height_px <= 0:
            raise CorpusError("page dimensions must be positive")
        seen: set[str] = set()
        for line in self.lines:
            if line.id in seen:
                raise CorpusError(f"duplicate line id {line.id!r}")
            seen.add(line.id)
            line.validate()
            for x, y in line.baseline:
                if not (0 <= x <= self.width_px and 0 <= y <= self.height_px):
                    raise CorpusError(
                        f"line {line.id!r}: baseline point ({x},{y}) outside page"
                    )


@dataclass
class Charset:
    """Ordered distinct characters; the CTC blank is the appended extra class."""

    chars: list[str]

    def __post_init__(self) -> None:
        if len(set(self.chars)) != len(self.chars):
            raise CorpusError("charset contains duplicates")

    @property
    def blank_index(self) -> int:
        return len(self.chars)

    @property
    def num_classes(self) -> int:
        """Character classes plus the blank."""
        return len(self.chars) + 1

    def index(self, ch: str) -> int:
        return self.chars.index(ch)

    def encode(self, text: str) -> list[int]:
        try:
            return [self.chars.index(ch) for ch in text]
        except ValueError as exc:
            raise CorpusError(f"character not in charset: {exc}") from exc

    def decode(self, indices: list[int]) -> str:
        return "".join(self.chars[i] for i in indices)

    def fingerprint(self) -> str:
        import hashlib

        return hashlib.sha256("".join(self.chars).encode("utf-8")).hexdigest()[:16]


def build_charset(transcripts: list[str]) -> Charset:
    """Distinct characters of the corpus, sorted by codepoint; blank appended last.

    Deterministic: depends only on the set of characters present.
    """
    if not transcripts:
        raise CorpusError("cannot build a charset from an empty corpus")
    chars: set[str] = set()
    for t in transcripts:
        chars.update(t)
    if not chars:
        raise CorpusError("corpus has no characters")
    return Charset(sorted(chars))


# ---------------------------------------------------------------------------
# PageXML I/O
# ---------------------------------------------------------------------------


def _parse_points(text: str) -> list[tuple[int, int]]:
    points = []
    for token in text.split():
        x_str, y_str = token.split(",")
        points.append((int(round(float(x_str))), int(round(float(y_str)))))
    return points


def _format_points(points: list[tuple[int, int]]) -> str:
    return " ".join(f"{x},{y}" for x, y in points)


@dataclass
class LineValidationError:
    """A per-line problem found while parsing; the page is still returned."""

    line_id: str
    message: str


@dataclass
class ParsedPage:
    """Result of :func:`parse_pagexml`: the page plus any per-line errors."""

    page: PageDocument
    errors: list[LineValidationError] = field(default_factory=list)


def parse_pagexml(data: bytes) -> ParsedPage:
    """Parse a PAGE document.  Invalid lines are collected, not fatal.

    Raises :class:`PageParseError` for malformed XML or an unknown namespace;
    per-line problems (short or non-monotonic baselines) become entries in
    ``ParsedPage.errors`` while the remaining lines are kept.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise PageParseError(f"malformed XML at line {line}, column {col}: {exc.msg}") from exc

    ns = root.tag.partition("}")[0].lstrip("{")
    if ns not in KNOWN_NAMESPACES:
        raise PageParseError(f"unrecognized PAGE namespace: {ns!r}")
    q = lambda tag: f"{{{ns}}}{tag}"

    page_el = root.find(q("Page"))
    if page_el is None:
        raise PageParseError("no Page element")
    image_ref = page_el.get("imageFilename", "")
    width = int(page_el.get("imageWidth", "0"))
    height = int(page_el.get("imageHeight", "0"))

    custom = _parse_custom(page_el.get("custom", ""))
    metadata = PageMetadata(
        roll=custom.get("roll", "") or _roll_from_ref(image_ref),
        case=custom.get("case", "") or Path(image_ref).stem,
        membrane=custom.get("membrane", ""),
    )

    doc = PageDocument(image_ref=image_ref, width_px=width, height_px=height, metadata=metadata)
    errors: list[LineValidationError] = []
    counter = 0
    for region in page_el.findall(q("TextRegion")):
        for line_el in region.findall(q("TextLine")):
            counter += 1
            line_id = line_el.get("id") or f"l{counter}"
            baseline_el = line_el.find(q("Baseline"))
            if baseline_el is None or not (baseline_el.get("points") or "").strip():
                errors.append(LineValidationError(line_id, "missing baseline"))
                continue
            points = _parse_points(baseline_el.get("points", ""))

            transcription = None
            equiv = line_el.find(q("TextEquiv"))
            if equiv is not None:
                unicode_el = equiv.find(q("Unicode"))
                if unicode_el is not None and unicode_el.text is not None:
                    transcription = normalize_transcription(unicode_el.text)

            polygon = None
            coords_el = line_el.find(q("Coords"))
            if coords_el is not None and coords_el.get("points"):
                polygon = _parse_points(coords_el.get("points", ""))

            record = TextLineRecord(
                id=line_id, baseline=points, polygon=polygon, transcription=transcription
            )
            try:
                record.validate()
            except CorpusError as exc:
                errors.append(LineValidationError(line_id, str(exc)))
                continue
            doc.lines.append(record)
    return ParsedPage(page=doc, errors=errors)


def write_pagexml(doc: PageDocument) -> bytes:
    """Serialize a page in the 2019-07-15 PAGE namespace.

    Refuses documents that violate their invariants; the output re-parses to
    an equivalent document.
    """
    doc.validate()
    ET.register_namespace("", PAGE_NS_2019)
    q = lambda tag: f"{{{PAGE_NS_2019}}}{tag}"
    root = ET.Element(q("PcGts"))
    page_el = ET.SubElement(
        root,
        q("Page"),
        {
            "imageFilename": doc.image_ref,
            "imageWidth": str(doc.width_px),
            "imageHeight": str(doc.height_px),
        },
    )
    custom = _format_custom(doc.metadata)
    if custom:
        page_el.set("custom", custom)
    region = ET.SubElement(page_el, q("TextRegion"), {"id": "r1"})
    for line in doc.lines:
        line_el = ET.SubElement(region, q("TextLine"), {"id": line.id})
        if line.polygon:
            ET.SubElement(line_el, q("Coords"), {"points": _format_points(line.polygon)})
        ET.SubElement(line_el, q("Baseline"), {"points": _format_points(line.baseline)})
        if line.transcription is not None:
            equiv = ET.SubElement(line_el, q("TextEquiv"))
            unicode_el = ET.SubElement(equiv, q("Unicode"))
            unicode_el.text = line.transcription
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def _parse_custom(value: str) -> dict[str, str]:
    """PAGE-style custom attribute: ``key:value;`` pairs."""
    out = {}
    for item in value.split(";"):
        item = item.strip()
        if ":" in item:
            key, _, val = item.partition(":")
            out[key.strip()] = val.strip()
    return out


def _format_custom(meta: PageMetadata) -> str:
    parts = []
    if meta.roll:
        parts.append(f"roll:{meta.roll}")
    if meta.case:
        parts.append(f"case:{meta.case}")
    if meta.membrane:
        parts.append(f"membrane:{meta.membrane}")
    return "; ".join(parts)


def _roll_from_ref(ref: str) -> str:
    """Roll series from an image/case id like ``KB27-263m21`` -> ``KB27``."""
    stem = Path(ref).stem
    return stem.split("-", 1)[0] if "-" in stem else stem


def roll_type(roll: str) -> str:
    """Coarse roll-type label used for grouping statistics.

    Alphabetic series prefixes are kept (``KB27`` -> ``KB``), except for the
    JUST series where the series digit distinguishes different courts
    (``JUST1`` stays ``JUST1``).  ``Pal*`` ids group the palaeography
    showcase lines.
    """
    if roll.upper().startswith("JUST"):
        digits = "".join(ch for ch in roll[4:] if ch.isdigit())
        return "JUST" + digits[:1]
    if roll.upper().startswith("PAL"):
        return "Palaeography"
    alpha = ""
    for ch in roll:
        if ch.isalpha():
            alpha += ch
        else:
            break
    return alpha or roll


# ---------------------------------------------------------------------------
# Dataset manifests
# ---------------------------------------------------------------------------


@dataclass
class DatasetManifest:
    """Train/test line references plus the charset derived from train text."""

    train: list[tuple[str, str]]
    test: list[tuple[str, str]]
    charset: Charset
    pages: dict[str, PageDocument] = field(default_factory=dict)

    def transcription(self, page_id: str, line_id: str) -> str:
        line = self.pages[page_id].line_by_id(line_id)
        assert line.transcription is not None
        return line.transcription

    def validate(self) -> None:
        overlap = set(self.train) & set(self.test)
        if overlap:
            raise CorpusError(f"train/test overlap: {sorted(overlap)[:3]}")
        for page_id, line_id in [*self.train, *self.test]:
            if page_id not in self.pages:
                raise CorpusError(f"manifest references unknown page {page_id!r}")
            try:
                line = self.pages[page_id].line_by_id(line_id)
            except KeyError:
                raise CorpusError(
                    f"manifest references unknown line {page_id!r}/{line_id!r}"
                ) from None
            if line.transcription is None:
                raise CorpusError(f"line {page_id!r}/{line_id!r} has no transcription")


def load_dataset(root: str | Path, split_file: str | Path) -> DatasetManifest:
    """Load pages under ``root`` and split them per ``split_file``.

    The split file has one ``page_id<TAB>line_id<TAB>split`` row per line,
    where split is ``train`` or ``test`` and page_id is the PageXML file stem.
    The charset is built from train transcriptions only.
    """
    root = Path(root)
    pages: dict[str, PageDocument] = {}
    for xml_path in sorted(root.glob("*.xml")):
        parsed = parse_pagexml(xml_path.read_bytes())
        page = parsed.page
        if not page.image_ref:
            page.image_ref = xml_path.stem
        pages[xml_path.stem] = page

    train: list[tuple[str, str]] = []
    test: list[tuple[str, str]] = []
    for lineno, raw in enumerate(Path(split_file).read_text(encoding="utf-8").splitlines(), 1):
        raw = raw.strip()
        if not raw or raw.startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise CorpusError(f"{split_file}:{lineno}: expected page<TAB>line<TAB>split")
        page_id, line_id, split = parts
        if split == "train":
            train.append((page_id, line_id))
        elif split == "test":
            test.append((page_id, line_id))
        else:
            raise CorpusError(f"{split_file}:{lineno}: unknown split {split!r}")

    manifest = DatasetManifest(train=train, test=test, charset=Charset([]), pages=pages)
    manifest.validate()
    train_texts = [manifest.transcription(p, l) for p, l in train]
    manifest.charset = build_charset(train_texts)
    return manifest


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


@dataclass
class StatsRow:
    roll_type: str
    cases: int
    lines: int
    words: int


@dataclass
class StatsReport:
    """Per-roll-type dataset composition, plus a total row."""

    rows: list[StatsRow]

    @property
    def total(self) -> StatsRow:
        return StatsRow(
            "Total",
            sum(r.cases for r in self.rows),
            sum(r.lines for r in self.rows),
            sum(r.words for r in self.rows),
        )

    def to_tsv(self) -> str:
        out = ["roll_type\tcases\tlines\twords"]
        for r in [*self.rows, self.total]:
            out.append(f"{r.roll_type}\t{r.cases}\t{r.lines}\t{r.words}")
        return "\n".join(out) + "\n"

    def to_json(self) -> str:
        payload = {
            "rows": [r.__dict__ for r in self.rows],
            "total": self.total.__dict__,
        }
        return json.dumps(payload, indent=2)


def dataset_stats(manifest: DatasetManifest) -> StatsReport:
    """Case, line, and word counts per roll type over the whole manifest."""
    per_type: dict[str, dict[str, set | int]] = {}
    for page_id, line_id in [*manifest.train, *manifest.test]:
        page = manifest.pages[page_id]
        key = roll_type(page.metadata.roll or _roll_from_ref(page.image_ref))
        bucket = per_type.setdefault(key, {"cases": set(), "lines": 0, "words": 0})
        bucket["cases"].add(page.metadata.case or page.id)  # type: ignore[union-attr]
        bucket["lines"] += 1  # type: ignore[operator]
        bucket["words"] += len(words(manifest.transcription(page_id, line_id)))  # type: ignore[operator]
    rows = [
        StatsRow(key, len(b["cases"]), b["lines"], b["words"])  # type: ignore[arg-type]
        for key, b in sorted(per_type.items())
    ]
    return StatsReport(rows=rows)
