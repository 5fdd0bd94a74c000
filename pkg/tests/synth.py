"""Synthetic rendering helpers shared by the training/service/CLI tests."""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from scriptorium.corpus import PageDocument, PageMetadata, TextLineRecord
from scriptorium.lineproc import LineCrop, RasterImage

BACKGROUND = 217  # light parchment-ish gray
INK = 20


def _font(size: int) -> ImageFont.FreeTypeFont:
    return ImageFont.load_default(size=size)


def render_line_crop(text: str, height: int = 64, noise: float = 0.02,
                     char_gap: int = 10) -> LineCrop:
    """One rendered text line shaped like an extracted crop: thick ink on a
    lightly textured background, baseline at the usual 0.73 ratio.

    Stroke width and margins keep the ink fraction in the 10-25% range of
    real manuscript crops (the percentile normalization expects ink-bearing
    crops), and the letter gap keeps several recognizer frames per
    character.
    """
    font = _font(int(height * 0.62))
    probe = ImageDraw.Draw(Image.new("L", (8, 8)))
    widths = [probe.textbbox((0, 0), ch, font=font, anchor="ls", stroke_width=2)[2]
              for ch in text]
    total = sum(widths) + char_gap * max(len(text) - 1, 0) + 12
    baseline_row = int(round(0.73 * height))
    img = Image.new("L", (total, height), BACKGROUND)
    draw = ImageDraw.Draw(img)
    x = 6
    for ch, w in zip(text, widths):
        draw.text((x, baseline_row), ch, font=font, fill=INK, anchor="ls",
                  stroke_width=2, stroke_fill=INK)
        x += w + char_gap
    pixels = np.asarray(img, dtype=np.float32) / 255.0
    if noise > 0:
        texture_rng = np.random.default_rng(abs(hash(text)) % (2 ** 32))
        pixels = np.clip(pixels + texture_rng.normal(0.0, noise, pixels.shape), 0.0, 1.0)
    return LineCrop(RasterImage(pixels.astype(np.float32)), baseline_row=baseline_row)


def random_strings(rng: np.random.Generator, count: int, length: int = 5,
                   alphabet: str = "aceimnorst") -> list[str]:
    return ["".join(alphabet[i] for i in rng.integers(0, len(alphabet), size=length))
            for _ in range(count)]


def render_page(lines: list[str], width: int = 900, spacing: int = 90,
                case_id: str = "SYN1-1m1") -> tuple[RasterImage, PageDocument]:
    """A synthetic page: stacked text lines with known flat baselines."""
    height = spacing * (len(lines) + 1) + 40
    img = Image.new("L", (width, height), BACKGROUND)
    draw = ImageDraw.Draw(img)
    font = _font(36)
    doc = PageDocument(
        image_ref=f"{case_id}.png", width_px=width, height_px=height,
        metadata=PageMetadata(roll=case_id.split("-")[0], case=case_id),
    )
    for i, text in enumerate(lines, start=1):
        y = spacing * i + 40
        draw.text((30, y), text, font=font, fill=INK, anchor="ls")
        doc.lines.append(TextLineRecord(
            id=f"l{i}", baseline=[(20, y), (width - 20, y)], transcription=text,
        ))
    return RasterImage(np.asarray(img, dtype=np.float32) / 255.0), doc
