"""Shared synthetic-page rendering for the demo scripts."""

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from scriptorium.corpus import PageDocument, PageMetadata, TextLineRecord
from scriptorium.lineproc import LineCrop, RasterImage

BACKGROUND = 217
INK = 20


def render_line_crop(text: str, height: int = 64) -> LineCrop:
    font = ImageFont.load_default(size=int(height * 0.62))
    probe = ImageDraw.Draw(Image.new("L", (8, 8)))
    widths = [probe.textbbox((0, 0), ch, font=font, anchor="ls", stroke_width=2)[2]
              for ch in text]
    total = sum(widths) + 10 * max(len(text) - 1, 0) + 12
    baseline_row = int(round(0.73 * height))
    img = Image.new("L", (total, height), BACKGROUND)
    draw = ImageDraw.Draw(img)
    x = 6
    for ch, w in zip(text, widths):
        draw.text((x, baseline_row), ch, font=font, fill=INK, anchor="ls",
                  stroke_width=2, stroke_fill=INK)
        x += w + 10
    pixels = np.asarray(img, dtype=np.float32) / 255.0
    rng = np.random.default_rng(abs(hash(text)) % (2 ** 32))
    pixels = np.clip(pixels + rng.normal(0.0, 0.02, pixels.shape), 0.0, 1.0)
    return LineCrop(RasterImage(pixels.astype(np.float32)), baseline_row=baseline_row)


def render_page(lines, width=900, spacing=90, case_id="KB27-1m1"):
    height = spacing * (len(lines) + 1) + 40
    img = Image.new("L", (width, height), BACKGROUND)
    draw = ImageDraw.Draw(img)
    font = ImageFont.load_default(size=36)
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
