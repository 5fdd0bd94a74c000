"""Baseline-relative line extraction, step by step.

Renders a page with slanted baselines, measures the median baseline
spacing, extracts and rectifies each line band, and normalizes it for the
recognizer.  Writes before/after PNGs into ./out_lines/.
"""

from pathlib import Path

import numpy as np

from scriptorium.lineproc import (
    RasterImage,
    extract_line,
    median_baseline_spacing,
    normalize_line,
)

from _common import render_page

out_dir = Path("out_lines")
out_dir.mkdir(exist_ok=True)

image, page = render_page(
    ["prima linea textus", "secunda linea textus", "tertia linea"],
    spacing=110,
)

# Tilt the page slightly so rectification has work to do.
h, w = image.pixels.shape
rows = np.arange(h)[:, None] + (np.arange(w)[None, :] * 0.03).astype(int)
tilted = RasterImage(image.pixels[np.clip(rows, 0, h - 1), np.arange(w)[None, :]])
baselines = [
    [(x, int(y - 0.03 * x)) for x, y in line.baseline] for line in page.lines
]

spacing = median_baseline_spacing(baselines, tilted)
print(f"median baseline spacing: {spacing:.1f}px")
print(f"crop height will be round(0.73*H) + round(0.23*H) + 1 = "
      f"{round(0.73 * spacing) + round(0.23 * spacing) + 1}px")

for i, baseline in enumerate(baselines, 1):
    crop = extract_line(tilted, baseline, spacing)
    (out_dir / f"line{i}_crop.png").write_bytes(crop.image.to_png())

    line = normalize_line(crop)
    # normalized values: background ~0, ink positive; rescale for viewing
    view = (line.pixels - line.pixels.min()) / (np.ptp(line.pixels) + 1e-9)
    (out_dir / f"line{i}_normalized.png").write_bytes(RasterImage(view).to_png())
    print(f"line {i}: {crop.image.width}x{crop.image.height}, "
          f"baseline row {crop.baseline_row}, "
          f"normalized median {np.median(line.pixels):+.3f}")

print(f"\nwrote crops to {out_dir}/")
