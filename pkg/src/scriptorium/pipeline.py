"""Glue between the corpus, line processing, recognizer, and decoders.

Holds the loaded-model runtime used by both the CLI and the HTTP service:
page-level segmentation (model heatmaps -> baselines), line transcription
(extract -> normalize -> recognize -> decode), and dataset-to-training-set
conversion.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import DatasetManifest, PageDocument
from .decode import DecodeConfig, beam_decode, greedy_decode
from .lineproc import (
    HeatmapTriple,
    Polyline,
    RasterImage,
    _bilinear_resize,
    extract_line,
    median_baseline_spacing,
    normalize_line,
    resize_to_height,
    vectorize_heatmaps,
)
from .lm import NGramModel
from .nn.model import Model, min_width_for_frames
from .nn.tensorio import ModelWeights
from .nn.train import TrainSample

SEGMENTATION_INPUT_WIDTH = 1800


@dataclass
class Recognizer:
    """A recognizer with its weights loaded once, ready to transcribe lines."""

    weights: ModelWeights
    lm: NGramModel | None = None
    decode_cfg: DecodeConfig | None = None  # None means greedy decoding

    def __post_init__(self) -> None:
        self._model = Model(self.weights.spec, seed=0)
        self._model.load_state(self.weights.tensors)

    @property
    def charset(self):
        return self.weights.charset

    def logits_for_line(self, image: RasterImage, baseline: Polyline, spacing: float) -> np.ndarray:
        crop = extract_line(image, baseline, spacing)
        line = resize_to_height(normalize_line(crop), self.weights.spec.input_height)
        pixels = line.pixels
        min_w = min_width_for_frames(self.weights.spec, 1)
        if pixels.shape[1] < min_w:
            pad = np.zeros((pixels.shape[0], min_w), dtype=np.float32)
            pad[:, : pixels.shape[1]] = pixels
            pixels = pad
        return self._model.forward(pixels[None, None], train=False)[0]

    def decode(self, logits: np.ndarray) -> str:
        if self.decode_cfg is None:
            return greedy_decode(logits, self.charset)
        results = beam_decode(logits, self.charset, lm=self.lm, cfg=self.decode_cfg)
        return results[0][0] if results else ""

    def transcribe_page(self, image: RasterImage, baselines: list[Polyline]) -> list[str]:
        """One text per baseline, in the given (top-to-bottom) order."""
        if not baselines:
            return []
        spacing = median_baseline_spacing(baselines, image)
        return [self.decode(self.logits_for_line(image, b, spacing)) for b in baselines]


@dataclass
class Segmenter:
    """Baseline detector: resize to the working width, run the heatmap
    model, vectorize, and map coordinates back to the original image."""

    weights: ModelWeights
    input_width: int = SEGMENTATION_INPUT_WIDTH
    baseline_threshold: float = 0.3
    boundary_threshold: float = 0.5

    def __post_init__(self) -> None:
        self._model = Model(self.weights.spec, seed=0)
        self._model.load_state(self.weights.tensors)

    def heatmaps(self, image: RasterImage) -> tuple[HeatmapTriple, float]:
        scale = self.input_width / image.width
        new_h = max(8, int(round(image.height * scale)))
        px = image.pixels
        if image.channels == 1:
            px = np.repeat(px[:, :, None], 3, axis=2)
        resized = _bilinear_resize(px, new_h, self.input_width)
        x = resized.transpose(2, 0, 1)[None].astype(np.float32)
        maps = self._model.forward(x, train=False)[0]
        up = [_bilinear_resize(maps[i], new_h, self.input_width) for i in range(3)]
        return HeatmapTriple(starts=up[0], baselines=up[1], ends=up[2]), scale

    def segment(self, image: RasterImage) -> list[Polyline]:
        triple, scale = self.heatmaps(image)
        polylines = vectorize_heatmaps(
            triple,
            baseline_threshold=self.baseline_threshold,
            boundary_threshold=self.boundary_threshold,
        )
        out: list[Polyline] = []
        for poly in polylines:
            mapped: Polyline = []
            last_x = None
            for x, y in poly:
                ox = min(int(round(x / scale)), image.width)
                oy = min(int(round(y / scale)), image.height)
                if last_x is not None and ox <= last_x:
                    continue  # rounding collapsed two columns; keep x strict
                mapped.append((ox, oy))
                last_x = ox
            if len(mapped) >= 2:
                out.append(mapped)
        return out


def page_baselines(doc: PageDocument) -> list[Polyline]:
    return [line.baseline for line in doc.lines]


def samples_from_manifest(
    manifest: DatasetManifest, images_root: str | Path, split: str = "train"
) -> list[TrainSample]:
    """Extract and pair line crops with transcriptions for training.

    Page images are resolved by ``image_ref`` (then by page id) under
    ``images_root``; spacing is measured per page from all its baselines.
    """
    images_root = Path(images_root)
    refs = manifest.train if split == "train" else manifest.test
    by_page: dict[str, list[str]] = {}
    for page_id, line_id in refs:
        by_page.setdefault(page_id, []).append(line_id)

    samples: list[TrainSample] = []
    for page_id, line_ids in by_page.items():
        page = manifest.pages[page_id]
        image = _load_page_image(images_root, page)
        spacing = median_baseline_spacing(page_baselines(page), image)
        for line_id in line_ids:
            line = page.line_by_id(line_id)
            crop = extract_line(image, line.baseline, spacing)
            assert line.transcription is not None
            samples.append(TrainSample(crop=crop, text=line.transcription))
    return samples


def _load_page_image(images_root: Path, page: PageDocument) -> RasterImage:
    candidates = [images_root / page.image_ref, images_root / f"{page.id}.png",
                  images_root / f"{page.id}.jpg"]
    for path in candidates:
        if path.is_file():
            return RasterImage.from_file(path)
    raise FileNotFoundError(
        f"no image for page {page.id!r} under {images_root} (tried {page.image_ref!r})"
    )
