"""Baseline-relative line extraction and conditioning.

Given page images and baseline polylines, this module measures baseline
spacing, crops a band around each baseline (0.73H above to 0.23H below,
where H is the median baseline spacing), rectifies the band so the baseline
becomes horizontal, and normalizes it to a bright-ink, zero-background
raster for the recognizer.  It also provides training-time augmentation and
vectorization of segmentation heatmaps into baselines.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

ABOVE_FRACTION = 0.73
BELOW_FRACTION = 0.23
FALLBACK_SPACING = 120.0
NORM_EPS = 1e-6
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class LineProcError(Exception):
    pass


def _round_half_up(v: float) -> int:
    return int(np.floor(v + 0.5))


@dataclass
class RasterImage:
    """Row-major float image, values in [0,1], 1 or 3 channels."""

    pixels: np.ndarray  # (H, W) or (H, W, 3) float32

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim == 2:
            pass
        elif px.ndim == 3 and px.shape[2] in (1, 3):
            if px.shape[2] == 1:
                px = px[:, :, 0]
        else:
            raise LineProcError(f"unsupported image shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise LineProcError("image contains non-finite pixels")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else self.pixels.shape[2]

    @classmethod
    def from_bytes(cls, data: bytes) -> "RasterImage":
        img = Image.open(io.BytesIO(data))
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        return cls(np.asarray(img, dtype=np.float32) / 255.0)

    @classmethod
    def from_file(cls, path) -> "RasterImage":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def to_png(self) -> bytes:
        arr = np.clip(self.pixels * 255.0, 0, 255).astype(np.uint8)
        img = Image.fromarray(arr, mode="L" if arr.ndim == 2 else "RGB")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    def to_gray(self) -> np.ndarray:
        if self.channels == 1:
            return self.pixels
        r, g, b = LUMA_WEIGHTS
        return (r * self.pixels[:, :, 0]
                + g * self.pixels[:, :, 1]
                + b * self.pixels[:, :, 2]).astype(np.float32)


@dataclass
class LineCrop:
    """Rectified band around one baseline, prior to normalization."""

    image: RasterImage
    baseline_row: int


@dataclass
class NormalizedLine:
    """Single-channel line raster: background median ~0, ink positive."""

    pixels: np.ndarray  # (H, W) float32
    baseline_row: int

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class HeatmapTriple:
    """Start / baseline / end response maps of identical shape, in [0,1]."""

    starts: np.ndarray
    baselines: np.ndarray
    ends: np.ndarray

    def __post_init__(self) -> None:
        if not (self.starts.shape == self.baselines.shape == self.ends.shape):
            raise LineProcError("heatmap dimensions differ")


Polyline = list[tuple[int, int]]


def _mean_y(baseline: Polyline) -> float:
    """x-averaged baseline height (trapezoid mean of y over the x span)."""
    pts = np.asarray(baseline, dtype=np.float64)
    xs, ys = pts[:, 0], pts[:, 1]
    dx = np.diff(xs)
    span = xs[-1] - xs[0]
    if span <= 0:
        return float(ys.mean())
    return float(np.sum((ys[:-1] + ys[1:]) / 2.0 * dx) / span)


def median_baseline_spacing(baselines: list[Polyline], image: RasterImage) -> float:
    """Median vertical gap between baselines ordered by mean height.

    With fewer than two baselines there are no gaps; the documented fallback
    is min(image height, 120) px.  The same fallback applies if baselines
    coincide (non-positive spacing).
    """
    if not baselines:
        raise LineProcError("need at least one baseline")
    if len(baselines) < 2:
        return float(min(image.height, FALLBACK_SPACING))
    ys = sorted(_mean_y(b) for b in baselines)
    gaps = np.diff(ys)
    spacing = float(np.median(gaps))
    if spacing <= 0:
        return float(min(image.height, FALLBACK_SPACING))
    return spacing


def extract_line(image: RasterImage, baseline: Polyline, spacing: float) -> LineCrop:
    """Crop and rectify the band around a baseline.

    Output height is round(0.73*H) + round(0.23*H) + 1 and the baseline maps
    exactly to row round(0.73*H) in every column: each column is shifted
    vertically (linear interpolation) by the local baseline ordinate.
    Samples falling outside the page are filled with the median of the
    in-bounds crop pixels, so no artificial gradient is introduced.
    """
    if spacing <= 0:
        raise LineProcError("spacing must be positive")
    pts = np.asarray(baseline, dtype=np.float64)
    if pts.shape[0] < 2:
        raise LineProcError("baseline needs >= 2 points")
    xs, ys = pts[:, 0], pts[:, 1]
    if np.any(np.diff(xs) <= 0):
        raise LineProcError("baseline x-coordinates must be strictly increasing")
    x0, x1 = int(round(xs[0])), int(round(xs[-1]))
    if x1 <= x0:
        raise LineProcError("degenerate baseline: zero x-extent")

    above = _round_half_up(ABOVE_FRACTION * spacing)
    below = _round_half_up(BELOW_FRACTION * spacing)
    height = above + below + 1
    cols = np.arange(x0, x1 + 1)
    width = cols.size

    base_y = np.interp(cols, xs, ys)  # constant extrapolation at the ends
    rows = np.arange(height, dtype=np.float64)[:, None]
    src_y = base_y[None, :] + (rows - above)  # (height, width)

    px = image.pixels if image.channels == 3 else image.pixels[:, :, None]
    src_h = px.shape[0]
    col_clip = np.clip(cols, 0, px.shape[1] - 1)

    y_lo = np.floor(src_y).astype(np.int64)
    frac = (src_y - y_lo).astype(np.float32)
    valid = (src_y >= 0) & (src_y <= src_h - 1)
    y_lo_c = np.clip(y_lo, 0, src_h - 1)
    y_hi_c = np.clip(y_lo + 1, 0, src_h - 1)

    col_idx = np.broadcast_to(col_clip[None, :], (height, width))
    sample = (1.0 - frac[..., None]) * px[y_lo_c, col_idx] + frac[..., None] * px[y_hi_c, col_idx]

    out = sample.astype(np.float32)
    if not valid.all():
        for ch in range(out.shape[2]):
            channel = out[:, :, ch]
            inb = channel[valid]
            fill = float(np.median(inb)) if inb.size else 0.0
            channel[~valid] = fill
    if image.channels == 1:
        out = out[:, :, 0]
    return LineCrop(image=RasterImage(out), baseline_row=above)


def crop_height_for_spacing(spacing: float) -> int:
    return _round_half_up(ABOVE_FRACTION * spacing) + _round_half_up(BELOW_FRACTION * spacing) + 1


def normalize_line(crop: LineCrop | RasterImage, baseline_row: int | None = None) -> NormalizedLine:
    """Grayscale, center on the median, scale by the p90-p10 spread, invert.

    out = -(px - median(px)) / max(p90(px) - p10(px), eps).  Dark ink on a
    light background comes out positive with the background near zero; the
    form is invariant under positive affine re-lighting of the input.
    """
    if isinstance(crop, LineCrop):
        image, baseline_row = crop.image, crop.baseline_row
    else:
        image = crop
        baseline_row = 0 if baseline_row is None else baseline_row
    gray = image.to_gray().astype(np.float64)
    if gray.size == 0:
        raise LineProcError("empty crop")
    med = np.median(gray)
    # order-statistic percentiles: on a 90/10 two-valued image p90-p10 spans
    # the full background-to-ink gap, which pins background at 0 and ink at 1
    p10, p90 = np.percentile(gray, [10.0, 90.0], method="lower")
    scale = max(p90 - p10, NORM_EPS)
    out = (-(gray - med) / scale).astype(np.float32)
    return NormalizedLine(pixels=out, baseline_row=baseline_row)


def resize_to_height(line: NormalizedLine, target_height: int) -> NormalizedLine:
    """Bilinear resize preserving aspect ratio."""
    h, w = line.pixels.shape
    if h == target_height:
        return line
    new_w = max(1, _round_half_up(w * target_height / h))
    resized = _bilinear_resize(line.pixels, target_height, new_w)
    new_row = min(target_height - 1, _round_half_up(line.baseline_row * target_height / h))
    return NormalizedLine(pixels=resized, baseline_row=new_row)


def _bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = arr.shape[:2]
    ry = np.clip((np.arange(out_h) + 0.5) * in_h / out_h - 0.5, 0, in_h - 1)
    rx = np.clip((np.arange(out_w) + 0.5) * in_w / out_w - 0.5, 0, in_w - 1)
    y0 = np.floor(ry).astype(int)
    x0 = np.floor(rx).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ry - y0)[:, None]
    fx = (rx - x0)[None, :]
    if arr.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    top = arr[y0][:, x0] * (1 - fx) + arr[y0][:, x1] * fx
    bot = arr[y1][:, x0] * (1 - fx) + arr[y1][:, x1] * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


@dataclass
class AugmentParams:
    """One concrete draw of the augmentation pipeline.

    Factors at their distribution midpoints (1.0 factors, 0.0 shifts,
    final_op "none") leave the geometry untouched.
    """

    brightness: float = 1.0
    contrast: float = 1.0
    saturation: float = 1.0
    hue: float = 0.0
    rotation_deg: float = 0.0
    translate_x: float = 0.0  # fraction of width
    translate_y: float = 0.0  # fraction of height
    scale: float = 1.0
    final_op: str = "none"  # none | sharpen | blur
    blur_sigma: float = 0.0

    @classmethod
    def draw(cls, rng: np.random.Generator) -> "AugmentParams":
        p = cls(
            brightness=rng.uniform(0.5, 1.5),
            contrast=rng.uniform(0.5, 1.5),
            saturation=rng.uniform(0.5, 1.5),
            hue=rng.uniform(-0.5, 0.5),
            rotation_deg=rng.uniform(-0.7, 0.7),
            translate_x=rng.uniform(-0.01, 0.01),
            translate_y=rng.uniform(-0.02, 0.02),
            scale=rng.uniform(0.98, 1.02),
        )
        u = rng.random()
        if u < 0.25:
            p.final_op = "none"
        elif u < 0.5:
            p.final_op = "sharpen"
        else:
            p.final_op = "blur"
            p.blur_sigma = rng.uniform(1.0, 6.0)
        return p


def _rgb_to_hsv(px: np.ndarray) -> np.ndarray:
    r, g, b = px[..., 0], px[..., 1], px[..., 2]
    maxc = np.max(px, axis=-1)
    minc = np.min(px, axis=-1)
    v = maxc
    delta = maxc - minc
    s = np.where(maxc > 0, delta / np.maximum(maxc, 1e-12), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        rc = (maxc - r) / np.maximum(delta, 1e-12)
        gc = (maxc - g) / np.maximum(delta, 1e-12)
        bc = (maxc - b) / np.maximum(delta, 1e-12)
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def _hsv_to_rgb(px: np.ndarray) -> np.ndarray:
    h, s, v = px[..., 0], px[..., 1], px[..., 2]
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1 - s)
    q = v * (1 - s * f)
    t = v * (1 - s * (1 - f))
    choices = [
        np.stack([v, t, p], -1), np.stack([q, v, p], -1), np.stack([p, v, t], -1),
        np.stack([p, q, v], -1), np.stack([t, p, v], -1), np.stack([v, p, q], -1),
    ]
    out = np.zeros(px.shape, dtype=px.dtype)
    for k, choice in enumerate(choices):
        out[i == k] = choice[i == k]
    return out


def _color_jitter(px: np.ndarray, p: AugmentParams) -> np.ndarray:
    out = np.clip(px * p.brightness, 0.0, 1.0)
    if out.ndim == 3:
        gray = (LUMA_WEIGHTS[0] * out[..., 0] + LUMA_WEIGHTS[1] * out[..., 1]
                + LUMA_WEIGHTS[2] * out[..., 2])
    else:
        gray = out
    mean = gray.mean()
    out = np.clip((out - mean) * p.contrast + mean, 0.0, 1.0)
    if out.ndim == 3:
        # saturation and hue only act on color images
        out = np.clip(gray[..., None] + (out - gray[..., None]) * p.saturation, 0.0, 1.0)
        if p.hue != 0.0:
            hsv = _rgb_to_hsv(out)
            hsv[..., 0] = (hsv[..., 0] + p.hue) % 1.0
            out = np.clip(_hsv_to_rgb(hsv), 0.0, 1.0)
    return out


def _affine(px: np.ndarray, p: AugmentParams) -> np.ndarray:
    if (p.rotation_deg, p.translate_x, p.translate_y, p.scale) == (0.0, 0.0, 0.0, 1.0):
        return px
    h, w = px.shape[:2]
    theta = np.deg2rad(p.rotation_deg)
    # forward map: rotate+scale about the center, then translate
    fwd = p.scale * np.array([[np.cos(theta), -np.sin(theta)],
                              [np.sin(theta), np.cos(theta)]])  # (row, col) basis
    inv = np.linalg.inv(fwd)
    center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    shift = np.array([p.translate_y * h, p.translate_x * w])
    offset = center - inv @ (center + shift)
    fill = float(np.median(px))

    def warp(channel: np.ndarray) -> np.ndarray:
        return ndimage.affine_transform(
            channel, inv, offset=offset, order=1, mode="constant", cval=fill
        )

    if px.ndim == 2:
        return warp(px).astype(np.float32)
    return np.stack([warp(px[..., c]) for c in range(px.shape[2])], axis=-1).astype(np.float32)


_SMOOTH_KERNEL = np.array([[1, 1, 1], [1, 5, 1], [1, 1, 1]], dtype=np.float32) / 13.0


def _sharpen(px: np.ndarray, factor: float = 2.0) -> np.ndarray:
    def one(channel: np.ndarray) -> np.ndarray:
        smooth = ndimage.convolve(channel, _SMOOTH_KERNEL, mode="nearest")
        return smooth + factor * (channel - smooth)

    if px.ndim == 2:
        return np.clip(one(px), 0.0, 1.0).astype(np.float32)
    return np.clip(np.stack([one(px[..., c]) for c in range(px.shape[2])], -1), 0.0, 1.0).astype(np.float32)


def _blur(px: np.ndarray, sigma: float) -> np.ndarray:
    if px.ndim == 2:
        return ndimage.gaussian_filter(px, sigma).astype(np.float32)
    return np.stack(
        [ndimage.gaussian_filter(px[..., c], sigma) for c in range(px.shape[2])], -1
    ).astype(np.float32)


def apply_augment(crop: LineCrop, params: AugmentParams) -> LineCrop:
    """Deterministically apply a drawn parameter set: jitter, affine, filter."""
    px = crop.image.pixels.astype(np.float32)
    px = _color_jitter(px, params)
    px = _affine(px, params)
    if params.final_op == "sharpen":
        px = _sharpen(px)
    elif params.final_op == "blur":
        px = _blur(px, params.blur_sigma)
    return LineCrop(image=RasterImage(np.clip(px, 0.0, 1.0)), baseline_row=crop.baseline_row)


def augment_line(crop: LineCrop, rng_seed: int) -> LineCrop:
    """Training-time augmentation of a pre-normalization crop.

    Pipeline: color jitter (brightness/contrast/saturation/hue each up to
    +-50%), a small random affine (rotation +-0.7 deg, translation +-1% W /
    +-2% H, scale +-2%), then one of identity (p=1/4), 2x sharpen (p=1/4),
    or Gaussian blur with sigma ~ U[1,6] (p=1/2).  Pure function of the crop
    and the seed.
    """
    rng = np.random.default_rng(rng_seed)
    return apply_augment(crop, AugmentParams.draw(rng))


# ---------------------------------------------------------------------------
# Heatmap vectorization
# ---------------------------------------------------------------------------


def vectorize_heatmaps(
    maps: HeatmapTriple,
    baseline_threshold: float = 0.3,
    boundary_threshold: float = 0.5,
    point_step: int = 10,
) -> list[Polyline]:
    """Reduce baseline heatmaps to polylines.

    The baseline map is thresholded and split into 8-connected components;
    each component becomes a polyline through its per-column centroids,
    further split where the start/end maps respond above the boundary
    threshold in its interior.  Polylines are ordered top to bottom.
    """
    binary = maps.baselines > baseline_threshold
    if not binary.any():
        return []
    labels, count = ndimage.label(binary, structure=np.ones((3, 3), dtype=int))
    polylines: list[Polyline] = []
    for comp in range(1, count + 1):
        mask = labels == comp
        cols = np.where(mask.any(axis=0))[0]
        if cols.size < 2:
            continue
        centroids = {}
        for col in cols:
            rows = np.where(mask[:, col])[0]
            centroids[col] = float(rows.mean())

        # boundary responses interior to the component split it in two
        splits = []
        for col in cols[1:-1]:
            row = int(round(centroids[col]))
            if maps.starts[row, col] > boundary_threshold or maps.ends[row, col] > boundary_threshold:
                splits.append(col)
        segments, start = [], cols[0]
        for col in splits:
            segments.append((start, col))
            start = col
        segments.append((start, cols[-1]))

        for seg_start, seg_end in segments:
            seg_cols = [c for c in cols if seg_start <= c <= seg_end]
            if len(seg_cols) < 2:
                continue
            sampled = seg_cols[::point_step]
            if sampled[-1] != seg_cols[-1]:
                sampled.append(seg_cols[-1])
            poly = [(int(c), int(round(centroids[c]))) for c in sampled]
            polylines.append(poly)
    polylines.sort(key=lambda poly: float(np.mean([y for _, y in poly])))
    return polylines
