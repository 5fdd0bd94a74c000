/** Crop rectangle math for the drag editor (pure; canvas-free). */

import type { Point, Rect } from "./types";

/** Normalize a drag in any direction into a positive-size rectangle. */
export function dragToRect(start: Point, end: Point): Rect {
  const x = Math.min(start[0], end[0]);
  const y = Math.min(start[1], end[1]);
  return {
    x: Math.round(x),
    y: Math.round(y),
    w: Math.round(Math.abs(end[0] - start[0])),
    h: Math.round(Math.abs(end[1] - start[1])),
  };
}

/** Clamp a rectangle to image bounds, preserving as much area as possible. */
export function clampRect(rect: Rect, width: number, height: number): Rect {
  const x = Math.min(Math.max(rect.x, 0), Math.max(width - 1, 0));
  const y = Math.min(Math.max(rect.y, 0), Math.max(height - 1, 0));
  const w = Math.min(rect.w, width - x);
  const h = Math.min(rect.h, height - y);
  return { x, y, w: Math.max(w, 1), h: Math.max(h, 1) };
}

export function fullImageRect(width: number, height: number): Rect {
  return { x: 0, y: 0, w: width, h: height };
}

export function isFullImage(rect: Rect, width: number, height: number): boolean {
  return rect.x === 0 && rect.y === 0 && rect.w === width && rect.h === height;
}

/** Too-small drags are treated as clicks, not crops. */
export function isUsableCrop(rect: Rect, minSide = 8): boolean {
  return rect.w >= minSide && rect.h >= minSide;
}
