/** Shared types mirroring the /v1 API payloads. */

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** A baseline vertex in active-image pixel coordinates. */
export type Point = [number, number];

export interface CorrectionView {
  lines: string[];
  changed: boolean[];
  fallback: boolean;
}

export interface DocumentView {
  id: string;
  width: number;
  height: number;
  original_width: number;
  original_height: number;
  crop: Rect | null;
  baselines: Point[][] | null;
  lines: string[] | null;
  corrected: CorrectionView | null;
  translation: string | null;
  generation: number;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobSnapshot {
  id: string;
  kind: string;
  state: JobState;
  result: unknown;
  error: string | null;
}
