/** Baseline overlay editing: add, delete, and drag polyline vertices.
 *
 * Every mutation snapshots the previous state for undo, and keeps the
 * invariant the server enforces too: x coordinates strictly increase along
 * each baseline and every baseline keeps at least two points.
 */

import type { Point } from "./types";

export class BaselineEditError extends Error {}

function clone(baselines: Point[][]): Point[][] {
  return baselines.map((line) => line.map((p) => [p[0], p[1]] as Point));
}

export class BaselineEditor {
  private history: Point[][][] = [];
  private baselines: Point[][];
  /** true once the user changed anything since the last markSaved() */
  dirty = false;

  constructor(baselines: Point[][], private readonly width: number, private readonly height: number) {
    this.baselines = clone(baselines);
  }

  current(): Point[][] {
    return clone(this.baselines);
  }

  get lineCount(): number {
    return this.baselines.length;
  }

  private push(): void {
    this.history.push(clone(this.baselines));
    this.dirty = true;
  }

  undo(): boolean {
    const prev = this.history.pop();
    if (!prev) return false;
    this.baselines = prev;
    this.dirty = this.history.length > 0;
    return true;
  }

  markSaved(): void {
    this.history = [];
    this.dirty = false;
  }

  private clampPoint(p: Point): Point {
    return [
      Math.min(Math.max(Math.round(p[0]), 0), this.width),
      Math.min(Math.max(Math.round(p[1]), 0), this.height),
    ];
  }

  dragVertex(line: number, index: number, to: Point): void {
    const poly = this.baselines[line];
    if (!poly || index < 0 || index >= poly.length) throw new BaselineEditError("no such vertex");
    const [x, y] = this.clampPoint(to);
    const leftBound = index > 0 ? poly[index - 1][0] + 1 : 0;
    const rightBound = index < poly.length - 1 ? poly[index + 1][0] - 1 : this.width;
    const clampedX = Math.min(Math.max(x, leftBound), rightBound);
    this.push();
    poly[index] = [clampedX, y];
  }

  addVertex(line: number, point: Point): number {
    const poly = this.baselines[line];
    if (!poly) throw new BaselineEditError("no such baseline");
    const [x, y] = this.clampPoint(point);
    if (poly.some(([px]) => px === x)) {
      throw new BaselineEditError(`vertex at x=${x} already exists`);
    }
    this.push();
    const index = poly.findIndex(([px]) => px > x);
    const at = index === -1 ? poly.length : index;
    poly.splice(at, 0, [x, y]);
    return at;
  }

  deleteVertex(line: number, index: number): void {
    const poly = this.baselines[line];
    if (!poly || index < 0 || index >= poly.length) throw new BaselineEditError("no such vertex");
    if (poly.length <= 2) {
      throw new BaselineEditError("a baseline needs at least two points; delete the baseline instead");
    }
    this.push();
    poly.splice(index, 1);
  }

  deleteBaseline(line: number): void {
    if (line < 0 || line >= this.baselines.length) throw new BaselineEditError("no such baseline");
    this.push();
    this.baselines.splice(line, 1);
  }

  addBaseline(points: Point[]): void {
    if (points.length < 2) throw new BaselineEditError("a baseline needs at least two points");
    const cleaned = points.map((p) => this.clampPoint(p));
    for (let i = 1; i < cleaned.length; i++) {
      if (cleaned[i][0] <= cleaned[i - 1][0]) {
        throw new BaselineEditError("x coordinates must strictly increase");
      }
    }
    this.push();
    this.baselines.push(cleaned);
    this.baselines.sort((a, b) => meanY(a) - meanY(b));
  }

  /** Hit-test a canvas position against vertices (radius in px). */
  findVertex(at: Point, radius = 6): { line: number; index: number } | null {
    for (let line = 0; line < this.baselines.length; line++) {
      for (let index = 0; index < this.baselines[line].length; index++) {
        const [x, y] = this.baselines[line][index];
        if (Math.hypot(x - at[0], y - at[1]) <= radius) return { line, index };
      }
    }
    return null;
  }
}

function meanY(poly: Point[]): number {
  return poly.reduce((acc, p) => acc + p[1], 0) / poly.length;
}
