/** Crop math and baseline vertex editing. */

import { describe, expect, it } from "vitest";

import { BaselineEditError, BaselineEditor } from "../src/baselines";
import { clampRect, dragToRect, fullImageRect, isFullImage, isUsableCrop } from "../src/crop";

describe("crop rectangle math", () => {
  it("normalizes drags in any direction", () => {
    expect(dragToRect([10, 20], [110, 70])).toEqual({ x: 10, y: 20, w: 100, h: 50 });
    expect(dragToRect([110, 70], [10, 20])).toEqual({ x: 10, y: 20, w: 100, h: 50 });
    expect(dragToRect([110, 20], [10, 70])).toEqual({ x: 10, y: 20, w: 100, h: 50 });
  });

  it("full-page select is the identity crop", () => {
    const rect = fullImageRect(900, 600);
    expect(isFullImage(rect, 900, 600)).toBe(true);
    expect(clampRect(rect, 900, 600)).toEqual(rect);
  });

  it("drags outside the canvas clamp to bounds", () => {
    const rect = clampRect(dragToRect([-40, -10], [950, 620]), 900, 600);
    expect(rect).toEqual({ x: 0, y: 0, w: 900, h: 600 });
  });

  it("clamping preserves position for interior rectangles", () => {
    expect(clampRect({ x: 30, y: 40, w: 100, h: 50 }, 900, 600))
      .toEqual({ x: 30, y: 40, w: 100, h: 50 });
  });

  it("tiny drags are clicks, not crops", () => {
    expect(isUsableCrop({ x: 5, y: 5, w: 3, h: 30 })).toBe(false);
    expect(isUsableCrop({ x: 5, y: 5, w: 30, h: 30 })).toBe(true);
  });
});

describe("baseline editor", () => {
  const twoLines: [number, number][][] = [
    [[10, 100], [200, 102], [400, 100]],
    [[10, 220], [400, 222]],
  ];

  it("drags a vertex and can undo it", () => {
    const editor = new BaselineEditor(twoLines, 900, 600);
    editor.dragVertex(0, 1, [210, 130]);
    expect(editor.current()[0][1]).toEqual([210, 130]);
    expect(editor.dirty).toBe(true);
    expect(editor.undo()).toBe(true);
    expect(editor.current()).toEqual(twoLines);
    expect(editor.undo()).toBe(false);
  });

  it("keeps x strictly increasing when dragging past a neighbor", () => {
    const editor = new BaselineEditor(twoLines, 900, 600);
    editor.dragVertex(0, 1, [5, 102]);   // left of the first vertex
    expect(editor.current()[0][1][0]).toBe(11);  // clamped right of x=10
    editor.dragVertex(0, 1, [500, 102]); // right of the last vertex
    expect(editor.current()[0][1][0]).toBe(399); // clamped left of x=400
  });

  it("adds a vertex in x order and rejects duplicates", () => {
    const editor = new BaselineEditor(twoLines, 900, 600);
    const at = editor.addVertex(1, [200, 230]);
    expect(at).toBe(1);
    expect(editor.current()[1].map((p) => p[0])).toEqual([10, 200, 400]);
    expect(() => editor.addVertex(1, [200, 240])).toThrow(BaselineEditError);
  });

  it("refuses to delete below two points", () => {
    const editor = new BaselineEditor(twoLines, 900, 600);
    expect(() => editor.deleteVertex(1, 0)).toThrow(/at least two/);
    editor.deleteVertex(0, 1);
    expect(editor.current()[0]).toHaveLength(2);
  });

  it("deletes a whole baseline and reports the reduced count", () => {
    const editor = new BaselineEditor(twoLines, 900, 600);
    editor.deleteBaseline(0);
    expect(editor.lineCount).toBe(1);
    expect(editor.undo()).toBe(true);
    expect(editor.lineCount).toBe(2);
  });

  it("keeps new baselines sorted top to bottom", () => {
    const editor = new BaselineEditor(twoLines, 900, 600);
    editor.addBaseline([[10, 20], [400, 22]]);
    const ys = editor.current().map((poly) => poly[0][1]);
    expect(ys).toEqual([20, 100, 220]);
  });

  it("undo restores the previous polyline set across several edits", () => {
    const editor = new BaselineEditor(twoLines, 900, 600);
    editor.dragVertex(0, 0, [12, 105]);
    editor.addVertex(1, [100, 221]);
    editor.deleteBaseline(0);
    editor.undo();
    editor.undo();
    editor.undo();
    expect(editor.current()).toEqual(twoLines);
    expect(editor.dirty).toBe(false);
  });

  it("hit-tests vertices within a radius", () => {
    const editor = new BaselineEditor(twoLines, 900, 600);
    expect(editor.findVertex([202, 104])).toEqual({ line: 0, index: 1 });
    expect(editor.findVertex([300, 300])).toBeNull();
  });
});
