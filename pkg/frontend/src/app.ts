/** DOM wiring for the review portal (single document per tab).
 *
 * All pipeline work happens server-side through the ApiClient; this file
 * renders state and translates pointer events into API calls.
 */

import { ApiClient, ApiError } from "./api";
import { BaselineEditor } from "./baselines";
import { clampRect, dragToRect, isUsableCrop } from "./crop";
import { buildPanels, correctionBanner, exportLines, LinePanel, setAccepted } from "./panels";
import { pollJob } from "./poll";
import { ViewState } from "./state";
import type { Point } from "./types";

const api = new ApiClient("/v1");
const state = new ViewState();
let docId: string | null = null;
let editor: BaselineEditor | null = null;
let panels: LinePanel[] = [];
let drag: { start: Point; current: Point } | null = null;
let draggingVertex: { line: number; index: number } | null = null;

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

const canvas = () => el<HTMLCanvasElement>("page-canvas");
const status = (text: string) => {
  el("status").textContent = text;
};

async function refresh(): Promise<void> {
  if (!docId) return;
  state.applyServer(await api.getDocument(docId));
  const doc = state.doc!;
  if (doc.baselines) {
    editor = new BaselineEditor(doc.baselines, doc.width, doc.height);
  } else {
    editor = null;
  }
  panels = buildPanels(doc);
  render();
}

function render(): void {
  const doc = state.doc;
  el("stage").textContent = state.stage;
  (el<HTMLButtonElement>("btn-segment")).disabled = !state.canSegment;
  (el<HTMLButtonElement>("btn-transcribe")).disabled = !state.canTranscribe;
  (el<HTMLButtonElement>("btn-correct")).disabled = !state.canCorrect;
  (el<HTMLButtonElement>("btn-translate")).disabled = !state.canTranslate;
  (el<HTMLAnchorElement>("link-export")).style.visibility =
    state.canExport ? "visible" : "hidden";
  if (docId && doc) {
    drawPage();
    renderPanels();
    const banner = correctionBanner(doc);
    el("banner").textContent = banner ?? "";
    el("translation").textContent = doc.translation ?? "";
  }
}

function drawPage(): void {
  const doc = state.doc;
  if (!doc || !docId) return;
  const image = new Image();
  image.onload = () => {
    const cv = canvas();
    cv.width = image.width;
    cv.height = image.height;
    const ctx = cv.getContext("2d")!;
    ctx.drawImage(image, 0, 0);
    if (drag) {
      const rect = dragToRect(drag.start, drag.current);
      ctx.strokeStyle = "#c8a24b";
      ctx.lineWidth = 2;
      ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
    }
    if (editor) {
      ctx.strokeStyle = "#7a1f1f";
      ctx.fillStyle = "#7a1f1f";
      for (const poly of editor.current()) {
        ctx.beginPath();
        poly.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
        ctx.stroke();
        for (const [x, y] of poly) {
          ctx.beginPath();
          ctx.arc(x, y, 4, 0, Math.PI * 2);
          ctx.fill();
        }
      }
    }
  };
  image.src = api.imageUrl(docId) + `&t=${Date.now()}`.replace("&", "?");
}

function renderPanels(): void {
  const host = el("panels");
  host.innerHTML = "";
  for (const panel of panels) {
    const row = document.createElement("div");
    row.className = "panel";
    const raw = document.createElement("div");
    raw.className = "raw";
    raw.textContent = panel.raw;
    row.appendChild(raw);
    if (panel.corrected !== null) {
      const fixed = document.createElement("div");
      fixed.className = "corrected";
      for (const token of panel.diff ?? []) {
        const span = document.createElement("span");
        span.className = `tok ${token.kind}`;
        span.textContent = (token.corrected ?? token.raw ?? "") + " ";
        if (token.kind !== "same" && token.raw) span.title = `model read: ${token.raw}`;
        fixed.appendChild(span);
      }
      row.appendChild(fixed);
      const controls = document.createElement("div");
      for (const [label, value] of [["accept", true], ["reject", false]] as const) {
        const button = document.createElement("button");
        button.textContent = label;
        button.className = panel.accepted === value ? "chosen" : "";
        button.onclick = () => {
          panels = setAccepted(panels, panel.index, value);
          renderPanels();
        };
        controls.appendChild(button);
      }
      row.appendChild(controls);
    }
    host.appendChild(row);
  }
}

async function runJob(kind: "segment" | "transcribe" | "correct" | "translate"): Promise<void> {
  if (!docId) return;
  try {
    status(`${kind} running...`);
    const jobId = await api[kind](docId);
    state.beginJob(jobId, kind);
    await pollJob(api, jobId);
    state.endJob();
    status(`${kind} done`);
    await refresh();
  } catch (err) {
    state.endJob();
    status(err instanceof ApiError ? `${kind}: ${err.message}` : String(err));
  }
}

function canvasPoint(event: MouseEvent): Point {
  const rect = canvas().getBoundingClientRect();
  return [Math.round(event.clientX - rect.left), Math.round(event.clientY - rect.top)];
}

export function wireUp(): void {
  el<HTMLInputElement>("file-input").addEventListener("change", async (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    try {
      docId = await api.upload(file);
      status(`uploaded ${file.name}`);
      await refresh();
    } catch (err) {
      status(err instanceof ApiError ? err.message : String(err));
    }
  });

  canvas().addEventListener("mousedown", (event) => {
    const at = canvasPoint(event);
    const hit = editor?.findVertex(at, 8);
    if (hit) {
      draggingVertex = hit;
    } else {
      drag = { start: at, current: at };
    }
  });
  canvas().addEventListener("mousemove", (event) => {
    const at = canvasPoint(event);
    if (draggingVertex && editor) {
      editor.dragVertex(draggingVertex.line, draggingVertex.index, at);
      editor.undo(); // live preview only; the real edit happens on mouseup
      drawPage();
    } else if (drag) {
      drag.current = at;
      drawPage();
    }
  });
  canvas().addEventListener("mouseup", async (event) => {
    const doc = state.doc;
    const at = canvasPoint(event);
    if (draggingVertex && editor && docId && doc) {
      editor.dragVertex(draggingVertex.line, draggingVertex.index, at);
      draggingVertex = null;
      try {
        await api.putBaselines(docId, editor.current());
        state.invalidateDownstream("baselines");
        editor.markSaved();
        await refresh();
      } catch (err) {
        editor.undo();
        status(err instanceof ApiError ? `baseline edit rejected: ${err.message}` : String(err));
      }
      return;
    }
    if (drag && docId && doc) {
      const rect = clampRect(dragToRect(drag.start, drag.current), doc.width, doc.height);
      drag = null;
      if (!isUsableCrop(rect)) {
        drawPage();
        return;
      }
      if (state.needsRecropConfirmation() &&
          !window.confirm("Re-cropping clears baselines and transcription. Continue?")) {
        drawPage();
        return;
      }
      try {
        await api.crop(docId, rect);
        state.invalidateDownstream("crop");
        await refresh();
      } catch (err) {
        status(err instanceof ApiError ? `crop rejected: ${err.message}` : String(err));
      }
    }
  });

  el("btn-segment").addEventListener("click", () => void runJob("segment"));
  el("btn-transcribe").addEventListener("click", () => void runJob("transcribe"));
  el("btn-correct").addEventListener("click", () => void runJob("correct"));
  el("btn-translate").addEventListener("click", () => void runJob("translate"));
  el<HTMLAnchorElement>("link-export").addEventListener("click", (event) => {
    if (!docId) return;
    (event.target as HTMLAnchorElement).href = api.exportUrl(docId, "pagexml");
  });
  el("btn-undo").addEventListener("click", () => {
    if (editor?.undo()) drawPage();
  });
  el("btn-export-accepted").addEventListener("click", () => {
    const text = exportLines(panels).join("\n");
    const blob = new Blob([text], { type: "text/plain" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "transcription.txt";
    link.click();
  });
}

if (typeof document !== "undefined" && document.getElementById("page-canvas")) {
  wireUp();
}
