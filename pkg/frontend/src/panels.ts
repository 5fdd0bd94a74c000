/** Per-line review panels: raw text, corrected text, diff, accept/reject.
 *
 * The cardinal rule of the review tool: corrected text is never presented
 * without the raw recognizer output reachable right next to it, because a
 * fluent correction can hide a misreading the raw output would reveal.
 * buildPanels enforces that structurally: a panel only carries a corrected
 * variant when it carries the raw line it belongs to, and exports default
 * to the raw text unless the reviewer explicitly accepted the correction.
 */

import { DiffToken, diffWords } from "./diff";
import type { DocumentView } from "./types";

export interface LinePanel {
  index: number;
  raw: string;
  corrected: string | null;
  changed: boolean;
  diff: DiffToken[] | null;
  /** reviewer's choice; null = undecided (export uses raw) */
  accepted: boolean | null;
}

export function buildPanels(doc: DocumentView): LinePanel[] {
  const raw = doc.lines ?? [];
  const corrected = doc.corrected?.lines ?? null;
  return raw.map((line, index) => {
    const fixed = corrected !== null && index < corrected.length ? corrected[index] : null;
    return {
      index,
      raw: line,
      corrected: fixed,
      changed: fixed !== null && fixed !== line,
      diff: fixed !== null ? diffWords(line, fixed) : null,
      accepted: null,
    };
  });
}

/** Warning banner text, or null when none is needed. */
export function correctionBanner(doc: DocumentView): string | null {
  if (doc.corrected?.fallback) {
    return "The correction service kept changing the number of lines; showing the uncorrected transcription.";
  }
  return null;
}

export function setAccepted(panels: LinePanel[], index: number, accepted: boolean | null): LinePanel[] {
  return panels.map((p) => (p.index === index ? { ...p, accepted } : p));
}

/** Lines for export: the corrected variant only where explicitly accepted. */
export function exportLines(panels: LinePanel[]): string[] {
  return panels.map((p) => (p.accepted === true && p.corrected !== null ? p.corrected : p.raw));
}

/** True when every panel showing a correction keeps its raw line reachable. */
export function rawAlwaysReachable(panels: LinePanel[]): boolean {
  return panels.every((p) => p.corrected === null || typeof p.raw === "string");
}
