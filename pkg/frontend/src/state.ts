/** Client-side view state: mirrors the server's stage ordering and applies
 * the same downstream-invalidation rules optimistically, reconciling with
 * the server document on every refresh.
 */

import type { DocumentView } from "./types";

export type Stage = "empty" | "uploaded" | "segmented" | "transcribed";

export interface PendingJob {
  jobId: string;
  kind: string;
}

export class ViewState {
  doc: DocumentView | null = null;
  pending: PendingJob | null = null;
  /** set when the server rejected an action because our copy was stale */
  conflict: string | null = null;

  get stage(): Stage {
    if (!this.doc) return "empty";
    if (this.doc.lines && this.doc.lines.length > 0) return "transcribed";
    if (this.doc.baselines && this.doc.baselines.length > 0) return "segmented";
    return "uploaded";
  }

  get canCrop(): boolean {
    return this.doc !== null && this.pending === null;
  }

  get canSegment(): boolean {
    return this.doc !== null && this.pending === null;
  }

  get canTranscribe(): boolean {
    return this.stage === "segmented" || this.stage === "transcribed";
  }

  get canCorrect(): boolean {
    return this.stage === "transcribed";
  }

  get canTranslate(): boolean {
    return this.stage === "transcribed";
  }

  get canExport(): boolean {
    return this.stage === "transcribed";
  }

  /** Reconcile with the authoritative server document. */
  applyServer(doc: DocumentView): void {
    this.doc = doc;
    this.conflict = null;
  }

  /** Local mirror of the server rule: editing an earlier stage clears
   * everything downstream of it. */
  invalidateDownstream(from: "crop" | "baselines"): void {
    if (!this.doc) return;
    if (from === "crop") this.doc.baselines = null;
    this.doc.lines = null;
    this.doc.corrected = null;
    this.doc.translation = null;
  }

  /** Re-cropping throws away segmentation and text: worth a confirmation
   * when any of that exists. */
  needsRecropConfirmation(): boolean {
    return this.doc !== null && (this.doc.baselines !== null || this.doc.lines !== null);
  }

  beginJob(jobId: string, kind: string): void {
    this.pending = { jobId, kind };
  }

  endJob(): void {
    this.pending = null;
  }
}
