/** Typed client for the /v1 REST API.
 *
 * All mutations go through this client; the UI holds no pipeline logic.
 * The fetch implementation is injectable so tests can run against an
 * in-memory mock server.
 */

import type { DocumentView, JobSnapshot, Point, Rect } from "./types";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function fail(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(
    private readonly base: string = "/v1",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async json<T>(url: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + url, init);
    if (!response.ok) await fail(response);
    return (await response.json()) as T;
  }

  async upload(image: Blob | ArrayBuffer): Promise<string> {
    const body = image instanceof Blob ? image : new Blob([image]);
    const { id } = await this.json<{ id: string }>("/documents", {
      method: "POST",
      body,
    });
    return id;
  }

  getDocument(id: string): Promise<DocumentView> {
    return this.json(`/documents/${id}`);
  }

  imageUrl(id: string): string {
    return `${this.base}/documents/${id}/image`;
  }

  async crop(id: string, rect: Rect): Promise<void> {
    await this.json(`/documents/${id}/crop`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(rect),
    });
  }

  async putBaselines(id: string, baselines: Point[][]): Promise<number> {
    const { count } = await this.json<{ count: number }>(`/documents/${id}/baselines`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ baselines }),
    });
    return count;
  }

  private async startJob(id: string, action: string, body?: unknown): Promise<string> {
    const { job_id } = await this.json<{ job_id: string }>(`/documents/${id}/${action}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body ?? {}),
    });
    return job_id;
  }

  segment(id: string, pagexml?: string): Promise<string> {
    return this.startJob(id, "segment", pagexml ? { pagexml } : {});
  }

  transcribe(id: string): Promise<string> {
    return this.startJob(id, "transcribe");
  }

  correct(id: string): Promise<string> {
    return this.startJob(id, "correct");
  }

  translate(id: string): Promise<string> {
    return this.startJob(id, "translate");
  }

  getJob(jobId: string): Promise<JobSnapshot> {
    return this.json(`/jobs/${jobId}`);
  }

  exportUrl(id: string, format: "pagexml" | "txt" | "json"): string {
    return `${this.base}/documents/${id}/export?format=${format}`;
  }
}
