/** Job polling: the server is push-free, so the client polls every 2 s. */

import type { ApiClient } from "./api";
import type { JobSnapshot } from "./types";

export const POLL_INTERVAL_MS = 2000;

export type Sleep = (ms: number) => Promise<void>;

const realSleep: Sleep = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export class JobFailed extends Error {
  constructor(public readonly job: JobSnapshot) {
    super(job.error ?? `job ${job.id} failed`);
  }
}

/**
 * Poll until the job reaches a terminal state.  Resolves with the final
 * snapshot when done, rejects with JobFailed when the job failed.
 */
export async function pollJob(
  client: ApiClient,
  jobId: string,
  opts: { intervalMs?: number; sleep?: Sleep; onTick?: (snap: JobSnapshot) => void } = {},
): Promise<JobSnapshot> {
  const interval = opts.intervalMs ?? POLL_INTERVAL_MS;
  const sleep = opts.sleep ?? realSleep;
  for (;;) {
    const snap = await client.getJob(jobId);
    opts.onTick?.(snap);
    if (snap.state === "done") return snap;
    if (snap.state === "failed") throw new JobFailed(snap);
    await sleep(interval);
  }
}
