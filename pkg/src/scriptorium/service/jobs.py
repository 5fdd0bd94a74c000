"""In-process asynchronous jobs on bounded worker pools.

LLM-bound jobs (correct, translate, llm-transcribe) run on a small pool to
respect provider rate limits; local compute (segment, transcribe) runs on a
pool sized to the machine.  Terminal job states are immutable and polling a
finished job always returns the same snapshot.
"""

from __future__ import annotations

import os
import threading
import traceback
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

LLM_KINDS = {"correct", "translate", "llm-transcribe"}
TERMINAL = {"done", "failed"}


@dataclass
class Job:
    id: str
    kind: str
    state: str = "queued"  # queued | running | done | failed
    result: Any = None
    error: str | None = None

    def snapshot(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "state": self.state,
            "result": self.result,
            "error": self.error,
        }


class JobRegistry:
    def __init__(self, llm_workers: int = 2, compute_workers: int | None = None):
        self._jobs: dict[str, Job] = {}
        self._guard = threading.Lock()
        self._llm_pool = ThreadPoolExecutor(max_workers=llm_workers, thread_name_prefix="llm")
        self._compute_pool = ThreadPoolExecutor(
            max_workers=compute_workers or os.cpu_count() or 2, thread_name_prefix="compute"
        )

    def submit(self, kind: str, fn: Callable[[], Any]) -> str:
        job = Job(id=uuid.uuid4().hex[:12], kind=kind)
        with self._guard:
            self._jobs[job.id] = job
        pool = self._llm_pool if kind in LLM_KINDS else self._compute_pool

        def run():
            with self._guard:
                if job.state in TERMINAL:
                    return
                job.state = "running"
            try:
                result = fn()
            except Exception as exc:  # surfaced through Job.error
                with self._guard:
                    if job.state not in TERMINAL:
                        job.state = "failed"
                        job.error = f"{type(exc).__name__}: {exc}"
                        job.traceback = traceback.format_exc()  # type: ignore[attr-defined]
                return
            with self._guard:
                if job.state not in TERMINAL:
                    job.state = "done"
                    job.result = result

        pool.submit(run)
        return job.id

    def get(self, job_id: str) -> dict | None:
        with self._guard:
            job = self._jobs.get(job_id)
            return job.snapshot() if job else None

    def wait(self, job_id: str, timeout_s: float = 30.0, poll_s: float = 0.02) -> dict:
        import time

        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            snap = self.get(job_id)
            if snap is None:
                raise KeyError(job_id)
            if snap["state"] in TERMINAL:
                return snap
            time.sleep(poll_s)
        raise TimeoutError(f"job {job_id} still {self.get(job_id)['state']}")

    def shutdown(self) -> None:
        self._llm_pool.shutdown(wait=False)
        self._compute_pool.shutdown(wait=False)
