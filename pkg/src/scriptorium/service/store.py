"""Single-directory persistence: JSON metadata plus content-addressed blobs.

Layout under the store root:

    documents/<doc_id>.json   -- document record
    blobs/<sha256>            -- image bytes and other payloads

Every document mutation happens under that document's lock, so concurrent
requests on distinct documents proceed in parallel while per-document stage
transitions stay serialized.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path


class DocumentNotFound(KeyError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def new_document(image_blob: str, width: int, height: int) -> dict:
    return {
        "id": uuid.uuid4().hex[:12],
        "image_blob": image_blob,
        "width": width,
        "height": height,
        "crop": None,                 # {x, y, w, h} in original coordinates
        "crop_blob": None,
        "baselines": None,            # list of [[x, y], ...] in active-image coords
        "lines": None,                # raw per-line transcriptions
        "corrected": None,            # {"lines": [...], "fallback": bool, "changed": [...]}
        "translation": None,
        "timestamps": {"uploaded": _now()},
    }


class DocumentStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "documents").mkdir(parents=True, exist_ok=True)
        (self.root / "blobs").mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    # -- blobs --------------------------------------------------------------

    def put_blob(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        path = self.root / "blobs" / digest
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return digest

    def get_blob(self, digest: str) -> bytes:
        path = self.root / "blobs" / digest
        if not path.is_file():
            raise DocumentNotFound(f"blob {digest}")
        return path.read_bytes()

    # -- documents ----------------------------------------------------------

    def _doc_path(self, doc_id: str) -> Path:
        return self.root / "documents" / f"{doc_id}.json"

    def create(self, record: dict) -> dict:
        self._write(record)
        return record

    def load(self, doc_id: str) -> dict:
        path = self._doc_path(doc_id)
        if not path.is_file():
            raise DocumentNotFound(doc_id)
        return json.loads(path.read_text(encoding="utf-8"))

    def _write(self, record: dict) -> None:
        path = self._doc_path(record["id"])
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(record, indent=1), encoding="utf-8")
        tmp.replace(path)

    @contextmanager
    def update(self, doc_id: str):
        """Load-modify-store a record under its document lock."""
        with self._lock_for(doc_id):
            record = self.load(doc_id)
            yield record
            record["timestamps"]["updated"] = _now()
            self._write(record)

    def _lock_for(self, doc_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(doc_id, threading.Lock())

    def touch_stage(self, record: dict, stage: str) -> None:
        record["timestamps"][stage] = _now()
