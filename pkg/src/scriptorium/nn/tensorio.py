"""Portable tensor container.

Layout: an 8-byte little-endian header length, a UTF-8 JSON header mapping
tensor names to {shape, dtype "f32", offset}, then the raw little-endian
float32 payload.  The header's ``meta`` object carries arbitrary metadata;
for model weights it holds the model spec (and its hash) plus the charset
(and its fingerprint), so a weights file is self-describing.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from ..corpus import Charset
from .model import ModelSpec


class TensorFormatError(Exception):
    pass


def save_tensors(tensors: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    entries = {}
    offset = 0
    payload = bytearray()
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        entries[name] = {"shape": list(arr.shape), "dtype": "f32", "offset": offset}
        payload.extend(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({"tensors": entries, "meta": meta or {}}, sort_keys=True).encode("utf-8")
    return struct.pack("<Q", len(header)) + header + bytes(payload)


def load_tensors(data: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if len(data) < 8:
        raise TensorFormatError("container shorter than its length prefix")
    (header_len,) = struct.unpack("<Q", data[:8])
    if len(data) < 8 + header_len:
        raise TensorFormatError("truncated header")
    try:
        header = json.loads(data[8:8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TensorFormatError(f"bad header: {exc}") from exc
    payload = data[8 + header_len:]
    tensors = {}
    for name, entry in header["tensors"].items():
        if entry["dtype"] != "f32":
            raise TensorFormatError(f"{name}: unsupported dtype {entry['dtype']!r}")
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(payload):
            raise TensorFormatError(f"truncated payload: tensor {name!r} is incomplete")
        arr = np.frombuffer(payload[start:end], dtype="<f4").reshape(entry["shape"])
        tensors[name] = arr.copy()
    return tensors, header.get("meta", {})


@dataclass
class ModelWeights:
    """Named parameter/buffer tensors plus the identity of what they fit."""

    tensors: dict[str, np.ndarray]
    spec: ModelSpec
    charset: Charset

    @property
    def spec_hash(self) -> str:
        return self.spec.hash()

    @property
    def charset_fingerprint(self) -> str:
        return self.charset.fingerprint()


def save_weights(weights: ModelWeights) -> bytes:
    meta = {
        "spec": json.loads(weights.spec.to_json()),
        "spec_hash": weights.spec_hash,
        "charset": weights.charset.chars,
        "charset_fingerprint": weights.charset_fingerprint,
    }
    return save_tensors(weights.tensors, meta)


def load_weights(
    data: bytes,
    expected_charset: Charset | None = None,
    allow_foreign_charset: bool = False,
) -> ModelWeights:
    """Parse a weights container and verify spec/charset integrity.

    A stored hash that disagrees with the stored content, or a charset that
    differs from ``expected_charset``, is refused (the latter can be
    overridden with ``allow_foreign_charset``).
    """
    tensors, meta = load_tensors(data)
    try:
        spec = ModelSpec.from_json(json.dumps(meta["spec"]))
        charset = Charset(list(meta["charset"]))
    except (KeyError, TypeError) as exc:
        raise TensorFormatError(f"weights metadata incomplete: {exc}") from exc
    if meta.get("spec_hash") != spec.hash():
        raise TensorFormatError(
            f"spec hash mismatch: header says {meta.get('spec_hash')!r}, content is {spec.hash()!r}"
        )
    if meta.get("charset_fingerprint") != charset.fingerprint():
        raise TensorFormatError("charset fingerprint mismatch")
    if expected_charset is not None and charset.chars != expected_charset.chars:
        if not allow_foreign_charset:
            raise TensorFormatError(
                "weights were trained with a different charset "
                f"(fingerprint {charset.fingerprint()}, expected {expected_charset.fingerprint()}); "
                "pass allow_foreign_charset=True to load anyway"
            )
    weights = ModelWeights(tensors=tensors, spec=spec, charset=charset)
    _verify_complete(weights)
    return weights


def _verify_complete(weights: ModelWeights) -> None:
    from .model import Model

    reference = Model(weights.spec, seed=0).state()
    missing = sorted(set(reference) - set(weights.tensors))
    if missing:
        raise TensorFormatError(f"missing tensors for spec: {missing[:4]}")
    for name, ref in reference.items():
        got = tuple(weights.tensors[name].shape)
        if got != tuple(ref.shape):
            raise TensorFormatError(f"{name}: stored shape {got} != spec shape {tuple(ref.shape)}")
