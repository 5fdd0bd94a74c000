"""Service configuration: JSON file with environment-variable overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

ENV_PREFIX = "SCRIPTORIUM_"


@dataclass
class ServiceConfig:
    store_dir: str = "store"
    port: int = 8000
    max_upload_bytes: int = 32 * 1024 * 1024
    recognizer_weights: str | None = None
    segmenter_weights: str | None = None
    lm_path: str | None = None
    use_beam: bool = False
    beam_width: int = 100
    lm_alpha: float = 0.5
    word_bonus: float = 1.5
    require_crop: bool = False
    provider: str = "mock"  # mock | http
    provider_endpoint: str = ""
    provider_model: str = ""
    provider_api_key_env: str = "LLM_API_KEY"
    llm_workers: int = 2
    compute_workers: int | None = None

    @classmethod
    def load(cls, path: str | Path | None = None, env: dict | None = None) -> "ServiceConfig":
        """File values first, then SCRIPTORIUM_* environment overrides."""
        values: dict = {}
        if path is not None:
            values.update(json.loads(Path(path).read_text(encoding="utf-8")))
        env = os.environ if env is None else env
        for name in cls.__dataclass_fields__:
            key = ENV_PREFIX + name.upper()
            if key in env:
                values[name] = _coerce(cls.__dataclass_fields__[name].type, env[key])
        known = {k: v for k, v in values.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def _coerce(type_hint: str, raw: str):
    if "int" in type_hint:
        return int(raw)
    if "float" in type_hint:
        return float(raw)
    if "bool" in type_hint:
        return raw.lower() in ("1", "true", "yes", "on")
    return raw
