"""Service configuration with CLI > env > config file > defaults precedence."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

# Environment variable -> config field.
ENV_KEYS = {
    "ASK_DATA_DIR": "data_dir",
    "ASK_BIND_ADDR": "bind_addr",
    "EMBED_PROVIDER": "embed_provider",
    "EMBED_DIM": "embed_dim",
    "EMBED_ENDPOINT": "embed_endpoint",
    "EMBED_MODEL_ID": "embed_model_id",
    "LLM_ENDPOINT": "llm_endpoint",
    "LLM_MODEL_ID": "llm_model_id",
    "CACHE_DIR": "cache_dir",
    "CACHE_MAX_ENTRIES": "cache_max_entries",
}

_INT_FIELDS = {
    "embed_dim", "embed_max_input_tokens", "cache_max_entries", "max_new_tokens",
    "context_window_tokens", "seed", "min_title_chars", "min_abstract_chars",
    "synthesis_n", "cell_parallelism", "rate_limit_per_minute",
}
_FLOAT_FIELDS = {"temperature"}


@dataclass
class ServiceConfig:
    data_dir: str = "data"
    bind_addr: str = "127.0.0.1:8000"

    embed_provider: str = "local_hash"
    embed_dim: int = 768
    embed_endpoint: str | None = None
    embed_model_id: str = "local-hash-v1"
    embed_max_input_tokens: int = 8192

    llm_endpoint: str | None = None
    llm_model_id: str = "stub"
    temperature: float = 0.0
    seed: int = 42
    max_new_tokens: int = 512
    context_window_tokens: int = 32768

    cache_dir: str | None = None  # defaults to <data_dir>/cache
    cache_max_entries: int = 100_000

    min_title_chars: int = 10
    min_abstract_chars: int = 200

    synthesis_n: int = 5
    cell_parallelism: int = 4
    rate_limit_per_minute: int = 600

    def resolved_cache_dir(self) -> Path:
        return Path(self.cache_dir) if self.cache_dir else Path(self.data_dir) / "cache"


def _coerce(name: str, value: object):
    if value is None:
        return None
    if name in _INT_FIELDS:
        return int(value)
    if name in _FLOAT_FIELDS:
        return float(value)
    return value


def load_config(
    overrides: Mapping[str, object] | None = None,
    env: Mapping[str, str] | None = None,
    config_file: Path | str | None = None,
) -> ServiceConfig:
    """Merge configuration sources; later sources win in the order
    defaults < config file < environment < explicit overrides (CLI)."""
    merged: dict[str, object] = {}
    known = {f.name for f in fields(ServiceConfig)}

    if config_file:
        data = json.loads(Path(config_file).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(data)

    env = os.environ if env is None else env
    for env_key, field_name in ENV_KEYS.items():
        if env_key in env and env[env_key] != "":
            merged[field_name] = env[env_key]

    for name, value in (overrides or {}).items():
        if name not in known:
            raise ValueError(f"unknown config override '{name}'")
        if value is not None:
            merged[name] = value

    return ServiceConfig(**{name: _coerce(name, value) for name, value in merged.items()})
