"""Error types shared across the engine.

Every error carries a stable machine-readable ``code`` plus the pipeline
``stage`` it surfaced in; the HTTP layer maps these onto status classes.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base error with a stable code, optional stage label, and retry hint."""

    def __init__(
        self,
        code: str,
        message: str,
        *,
        stage: str | None = None,
        retryable: bool = False,
    ):
        super().__init__(message)
        self.code = code
        self.message = message
        self.stage = stage
        self.retryable = retryable

    def to_dict(self) -> dict:
        return {"stage": self.stage or "engine", "code": self.code, "message": self.message}


class NotFoundError(EngineError):
    def __init__(self, message: str, *, stage: str | None = None):
        super().__init__("not_found", message, stage=stage)


class ProviderError(EngineError):
    """A remote provider failed; ``retryable`` marks transient failures."""

    def __init__(self, message: str, *, retryable: bool, stage: str | None = None):
        super().__init__("provider_error", message, stage=stage, retryable=retryable)


class FilterParseError(EngineError):
    """Filter string rejected; ``position`` is the character offset of the fault."""

    def __init__(self, code: str, message: str, *, position: int):
        super().__init__(code, f"{message} (at position {position})", stage="filter")
        self.position = position


class RecordParseError(EngineError):
    """A raw ingestion record is structurally malformed; names the bad field."""

    def __init__(self, field: str, message: str):
        super().__init__("malformed_record", message, stage="ingest")
        self.field = field
