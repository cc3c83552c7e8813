"""Opt-in feedback capture: per-question ratings and UMUX-Lite system scores."""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .errors import EngineError


def _check_range(name: str, value: int | None, lo: int, hi: int, *, required: bool) -> None:
    if value is None:
        if required:
            raise EngineError("out_of_range", f"{name} is required", stage="feedback")
        return
    if not isinstance(value, int) or isinstance(value, bool) or not lo <= value <= hi:
        raise EngineError("out_of_range", f"{name} must be an integer in [{lo}, {hi}]", stage="feedback")


@dataclass(frozen=True)
class QuestionFeedback:
    question_id: str
    helpfulness: int
    correctness: int
    completeness: int

    def __post_init__(self):
        for name in ("helpfulness", "correctness", "completeness"):
            _check_range(name, getattr(self, name), 1, 5, required=True)

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "helpfulness": self.helpfulness,
            "correctness": self.correctness,
            "completeness": self.completeness,
        }


@dataclass(frozen=True)
class SystemFeedback:
    """UMUX-Lite items on the standard 7-point scale, plus optional satisfaction.

    Partial responses are storable but excluded from score aggregation.
    """

    umux_capability: int | None = None
    umux_ease: int | None = None
    satisfaction: int | None = None

    def __post_init__(self):
        _check_range("umux_capability", self.umux_capability, 1, 7, required=False)
        _check_range("umux_ease", self.umux_ease, 1, 7, required=False)
        _check_range("satisfaction", self.satisfaction, 1, 5, required=False)
        if self.umux_capability is None and self.umux_ease is None and self.satisfaction is None:
            raise EngineError("out_of_range", "feedback must answer at least one item", stage="feedback")

    @property
    def is_complete(self) -> bool:
        return self.umux_capability is not None and self.umux_ease is not None

    def to_dict(self) -> dict:
        return {
            "umux_capability": self.umux_capability,
            "umux_ease": self.umux_ease,
            "satisfaction": self.satisfaction,
        }


def umux_lite_score(responses: Iterable[SystemFeedback]) -> float:
    """Mean UMUX-Lite score on a 0-100 scale over complete responses.

    Per response: ((capability - 1) + (ease - 1)) / 12 * 100. Incomplete
    responses are discarded; scoring nothing is an error, not a number.
    """
    scores = [
        ((r.umux_capability - 1) + (r.umux_ease - 1)) / 12.0 * 100.0
        for r in responses
        if r.is_complete
    ]
    if not scores:
        raise EngineError("undefined_score", "no complete responses to score", stage="feedback")
    return sum(scores) / len(scores)


class FeedbackLog:
    """Append-only NDJSON log; feedback can never mutate engine state."""

    def __init__(self, path: Path):
        self._path = Path(path)
        self._lock = threading.Lock()

    def append(self, kind: str, payload: dict, session: str) -> str:
        entry_id = secrets.token_hex(8)
        entry = {
            "id": entry_id,
            "kind": kind,
            "payload": payload,
            "session": session,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        with self._lock:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            with self._path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        return entry_id

    def entries(self, kind: str | None = None) -> list[dict]:
        if not self._path.exists():
            return []
        rows = []
        with self._path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    if kind is None or row["kind"] == kind:
                        rows.append(row)
        return rows
