"""Content-addressed on-disk cache for generated cells.

Partial hits are the point: one response table can mix cached and fresh
cells. Entries are JSON files named by the cell key digest, bounded by an
LRU entry count, and concurrent misses on one key collapse into a single
generation (the waiter gets the stored result).
"""

from __future__ import annotations

import json
import os
import threading
from collections import OrderedDict
from pathlib import Path
from typing import Callable

from .ragchain import CellKey

DEFAULT_MAX_ENTRIES = 100_000


class CellCache:
    def __init__(self, directory: Path, max_entries: int = DEFAULT_MAX_ENTRIES):
        if max_entries < 1:
            raise ValueError("max_entries must be >= 1")
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._max_entries = max_entries
        self._lock = threading.Lock()
        self._inflight: dict[str, threading.Lock] = {}
        # LRU order, oldest first; rebuilt from file mtimes on startup.
        self._index: OrderedDict[str, None] = OrderedDict()
        entries = sorted(self._dir.glob("*.json"), key=lambda p: (p.stat().st_mtime, p.name))
        for entry in entries:
            self._index[entry.stem] = None

    def __len__(self) -> int:
        return len(self._index)

    def _path(self, digest: str) -> Path:
        return self._dir / f"{digest}.json"

    def _load_locked(self, digest: str) -> dict | None:
        if digest not in self._index:
            return None
        path = self._path(digest)
        try:
            value = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            # A vanished or corrupt entry is treated as a miss.
            self._index.pop(digest, None)
            return None
        self._index.move_to_end(digest)
        os.utime(path)
        return value

    def _store_locked(self, digest: str, value: dict) -> None:
        path = self._path(digest)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(value, ensure_ascii=False), encoding="utf-8")
        tmp.replace(path)
        self._index[digest] = None
        self._index.move_to_end(digest)
        while len(self._index) > self._max_entries:
            oldest, _ = self._index.popitem(last=False)
            self._path(oldest).unlink(missing_ok=True)

    def get(self, key: CellKey) -> dict | None:
        with self._lock:
            return self._load_locked(key.digest)

    def get_or_generate(self, key: CellKey, generator: Callable[[], dict]) -> tuple[dict, bool]:
        """Return ``(value, was_cached)``; on a miss run ``generator`` once.

        Per-key single-flight: a second concurrent miss waits and then reads
        the stored value instead of generating. Generator errors propagate
        and are never cached.
        """
        digest = key.digest
        with self._lock:
            value = self._load_locked(digest)
            if value is not None:
                return value, True
            flight = self._inflight.setdefault(digest, threading.Lock())
        with flight:
            with self._lock:
                value = self._load_locked(digest)
                if value is not None:
                    return value, True
            try:
                value = generator()
            except BaseException:
                with self._lock:
                    self._inflight.pop(digest, None)
                raise
            # Store before retiring the flight lock so a new caller either
            # joins this flight or sees the stored value; never a third path.
            with self._lock:
                self._store_locked(digest, value)
                self._inflight.pop(digest, None)
            return value, False
