"""Non-parametric memory: filtered top-k cosine search over indexed vectors.

The index is an exact scan (desk scale, by design): every search scores
each candidate record with a float64 dot product, so results are
reproducible bit-for-bit and trivially checkable against a brute-force
oracle. Searches observe an atomic snapshot; upserts are serialized.
"""

from __future__ import annotations

import json
import struct
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EngineError
from .filters import PAYLOAD_FIELDS, FilterExpr, evaluate_filter

INDEX_MAGIC = b"ASKV1"

MAX_PAGE_LIMIT = 100


@dataclass(frozen=True)
class Page:
    offset: int = 0
    limit: int = 10

    def __post_init__(self):
        if self.offset < 0:
            raise ValueError("page offset must be >= 0")
        if not 1 <= self.limit <= MAX_PAGE_LIMIT:
            raise ValueError(f"page limit must be in [1, {MAX_PAGE_LIMIT}]")


@dataclass(frozen=True)
class SearchHit:
    doc_id: str
    score: float


@dataclass
class IndexedRecord:
    doc_id: str
    vector: np.ndarray  # float32, unit norm
    payload: dict


def record_score(vector32: np.ndarray, query64: np.ndarray) -> float:
    """Cosine score of one stored vector against a query.

    Computed as a float64 dot product over a standalone copy of the record's
    vector: the score of a record never depends on what else is indexed.
    """
    return float(np.dot(np.ascontiguousarray(vector32, dtype=np.float64), query64))


class VectorIndex:
    """Exact cosine index with symbolic payload filtering and pagination."""

    def __init__(self, dimension: int, payload_fields: tuple[str, ...] = PAYLOAD_FIELDS):
        if dimension < 1:
            raise ValueError("index dimension must be >= 1")
        self.dimension = dimension
        self.payload_fields = payload_fields
        self._records: dict[str, IndexedRecord] = {}
        self._lock = threading.Lock()
        self._snapshot: list[IndexedRecord] | None = None

    def __len__(self) -> int:
        return len(self._records)

    def upsert(self, record: IndexedRecord) -> None:
        vector = np.asarray(record.vector, dtype=np.float32)
        if vector.shape != (self.dimension,):
            raise EngineError(
                "dimension_mismatch",
                f"vector length {vector.shape} does not match index dimension {self.dimension}",
                stage="index",
            )
        with self._lock:
            self._records[record.doc_id] = IndexedRecord(record.doc_id, vector, dict(record.payload))
            self._snapshot = None

    def _current_snapshot(self) -> list[IndexedRecord]:
        # Rebuilt lazily after mutations; an in-progress search keeps its
        # own reference, so it never observes a half-applied upsert.
        with self._lock:
            if self._snapshot is None:
                self._snapshot = list(self._records.values())
            return self._snapshot

    def _check_filter_fields(self, expr: FilterExpr) -> None:
        unknown = expr.fields() - set(self.payload_fields)
        if unknown:
            name = sorted(unknown)[0]
            raise EngineError("filter_error", f"unknown filter field '{name}'", stage="filter")

    def search(
        self,
        query: np.ndarray,
        filter_expr: FilterExpr | None = None,
        page: Page = Page(),
    ) -> list[SearchHit]:
        """Filtered cosine ranking, deterministic for a fixed index state.

        Ties are broken by ascending doc_id so the ordering is total.
        """
        if filter_expr is not None:
            self._check_filter_fields(filter_expr)
        query64 = np.ascontiguousarray(np.asarray(query), dtype=np.float64)
        if query64.shape != (self.dimension,):
            raise EngineError(
                "dimension_mismatch",
                f"query length {query64.shape} does not match index dimension {self.dimension}",
                stage="index",
            )
        snapshot = self._current_snapshot()
        scored: list[SearchHit] = []
        for record in snapshot:
            if filter_expr is not None and not evaluate_filter(filter_expr, record.payload):
                continue
            scored.append(SearchHit(record.doc_id, record_score(record.vector, query64)))
        scored.sort(key=lambda hit: (-hit.score, hit.doc_id))
        return scored[page.offset : page.offset + page.limit]

    # ------------------------------------------------------------------
    # Persistence: versioned binary file, fixed-width records
    # ------------------------------------------------------------------

    def save(self, path: Path) -> None:
        """Write the index as magic, dimension, count, then fixed-width records.

        Record slots are sized to the file's largest id and payload so every
        record occupies the same number of bytes.
        """
        path = Path(path)
        snapshot = self._current_snapshot()
        encoded = [
            (rec.doc_id.encode("utf-8"), json.dumps(rec.payload, sort_keys=True).encode("utf-8"), rec.vector)
            for rec in snapshot
        ]
        id_slot = max((len(i) for i, _, _ in encoded), default=0)
        payload_slot = max((len(p) for _, p, _ in encoded), default=0)
        with path.open("wb") as fh:
            fh.write(INDEX_MAGIC)
            fh.write(struct.pack("<IQII", self.dimension, len(encoded), id_slot, payload_slot))
            for id_bytes, payload_bytes, vector in encoded:
                fh.write(struct.pack("<HI", len(id_bytes), len(payload_bytes)))
                fh.write(id_bytes.ljust(id_slot, b"\x00"))
                fh.write(payload_bytes.ljust(payload_slot, b"\x00"))
                fh.write(np.asarray(vector, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path: Path, payload_fields: tuple[str, ...] = PAYLOAD_FIELDS) -> "VectorIndex":
        path = Path(path)
        data = path.read_bytes()
        if data[: len(INDEX_MAGIC)] != INDEX_MAGIC:
            raise EngineError("index_format", f"{path} is not an index file", stage="index")
        offset = len(INDEX_MAGIC)
        dimension, count, id_slot, payload_slot = struct.unpack_from("<IQII", data, offset)
        offset += struct.calcsize("<IQII")
        index = cls(dimension, payload_fields)
        vector_bytes = dimension * 4
        for _ in range(count):
            id_len, payload_len = struct.unpack_from("<HI", data, offset)
            offset += struct.calcsize("<HI")
            doc_id = data[offset : offset + id_len].decode("utf-8")
            offset += id_slot
            payload = json.loads(data[offset : offset + payload_len].decode("utf-8"))
            offset += payload_slot
            vector = np.frombuffer(data[offset : offset + vector_bytes], dtype="<f4").copy()
            offset += vector_bytes
            index._records[doc_id] = IndexedRecord(doc_id, vector, payload)
        return index
