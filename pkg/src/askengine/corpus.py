"""Document model, ingestion curation, and the corpus store.

Raw records arrive as newline-delimited JSON objects. Curation accepts a
record only when its title and abstract clear configurable length floors;
accepted documents are appended to an on-disk record log and kept in an
in-memory id map that is rebuilt on startup (last write per id wins).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .errors import EngineError, NotFoundError, RecordParseError

REJECTION_REASONS = (
    "missing_title",
    "short_title",
    "missing_abstract",
    "short_abstract",
    "duplicate_id",
)


@dataclass(frozen=True)
class Author:
    family: str
    given: str


@dataclass(frozen=True)
class CurationPolicy:
    """Length floors applied to whitespace-normalized title and abstract."""

    min_title_chars: int = 10
    min_abstract_chars: int = 200

    def __post_init__(self):
        if self.min_title_chars < 1 or self.min_abstract_chars < 1:
            raise ValueError("curation thresholds must be >= 1")


@dataclass
class Document:
    doc_id: str
    title: str
    abstract: str
    source: str
    full_text: str | None = None
    doi: str | None = None
    year: int | None = None
    authors: list[Author] = field(default_factory=list)
    urls: list[str] = field(default_factory=list)
    language: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def has_fulltext(self) -> bool:
        return bool(self.full_text)

    def payload(self) -> dict:
        """Flat metadata map indexed alongside the document's vector."""
        return {
            "source": self.source,
            "year": self.year,
            "doi_present": bool(self.doi),
            "has_fulltext": self.has_fulltext,
            "language": self.language,
        }

    def embedding_text(self) -> str:
        # Full text is reserved for generation context and never embedded.
        return f"{self.title}\n{self.abstract}"

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "abstract": self.abstract,
            "source": self.source,
            "full_text": self.full_text,
            "doi": self.doi,
            "year": self.year,
            "authors": [{"family": a.family, "given": a.given} for a in self.authors],
            "urls": list(self.urls),
            "language": self.language,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Document":
        return cls(
            doc_id=data["doc_id"],
            title=data["title"],
            abstract=data["abstract"],
            source=data["source"],
            full_text=data.get("full_text"),
            doi=data.get("doi"),
            year=data.get("year"),
            authors=[Author(a["family"], a["given"]) for a in data.get("authors", [])],
            urls=list(data.get("urls", [])),
            language=data.get("language"),
            extra=data.get("extra", {}),
        )


@dataclass(frozen=True)
class Rejection:
    reason: str


@dataclass
class IngestReport:
    total_seen: int = 0
    accepted: int = 0
    rejected_by_reason: dict[str, int] = field(default_factory=dict)
    pct_with_doi: float = 0.0
    pct_with_fulltext: float = 0.0

    def to_dict(self) -> dict:
        return {
            "total_seen": self.total_seen,
            "accepted": self.accepted,
            "rejected_by_reason": dict(self.rejected_by_reason),
            "pct_with_doi": self.pct_with_doi,
            "pct_with_fulltext": self.pct_with_fulltext,
        }


# Keys the ingestion format defines; everything else is preserved into `extra`.
_KNOWN_KEYS = {
    "id", "title", "abstract", "fullText", "doi", "source", "year",
    "authors", "urls", "language",
}


def _require_str(obj: dict, key: str, *, required: bool) -> str | None:
    value = obj.get(key)
    if value is None:
        if required:
            raise RecordParseError(key, f"missing required field '{key}'")
        return None
    if not isinstance(value, str):
        raise RecordParseError(key, f"field '{key}' must be a string")
    return value


def parse_raw_record(raw: str | dict) -> dict:
    """Parse one ingestion record (JSON line or already-decoded object).

    Returns a normalized dict with document-shaped keys. Structural problems
    raise :class:`RecordParseError` naming the offending field; curation
    concerns (empty/short title or abstract) are left to ``validate_document``.
    """
    if isinstance(raw, str):
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise RecordParseError("record", f"record is not valid JSON: {exc}") from None
    else:
        obj = raw
    if not isinstance(obj, dict):
        raise RecordParseError("record", "record must be a JSON object")

    doc_id = _require_str(obj, "id", required=True)
    if not doc_id:
        raise RecordParseError("id", "field 'id' must be a non-empty string")
    source = _require_str(obj, "source", required=True)

    title = obj.get("title", "")
    abstract = obj.get("abstract", "")
    if not isinstance(title, str):
        raise RecordParseError("title", "field 'title' must be a string")
    if not isinstance(abstract, str):
        raise RecordParseError("abstract", "field 'abstract' must be a string")

    year = obj.get("year")
    if year is not None and not isinstance(year, int):
        raise RecordParseError("year", "field 'year' must be an integer")

    authors_raw = obj.get("authors", [])
    if not isinstance(authors_raw, list):
        raise RecordParseError("authors", "field 'authors' must be a list")
    authors = []
    for entry in authors_raw:
        if not isinstance(entry, dict):
            raise RecordParseError("authors", "each author must be an object")
        authors.append(Author(str(entry.get("family", "")), str(entry.get("given", ""))))

    urls = obj.get("urls", [])
    if not isinstance(urls, list) or any(not isinstance(u, str) for u in urls):
        raise RecordParseError("urls", "field 'urls' must be a list of strings")

    return {
        "doc_id": doc_id,
        "title": title,
        "abstract": abstract,
        "source": source,
        "full_text": _require_str(obj, "fullText", required=False),
        "doi": _require_str(obj, "doi", required=False),
        "year": year,
        "authors": authors,
        "urls": list(urls),
        "language": _require_str(obj, "language", required=False),
        "extra": {k: v for k, v in obj.items() if k not in _KNOWN_KEYS},
    }


def normalized_length(text: str) -> int:
    """Character count after collapsing whitespace runs and stripping ends.

    Normalizing first prevents padding from sneaking a record past curation.
    """
    return len(" ".join(text.split()))


def validate_document(record: dict, policy: CurationPolicy) -> Document | Rejection:
    """Apply the curation policy to a parsed record.

    Title is checked before abstract; an empty (post-normalization) field
    rejects as missing, a non-empty one below the floor rejects as short.
    """
    title_len = normalized_length(record["title"])
    if title_len == 0:
        return Rejection("missing_title")
    if title_len < policy.min_title_chars:
        return Rejection("short_title")
    abstract_len = normalized_length(record["abstract"])
    if abstract_len == 0:
        return Rejection("missing_abstract")
    if abstract_len < policy.min_abstract_chars:
        return Rejection("short_abstract")
    return Document(**record)


class CorpusStore:
    """Append-only document log with an in-memory id map.

    Single writer, many readers: a read during an ingest batch sees the
    pre-batch snapshot; the batch becomes visible atomically when it ends.
    """

    def __init__(self, path: Path):
        self._path = Path(path)
        self._docs: dict[str, Document] = {}
        self._map_lock = threading.Lock()
        self._write_lock = threading.Lock()
        if self._path.exists():
            self._replay_log()

    def _replay_log(self):
        with self._path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                doc = Document.from_dict(json.loads(line))
                self._docs[doc.doc_id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def doc_ids(self) -> list[str]:
        with self._map_lock:
            return list(self._docs.keys())

    def documents(self) -> list[Document]:
        with self._map_lock:
            return list(self._docs.values())

    def get_document(self, doc_id: str) -> Document:
        with self._map_lock:
            doc = self._docs.get(doc_id)
        if doc is None:
            raise NotFoundError(f"document '{doc_id}' not found", stage="corpus")
        return doc

    def ingest_batch(
        self,
        records: Iterable[str | dict],
        policy: CurationPolicy,
        sink: Callable[[Document], None] | None = None,
    ) -> IngestReport:
        """Curate, persist, and forward a batch of raw records.

        Re-ingesting an id from an earlier batch overwrites it; duplicate_id
        is counted only for collisions within this batch. A storage failure
        aborts the batch, reporting how many documents were already committed.
        """
        report = IngestReport()
        batch: dict[str, Document] = {}
        with self._write_lock:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            with self._path.open("a", encoding="utf-8") as log:
                for raw in records:
                    report.total_seen += 1
                    outcome = validate_document(parse_raw_record(raw), policy)
                    if isinstance(outcome, Rejection):
                        report.rejected_by_reason[outcome.reason] = (
                            report.rejected_by_reason.get(outcome.reason, 0) + 1
                        )
                        continue
                    doc = outcome
                    if doc.doc_id in batch:
                        report.rejected_by_reason["duplicate_id"] = (
                            report.rejected_by_reason.get("duplicate_id", 0) + 1
                        )
                        continue
                    try:
                        log.write(json.dumps(doc.to_dict(), ensure_ascii=False) + "\n")
                        log.flush()
                    except OSError as exc:
                        self._commit(batch)
                        raise EngineError(
                            "storage_error",
                            f"batch aborted after {len(batch)} committed documents: {exc}",
                            stage="ingest",
                        ) from exc
                    batch[doc.doc_id] = doc
                    if sink is not None:
                        sink(doc)
            self._commit(batch)
        report.accepted = len(batch)
        if report.accepted:
            report.pct_with_doi = sum(1 for d in batch.values() if d.doi) / report.accepted
            report.pct_with_fulltext = (
                sum(1 for d in batch.values() if d.has_fulltext) / report.accepted
            )
        return report

    def _commit(self, batch: dict[str, Document]):
        with self._map_lock:
            self._docs.update(batch)
