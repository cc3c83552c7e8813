"""Bookmark collections with citation-item import/export.

Items use the CSL item schema (field names verbatim, unknown fields
preserved), so the citation-json round trip is lossless and files drop
straight into common reference managers. BibTeX export is a documented
lossy mapping of the standard fields.
"""

from __future__ import annotations

import json
import re
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .corpus import Document
from .errors import EngineError, NotFoundError


@dataclass
class Collection:
    collection_id: str
    name: str
    items: list[dict] = field(default_factory=list)
    created: str = ""
    updated: str = ""

    def item_ids(self) -> set[str]:
        return {item.get("id") for item in self.items}

    def to_dict(self) -> dict:
        return {
            "collection_id": self.collection_id,
            "name": self.name,
            "created": self.created,
            "updated": self.updated,
            "items": self.items,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Collection":
        return cls(
            collection_id=data["collection_id"],
            name=data["name"],
            items=list(data.get("items", [])),
            created=data.get("created", ""),
            updated=data.get("updated", ""),
        )


def document_to_citation_item(doc: Document) -> dict:
    """Map a corpus document onto a CSL citation item."""
    item: dict = {
        "id": doc.doc_id,
        "type": "article",
        "title": doc.title,
        "abstract": doc.abstract,
        "source": doc.source,
    }
    if doc.authors:
        item["author"] = [{"family": a.family, "given": a.given} for a in doc.authors]
    if doc.year is not None:
        item["issued"] = {"date-parts": [[doc.year]]}
    if doc.doi:
        item["DOI"] = doc.doi
    if doc.urls:
        item["URL"] = doc.urls[0]
    if doc.language:
        item["language"] = doc.language
    return item


def validate_citation_item(obj: object, index: int) -> dict:
    if not isinstance(obj, dict):
        raise EngineError("parse_error", f"item {index}: citation item must be an object", stage="bibliography")
    item_id = obj.get("id")
    if not isinstance(item_id, str) or not item_id:
        raise EngineError("parse_error", f"item {index}: missing or empty 'id'", stage="bibliography")
    return obj


_BIBTEX_KEY_RE = re.compile(r"[^A-Za-z0-9_-]+")


def _bibtex_escape(value: str) -> str:
    return value.replace("{", r"\{").replace("}", r"\}")


def item_to_bibtex(item: dict) -> str:
    """Render one citation item as an @article entry (mapped fields only)."""
    key = _BIBTEX_KEY_RE.sub("-", item["id"])
    fields: list[tuple[str, str]] = [("title", item.get("title", ""))]
    authors = item.get("author") or []
    if authors:
        joined = " and ".join(
            ", ".join(part for part in (a.get("family", ""), a.get("given", "")) if part)
            for a in authors
        )
        fields.append(("author", joined))
    date_parts = (item.get("issued") or {}).get("date-parts") or []
    if date_parts and date_parts[0]:
        fields.append(("year", str(date_parts[0][0])))
    if item.get("container-title"):
        fields.append(("journal", item["container-title"]))
    if item.get("DOI"):
        fields.append(("doi", item["DOI"]))
    if item.get("URL"):
        fields.append(("url", item["URL"]))
    if item.get("abstract"):
        fields.append(("abstract", item["abstract"]))
    body = ",\n".join(f"  {name} = {{{_bibtex_escape(str(value))}}}" for name, value in fields)
    return f"@article{{{key},\n{body}\n}}"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class CollectionStore:
    """One JSON file per collection; operations on a collection serialized."""

    def __init__(self, directory: Path):
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, collection_id: str) -> Path:
        if not re.fullmatch(r"[A-Za-z0-9_-]+", collection_id):
            raise NotFoundError(f"collection '{collection_id}' not found", stage="bibliography")
        return self._dir / f"{collection_id}.json"

    def _read(self, collection_id: str) -> Collection:
        path = self._path(collection_id)
        if not path.exists():
            raise NotFoundError(f"collection '{collection_id}' not found", stage="bibliography")
        return Collection.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def _write(self, collection: Collection) -> None:
        collection.updated = _now()
        path = self._dir / f"{collection.collection_id}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(collection.to_dict(), ensure_ascii=False), encoding="utf-8")
        tmp.replace(path)

    def create(self, name: str) -> Collection:
        # The unguessable id doubles as the anonymous access token.
        with self._lock:
            collection = Collection(collection_id=secrets.token_hex(16), name=name, created=_now())
            self._write(collection)
            return collection

    def get(self, collection_id: str) -> Collection:
        with self._lock:
            return self._read(collection_id)

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self._dir.glob("*.json"))

    def add_item(self, collection_id: str, doc_or_item: Document | dict) -> Collection:
        """Append one item; adding an id already present is a no-op."""
        item = (
            document_to_citation_item(doc_or_item)
            if isinstance(doc_or_item, Document)
            else validate_citation_item(doc_or_item, 0)
        )
        with self._lock:
            collection = self._read(collection_id)
            if item["id"] not in collection.item_ids():
                collection.items.append(item)
                self._write(collection)
            return collection

    def import_items(self, collection_id: str, payload: bytes) -> tuple[Collection, int]:
        """Append items from a citation-json array, skipping duplicate ids.

        Returns the updated collection and the number of skipped duplicates.
        """
        try:
            decoded = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise EngineError("parse_error", f"payload is not valid JSON: {exc}", stage="bibliography") from None
        if not isinstance(decoded, list):
            raise EngineError("parse_error", "payload must be a JSON array of citation items", stage="bibliography")
        with self._lock:
            collection = self._read(collection_id)
            existing = collection.item_ids()
            skipped = 0
            for index, obj in enumerate(decoded):
                item = validate_citation_item(obj, index)
                if item["id"] in existing:
                    skipped += 1
                    continue
                collection.items.append(item)
                existing.add(item["id"])
            self._write(collection)
            return collection, skipped

    def export(self, collection_id: str, fmt: str) -> bytes:
        collection = self.get(collection_id)
        if fmt == "citation-json":
            return json.dumps(collection.items, ensure_ascii=False).encode("utf-8")
        if fmt == "bibtex":
            return "\n\n".join(item_to_bibtex(item) for item in collection.items).encode("utf-8")
        raise EngineError("unsupported_format", f"unsupported export format '{fmt}'", stage="bibliography")
