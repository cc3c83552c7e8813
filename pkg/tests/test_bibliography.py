"""Collections: CSL item mapping, lossless round trips, BibTeX export."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from askengine.bibliography import CollectionStore, document_to_citation_item, item_to_bibtex
from askengine.corpus import Author, Document
from askengine.errors import EngineError, NotFoundError


def make_doc(i: int = 1, **overrides) -> Document:
    fields = dict(
        doc_id=f"doc-{i}",
        title=f"Title {i}",
        abstract=f"Abstract {i}",
        source="synthetic",
        year=2021,
        doi=f"10.5555/{i}",
        urls=[f"https://example.org/{i}"],
        authors=[Author("Family", "Given")],
        language="en",
    )
    fields.update(overrides)
    return Document(**fields)


class TestMapping:
    def test_document_fields_mapped(self):
        item = document_to_citation_item(make_doc(3))
        assert item["id"] == "doc-3"
        assert item["type"] == "article"
        assert item["title"] == "Title 3"
        assert item["author"] == [{"family": "Family", "given": "Given"}]
        assert item["DOI"] == "10.5555/3"
        assert item["URL"] == "https://example.org/3"

    def test_year_becomes_date_parts(self):
        item = document_to_citation_item(make_doc(year=2021))
        assert item["issued"] == {"date-parts": [[2021]]}

    def test_optional_fields_absent(self):
        item = document_to_citation_item(make_doc(year=None, doi=None, urls=[], authors=[]))
        for key in ("issued", "DOI", "URL", "author"):
            assert key not in item


class TestCollections:
    def test_add_item_from_document(self, tmp_path):
        store = CollectionStore(tmp_path)
        collection = store.create("My reading")
        store.add_item(collection.collection_id, make_doc(1))
        fetched = store.get(collection.collection_id)
        assert [item["id"] for item in fetched.items] == ["doc-1"]
        assert fetched.items[0]["title"] == "Title 1"

    def test_add_same_doc_twice_is_noop(self, tmp_path):
        store = CollectionStore(tmp_path)
        collection = store.create("c")
        store.add_item(collection.collection_id, make_doc(1))
        store.add_item(collection.collection_id, make_doc(1))
        assert len(store.get(collection.collection_id).items) == 1

    def test_order_stable_under_other_adds(self, tmp_path):
        store = CollectionStore(tmp_path)
        collection = store.create("c")
        for i in range(5):
            store.add_item(collection.collection_id, make_doc(i))
        ids = [item["id"] for item in store.get(collection.collection_id).items]
        assert ids == [f"doc-{i}" for i in range(5)]

    def test_unknown_collection(self, tmp_path):
        store = CollectionStore(tmp_path)
        with pytest.raises(NotFoundError):
            store.get("missing")
        with pytest.raises(NotFoundError):
            store.add_item("missing", make_doc(1))

    def test_no_crosstalk_between_collections(self, tmp_path):
        store = CollectionStore(tmp_path)
        a = store.create("a")
        b = store.create("b")
        store.add_item(a.collection_id, make_doc(1))
        assert store.get(b.collection_id).items == []


class TestExportImport:
    def test_empty_collection_exports_empty_array(self, tmp_path):
        store = CollectionStore(tmp_path)
        collection = store.create("empty")
        assert store.export(collection.collection_id, "citation-json") == b"[]"

    def test_unsupported_format(self, tmp_path):
        store = CollectionStore(tmp_path)
        collection = store.create("c")
        with pytest.raises(EngineError) as err:
            store.export(collection.collection_id, "ris")
        assert err.value.code == "unsupported_format"

    def test_import_export_round_trip(self, tmp_path):
        store = CollectionStore(tmp_path)
        source = store.create("source")
        for i in range(5):
            store.add_item(source.collection_id, make_doc(i))
        exported = store.export(source.collection_id, "citation-json")
        target = store.create("target")
        restored, skipped = store.import_items(target.collection_id, exported)
        assert skipped == 0
        assert restored.items == store.get(source.collection_id).items

    def test_import_skips_duplicates_with_count(self, tmp_path):
        store = CollectionStore(tmp_path)
        collection = store.create("c")
        store.add_item(collection.collection_id, make_doc(1))
        store.add_item(collection.collection_id, make_doc(2))
        payload = json.dumps(
            [document_to_citation_item(make_doc(i)) for i in (1, 2, 3)]
        ).encode()
        updated, skipped = store.import_items(collection.collection_id, payload)
        assert skipped == 2
        assert [item["id"] for item in updated.items] == ["doc-1", "doc-2", "doc-3"]

    def test_large_import_preserves_order(self, tmp_path):
        store = CollectionStore(tmp_path)
        collection = store.create("big")
        items = [{"id": f"item-{i:04d}", "type": "article", "title": f"T{i}"} for i in range(1000)]
        updated, skipped = store.import_items(collection.collection_id, json.dumps(items).encode())
        assert skipped == 0
        assert [item["id"] for item in updated.items] == [f"item-{i:04d}" for i in range(1000)]

    def test_malformed_payload_names_item_index(self, tmp_path):
        store = CollectionStore(tmp_path)
        collection = store.create("c")
        bad = json.dumps([{"id": "ok"}, {"title": "no id"}]).encode()
        with pytest.raises(EngineError) as err:
            store.import_items(collection.collection_id, bad)
        assert "item 1" in err.value.message
        with pytest.raises(EngineError):
            store.import_items(collection.collection_id, b"not json")
        with pytest.raises(EngineError):
            store.import_items(collection.collection_id, b"{}")


CSL_ITEMS = st.builds(
    lambda i, title, extra_key, extra_val, year: {
        "id": f"gen-{i}",
        "type": "article",
        "title": title,
        "issued": {"date-parts": [[year]]},
        extra_key: extra_val,  # unknown fields must survive round trips
    },
    st.integers(min_value=0, max_value=10**6),
    st.text(max_size=40),
    st.sampled_from(["note", "custom-field", "archive_location"]),
    st.text(max_size=20),
    st.integers(min_value=1800, max_value=2100),
)


@settings(max_examples=50, deadline=None)
@given(st.lists(CSL_ITEMS, max_size=8, unique_by=lambda item: item["id"]))
def test_round_trip_property(tmp_path_factory, items):
    directory = tmp_path_factory.mktemp("collections")
    store = CollectionStore(directory)
    collection = store.create("prop")
    updated, skipped = store.import_items(collection.collection_id, json.dumps(items).encode())
    assert skipped == 0
    exported = json.loads(store.export(collection.collection_id, "citation-json"))
    assert exported == items


class TestBibtex:
    def test_doi_present_in_entry(self, tmp_path):
        store = CollectionStore(tmp_path)
        collection = store.create("c")
        store.add_item(collection.collection_id, make_doc(1))
        bibtex = store.export(collection.collection_id, "bibtex").decode()
        assert "@article{doc-1," in bibtex
        assert "doi = {10.5555/1}" in bibtex
        assert "year = {2021}" in bibtex
        assert "author = {Family, Given}" in bibtex

    def test_braces_escaped(self):
        entry = item_to_bibtex({"id": "x", "title": "Braces {inside} title"})
        assert r"\{inside\}" in entry
