"""Shared fixtures: synthetic records, engine assembly, acceptance reporting."""

from __future__ import annotations

import pytest

from askengine.cellcache import CellCache
from askengine.corpus import CorpusStore, CurationPolicy
from askengine.embedding import EmbedderConfig, LocalHashEmbedder
from askengine.pipeline import SearchEngine
from askengine.ragchain import GenerationParams, StubModelProvider
from askengine.vectorstore import VectorIndex

WORDS = (
    "gradient descent corpus retrieval neural symbolic vector language model "
    "search index ranking citation scholarly literature abstract embedding "
    "filter metadata cache template seed token window answer question context"
).split()


def filler_text(seed: int, n_words: int = 40) -> str:
    """Deterministic word salad; distinct seeds share few exact word picks."""
    out = []
    state = seed * 2654435761 % 2**32
    for _ in range(n_words):
        state = (state * 1103515245 + 12345) % 2**31
        out.append(WORDS[state % len(WORDS)] + str(state % 97))
    return " ".join(out)


def make_raw(i: int, **overrides) -> dict:
    """A curation-valid ingestion record; override fields to break it."""
    record = {
        "id": f"doc-{i:04d}",
        "title": f"Synthetic study number {i:04d}",
        "abstract": f"Abstract for document {i:04d}. " + filler_text(i, 60),
        "source": "synthetic",
        "year": 2000 + (i % 25),
        "authors": [{"family": f"Fam{i}", "given": f"Giv{i}"}],
        "urls": [f"https://example.org/{i}"],
        "language": "en",
    }
    record.update(overrides)
    return record


DEFAULT_POLICY = CurationPolicy(min_title_chars=10, min_abstract_chars=50)


@pytest.fixture
def policy() -> CurationPolicy:
    return DEFAULT_POLICY


def build_engine(tmp_path, *, dimension: int = 64, **param_overrides) -> SearchEngine:
    corpus = CorpusStore(tmp_path / "corpus.ndjson")
    embedder = LocalHashEmbedder(EmbedderConfig(dimension=dimension))
    index = VectorIndex(dimension)
    cache = CellCache(tmp_path / "cache")
    params = GenerationParams(model_id="stub", **param_overrides)
    return SearchEngine(corpus, embedder, index, cache, StubModelProvider(), params)


@pytest.fixture
def engine(tmp_path) -> SearchEngine:
    return build_engine(tmp_path)


# --- acceptance reporting: one PASS/FAIL line per criterion ---

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid:
        if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
            name = report.nodeid.split("::")[-1]
            _ACCEPTANCE_RESULTS[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, outcome in _ACCEPTANCE_RESULTS.items():
        flag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"  {flag}  {name}")
