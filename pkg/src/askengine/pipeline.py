"""End-to-end search orchestration.

One request flows question -> filtered vector retrieval -> per-document
extraction cells (cache-aware) -> synthesized answer with validated
citations -> reproducibility record. With the stub model provider the
whole response is a pure function of corpus snapshot, request, templates,
and parameters.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .cellcache import CellCache
from .corpus import CorpusStore, CurationPolicy, Document, IngestReport
from .embedding import LocalHashEmbedder, RemoteEmbedder
from .errors import EngineError
from .filters import FilterExpr, print_filter
from .ragchain import (
    CellKey,
    ChainOutput,
    GenerationParams,
    GenerationRecord,
    ModelProvider,
    PromptTemplate,
    RenderedPrompt,
    estimate_tokens,
    invoke_chain,
    load_default_templates,
    longest_fitting_prefix,
    parse_model_output,
    render_prompt,
    select_context,
)
from .vectorstore import IndexedRecord, Page, SearchHit, VectorIndex

logger = logging.getLogger(__name__)

WARNING_TEXT = "Automatically generated content — verify against the cited sources."

CITATION_RE = re.compile(r"\[(-?\d+)\]")

DEFAULT_SYNTHESIS_N = 5
DEFAULT_CELL_PARALLELISM = 4

ANSWER_COLUMN_ID = "answer"


@dataclass(frozen=True)
class ExtractionColumn:
    column_id: str
    name: str
    instruction: str

    def __post_init__(self):
        if not self.column_id:
            raise EngineError("invalid_input", "column_id must be non-empty", stage="request")
        if not self.instruction.strip():
            raise EngineError("invalid_input", f"column '{self.column_id}' has an empty instruction", stage="request")

    def to_dict(self) -> dict:
        return {"column_id": self.column_id, "name": self.name, "instruction": self.instruction}


ANSWER_COLUMN = ExtractionColumn(
    ANSWER_COLUMN_ID, "Answer", "Answer the research question using only the document text."
)


@dataclass(frozen=True)
class SearchRequest:
    question: str
    filter: FilterExpr | None = None
    page: Page = Page(offset=0, limit=10)
    columns: tuple[ExtractionColumn, ...] = (ANSWER_COLUMN,)
    synthesis_n: int = DEFAULT_SYNTHESIS_N

    def __post_init__(self):
        if not self.question.strip():
            raise EngineError("invalid_input", "question must be non-empty", stage="request")
        if self.synthesis_n < 1:
            raise EngineError("invalid_input", "synthesis_n must be >= 1", stage="request")
        if not self.columns or self.columns[0].column_id != ANSWER_COLUMN_ID:
            raise EngineError("invalid_input", "columns must start with the built-in answer column", stage="request")
        seen = set()
        for column in self.columns:
            if column.column_id in seen:
                raise EngineError(
                    "invalid_input", f"duplicate column_id '{column.column_id}'", stage="request"
                )
            seen.add(column.column_id)


def make_request(
    question: str,
    *,
    filter_expr: FilterExpr | None = None,
    page: Page | None = None,
    columns: list[ExtractionColumn] | None = None,
    synthesis_n: int = DEFAULT_SYNTHESIS_N,
) -> SearchRequest:
    """Build a request, prepending the built-in answer column."""
    extra = tuple(columns or ())
    for column in extra:
        if column.column_id == ANSWER_COLUMN_ID:
            raise EngineError(
                "invalid_input", "'answer' is a reserved column_id", stage="request"
            )
    return SearchRequest(
        question=question,
        filter=filter_expr,
        page=page or Page(offset=0, limit=10),
        columns=(ANSWER_COLUMN,) + extra,
        synthesis_n=synthesis_n,
    )


@dataclass(frozen=True)
class SynthesizedAnswer:
    text: str
    cited_indices: tuple[int, ...]


@dataclass
class CellResult:
    output: ChainOutput | None = None
    record: GenerationRecord | None = None
    error: dict | None = None

    def to_dict(self) -> dict:
        if self.error is not None:
            return {"error": self.error}
        assert self.output is not None
        return {
            "raw_text": self.output.raw_text,
            "parsed_text": self.output.parsed_text,
            "model_calls": self.output.model_calls,
            "provenance": self.output.provenance,
            "context_kind": self.output.context_kind,
        }


@dataclass
class SearchResponse:
    request: SearchRequest
    question_id: str
    hits: list[dict]
    cells: dict[tuple[str, str], CellResult]
    synthesis: SynthesizedAnswer | None
    synthesis_record: GenerationRecord | None
    synthesis_provenance: str | None
    warning: str = WARNING_TEXT

    def to_dict(self) -> dict:
        cells: dict[str, dict] = {}
        repro_cells: dict[str, dict] = {}
        for hit in self.hits:
            doc_id = hit["doc_id"]
            cells[doc_id] = {}
            repro_cells[doc_id] = {}
            for column in self.request.columns:
                result = self.cells[(doc_id, column.column_id)]
                cells[doc_id][column.column_id] = result.to_dict()
                if result.record is not None:
                    repro_cells[doc_id][column.column_id] = result.record.to_dict()
        synthesis = None
        if self.synthesis is not None:
            synthesis = {
                "text": self.synthesis.text,
                "cited_indices": list(self.synthesis.cited_indices),
                "provenance": self.synthesis_provenance,
            }
        return {
            "question_id": self.question_id,
            "question": self.request.question,
            "filter": print_filter(self.request.filter) if self.request.filter is not None else None,
            "page": {"offset": self.request.page.offset, "limit": self.request.page.limit},
            "columns": [c.to_dict() for c in self.request.columns],
            "synthesis_n": self.request.synthesis_n,
            "hits": self.hits,
            "cells": cells,
            "synthesis": synthesis,
            "repro": {
                "cells": repro_cells,
                "synthesis": self.synthesis_record.to_dict() if self.synthesis_record else None,
            },
            "warning": self.warning,
        }


def request_digest(request: SearchRequest) -> str:
    """Deterministic id for a request; identical requests share one id."""
    canonical = json.dumps(
        {
            "question": request.question,
            "filter": print_filter(request.filter) if request.filter is not None else None,
            "page": [request.page.offset, request.page.limit],
            "columns": [c.to_dict() for c in request.columns],
            "synthesis_n": request.synthesis_n,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def validate_citations(text: str, n_valid: int) -> tuple[str, tuple[int, ...]]:
    """Strip out-of-range [n] markers; return the clean text and cited set."""
    removed: list[int] = []

    def check(match: re.Match) -> str:
        n = int(match.group(1))
        if 1 <= n <= n_valid:
            return match.group(0)
        removed.append(n)
        return ""

    clean = CITATION_RE.sub(check, text)
    if removed:
        logger.warning("stripped out-of-range citation markers: %s", removed)
    cited = sorted({int(m) for m in CITATION_RE.findall(clean)})
    return clean, tuple(cited)


def _hit_entry(hit: SearchHit, doc: Document) -> dict:
    return {
        "doc_id": hit.doc_id,
        "score": hit.score,
        "title": doc.title,
        "abstract": doc.abstract,
        "source": doc.source,
        "year": doc.year,
        "doi": doc.doi,
        "urls": list(doc.urls),
        "language": doc.language,
        "has_fulltext": doc.has_fulltext,
        "authors": [{"family": a.family, "given": a.given} for a in doc.authors],
    }


class SearchEngine:
    """Wires corpus, embedder, index, cache, templates, and model together."""

    def __init__(
        self,
        corpus: CorpusStore,
        embedder: LocalHashEmbedder | RemoteEmbedder,
        index: VectorIndex,
        cache: CellCache,
        model: ModelProvider,
        params: GenerationParams,
        templates: dict[str, PromptTemplate] | None = None,
        cell_parallelism: int = DEFAULT_CELL_PARALLELISM,
    ):
        self.corpus = corpus
        self.embedder = embedder
        self.index = index
        self.cache = cache
        self.model = model
        self.params = params
        self.templates = templates or load_default_templates()
        self.cell_parallelism = max(1, cell_parallelism)

    # ------------------------------------------------------------------
    # Ingestion
    # ------------------------------------------------------------------

    def ingest(self, records, policy: CurationPolicy) -> IngestReport:
        """Curate and persist records, embedding each accepted document."""

        def sink(doc: Document) -> None:
            vector = self.embedder.embed_text(doc.embedding_text())
            self.index.upsert(IndexedRecord(doc.doc_id, vector, doc.payload()))

        return self.corpus.ingest_batch(records, policy, sink=sink)

    # ------------------------------------------------------------------
    # Cells
    # ------------------------------------------------------------------

    def _cell_template(self, column: ExtractionColumn) -> PromptTemplate:
        if column.column_id == ANSWER_COLUMN_ID:
            return self.templates["answer_extraction"]
        return self.templates["custom_column"]

    def _cell_bindings(self, column: ExtractionColumn, question: str, context: str) -> dict[str, str]:
        bindings = {"question": question, "context": context}
        if column.column_id != ANSWER_COLUMN_ID:
            bindings["instruction"] = column.instruction
        return bindings

    def _run_chain(self, template: PromptTemplate, bindings: dict[str, str], context_kind: str) -> dict:
        """Invoke one chain and bundle its output with a replayable record."""
        output = invoke_chain(template, bindings, self.params, self.model, context_kind=context_kind)
        rendered = render_prompt(template, bindings)
        record = GenerationRecord(
            prompt_system=rendered.system,
            prompt_user=rendered.user,
            primer=template.primer,
            template_id=template.template_id,
            template_version=template.version,
            model_id=self.params.model_id,
            temperature=self.params.temperature,
            seed=self.params.seed,
            max_new_tokens=self.params.max_new_tokens,
            context_kind=context_kind,
        )
        return {
            "raw_text": output.raw_text,
            "parsed_text": output.parsed_text,
            "context_kind": context_kind,
            "record": record.to_dict(),
        }

    def _generate_cell(self, doc: Document, column: ExtractionColumn, question: str) -> CellResult:
        template = self._cell_template(column)
        extra = {"instruction": column.instruction} if column.column_id != ANSWER_COLUMN_ID else None
        context, context_kind = select_context(doc, question, self.params, template, extra)
        key = CellKey.build(
            doc_id=doc.doc_id,
            column_id=column.column_id,
            question=question,
            instruction=column.instruction,
            template_id=template.template_id,
            template_version=template.version,
            model_id=self.params.model_id,
            temperature=self.params.temperature,
            seed=self.params.seed,
            context_kind=context_kind,
        )
        bindings = self._cell_bindings(column, question, context)
        value, was_cached = self.cache.get_or_generate(
            key, lambda: self._run_chain(template, bindings, context_kind)
        )
        output = ChainOutput(
            raw_text=value["raw_text"],
            parsed_text=value["parsed_text"],
            model_calls=0 if was_cached else 1,
            provenance="cached" if was_cached else "generated",
            context_kind=value["context_kind"],
        )
        return CellResult(output=output, record=GenerationRecord.from_dict(value["record"]))

    def _cell_task(self, doc: Document, column: ExtractionColumn, question: str) -> CellResult:
        try:
            return self._generate_cell(doc, column, question)
        except EngineError as exc:
            # One bad cell must not take down the table; the hit ranking and
            # every other cell stay intact.
            detail = exc.to_dict()
            detail["stage"] = exc.stage or "cell"
            return CellResult(error=detail)

    # ------------------------------------------------------------------
    # Synthesis
    # ------------------------------------------------------------------

    def _synthesis_context(self, question: str, top_docs: list[Document]) -> str:
        lines = []
        for position, doc in enumerate(top_docs, start=1):
            title = " ".join(doc.title.split())
            abstract = " ".join(doc.abstract.split())
            lines.append(f"[{position}] {title} — {abstract}")
        context = "\n".join(lines)
        template = self.templates["synthesis"]

        def fits(prefix: str) -> bool:
            rendered = render_prompt(template, {"question": question, "context": prefix})
            return (
                estimate_tokens(rendered.budget_text()) + self.params.max_new_tokens
                <= self.params.context_window_tokens
            )

        if not fits(""):
            raise EngineError("budget_impossible", "synthesis prompt overhead exceeds the window", stage="synthesis")
        return longest_fitting_prefix(context, fits)

    def synthesize_answer(
        self, question: str, top_docs: list[Document]
    ) -> tuple[SynthesizedAnswer, GenerationRecord, str]:
        """Generate (or re-use) the cited summary over the top documents."""
        if not top_docs:
            raise EngineError("no_results", "cannot synthesize over zero documents", stage="synthesis")
        template = self.templates["synthesis"]
        context = self._synthesis_context(question, top_docs)
        key = CellKey.build(
            doc_id=",".join(doc.doc_id for doc in top_docs),
            column_id="__synthesis__",
            question=question,
            instruction=context,
            template_id=template.template_id,
            template_version=template.version,
            model_id=self.params.model_id,
            temperature=self.params.temperature,
            seed=self.params.seed,
            context_kind="abstract",
        )

        bindings = {"question": question, "context": context}
        value, was_cached = self.cache.get_or_generate(
            key, lambda: self._run_chain(template, bindings, "abstract")
        )
        clean, cited = validate_citations(value["parsed_text"], len(top_docs))
        answer = SynthesizedAnswer(text=clean, cited_indices=cited)
        provenance = "cached" if was_cached else "generated"
        return answer, GenerationRecord.from_dict(value["record"]), provenance

    # ------------------------------------------------------------------
    # Ask / load more
    # ------------------------------------------------------------------

    def ask(self, request: SearchRequest) -> SearchResponse:
        try:
            query = self.embedder.embed_text(request.question)
        except EngineError as exc:
            exc.stage = exc.stage or "embedding"
            raise
        hits = self.index.search(query, request.filter, request.page)
        docs = [self.corpus.get_document(hit.doc_id) for hit in hits]

        cells: dict[tuple[str, str], CellResult] = {}
        tasks = [(doc, column) for doc in docs for column in request.columns]
        if tasks:
            with ThreadPoolExecutor(max_workers=self.cell_parallelism) as pool:
                futures = {
                    (doc.doc_id, column.column_id): pool.submit(
                        self._cell_task, doc, column, request.question
                    )
                    for doc, column in tasks
                }
            for cell_key, future in futures.items():
                cells[cell_key] = future.result()

        synthesis = None
        synthesis_record = None
        synthesis_provenance = None
        if request.page.offset == 0 and docs:
            top_docs = docs[: request.synthesis_n]
            synthesis, synthesis_record, synthesis_provenance = self.synthesize_answer(
                request.question, top_docs
            )

        return SearchResponse(
            request=request,
            question_id=request_digest(request),
            hits=[_hit_entry(hit, doc) for hit, doc in zip(hits, docs)],
            cells=cells,
            synthesis=synthesis,
            synthesis_record=synthesis_record,
            synthesis_provenance=synthesis_provenance,
        )

    def load_more(self, request: SearchRequest, next_page: Page) -> SearchResponse:
        """Fetch a further page: new hits and cells only, no synthesis rerun."""
        return self.ask(replace(request, page=next_page))


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

def _replay_one(record: GenerationRecord, model: ModelProvider) -> str:
    rendered = RenderedPrompt(
        system=record.prompt_system, user=record.prompt_user, primer=record.primer
    )
    params = GenerationParams(
        model_id=record.model_id,
        temperature=record.temperature,
        seed=record.seed,
        max_new_tokens=record.max_new_tokens,
    )
    return parse_model_output(model.generate(rendered, params), record.primer)


def replay_response(payload: dict, model: ModelProvider) -> list[dict]:
    """Re-run every recorded generation and compare against stored outputs.

    Returns one entry per artifact: {artifact, ok, expected, actual}.
    """
    results = []
    repro = payload.get("repro", {})
    for doc_id, columns in repro.get("cells", {}).items():
        for column_id, record_dict in columns.items():
            record = GenerationRecord.from_dict(record_dict)
            expected = payload["cells"][doc_id][column_id]["parsed_text"]
            actual = _replay_one(record, model)
            results.append(
                {
                    "artifact": f"cell {doc_id}/{column_id}",
                    "ok": actual == expected,
                    "expected": expected,
                    "actual": actual,
                }
            )
    synthesis_record = repro.get("synthesis")
    if synthesis_record and payload.get("synthesis"):
        record = GenerationRecord.from_dict(synthesis_record)
        parsed = _replay_one(record, model)
        n_top = min(payload.get("synthesis_n", DEFAULT_SYNTHESIS_N), len(payload.get("hits", [])))
        actual, _cited = validate_citations(parsed, n_top)
        expected = payload["synthesis"]["text"]
        results.append(
            {"artifact": "synthesis", "ok": actual == expected, "expected": expected, "actual": actual}
        )
    return results
