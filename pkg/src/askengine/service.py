"""HTTP API over the search engine, plus feedback capture.

All endpoints live under /api/v1 and return structured errors of the form
{stage, code, message} with conventional status classes (400 validation,
404 not found, 429 rate capped, 502 provider failures, 500 internal).
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .bibliography import CollectionStore
from .cellcache import CellCache
from .config import ServiceConfig
from .corpus import CorpusStore, CurationPolicy
from .embedding import EmbedderConfig, build_embedder
from .errors import EngineError, NotFoundError, ProviderError
from .feedback import FeedbackLog, QuestionFeedback, SystemFeedback
from .filters import parse_filter
from .pipeline import (
    ExtractionColumn,
    SearchEngine,
    make_request,
)
from .ragchain import GenerationParams, RemoteModelProvider, StubModelProvider
from .vectorstore import IndexedRecord, Page, VectorIndex

logger = logging.getLogger(__name__)

API_PREFIX = "/api/v1"


class RateLimiter:
    """Fixed per-client request cap over a sliding one-minute window."""

    def __init__(self, per_minute: int):
        self.per_minute = per_minute
        self._seen: dict[str, deque[float]] = defaultdict(deque)
        self._lock = threading.Lock()

    def allow(self, client: str) -> bool:
        now = time.monotonic()
        with self._lock:
            window = self._seen[client]
            while window and now - window[0] > 60.0:
                window.popleft()
            if len(window) >= self.per_minute:
                return False
            window.append(now)
            return True


@dataclass
class AppState:
    config: ServiceConfig
    engine: SearchEngine
    collections: CollectionStore
    feedback: FeedbackLog
    policy: CurationPolicy
    questions_log: Path
    issued_questions: set[str] = field(default_factory=set)
    limiter: RateLimiter | None = None


def build_state(config: ServiceConfig) -> AppState:
    """Assemble all engine components from configuration."""
    data_dir = Path(config.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)

    corpus = CorpusStore(data_dir / "corpus.ndjson")
    embed_config = EmbedderConfig(
        provider=config.embed_provider,
        dimension=config.embed_dim,
        max_input_tokens=config.embed_max_input_tokens,
        model_id=config.embed_model_id,
        endpoint=config.embed_endpoint,
    )
    embedder = build_embedder(embed_config)

    index_path = data_dir / "index.bin"
    if index_path.exists():
        index = VectorIndex.load(index_path)
        if index.dimension != config.embed_dim:
            raise EngineError(
                "config_mismatch",
                f"index at {index_path} has dimension {index.dimension} but "
                f"EMBED_DIM is {config.embed_dim}",
                stage="config",
            )
    else:
        index = VectorIndex(config.embed_dim)
        for doc in corpus.documents():
            index.upsert(IndexedRecord(doc.doc_id, embedder.embed_text(doc.embedding_text()), doc.payload()))

    cache = CellCache(config.resolved_cache_dir(), config.cache_max_entries)
    model = (
        RemoteModelProvider(config.llm_endpoint)
        if config.llm_endpoint
        else StubModelProvider()
    )
    params = GenerationParams(
        model_id=config.llm_model_id,
        temperature=config.temperature,
        seed=config.seed,
        max_new_tokens=config.max_new_tokens,
        context_window_tokens=config.context_window_tokens,
    )
    engine = SearchEngine(
        corpus, embedder, index, cache, model, params, cell_parallelism=config.cell_parallelism
    )

    questions_log = data_dir / "questions.ndjson"
    issued: set[str] = set()
    if questions_log.exists():
        with questions_log.open("r", encoding="utf-8") as fh:
            issued = {json.loads(line)["question_id"] for line in fh if line.strip()}

    return AppState(
        config=config,
        engine=engine,
        collections=CollectionStore(data_dir / "collections"),
        feedback=FeedbackLog(data_dir / "feedback.ndjson"),
        policy=CurationPolicy(config.min_title_chars, config.min_abstract_chars),
        questions_log=questions_log,
        issued_questions=issued,
        limiter=RateLimiter(config.rate_limit_per_minute),
    )


def _status_for(exc: EngineError) -> int:
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, ProviderError):
        return 502
    return 400


def _session_token(request: Request) -> str:
    return request.headers.get("X-Session-Token", "anon")


def _parse_request_body(state: AppState, payload: dict):
    if not isinstance(payload, dict):
        raise EngineError("validation", "request body must be a JSON object", stage="request")
    question = payload.get("question")
    if not isinstance(question, str):
        raise EngineError("validation", "'question' must be a string", stage="request")

    filter_expr = None
    raw_filter = payload.get("filter")
    if raw_filter is not None:
        if not isinstance(raw_filter, str):
            raise EngineError("validation", "'filter' must be a grammar string", stage="request")
        filter_expr = parse_filter(raw_filter)

    page = Page(offset=0, limit=10)
    raw_page = payload.get("page")
    if raw_page is not None:
        try:
            page = Page(offset=int(raw_page.get("offset", 0)), limit=int(raw_page.get("limit", 10)))
        except (AttributeError, TypeError, ValueError) as exc:
            raise EngineError("validation", f"bad page: {exc}", stage="request") from None

    columns = []
    for entry in payload.get("columns") or []:
        if not isinstance(entry, dict):
            raise EngineError("validation", "each column must be an object", stage="request")
        columns.append(
            ExtractionColumn(
                column_id=str(entry.get("column_id", "")),
                name=str(entry.get("name", "")),
                instruction=str(entry.get("instruction", "")),
            )
        )

    synthesis_n = payload.get("synthesis_n", state.config.synthesis_n)
    if not isinstance(synthesis_n, int) or isinstance(synthesis_n, bool):
        raise EngineError("validation", "'synthesis_n' must be an integer", stage="request")

    return make_request(
        question,
        filter_expr=filter_expr,
        page=page,
        columns=columns,
        synthesis_n=synthesis_n,
    )


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="askengine", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(EngineError)
    async def engine_error_handler(_request: Request, exc: EngineError):
        return JSONResponse(status_code=_status_for(exc), content=exc.to_dict())

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"stage": "request", "code": "validation", "message": str(exc)},
        )

    @app.exception_handler(Exception)
    async def unhandled_handler(_request: Request, exc: Exception):
        logger.exception("unhandled error")
        return JSONResponse(
            status_code=500,
            content={"stage": "service", "code": "internal", "message": str(exc)},
        )

    @app.middleware("http")
    async def rate_limit(request: Request, call_next):
        if state.limiter is not None:
            client = request.client.host if request.client else "unknown"
            if not state.limiter.allow(client):
                return JSONResponse(
                    status_code=429,
                    content={"stage": "service", "code": "rate_limited", "message": "per-client request cap hit"},
                )
        return await call_next(request)

    @app.get(f"{API_PREFIX}/health")
    def health():
        return {
            "status": "ok",
            "corpus_size": len(state.engine.corpus),
            "index_dimension": state.engine.index.dimension,
        }

    @app.post(f"{API_PREFIX}/search")
    def search(payload: dict = Body(...)):
        request_obj = _parse_request_body(state, payload)
        response = state.engine.ask(request_obj)
        if response.question_id not in state.issued_questions:
            state.issued_questions.add(response.question_id)
            with state.questions_log.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"question_id": response.question_id}) + "\n")
        body = json.dumps(response.to_dict(), ensure_ascii=False)
        return Response(content=body, media_type="application/json")

    @app.get(f"{API_PREFIX}/documents/{{doc_id}}")
    def get_document(doc_id: str):
        doc = state.engine.corpus.get_document(doc_id)
        return doc.to_dict()

    @app.post(f"{API_PREFIX}/collections")
    def create_collection(payload: dict = Body(...)):
        name = payload.get("name")
        if not isinstance(name, str) or not name.strip():
            raise EngineError("validation", "'name' must be a non-empty string", stage="bibliography")
        return state.collections.create(name.strip()).to_dict()

    @app.get(f"{API_PREFIX}/collections/{{collection_id}}")
    def get_collection(collection_id: str):
        return state.collections.get(collection_id).to_dict()

    @app.post(f"{API_PREFIX}/collections/{{collection_id}}/items")
    def add_collection_item(collection_id: str, payload: dict = Body(...)):
        if "doc_id" in payload:
            doc = state.engine.corpus.get_document(str(payload["doc_id"]))
            collection = state.collections.add_item(collection_id, doc)
        elif "item" in payload:
            collection = state.collections.add_item(collection_id, payload["item"])
        elif "items" in payload:
            collection, skipped = state.collections.import_items(
                collection_id, json.dumps(payload["items"]).encode("utf-8")
            )
            body = collection.to_dict()
            body["skipped"] = skipped
            return body
        else:
            raise EngineError("validation", "body must carry 'doc_id', 'item', or 'items'", stage="bibliography")
        return collection.to_dict()

    @app.get(f"{API_PREFIX}/collections/{{collection_id}}/export")
    def export_collection(collection_id: str, format: str = "citation-json"):
        data = state.collections.export(collection_id, format)
        media = "application/json" if format == "citation-json" else "text/plain"
        return Response(content=data, media_type=media)

    @app.post(f"{API_PREFIX}/feedback/question")
    def feedback_question(request: Request, payload: dict = Body(...)):
        feedback = QuestionFeedback(
            question_id=str(payload.get("question_id", "")),
            helpfulness=payload.get("helpfulness"),
            correctness=payload.get("correctness"),
            completeness=payload.get("completeness"),
        )
        if feedback.question_id not in state.issued_questions:
            raise EngineError(
                "validation", f"unknown question_id '{feedback.question_id}'", stage="feedback"
            )
        entry_id = state.feedback.append("question", feedback.to_dict(), _session_token(request))
        return {"id": entry_id}

    @app.post(f"{API_PREFIX}/feedback/system")
    def feedback_system(request: Request, payload: dict = Body(...)):
        feedback = SystemFeedback(
            umux_capability=payload.get("umux_capability"),
            umux_ease=payload.get("umux_ease"),
            satisfaction=payload.get("satisfaction"),
        )
        entry_id = state.feedback.append("system", feedback.to_dict(), _session_token(request))
        return {"id": entry_id}

    return app
