"""The generation chain: prompt template + model provider + output parser.

Also owns the context-token budget machinery (a cheap deterministic token
estimator and prefix truncation against it), which the embedding layer
reuses for input-length capping.
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .corpus import Document
from .errors import EngineError, ProviderError

PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")
PLACEHOLDER_NAME_RE = re.compile(r"^[a-z_]+$")

DEFAULT_CONTEXT_WINDOW_TOKENS = 32768


# ---------------------------------------------------------------------------
# Token budget
# ---------------------------------------------------------------------------

def estimate_tokens(text: str) -> int:
    """Deterministic token estimate: ceil(bytes/4) + ceil(words/2).

    Monotone non-decreasing under appending or inserting text, which the
    truncation search below relies on.
    """
    if not text:
        return 0
    n_bytes = len(text.encode("utf-8"))
    n_words = len(text.split())
    return -(-n_bytes // 4) + -(-n_words // 2)


def longest_fitting_prefix(text: str, fits: Callable[[str], bool]) -> str:
    """Largest character-prefix of ``text`` accepted by a monotone predicate.

    ``fits("")`` must hold; the result is well-defined independent of probe
    order because a monotone predicate accepts exactly a prefix-closed range.
    """
    if fits(text):
        return text
    lo, hi = 0, len(text)  # fits(text[:lo]) holds, fits(text[:hi]) does not
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fits(text[:mid]):
            lo = mid
        else:
            hi = mid
    return text[:lo]


def truncate_to_token_budget(text: str, max_tokens: int) -> str:
    return longest_fitting_prefix(text, lambda prefix: estimate_tokens(prefix) <= max_tokens)


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PromptTemplate:
    """Versioned system/user prompt pair with ``{placeholder}`` slots.

    The optional primer is a fixed assistant-prefix steering the response
    shape; it carries no placeholders. Any change to the texts must bump
    ``version`` so cached generations stay honest.
    """

    template_id: str
    version: int
    placeholders: tuple[str, ...]
    system_text: str
    user_text: str
    primer: str | None = None

    def __post_init__(self):
        if self.version < 1:
            raise ValueError("template version must be >= 1")
        for name in self.placeholders:
            if not PLACEHOLDER_NAME_RE.match(name):
                raise ValueError(f"invalid placeholder name '{name}'")
        declared = set(self.placeholders)
        used = set(PLACEHOLDER_RE.findall(self.system_text + "\n" + self.user_text))
        undeclared = used - declared
        if undeclared:
            raise ValueError(f"undeclared placeholders in template: {sorted(undeclared)}")

    def fingerprint(self) -> str:
        payload = "\x1f".join(
            [self.template_id, str(self.version), self.system_text, self.user_text, self.primer or ""]
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


_SECTION_RE = re.compile(r"^--- (system|user|primer) ---$")


def parse_template_text(text: str) -> PromptTemplate:
    """Parse the on-disk template format: header lines, then labeled sections.

    Header carries ``template_id``, ``version`` and a comma-separated
    ``placeholders`` list; sections are delimited by ``--- system ---`` etc.
    """
    header: dict[str, str] = {}
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in text.splitlines():
        match = _SECTION_RE.match(line.strip())
        if match:
            current = sections.setdefault(match.group(1), [])
            continue
        if current is not None:
            current.append(line)
            continue
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ValueError(f"malformed template header line: {line!r}")
        header[key.strip()] = value.strip()
    missing = {"template_id", "version", "placeholders"} - set(header)
    if missing:
        raise ValueError(f"template header missing keys: {sorted(missing)}")
    if "system" not in sections or "user" not in sections:
        raise ValueError("template must define system and user sections")
    placeholders = tuple(p.strip() for p in header["placeholders"].split(",") if p.strip())
    primer_lines = sections.get("primer")
    return PromptTemplate(
        template_id=header["template_id"],
        version=int(header["version"]),
        placeholders=placeholders,
        system_text="\n".join(sections["system"]).strip("\n"),
        user_text="\n".join(sections["user"]).strip("\n"),
        primer="\n".join(primer_lines).strip("\n") if primer_lines else None,
    )


def load_template(path: Path) -> PromptTemplate:
    return parse_template_text(Path(path).read_text(encoding="utf-8"))


def load_default_templates() -> dict[str, PromptTemplate]:
    """Load the templates shipped with the package, keyed by template_id."""
    templates = {}
    for entry in resources.files("askengine.templates").iterdir():
        if entry.name.endswith(".txt"):
            template = parse_template_text(entry.read_text(encoding="utf-8"))
            templates[template.template_id] = template
    return templates


@dataclass(frozen=True)
class RenderedPrompt:
    system: str
    user: str
    primer: str | None = None

    def budget_text(self) -> str:
        """Concatenation whose token estimate is charged against the window."""
        parts = [self.system, self.user]
        if self.primer:
            parts.append(self.primer)
        return "\n".join(parts)


def render_prompt(template: PromptTemplate, bindings: dict[str, str]) -> RenderedPrompt:
    """Substitute bindings into the template in a single pass.

    Values are inserted verbatim and never rescanned, so brace sequences in
    a binding cannot open, close, or re-expand template slots.
    """
    declared = set(template.placeholders)
    for name in bindings:
        if name not in declared:
            raise EngineError("unknown_placeholder", f"unknown placeholder '{name}'", stage="render")
    for name in template.placeholders:
        if name not in bindings:
            raise EngineError("missing_placeholder", f"missing placeholder '{name}'", stage="render")

    def substitute(text: str) -> str:
        return PLACEHOLDER_RE.sub(lambda m: bindings[m.group(1)], text)

    return RenderedPrompt(
        system=substitute(template.system_text),
        user=substitute(template.user_text),
        primer=template.primer,
    )


# ---------------------------------------------------------------------------
# Generation parameters and outputs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GenerationParams:
    model_id: str
    temperature: float = 0.0
    seed: int = 42
    max_new_tokens: int = 512
    context_window_tokens: int = DEFAULT_CONTEXT_WINDOW_TOKENS

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.context_window_tokens < 1:
            raise ValueError("context_window_tokens must be >= 1")


@dataclass
class ChainOutput:
    raw_text: str
    parsed_text: str
    model_calls: int
    provenance: str  # "generated" | "cached"
    context_kind: str  # "abstract" | "fulltext"


@dataclass(frozen=True)
class GenerationRecord:
    """Everything needed to re-render and replay one generation."""

    prompt_system: str
    prompt_user: str
    primer: str | None
    template_id: str
    template_version: int
    model_id: str
    temperature: float
    seed: int
    max_new_tokens: int
    context_kind: str

    def to_dict(self) -> dict:
        return {
            "prompt_system": self.prompt_system,
            "prompt_user": self.prompt_user,
            "primer": self.primer,
            "template_id": self.template_id,
            "template_version": self.template_version,
            "model_id": self.model_id,
            "temperature": self.temperature,
            "seed": self.seed,
            "max_new_tokens": self.max_new_tokens,
            "context_kind": self.context_kind,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationRecord":
        return cls(**data)


# ---------------------------------------------------------------------------
# Output parser
# ---------------------------------------------------------------------------

def parse_model_output(raw: str, primer: str | None = None) -> str:
    """Sanitize raw model text: strip ends, drop an echoed primer prefix,
    and collapse runs of more than two blank lines. Idempotent."""
    text = raw.strip()
    anchor = primer.strip() if primer else ""
    while anchor and text.startswith(anchor):
        text = text[len(anchor):].lstrip()
    lines = text.split("\n")
    kept: list[str] = []
    blanks = 0
    for line in lines:
        if line.strip() == "":
            blanks += 1
            if blanks <= 2:
                kept.append("")
        else:
            blanks = 0
            kept.append(line)
    text = "\n".join(kept).strip()
    if not text:
        raise EngineError("empty_output", "model returned no usable text", stage="parser")
    return text


# ---------------------------------------------------------------------------
# Model providers
# ---------------------------------------------------------------------------

class ModelProvider(Protocol):
    def generate(self, rendered: RenderedPrompt, params: GenerationParams) -> str: ...


class StubModelProvider:
    """Offline deterministic model: a pure function of (prompt, seed, model_id).

    Output format is ``STUB(<hash16>): <first 12 words of the last non-empty
    user line>`` so downstream plumbing (caching, citations, replay) can be
    exercised with predictable text. Call count is tracked for tests.
    """

    def __init__(self):
        self.calls = 0
        self._lock = threading.Lock()

    def generate(self, rendered: RenderedPrompt, params: GenerationParams) -> str:
        with self._lock:
            self.calls += 1
        payload = "\x1f".join(
            [rendered.system, rendered.user, rendered.primer or "", params.model_id, str(params.seed)]
        )
        digest = hashlib.blake2b(payload.encode("utf-8"), digest_size=8).hexdigest()
        last_line = ""
        for line in reversed(rendered.user.split("\n")):
            if line.strip():
                last_line = line.strip()
                break
        snippet = " ".join(last_line.split()[:12])
        return f"STUB({digest}): {snippet}"


class RemoteModelProvider:
    """Client for an HTTP inference endpoint.

    Request: ``{model_id, system, user, primer?, temperature, seed,
    max_new_tokens}``; response: ``{text}``. One retry on retryable failures.
    """

    def __init__(self, endpoint: str, *, timeout: float = 120.0, client: httpx.Client | None = None):
        self.endpoint = endpoint
        self._client = client or httpx.Client(timeout=timeout)

    def generate(self, rendered: RenderedPrompt, params: GenerationParams) -> str:
        body = {
            "model_id": params.model_id,
            "system": rendered.system,
            "user": rendered.user,
            "temperature": params.temperature,
            "seed": params.seed,
            "max_new_tokens": params.max_new_tokens,
        }
        if rendered.primer:
            body["primer"] = rendered.primer
        last_error: ProviderError | None = None
        for attempt in range(2):
            try:
                response = self._client.post(self.endpoint, json=body)
            except httpx.HTTPError as exc:
                last_error = ProviderError(f"model endpoint unreachable: {exc}", retryable=True, stage="model")
                continue
            if response.status_code >= 500:
                last_error = ProviderError(
                    f"model endpoint returned {response.status_code}", retryable=True, stage="model"
                )
                continue
            if response.status_code != 200:
                raise ProviderError(
                    f"model endpoint returned {response.status_code}", retryable=False, stage="model"
                )
            data = response.json()
            if not isinstance(data, dict) or not isinstance(data.get("text"), str):
                raise ProviderError("model endpoint returned malformed body", retryable=False, stage="model")
            return data["text"]
        assert last_error is not None
        raise last_error


# ---------------------------------------------------------------------------
# Chain invocation and context selection
# ---------------------------------------------------------------------------

def invoke_chain(
    template: PromptTemplate,
    bindings: dict[str, str],
    params: GenerationParams,
    model: ModelProvider,
    *,
    context_kind: str = "abstract",
) -> ChainOutput:
    """Render, generate, and parse one chain invocation (one model call)."""
    rendered = render_prompt(template, bindings)
    used = estimate_tokens(rendered.budget_text()) + params.max_new_tokens
    if used > params.context_window_tokens:
        raise EngineError(
            "budget_exceeded",
            f"prompt needs {used} tokens but the window is {params.context_window_tokens}",
            stage="chain",
        )
    raw = model.generate(rendered, params)
    parsed = parse_model_output(raw, template.primer)
    return ChainOutput(
        raw_text=raw,
        parsed_text=parsed,
        model_calls=1,
        provenance="generated",
        context_kind=context_kind,
    )


def select_context(
    doc: Document,
    question: str,
    params: GenerationParams,
    template: PromptTemplate,
    extra_bindings: dict[str, str] | None = None,
) -> tuple[str, str]:
    """Choose and size the document context injected into a chain.

    Prefers full text over abstract; the returned kind reflects that choice
    before any truncation. The context is cut so the fully assembled prompt
    plus the generation allowance fits the model window.
    """
    if doc.full_text:
        context, kind = doc.full_text, "fulltext"
    else:
        context, kind = doc.abstract, "abstract"
    bindings = dict(extra_bindings or {})
    bindings["question"] = question

    def fits(prefix: str) -> bool:
        rendered = render_prompt(template, {**bindings, "context": prefix})
        return (
            estimate_tokens(rendered.budget_text()) + params.max_new_tokens
            <= params.context_window_tokens
        )

    if not fits(""):
        raise EngineError(
            "budget_impossible",
            "prompt overhead exceeds the context window even with empty context",
            stage="chain",
        )
    return longest_fitting_prefix(context, fits), kind


# ---------------------------------------------------------------------------
# Cell cache keys
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellKey:
    """Content digest identifying one generated table cell.

    Covers everything the output depends on; changing any component must
    change the key, so partial cache hits stay sound.
    """

    digest: str

    @classmethod
    def build(
        cls,
        *,
        doc_id: str,
        column_id: str,
        question: str,
        instruction: str,
        template_id: str,
        template_version: int,
        model_id: str,
        temperature: float,
        seed: int,
        context_kind: str,
    ) -> "CellKey":
        payload = "\x1f".join(
            [
                doc_id,
                column_id,
                question,
                instruction,
                template_id,
                str(template_version),
                model_id,
                repr(temperature),
                str(seed),
                context_kind,
            ]
        )
        return cls(hashlib.sha256(payload.encode("utf-8")).hexdigest())
