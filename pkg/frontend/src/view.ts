/** DOM rendering. Pure functions from state to elements; no fetching here. */

import { allHits, cellFor, recordFor, type ViewState } from "./state";
import { isCellError, type Cell, type ColumnSpec, type GenerationRecord, type Hit } from "./types";

const el = <K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] => {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
};

export function renderSearchForm(state: ViewState): HTMLElement {
  const form = el("form", { class: "search-form", "aria-label": "Search" });
  const input = el("input", {
    class: "question-input",
    type: "text",
    name: "question",
    placeholder: "Ask a research question",
    "aria-label": "Research question",
  });
  input.value = state.question;
  const submit = el("button", { class: "submit-search", type: "submit" }, "Search");
  submit.disabled = state.question.trim() === "";
  input.addEventListener("input", () => {
    submit.disabled = input.value.trim() === "";
  });
  form.append(input, submit);
  return form;
}

export function renderFilterBox(state: ViewState): HTMLElement {
  const box = el("section", { class: "filter-box", "aria-label": "Filters" });
  box.append(el("h2", {}, "Filters"));
  const sourceInput = el("input", {
    class: "filter-source",
    type: "text",
    placeholder: "Source collection",
    "aria-label": "Source filter",
  });
  const apply = el("button", { class: "apply-filter", type: "button" }, "Apply filters");
  box.append(sourceInput, apply);
  if (state.filter) {
    box.append(el("p", { class: "active-filter" }, `Active: ${state.filter}`));
  }
  return box;
}

function renderCell(state: ViewState, docId: string, column: ColumnSpec): HTMLElement {
  const wrapper = el("div", { class: "cell", "data-doc": docId, "data-column": column.column_id });
  wrapper.append(el("span", { class: "cell-name" }, column.name));
  if (state.loadingCells.has(`${docId}/${column.column_id}`)) {
    wrapper.append(el("span", { class: "cell-loading" }, "loading…"));
    return wrapper;
  }
  const cell: Cell | null = cellFor(state, docId, column.column_id);
  if (!cell) {
    wrapper.append(el("span", { class: "cell-missing" }, "—"));
    return wrapper;
  }
  if (isCellError(cell)) {
    wrapper.append(
      el("span", { class: "cell-error", role: "alert" }, `error (${cell.error.stage}): ${cell.error.code}`),
    );
    return wrapper;
  }
  const record = recordFor(state, { kind: "cell", docId, columnId: column.column_id });
  if (!record) {
    // Generated text without a reproducibility record is never displayed.
    wrapper.append(el("span", { class: "cell-missing" }, "no reproducibility record"));
    return wrapper;
  }
  wrapper.append(el("span", { class: "cell-text" }, cell.parsed_text));
  if (cell.provenance === "cached") {
    wrapper.append(el("span", { class: "badge badge-cached" }, "cached"));
  }
  wrapper.append(
    el(
      "button",
      {
        class: "repro-open",
        type: "button",
        "data-doc": docId,
        "data-column": column.column_id,
        "aria-label": `Reproducibility for ${column.name}`,
      },
      "reproducibility",
    ),
  );
  return wrapper;
}

function renderHit(state: ViewState, hit: Hit, rank: number, columns: ColumnSpec[]): HTMLElement {
  const row = el("article", {
    class: "result-row",
    tabindex: "-1",
    "data-rank": String(rank),
    "data-doc": hit.doc_id,
  });
  const heading = el("h3", { class: "result-title" }, `[${rank}] ${hit.title}`);
  row.append(heading);
  const meta = [hit.source, hit.year ? String(hit.year) : null, hit.doi].filter(Boolean).join(" · ");
  row.append(el("p", { class: "result-meta" }, meta));
  row.append(
    el(
      "button",
      { class: "bookmark", type: "button", "data-doc": hit.doc_id, "aria-label": `Bookmark ${hit.title}` },
      "☆ bookmark",
    ),
  );
  const cells = el("div", { class: "cells" });
  for (const column of columns) cells.append(renderCell(state, hit.doc_id, column));
  row.append(cells);
  return row;
}

export function renderSynthesis(state: ViewState): HTMLElement | null {
  const first = state.pages[0];
  if (!first || !first.synthesis) return null;
  const block = el("section", { class: "synthesis", "aria-label": "Synthesized answer" });
  block.append(el("h2", {}, "Synthesized answer"));
  const body = el("p", { class: "synthesis-text" });
  const text = first.synthesis.text;
  const marker = /\[(\d+)\]/g;
  let cursor = 0;
  for (const match of text.matchAll(marker)) {
    body.append(document.createTextNode(text.slice(cursor, match.index)));
    body.append(
      el(
        "button",
        { class: "cite", type: "button", "data-cite": match[1], "aria-label": `Go to result ${match[1]}` },
        `[${match[1]}]`,
      ),
    );
    cursor = (match.index ?? 0) + match[0].length;
  }
  body.append(document.createTextNode(text.slice(cursor)));
  block.append(body);
  block.append(
    el("button", { class: "repro-open", type: "button", "data-synthesis": "1" }, "reproducibility"),
  );
  return block;
}

export function renderColumnEditor(state: ViewState): HTMLElement {
  const editor = el("section", { class: "column-editor", "aria-label": "Edit columns" });
  editor.append(el("h2", {}, "Columns"));
  for (const column of state.columns) {
    const entry = el("div", { class: "column-entry", "data-column": column.column_id });
    entry.append(el("span", {}, column.name));
    entry.append(
      el(
        "button",
        { class: "remove-column", type: "button", "data-column": column.column_id },
        "remove",
      ),
    );
    editor.append(entry);
  }
  const nameInput = el("input", { class: "new-column-name", placeholder: "Column name" });
  const instructionInput = el("input", {
    class: "new-column-instruction",
    placeholder: "What to extract",
  });
  const add = el("button", { class: "add-column", type: "button" }, "Add column");
  editor.append(nameInput, instructionInput, add);
  return editor;
}

export function renderReproPanel(state: ViewState): HTMLElement | null {
  if (!state.reproTarget) return null;
  const record: GenerationRecord | null = recordFor(state, state.reproTarget);
  if (!record) return null;
  const panel = el("aside", { class: "repro-panel", role: "dialog", "aria-label": "Reproducibility" });
  panel.append(el("h2", {}, "Reproducibility"));

  const prompts = el("section", { class: "facet", "data-facet": "prompts" });
  prompts.append(el("h3", {}, "Prompts"));
  prompts.append(el("pre", { class: "prompt-system" }, record.prompt_system));
  prompts.append(el("pre", { class: "prompt-user" }, record.prompt_user));
  if (record.primer) prompts.append(el("pre", { class: "prompt-primer" }, record.primer));

  const model = el("section", { class: "facet", "data-facet": "model" });
  model.append(el("h3", {}, "Model"));
  model.append(el("p", {}, record.model_id));

  const parameters = el("section", { class: "facet", "data-facet": "parameters" });
  parameters.append(el("h3", {}, "Parameters"));
  parameters.append(
    el(
      "p",
      {},
      `temperature ${record.temperature} · seed ${record.seed} · max_new_tokens ${record.max_new_tokens}`,
    ),
  );

  const context = el("section", { class: "facet", "data-facet": "context" });
  context.append(el("h3", {}, "Context"));
  context.append(el("p", {}, record.context_kind));

  panel.append(prompts, model, parameters, context);
  const copy = el("button", { class: "copy-record", type: "button" }, "Copy prompt");
  copy.addEventListener("click", () => {
    const payload = `${record.prompt_system}\n\n${record.prompt_user}`;
    void navigator.clipboard?.writeText?.(payload);
  });
  panel.append(copy);
  panel.append(el("button", { class: "repro-close", type: "button" }, "Close"));
  return panel;
}

export function renderError(state: ViewState): HTMLElement | null {
  if (!state.error) return null;
  const box = el("div", { class: "error-box", role: "alert" });
  box.append(el("strong", {}, `Error in ${state.error.stage}: `));
  box.append(document.createTextNode(state.error.message));
  box.append(el("button", { class: "retry", type: "button" }, "Retry"));
  return box;
}

export function renderResults(state: ViewState): HTMLElement {
  const section = el("section", { class: "results", "aria-label": "Results" });
  const hits = allHits(state);
  const columns: ColumnSpec[] = state.pages[0]
    ? [state.pages[0].columns[0], ...state.columns]
    : [];
  hits.forEach((hit, index) => section.append(renderHit(state, hit, index + 1, columns)));
  if (state.pages.length && hits.length) {
    section.append(el("button", { class: "load-more", type: "button" }, "Load more"));
  }
  if (state.pages.length && !hits.length) {
    section.append(el("p", { class: "no-results" }, "No results."));
  }
  return section;
}

export function renderDisclaimer(state: ViewState): HTMLElement | null {
  const warning = state.pages[0]?.warning;
  if (!warning) return null;
  return el("p", { class: "disclaimer", role: "note" }, warning);
}

export function renderFeedbackPopup(): HTMLElement {
  const popup = el("div", { class: "feedback-popup", role: "dialog", "aria-label": "Feedback" });
  popup.append(el("p", {}, "How well does the system work for you? (optional)"));
  popup.append(el("button", { class: "feedback-dismiss", type: "button" }, "Dismiss"));
  return popup;
}

export function renderThemeToggle(state: ViewState): HTMLElement {
  return el(
    "button",
    { class: "theme-toggle", type: "button", "aria-pressed": state.theme === "dark" ? "true" : "false" },
    state.theme === "dark" ? "Light mode" : "Dark mode",
  );
}
