/** Application controller: owns state, talks to the API, re-renders. */

import { ApiClient, ApiRequestError } from "./api";
import { encodeFilter, writeUrlState, type FilterChoices } from "./filters";
import { allHits, columnIdFor, initialState, type ViewState } from "./state";
import type { ColumnSpec, SearchResponse } from "./types";
import {
  renderColumnEditor,
  renderDisclaimer,
  renderError,
  renderFeedbackPopup,
  renderFilterBox,
  renderReproPanel,
  renderResults,
  renderSearchForm,
  renderSynthesis,
  renderThemeToggle,
} from "./view";

const PAGE_SIZE = 10;
const FEEDBACK_FLAG = "askengine_feedback_shown";

export class App {
  readonly state: ViewState = initialState();

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly win: Window = window,
  ) {
    this.root.addEventListener("click", (event) => this.onClick(event));
    this.root.addEventListener("submit", (event) => {
      event.preventDefault();
      const input = this.root.querySelector<HTMLInputElement>(".question-input");
      if (input && input.value.trim()) {
        void this.runSearch(input.value.trim(), this.state.filter);
      }
    });
    this.render();
  }

  // ----------------------------------------------------------------
  // Actions
  // ----------------------------------------------------------------

  async runSearch(question: string, filter: string | null = null): Promise<void> {
    this.state.question = question;
    this.state.filter = filter;
    this.state.error = null;
    this.state.pages = [];
    this.state.reproTarget = null;
    try {
      const response = await this.api.search(this.searchBody(0, PAGE_SIZE));
      this.state.pages = [response];
    } catch (error) {
      this.captureError(error);
    }
    this.win.history.replaceState(null, "", writeUrlState(question, filter) || this.win.location.pathname);
    this.maybeShowFeedback();
    this.render();
  }

  async applyFilters(choices: FilterChoices): Promise<void> {
    await this.runSearch(this.state.question, encodeFilter(choices));
  }

  async loadMore(): Promise<void> {
    const offset = allHits(this.state).length;
    try {
      const response = await this.api.search(this.searchBody(offset, PAGE_SIZE));
      this.state.pages.push(response);
    } catch (error) {
      this.captureError(error);
    }
    this.render();
  }

  /** Add one extraction column: one cell fetch per visible result row.
   * Unchanged cells stay put; the server's cell cache makes re-adding an
   * identical column come back as provenance "cached". */
  async addColumn(name: string, instruction: string): Promise<void> {
    const column: ColumnSpec = { column_id: columnIdFor(name), name, instruction };
    if (this.state.columns.some((c) => c.column_id === column.column_id)) return;
    this.state.columns.push(column);
    const hits = allHits(this.state);
    hits.forEach((hit, index) => {
      this.state.loadingCells.add(`${hit.doc_id}/${column.column_id}`);
    });
    this.render();
    await Promise.all(
      hits.map(async (hit, index) => {
        try {
          const response = await this.api.search({
            ...this.searchBody(index, 1),
            columns: [column],
          });
          this.mergeCells(response);
        } catch (error) {
          this.captureError(error);
        } finally {
          this.state.loadingCells.delete(`${hit.doc_id}/${column.column_id}`);
        }
      }),
    );
    this.render();
  }

  /** Removing a column is a pure view change; no network traffic. */
  removeColumn(columnId: string): void {
    this.state.columns = this.state.columns.filter((c) => c.column_id !== columnId);
    this.render();
  }

  focusResult(rank: number): void {
    const row = this.root.querySelector<HTMLElement>(`.result-row[data-rank="${rank}"]`);
    if (row) {
      row.focus();
      row.scrollIntoView?.({ block: "nearest" });
    }
  }

  openRepro(target: ViewState["reproTarget"]): void {
    this.state.reproTarget = target;
    this.render();
  }

  toggleTheme(): void {
    // Stylesheet swap only; no state or request changes beyond the flag.
    this.state.theme = this.state.theme === "dark" ? "light" : "dark";
    this.root.ownerDocument.body.dataset.theme = this.state.theme;
    this.render();
  }

  async bookmark(docId: string): Promise<void> {
    try {
      let collectionId = this.win.localStorage.getItem("askengine_collection");
      if (!collectionId) {
        const created = await this.api.createCollection("My bookmarks");
        collectionId = created.collection_id;
        this.win.localStorage.setItem("askengine_collection", collectionId);
      }
      await this.api.addBookmark(collectionId, docId);
    } catch (error) {
      this.captureError(error);
      this.render();
    }
  }

  // ----------------------------------------------------------------
  // Internals
  // ----------------------------------------------------------------

  private searchBody(offset: number, limit: number) {
    const body: {
      question: string;
      page: { offset: number; limit: number };
      filter?: string;
      columns?: ColumnSpec[];
    } = { question: this.state.question, page: { offset, limit } };
    if (this.state.filter) body.filter = this.state.filter;
    if (this.state.columns.length) body.columns = this.state.columns;
    return body;
  }

  private mergeCells(response: SearchResponse): void {
    // Per-row refresh responses carry one hit; fold their cells and repro
    // records into the page that owns the document.
    for (const hit of response.hits) {
      for (const page of this.state.pages) {
        if (!page.cells[hit.doc_id]) continue;
        Object.assign(page.cells[hit.doc_id], response.cells[hit.doc_id] ?? {});
        page.repro.cells[hit.doc_id] = {
          ...(page.repro.cells[hit.doc_id] ?? {}),
          ...(response.repro.cells[hit.doc_id] ?? {}),
        };
      }
    }
  }

  private captureError(error: unknown): void {
    if (error instanceof ApiRequestError) {
      this.state.error = { stage: error.detail.stage, message: error.detail.message };
    } else {
      this.state.error = { stage: "client", message: String(error) };
    }
  }

  private maybeShowFeedback(): void {
    if (!this.state.pages.length) return;
    if (this.win.sessionStorage.getItem(FEEDBACK_FLAG)) return;
    this.win.sessionStorage.setItem(FEEDBACK_FLAG, "1");
    this.state.feedbackVisible = true;
  }

  private onClick(event: Event): void {
    const target = event.target as HTMLElement;
    if (target.classList.contains("cite")) {
      this.focusResult(Number(target.dataset.cite));
    } else if (target.classList.contains("load-more")) {
      void this.loadMore();
    } else if (target.classList.contains("add-column")) {
      const name = this.root.querySelector<HTMLInputElement>(".new-column-name")?.value ?? "";
      const instruction =
        this.root.querySelector<HTMLInputElement>(".new-column-instruction")?.value ?? "";
      if (name.trim() && instruction.trim()) void this.addColumn(name.trim(), instruction.trim());
    } else if (target.classList.contains("remove-column")) {
      this.removeColumn(target.dataset.column ?? "");
    } else if (target.classList.contains("repro-open")) {
      if (target.dataset.synthesis) {
        this.openRepro({ kind: "synthesis" });
      } else {
        this.openRepro({ kind: "cell", docId: target.dataset.doc, columnId: target.dataset.column });
      }
    } else if (target.classList.contains("repro-close")) {
      this.openRepro(null);
    } else if (target.classList.contains("theme-toggle")) {
      this.toggleTheme();
    } else if (target.classList.contains("bookmark")) {
      void this.bookmark(target.dataset.doc ?? "");
    } else if (target.classList.contains("feedback-dismiss")) {
      this.state.feedbackVisible = false;
      this.render();
    } else if (target.classList.contains("retry")) {
      void this.runSearch(this.state.question, this.state.filter);
    } else if (target.classList.contains("apply-filter")) {
      const source = this.root.querySelector<HTMLInputElement>(".filter-source")?.value ?? "";
      void this.applyFilters({
        sources: source.trim() ? [source.trim()] : [],
        yearGte: null,
        yearLte: null,
        fulltextOnly: false,
      });
    }
  }

  render(): void {
    this.root.replaceChildren();
    const header = document.createElement("header");
    header.append(renderThemeToggle(this.state));
    this.root.append(header);
    this.root.append(renderSearchForm(this.state));
    this.root.append(renderFilterBox(this.state));
    this.root.append(renderColumnEditor(this.state));
    const error = renderError(this.state);
    if (error) this.root.append(error);
    if (this.state.pages.length) {
      const disclaimer = renderDisclaimer(this.state);
      if (disclaimer) this.root.append(disclaimer);
      const synthesis = renderSynthesis(this.state);
      if (synthesis) this.root.append(synthesis);
      this.root.append(renderResults(this.state));
    }
    const panel = renderReproPanel(this.state);
    if (panel) this.root.append(panel);
    if (this.state.feedbackVisible) this.root.append(renderFeedbackPopup());
  }
}
