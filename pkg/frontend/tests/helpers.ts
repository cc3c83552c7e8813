/** Test doubles: a canned-response backend behind the fetch interface. */

import type { Cell, ColumnSpec, GenerationRecord, SearchBody, SearchResponse } from "../src/types";

export const ANSWER_COLUMN: ColumnSpec = {
  column_id: "answer",
  name: "Answer",
  instruction: "Answer the research question using only the document text.",
};

const record = (contextKind: string): GenerationRecord => ({
  prompt_system: "system prompt text",
  prompt_user: "user prompt text",
  primer: null,
  template_id: "answer_extraction",
  template_version: 1,
  model_id: "stub",
  temperature: 0,
  seed: 42,
  max_new_tokens: 512,
  context_kind: contextKind,
});

export interface FakeBackendOptions {
  totalDocs: number;
  synthesisText?: string;
  /** column ids to flag as provenance "cached" */
  cachedColumns?: string[];
}

export class FakeBackend {
  requests: { path: string; body: SearchBody }[] = [];

  constructor(private readonly options: FakeBackendOptions) {}

  get searchCalls(): SearchBody[] {
    return this.requests.filter((r) => r.path.endsWith("/search")).map((r) => r.body);
  }

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const body = init?.body ? (JSON.parse(init.body as string) as SearchBody) : ({} as SearchBody);
    this.requests.push({ path: input, body });
    if (input.endsWith("/search")) {
      return new Response(JSON.stringify(this.searchResponse(body)), {
        status: 200,
        headers: { "Content-Type": "application/json" },
      });
    }
    if (input.endsWith("/collections")) {
      return new Response(JSON.stringify({ collection_id: "c0ffee", name: "My bookmarks", items: [] }), {
        status: 200,
      });
    }
    return new Response(JSON.stringify({}), { status: 200 });
  };

  private searchResponse(body: SearchBody): SearchResponse {
    const page = body.page ?? { offset: 0, limit: 10 };
    const columns = [ANSWER_COLUMN, ...(body.columns ?? [])];
    const hits = [];
    const cells: Record<string, Record<string, Cell>> = {};
    const reproCells: Record<string, Record<string, GenerationRecord>> = {};
    const upper = Math.min(page.offset + page.limit, this.options.totalDocs);
    for (let rank = page.offset; rank < upper; rank += 1) {
      const docId = `doc-${String(rank).padStart(4, "0")}`;
      hits.push({
        doc_id: docId,
        score: 1 - rank / 100,
        title: `Document ${rank}`,
        abstract: `Abstract ${rank}`,
        source: "synthetic",
        year: 2020,
        doi: null,
        urls: [],
        language: "en",
        has_fulltext: false,
        authors: [],
      });
      cells[docId] = {};
      reproCells[docId] = {};
      for (const column of columns) {
        const cached = this.options.cachedColumns?.includes(column.column_id) ?? false;
        cells[docId][column.column_id] = {
          raw_text: `raw ${column.column_id} ${docId}`,
          parsed_text: `${column.name} value for ${docId}`,
          model_calls: cached ? 0 : 1,
          provenance: cached ? "cached" : "generated",
          context_kind: "abstract",
        };
        reproCells[docId][column.column_id] = record("abstract");
      }
    }
    const synthesis =
      page.offset === 0 && hits.length
        ? {
            text: this.options.synthesisText ?? "Summary citing [1].",
            cited_indices: [1],
            provenance: "generated",
          }
        : null;
    return {
      question_id: "q-digest",
      question: body.question,
      filter: body.filter ?? null,
      page,
      columns,
      synthesis_n: 5,
      hits,
      cells,
      synthesis,
      repro: { cells: reproCells, synthesis: synthesis ? record("abstract") : null },
      warning: "Automatically generated content — verify against the cited sources.",
    };
  }
}
