/** Thin fetch client for the engine API; all reads go through here. */

import type { ApiError, SearchBody, SearchResponse } from "./types";

export class ApiRequestError extends Error {
  constructor(public readonly detail: ApiError, public readonly status: number) {
    super(`${detail.stage}/${detail.code}: ${detail.message}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "/api/v1",
    private readonly fetchFn: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, init);
    if (!response.ok) {
      let detail: ApiError;
      try {
        detail = (await response.json()) as ApiError;
      } catch {
        detail = { stage: "network", code: "bad_response", message: `HTTP ${response.status}` };
      }
      throw new ApiRequestError(detail, response.status);
    }
    return (await response.json()) as T;
  }

  search(body: SearchBody): Promise<SearchResponse> {
    return this.request<SearchResponse>("/search", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<{ status: string; corpus_size: number; index_dimension: number }> {
    return this.request("/health");
  }

  createCollection(name: string): Promise<{ collection_id: string }> {
    return this.request("/collections", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ name }),
    });
  }

  addBookmark(collectionId: string, docId: string): Promise<unknown> {
    return this.request(`/collections/${collectionId}/items`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ doc_id: docId }),
    });
  }

  sendQuestionFeedback(body: {
    question_id: string;
    helpfulness: number;
    correctness: number;
    completeness: number;
  }): Promise<unknown> {
    return this.request("/feedback/question", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  sendSystemFeedback(body: {
    umux_capability?: number;
    umux_ease?: number;
    satisfaction?: number;
  }): Promise<unknown> {
    return this.request("/feedback/system", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}
