/** Client view state; everything rendered derives from API responses. */

import type { ColumnSpec, SearchResponse } from "./types";

export type Theme = "light" | "dark";

export interface ReproTarget {
  kind: "cell" | "synthesis";
  docId?: string;
  columnId?: string;
}

export interface ViewState {
  question: string;
  filter: string | null;
  /** Custom columns only; the built-in answer column is implicit. */
  columns: ColumnSpec[];
  /** Result pages in fetch order; concatenation is the visible ranking. */
  pages: SearchResponse[];
  reproTarget: ReproTarget | null;
  theme: Theme;
  loadingCells: Set<string>; // "docId/columnId" currently refreshing
  error: { stage: string; message: string } | null;
  feedbackVisible: boolean;
}

export const initialState = (): ViewState => ({
  question: "",
  filter: null,
  columns: [],
  pages: [],
  reproTarget: null,
  theme: "light",
  loadingCells: new Set(),
  error: null,
  feedbackVisible: false,
});

/** Stable column id derived from the name, so re-adding an identical
 * column produces the same cache key server-side. */
export function columnIdFor(name: string): string {
  const slug = name
    .toLowerCase()
    .replace(/[^a-z0-9]+/g, "_")
    .replace(/^_+|_+$/g, "");
  return slug || "column";
}

export function allHits(state: ViewState) {
  return state.pages.flatMap((page) => page.hits);
}

export function cellFor(state: ViewState, docId: string, columnId: string) {
  for (const page of state.pages) {
    const row = page.cells[docId];
    if (row && row[columnId]) return row[columnId];
  }
  return null;
}

export function recordFor(state: ViewState, target: ReproTarget) {
  if (target.kind === "synthesis") {
    return state.pages[0]?.repro.synthesis ?? null;
  }
  for (const page of state.pages) {
    const row = page.repro.cells[target.docId ?? ""];
    if (row && row[target.columnId ?? ""]) return row[target.columnId ?? ""];
  }
  return null;
}
