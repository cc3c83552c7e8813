/** Wire types for the /api/v1 endpoints. */

export interface ColumnSpec {
  column_id: string;
  name: string;
  instruction: string;
}

export interface Author {
  family: string;
  given: string;
}

export interface Hit {
  doc_id: string;
  score: number;
  title: string;
  abstract: string;
  source: string;
  year: number | null;
  doi: string | null;
  urls: string[];
  language: string | null;
  has_fulltext: boolean;
  authors: Author[];
}

export interface CellOk {
  raw_text: string;
  parsed_text: string;
  model_calls: number;
  provenance: "generated" | "cached";
  context_kind: "abstract" | "fulltext";
}

export interface CellError {
  error: { stage: string; code: string; message: string };
}

export type Cell = CellOk | CellError;

export const isCellError = (cell: Cell): cell is CellError => "error" in cell;

export interface GenerationRecord {
  prompt_system: string;
  prompt_user: string;
  primer: string | null;
  template_id: string;
  template_version: number;
  model_id: string;
  temperature: number;
  seed: number;
  max_new_tokens: number;
  context_kind: string;
}

export interface Synthesis {
  text: string;
  cited_indices: number[];
  provenance: string;
}

export interface SearchResponse {
  question_id: string;
  question: string;
  filter: string | null;
  page: { offset: number; limit: number };
  columns: ColumnSpec[];
  synthesis_n: number;
  hits: Hit[];
  cells: Record<string, Record<string, Cell>>;
  synthesis: Synthesis | null;
  repro: {
    cells: Record<string, Record<string, GenerationRecord>>;
    synthesis: GenerationRecord | null;
  };
  warning: string;
}

export interface SearchBody {
  question: string;
  filter?: string;
  page?: { offset: number; limit: number };
  columns?: ColumnSpec[];
}

export interface ApiError {
  stage: string;
  code: string;
  message: string;
}
