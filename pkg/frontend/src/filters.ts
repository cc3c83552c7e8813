/** Builders for the server's URL filter grammar.
 *
 * Grammar: `GROUP[gi][field][op][ai]=value` pairs joined by `&`; values are
 * percent-encoded. The encoded string is sent verbatim in the search body
 * and mirrored into the page URL so sessions are shareable links.
 */

export interface FilterChoices {
  sources: string[];
  yearGte: number | null;
  yearLte: number | null;
  fulltextOnly: boolean;
}

export const emptyFilter = (): FilterChoices => ({
  sources: [],
  yearGte: null,
  yearLte: null,
  fulltextOnly: false,
});

export function encodeFilter(choices: FilterChoices): string | null {
  const pairs: string[] = [];
  choices.sources.forEach((source, index) => {
    pairs.push(`AND[0][source][inList][${index}]=${encodeURIComponent(source)}`);
  });
  if (choices.yearGte !== null) {
    pairs.push(`AND[0][year][gte][0]=${choices.yearGte}`);
  }
  if (choices.yearLte !== null) {
    pairs.push(`AND[0][year][lte][0]=${choices.yearLte}`);
  }
  if (choices.fulltextOnly) {
    pairs.push(`AND[0][has_fulltext][eq][0]=true`);
  }
  return pairs.length ? pairs.join("&") : null;
}

/** Read question + filter state back from a shareable URL. */
export function readUrlState(search: string): { question: string; filter: string | null } {
  const params = new URLSearchParams(search);
  return { question: params.get("q") ?? "", filter: params.get("filter") };
}

export function writeUrlState(question: string, filter: string | null): string {
  const params = new URLSearchParams();
  if (question) params.set("q", question);
  if (filter) params.set("filter", filter);
  const serialized = params.toString();
  return serialized ? `?${serialized}` : "";
}
