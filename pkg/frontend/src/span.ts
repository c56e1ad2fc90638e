/**
 * Character-range <-> token-index mapping for span highlighting.
 *
 * The server is the tokenization authority: every task ships token offsets
 * into the displayed response string, and the client only snaps browser
 * selections onto those boundaries. Token spans are half-open [start, end).
 */
import type { TokenOffsetT } from "./schema.js";

export interface TokenSpan {
  start: number;
  end: number;
}

/**
 * Snap a character selection to the tokens it touches. Returns null when
 * the selection covers no token (e.g. whitespace or punctuation only).
 */
export function charRangeToTokenSpan(
  tokens: TokenOffsetT[],
  charStart: number,
  charEnd: number,
): TokenSpan | null {
  if (charEnd <= charStart) return null;
  let first = -1;
  let last = -1;
  tokens.forEach((tok, i) => {
    const overlaps = tok.start < charEnd && charStart < tok.end;
    if (overlaps) {
      if (first < 0) first = i;
      last = i;
    }
  });
  if (first < 0) return null;
  return { start: first, end: last + 1 };
}

/** The exact character range the snapped token span occupies. */
export function tokenSpanToCharRange(
  tokens: TokenOffsetT[],
  span: TokenSpan,
): { start: number; end: number } {
  const firstTok = tokens[span.start];
  const lastTok = tokens[span.end - 1];
  if (!firstTok || !lastTok || span.end <= span.start) {
    throw new RangeError(`token span [${span.start}, ${span.end}) out of range`);
  }
  return { start: firstTok.start, end: lastTok.end };
}

/** Text the annotator ends up highlighting after the snap. */
export function spanText(text: string, tokens: TokenOffsetT[], span: TokenSpan): string {
  const range = tokenSpanToCharRange(tokens, span);
  return text.slice(range.start, range.end);
}
