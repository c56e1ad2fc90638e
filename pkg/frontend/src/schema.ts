/**
 * Zod schemas mirroring the annotation service's JSON contracts.
 *
 * These are the single source of truth for the wire format: the contract
 * tests validate every payload the client can emit against them, and the
 * rest of the client imports the inferred types only (so the browser bundle
 * never loads zod).
 */
import { z } from "zod";

export const TokenOffset = z.object({
  text: z.string(),
  start: z.number().int().nonnegative(),
  end: z.number().int().positive(),
});

export const TaskDocument = z
  .object({
    pair_id: z.string().min(1),
    history: z.array(z.string()),
    response_a: z.string(),
    response_b: z.string(),
    mode: z.enum(["choice", "choice+span"]),
    tokens_a: z.array(TokenOffset).optional(),
    tokens_b: z.array(TokenOffset).optional(),
  })
  .refine(
    (doc) => doc.mode === "choice" || (doc.tokens_a !== undefined && doc.tokens_b !== undefined),
    { message: "span-mode tasks must carry token offsets for both responses" },
  );

export const Choice = z.enum(["A", "B", "BOTH_NONSENSICAL"]);

/** Half-open token-index interval [start, end). */
export const Span = z
  .tuple([z.number().int().nonnegative(), z.number().int().positive()])
  .refine(([start, end]) => start < end, { message: "span end must exceed start" });

export const AnnotationPayload = z.object({
  pair_id: z.string().min(1),
  annotator_id: z.string().min(1),
  choice: Choice,
  spans: z.record(z.enum(["A", "B"]), z.array(Span)).optional(),
});

export const ResultRow = z.object({
  exp: z.string(),
  n: z.number().int().nonnegative(),
  K: z.number().int().nonnegative(),
  p: z.number(),
  kappa: z.number(),
});

export const ResultsDocument = z.object({ results: z.array(ResultRow) });

export type TokenOffsetT = z.infer<typeof TokenOffset>;
export type TaskDocumentT = z.infer<typeof TaskDocument>;
export type AnnotationPayloadT = z.infer<typeof AnnotationPayload>;
export type ChoiceT = z.infer<typeof Choice>;
