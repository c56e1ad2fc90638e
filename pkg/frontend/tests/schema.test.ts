import { describe, expect, it } from "vitest";

import { AnnotationPayload, ResultsDocument, TaskDocument } from "../src/schema.js";

const SPAN_TASK = {
  pair_id: "exp2:i0",
  history: ["what do you think", "tell me more"],
  response_a: "that sounds cool",
  response_b: "ok",
  mode: "choice+span",
  tokens_a: [
    { text: "that", start: 0, end: 4 },
    { text: "sounds", start: 5, end: 11 },
    { text: "cool", start: 12, end: 16 },
  ],
  tokens_b: [{ text: "ok", start: 0, end: 2 }],
};

describe("TaskDocument", () => {
  it("accepts a choice-only task without token offsets", () => {
    const task = { ...SPAN_TASK, mode: "choice", tokens_a: undefined, tokens_b: undefined };
    expect(TaskDocument.safeParse(task).success).toBe(true);
  });

  it("accepts a span-mode task with offsets", () => {
    expect(TaskDocument.safeParse(SPAN_TASK).success).toBe(true);
  });

  it("rejects a span-mode task missing offsets", () => {
    const task = { ...SPAN_TASK, tokens_b: undefined };
    expect(TaskDocument.safeParse(task).success).toBe(false);
  });
});

describe("AnnotationPayload contract", () => {
  const base = { pair_id: "exp2:i0", annotator_id: "a1" };

  it("accepts the exact payloads the client can emit", () => {
    expect(AnnotationPayload.safeParse({ ...base, choice: "A", spans: { A: [[0, 2]] } }).success).toBe(true);
    expect(AnnotationPayload.safeParse({ ...base, choice: "B" }).success).toBe(true);
    expect(AnnotationPayload.safeParse({ ...base, choice: "BOTH_NONSENSICAL" }).success).toBe(true);
  });

  it("rejects degenerate spans (end <= start)", () => {
    expect(AnnotationPayload.safeParse({ ...base, choice: "A", spans: { A: [[2, 2]] } }).success).toBe(false);
  });

  it("rejects unknown choice values and span sides", () => {
    expect(AnnotationPayload.safeParse({ ...base, choice: "C" }).success).toBe(false);
    expect(AnnotationPayload.safeParse({ ...base, choice: "A", spans: { C: [[0, 1]] } }).success).toBe(false);
  });
});

describe("ResultsDocument", () => {
  it("parses the aggregate results shape", () => {
    const doc = { results: [{ exp: "EXP1", n: 87, K: 55, p: 0.009, kappa: 0.18 }] };
    expect(ResultsDocument.safeParse(doc).success).toBe(true);
  });
});
