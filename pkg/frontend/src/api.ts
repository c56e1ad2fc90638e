/**
 * Thin fetch client for the annotation service.
 *
 * Transient failures (network errors and 5xx) are retried with backoff; a
 * 409 on submission means the judgment already landed, so callers treat it
 * as success and advance.
 */
import type { AnnotationPayloadT, TaskDocumentT } from "./schema.js";

export type NextTask =
  | { kind: "task"; task: TaskDocumentT }
  | { kind: "done" };

export type SubmitOutcome =
  | { kind: "created" }
  | { kind: "duplicate" }
  | { kind: "rejected"; message: string };

const RETRIES = 3;
const BACKOFF_MS = 400;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function withRetry(run: () => Promise<Response>): Promise<Response> {
  let lastError: unknown = null;
  for (let attempt = 0; attempt <= RETRIES; attempt++) {
    if (attempt > 0) await sleep(BACKOFF_MS * 2 ** (attempt - 1));
    try {
      const response = await run();
      if (response.status >= 500) {
        lastError = new Error(`server error ${response.status}`);
        continue;
      }
      return response;
    } catch (err) {
      lastError = err;
    }
  }
  throw lastError instanceof Error ? lastError : new Error(String(lastError));
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async nextTask(annotatorId: string): Promise<NextTask> {
    const url = `${this.baseUrl}/api/tasks/next?annotator=${encodeURIComponent(annotatorId)}`;
    const response = await withRetry(() => fetch(url));
    if (response.status === 204) return { kind: "done" };
    if (!response.ok) throw new Error(`unexpected status ${response.status}`);
    return { kind: "task", task: (await response.json()) as TaskDocumentT };
  }

  async submit(payload: AnnotationPayloadT): Promise<SubmitOutcome> {
    const response = await withRetry(() =>
      fetch(`${this.baseUrl}/api/annotations`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      }),
    );
    if (response.status === 201) return { kind: "created" };
    if (response.status === 409) return { kind: "duplicate" };
    const body = (await response.json().catch(() => ({}))) as { error?: string };
    return { kind: "rejected", message: body.error ?? `status ${response.status}` };
  }
}
