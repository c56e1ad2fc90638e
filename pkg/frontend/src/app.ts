/**
 * Single-page annotation UI.
 *
 * Flow: fetch the next task, render history plus the two candidate
 * responses, collect a preference (A / B / both nonsensical) and — in span
 * mode — a highlighted acknowledgement span in the chosen response, then
 * submit and advance. One submission is in flight at a time.
 */
import { ApiClient } from "./api.js";
import { charRangeToTokenSpan, tokenSpanToCharRange, type TokenSpan } from "./span.js";
import type { AnnotationPayloadT, ChoiceT, TaskDocumentT, TokenOffsetT } from "./schema.js";

interface ViewState {
  task: TaskDocumentT;
  choice: ChoiceT | null;
  span: TokenSpan | null; // token indices into the chosen response
  submitting: boolean;
}

const api = new ApiClient();

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function banner(message: string): void {
  const host = document.getElementById("banner")!;
  host.textContent = message;
  host.classList.add("visible");
  setTimeout(() => host.classList.remove("visible"), 4000);
}

function annotatorId(): string {
  const params = new URLSearchParams(window.location.search);
  const fromUrl = params.get("annotator");
  if (fromUrl) {
    localStorage.setItem("annotator_id", fromUrl);
    return fromUrl;
  }
  let stored = localStorage.getItem("annotator_id");
  if (!stored) {
    stored = `anon-${Math.random().toString(36).slice(2, 10)}`;
    localStorage.setItem("annotator_id", stored);
  }
  return stored;
}

function tokensFor(task: TaskDocumentT, side: "A" | "B"): TokenOffsetT[] {
  return (side === "A" ? task.tokens_a : task.tokens_b) ?? [];
}

function spanRequired(state: ViewState): boolean {
  return state.task.mode === "choice+span" && state.choice !== "BOTH_NONSENSICAL";
}

function canSubmit(state: ViewState): boolean {
  if (state.submitting || state.choice === null) return false;
  if (spanRequired(state) && state.span === null) return false;
  return true;
}

function buildPayload(state: ViewState, annotator: string): AnnotationPayloadT {
  const payload: AnnotationPayloadT = {
    pair_id: state.task.pair_id,
    annotator_id: annotator,
    choice: state.choice!,
  };
  if (spanRequired(state) && state.span && (state.choice === "A" || state.choice === "B")) {
    payload.spans = { [state.choice]: [[state.span.start, state.span.end]] };
  }
  return payload;
}

function renderResponse(
  state: ViewState,
  side: "A" | "B",
  text: string,
  onUpdate: () => void,
): HTMLElement {
  const card = el("div", "response-card");
  card.dataset.side = side;
  const label = el("div", "side-label", `Response ${side}`);
  const body = el("p", "response-text");
  body.id = `response-${side}`;

  const tokens = tokensFor(state.task, side);
  const highlighted =
    state.choice === side && state.span !== null && tokens.length > 0
      ? tokenSpanToCharRange(tokens, state.span)
      : null;
  if (highlighted) {
    body.append(
      text.slice(0, highlighted.start),
      Object.assign(el("mark", "span-highlight"), {
        textContent: text.slice(highlighted.start, highlighted.end),
      }),
      text.slice(highlighted.end),
    );
  } else {
    body.textContent = text;
  }

  const pick = el("button", "pick-button", `Prefer ${side}`);
  if (state.choice === side) pick.classList.add("selected");
  pick.onclick = () => {
    state.choice = side;
    state.span = null;
    onUpdate();
  };

  if (state.task.mode === "choice+span") {
    body.onmouseup = () => {
      if (state.choice !== side) return;
      const selection = window.getSelection();
      if (!selection || selection.rangeCount === 0) return;
      const range = selection.getRangeAt(0);
      if (!body.contains(range.commonAncestorContainer)) return;
      // measure offsets against the rendered text content
      const pre = range.cloneRange();
      pre.selectNodeContents(body);
      pre.setEnd(range.startContainer, range.startOffset);
      const start = pre.toString().length;
      const end = start + range.toString().length;
      state.span = charRangeToTokenSpan(tokens, start, end);
      selection.removeAllRanges();
      onUpdate();
    };
  }

  card.append(label, body, pick);
  return card;
}

function render(state: ViewState, annotator: string): void {
  const root = document.getElementById("app")!;
  root.replaceChildren();

  const history = el("div", "history");
  history.append(el("h2", undefined, "Conversation so far"));
  for (const turn of state.task.history) {
    history.append(el("p", "turn", turn));
  }
  root.append(history);

  const update = () => render(state, annotator);
  const row = el("div", "responses");
  row.append(
    renderResponse(state, "A", state.task.response_a, update),
    renderResponse(state, "B", state.task.response_b, update),
  );
  root.append(row);

  const nonsense = el("button", "pick-button nonsense", "Both are nonsensical");
  if (state.choice === "BOTH_NONSENSICAL") nonsense.classList.add("selected");
  nonsense.onclick = () => {
    state.choice = "BOTH_NONSENSICAL";
    state.span = null;
    update();
  };
  root.append(nonsense);

  if (spanRequired(state)) {
    root.append(
      el(
        "p",
        "hint",
        state.span
          ? "Acknowledgement span selected — adjust by re-highlighting."
          : "Highlight the acknowledgement span in your chosen response.",
      ),
    );
  }

  const submit = el("button", "submit-button", state.submitting ? "Submitting…" : "Submit");
  submit.disabled = !canSubmit(state);
  submit.onclick = async () => {
    state.submitting = true;
    update();
    try {
      const outcome = await api.submit(buildPayload(state, annotator));
      if (outcome.kind === "rejected") {
        banner(`Submission rejected: ${outcome.message}`);
        state.submitting = false;
        update();
        return;
      }
      if (outcome.kind === "duplicate") banner("Already recorded — moving on.");
      await loadNext(annotator);
    } catch (err) {
      banner(`Could not reach the server: ${String(err)}. Your selection is kept.`);
      state.submitting = false;
      update();
    }
  };
  root.append(submit);
}

function renderDone(): void {
  const root = document.getElementById("app")!;
  root.replaceChildren(
    el("h2", undefined, "All done"),
    el("p", undefined, "No tasks remain for you. Thank you for annotating!"),
  );
}

async function loadNext(annotator: string): Promise<void> {
  try {
    const next = await api.nextTask(annotator);
    if (next.kind === "done") {
      renderDone();
      return;
    }
    render({ task: next.task, choice: null, span: null, submitting: false }, annotator);
  } catch (err) {
    banner(`Could not load a task: ${String(err)}. Retrying in 3s.`);
    setTimeout(() => void loadNext(annotator), 3000);
  }
}

export function start(): void {
  const annotator = annotatorId();
  const who = document.getElementById("annotator");
  if (who) who.textContent = `Annotator: ${annotator}`;
  void loadNext(annotator);
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  start();
}
