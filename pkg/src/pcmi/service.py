"""HTTP annotation service: serves comparison tasks, persists judgments.

State lives in an append-only JSONL log (assignment and annotation events);
replaying the log on startup reconstructs service state exactly. Each pair
collects at most three submitted annotations from three distinct annotators,
and an annotator never sees the same pair twice.
"""
from __future__ import annotations

import random
import threading
import time
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .experiments import (
    RATERS_PER_PAIR,
    Annotation,
    ComparisonPair,
    aggregate,
)
from .jsonl import append_jsonl, read_jsonl
from .text import token_offsets

SPAN_MODE_EXPERIMENTS = {"EXP2"}


class PairDisplay:
    """Texts shown to annotators for one pair."""

    def __init__(self, pair: ComparisonPair, history: list[str], response_a: str, response_b: str):
        self.pair = pair
        self.history = history
        self.response_a = response_a
        self.response_b = response_b

    @property
    def mode(self) -> str:
        return "choice+span" if self.pair.experiment in SPAN_MODE_EXPERIMENTS else "choice"

    def task_document(self) -> dict:
        doc = {
            "pair_id": self.pair.pair_id,
            "history": self.history,
            "response_a": self.response_a,
            "response_b": self.response_b,
            "mode": self.mode,
        }
        if self.mode == "choice+span":
            doc["tokens_a"] = [
                {"text": t, "start": s, "end": e} for t, s, e in token_offsets(self.response_a)
            ]
            doc["tokens_b"] = [
                {"text": t, "start": s, "end": e} for t, s, e in token_offsets(self.response_b)
            ]
        return doc


class AnnotationStore:
    """In-memory protocol state backed by the append-only log."""

    def __init__(self, pairs: dict[str, PairDisplay], log_path: str | Path, seed: int = 0):
        self.pairs = pairs
        self.log_path = Path(log_path)
        self.seed = seed
        self._lock = threading.Lock()
        # (pair_id, annotator_id) -> "open" | "submitted"
        self.assignments: dict[tuple[str, str], str] = {}
        self.annotations: list[Annotation] = []
        if self.log_path.exists():
            for record in read_jsonl(self.log_path):
                self._apply(record)

    def _apply(self, record: dict) -> None:
        if record["type"] == "assignment":
            self.assignments[(record["pair_id"], record["annotator_id"])] = "open"
        elif record["type"] == "annotation":
            self.assignments[(record["pair_id"], record["annotator_id"])] = "submitted"
            self.annotations.append(
                Annotation(
                    pair_id=record["pair_id"],
                    annotator_id=record["annotator_id"],
                    choice=record["choice"],
                    spans=record.get("spans"),
                    timestamp=record.get("timestamp", 0.0),
                )
            )

    def _log(self, record: dict) -> None:
        append_jsonl(record, self.log_path)

    def submitted_count(self, pair_id: str) -> int:
        return sum(
            1
            for (pid, _), state in self.assignments.items()
            if pid == pair_id and state == "submitted"
        )

    def next_task(self, annotator_id: str) -> PairDisplay | None:
        with self._lock:
            rng = random.Random(f"{self.seed}:{annotator_id}")
            order = list(self.pairs)
            rng.shuffle(order)
            eligible = [
                pid
                for pid in order
                if (pid, annotator_id) not in self.assignments
                and self.submitted_count(pid) < RATERS_PER_PAIR
            ]
            if not eligible:
                return None
            # least-annotated first; ties keep the annotator's random order
            pair_id = min(eligible, key=lambda pid: (self.submitted_count(pid), order.index(pid)))
            record = {
                "type": "assignment",
                "pair_id": pair_id,
                "annotator_id": annotator_id,
                "assigned_at": time.time(),
            }
            self._log(record)
            self._apply(record)
            return self.pairs[pair_id]

    def submit(self, pair_id: str, annotator_id: str, choice: str, spans: dict | None) -> tuple[int, str]:
        """Returns (http_status, message)."""
        with self._lock:
            display = self.pairs.get(pair_id)
            if display is None:
                return 404, f"unknown pair {pair_id}"
            state = self.assignments.get((pair_id, annotator_id))
            if state == "submitted":
                return 409, "duplicate submission"
            if choice not in ("A", "B", "BOTH_NONSENSICAL"):
                return 422, f"invalid choice {choice!r}"
            if spans is not None:
                err = self._validate_spans(display, spans)
                if err:
                    return 422, err
            record = {
                "type": "annotation",
                "pair_id": pair_id,
                "annotator_id": annotator_id,
                "choice": choice,
                "spans": spans,
                "timestamp": time.time(),
            }
            self._log(record)
            self._apply(record)
            return 201, "created"

    @staticmethod
    def _validate_spans(display: PairDisplay, spans: dict) -> str | None:
        for side, intervals in spans.items():
            if side not in ("A", "B"):
                return f"invalid span side {side!r}"
            text = display.response_a if side == "A" else display.response_b
            n_tokens = len(token_offsets(text))
            for interval in intervals:
                if len(interval) != 2:
                    return f"span {interval} must be [start, end)"
                start, end = interval
                if not (0 <= start < end <= n_tokens):
                    return f"span [{start}, {end}) out of range for {n_tokens} tokens"
        return None

    def complete_pairs(self) -> list[str]:
        return [pid for pid in self.pairs if self.submitted_count(pid) >= RATERS_PER_PAIR]

    def results(self) -> list[dict]:
        complete = set(self.complete_pairs())
        pairs = [d.pair for pid, d in self.pairs.items() if pid in complete]
        annotations = [a for a in self.annotations if a.pair_id in complete]
        return [r.to_dict() for r in aggregate(pairs, annotations)]


def load_pair_displays(
    pairs_path: str | Path,
    instances_path: str | Path,
    candidates_path: str | Path,
) -> dict[str, PairDisplay]:
    """Join pair records with instance history and candidate texts."""
    instances = {rec["id"]: rec for rec in read_jsonl(instances_path)}
    candidates: dict[tuple[str, int], str] = {}
    for rec in read_jsonl(candidates_path):
        candidates[(rec["instance_id"], int(rec["candidate_id"]))] = " ".join(rec["tokens"])
    displays = {}
    for rec in read_jsonl(pairs_path):
        pair = ComparisonPair.from_dict(rec)
        instance = instances[pair.instance_id]
        displays[pair.pair_id] = PairDisplay(
            pair=pair,
            history=list(instance["h"]),
            response_a=candidates[(pair.instance_id, pair.side_a)],
            response_b=candidates[(pair.instance_id, pair.side_b)],
        )
    return displays


def create_app(store: AnnotationStore, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="pcmi annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store

    @app.get("/api/tasks/next")
    def next_task(annotator: str = Query(default="")):
        if not annotator:
            return JSONResponse({"error": "missing annotator id"}, status_code=400)
        display = store.next_task(annotator)
        if display is None:
            return Response(status_code=204)
        return display.task_document()

    @app.post("/api/annotations")
    async def post_annotation(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "body must be JSON"}, status_code=422)
        for key in ("pair_id", "annotator_id", "choice"):
            if key not in body:
                return JSONResponse({"error": f"missing field {key}"}, status_code=422)
        status, message = store.submit(
            pair_id=body["pair_id"],
            annotator_id=body["annotator_id"],
            choice=body["choice"],
            spans=body.get("spans"),
        )
        if status == 201:
            return JSONResponse({"status": "created"}, status_code=201)
        return JSONResponse({"error": message}, status_code=status)

    @app.get("/api/results")
    def results():
        if not store.complete_pairs():
            return JSONResponse({"error": "no complete pairs yet"}, status_code=409)
        return {"results": store.results()}

    @app.get("/api/progress")
    def progress():
        return {
            "total_pairs": len(store.pairs),
            "complete_pairs": len(store.complete_pairs()),
            "submitted_annotations": len(store.annotations),
        }

    if static_dir is not None and Path(static_dir).exists():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="webapp")
    return app
