"""Scorer backends: n-gram oracle, JSONL replay store, and HTTP LM client.

Every backend yields the four per-token log-prob series behind the same
contract; ``build_series`` enforces cross-spec token alignment before a
TokenScoreSeries is constructed.
"""
from __future__ import annotations

import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import (
    AlignmentMismatch,
    InvalidDistribution,
    MalformedResponse,
    NotFound,
    TransportError,
)
from .ngram import (
    ALL_SPECS,
    FULL,
    ContextSpec,
    NGramModel,
    ngram_sample,
    ngram_score,
    ngram_train,
    render_prefix_tokens,
)
from .scoring import TokenScoreSeries
from .text import tokenize

ENDPOINT_ENV_VAR = "PCMI_LM_ENDPOINT"


@dataclass(frozen=True)
class SamplingConfig:
    top_p: float = 0.9
    temperature: float = 0.9
    num_candidates: int = 10
    max_tokens: int = 30

    def __post_init__(self):
        if not 0.0 < self.top_p <= 1.0:
            raise InvalidDistribution(f"top_p must be in (0, 1], got {self.top_p}")
        if self.temperature <= 0:
            raise InvalidDistribution(f"temperature must be positive, got {self.temperature}")
        if self.num_candidates < 1 or self.max_tokens < 1:
            raise InvalidDistribution("num_candidates and max_tokens must be positive")


def build_series(per_spec: dict[str, list[float]]) -> TokenScoreSeries:
    """Assemble the four per-spec series, rejecting length disagreements."""
    lengths = {name: len(v) for name, v in per_spec.items()}
    if len(set(lengths.values())) != 1:
        raise AlignmentMismatch(f"token counts disagree across specs: {lengths}")
    return TokenScoreSeries(
        logp_full=list(per_spec["FULL"]),
        logp_h=list(per_spec["H_ONLY"]),
        logp_k=list(per_spec["K_ONLY"]),
        logp_none=list(per_spec["NONE"]),
    )


class OracleScorer:
    """Four interpolated trigram models, one per context spec."""

    def __init__(self, models: dict[str, NGramModel]):
        missing = {s.name for s in ALL_SPECS} - set(models)
        if missing:
            raise NotFound(f"missing oracle models for specs: {sorted(missing)}")
        self.models = models

    @classmethod
    def train(cls, corpus, lambdas=None) -> "OracleScorer":
        kwargs = {} if lambdas is None else {"lambdas": tuple(lambdas)}
        return cls({spec.name: ngram_train(corpus, spec, **kwargs) for spec in ALL_SPECS})

    def score(self, spec: ContextSpec, h_turns: list[str], k: str, g_tokens: list[str]) -> list[float]:
        return ngram_score(self.models[spec.name], spec, h_turns, k, g_tokens)

    def score_series(self, h_turns: list[str], k: str, g_tokens: list[str]) -> TokenScoreSeries:
        return build_series(
            {spec.name: self.score(spec, h_turns, k, g_tokens) for spec in ALL_SPECS}
        )

    def sample(self, h_turns: list[str], k: str, config: SamplingConfig, seed: int) -> list[list[str]]:
        return ngram_sample(
            self.models[FULL.name],
            h_turns,
            k,
            n=config.num_candidates,
            top_p=config.top_p,
            temperature=config.temperature,
            max_tokens=config.max_tokens,
            seed=seed,
        )


class ReplayStore:
    """Append-only JSONL store of previously computed per-token scores.

    One record per (instance_id, candidate_id, spec):
    ``{instance_id, candidate_id, spec, tokens, logprobs}``. Concurrent
    readers are safe; writes are serialized by a lock.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[tuple[str, str, str], dict] = {}
        if self.path.exists():
            with self.path.open() as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._index(json.loads(line))

    def _key(self, record: dict) -> tuple[str, str, str]:
        return (str(record["instance_id"]), str(record["candidate_id"]), record["spec"])

    def _index(self, record: dict) -> None:
        self._records[self._key(record)] = record

    def put(self, instance_id: str, candidate_id: str, spec: str, tokens: list[str], logprobs: list[float]) -> None:
        record = {
            "instance_id": str(instance_id),
            "candidate_id": str(candidate_id),
            "spec": spec,
            "tokens": list(tokens),
            "logprobs": [float(x) for x in logprobs],
        }
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a") as fh:
                fh.write(json.dumps(record) + "\n")
            self._index(record)

    def get(self, instance_id: str, candidate_id: str, spec: str) -> dict:
        key = (str(instance_id), str(candidate_id), spec)
        try:
            return self._records[key]
        except KeyError:
            raise NotFound(f"no replay record for {key}") from None

    def series(self, instance_id: str, candidate_id: str) -> TokenScoreSeries:
        return build_series(
            {
                spec.name: self.get(instance_id, candidate_id, spec.name)["logprobs"]
                for spec in ALL_SPECS
            }
        )


def replay_score(store: ReplayStore, instance_id: str, candidate_id: str, spec: ContextSpec) -> list[float]:
    return list(store.get(instance_id, candidate_id, spec.name)["logprobs"])


class HttpScorer:
    """Client for a token-logprob LM server.

    Wire contract: ``POST /v1/score`` with ``{model, prompt, continuation}``
    returns ``{tokens, token_logprobs}``; ``POST /v1/sample`` with
    ``{model, prompt, n, top_p, temperature, max_tokens}`` returns
    ``{samples: [{tokens, token_logprobs}]}``. Idempotent requests are
    retried with exponential backoff. ``PCMI_LM_ENDPOINT`` overrides the
    configured endpoint.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        model_ids: dict[str, str] | None = None,
        max_retries: int = 3,
        backoff_base: float = 0.1,
        max_inflight: int = 4,
        timeout: float = 30.0,
    ):
        self.endpoint = os.environ.get(ENDPOINT_ENV_VAR) or endpoint
        if not self.endpoint:
            raise TransportError("no LM endpoint configured (flag, config, or PCMI_LM_ENDPOINT)")
        self.model_ids = model_ids or {spec.name: spec.name.lower() for spec in ALL_SPECS}
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.max_inflight = max_inflight
        self._client = httpx.Client(base_url=self.endpoint, timeout=timeout)

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, body: dict) -> dict:
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                response = self._client.post(path, json=body)
            except httpx.HTTPError as exc:
                last_exc = exc
                time.sleep(self.backoff_base * (2**attempt))
                continue
            if response.status_code >= 500:
                last_exc = TransportError(f"{path} returned {response.status_code}")
                time.sleep(self.backoff_base * (2**attempt))
                continue
            if response.status_code != 200:
                raise MalformedResponse(f"{path} returned {response.status_code}: {response.text}")
            try:
                return response.json()
            except ValueError as exc:
                raise MalformedResponse(f"{path} returned non-JSON body") from exc
        raise TransportError(f"{path} failed after {self.max_retries + 1} attempts: {last_exc}")

    @staticmethod
    def _prompt(spec: ContextSpec, h_turns: list[str], k: str) -> str:
        return " ".join(render_prefix_tokens(spec, h_turns, k))

    def score(self, spec: ContextSpec, h_turns: list[str], k: str, g_text: str) -> tuple[list[str], list[float]]:
        payload = self._post(
            "/v1/score",
            {
                "model": self.model_ids[spec.name],
                "prompt": self._prompt(spec, h_turns, k),
                "continuation": g_text,
            },
        )
        try:
            tokens = list(payload["tokens"])
            logprobs = [float(x) for x in payload["token_logprobs"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"bad /v1/score payload: {payload}") from exc
        if len(tokens) != len(logprobs):
            raise AlignmentMismatch(
                f"server returned {len(logprobs)} logprobs for {len(tokens)} tokens"
            )
        return tokens, logprobs

    def score_series(self, h_turns: list[str], k: str, g_text: str) -> tuple[list[str], TokenScoreSeries]:
        with ThreadPoolExecutor(max_workers=self.max_inflight) as pool:
            futures = {
                spec.name: pool.submit(self.score, spec, h_turns, k, g_text)
                for spec in ALL_SPECS
            }
            results = {name: fut.result() for name, fut in futures.items()}
        tokens = results["FULL"][0]
        for name, (spec_tokens, _) in results.items():
            if len(spec_tokens) != len(tokens):
                raise AlignmentMismatch(
                    f"spec {name} tokenized g into {len(spec_tokens)} tokens, FULL into {len(tokens)}"
                )
        return tokens, build_series({name: lp for name, (_, lp) in results.items()})

    def sample(self, h_turns: list[str], k: str, config: SamplingConfig, seed: int | None = None) -> list[list[str]]:
        body = {
            "model": self.model_ids[FULL.name],
            "prompt": self._prompt(FULL, h_turns, k),
            "n": config.num_candidates,
            "top_p": config.top_p,
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
        }
        if seed is not None:
            body["seed"] = seed
        payload = self._post("/v1/sample", body)
        try:
            return [list(sample["tokens"]) for sample in payload["samples"]]
        except (KeyError, TypeError) as exc:
            raise MalformedResponse(f"bad /v1/sample payload: {payload}") from exc


def make_scorer(backend: str, **kwargs):
    """Factory used by the CLI: backend in {oracle, replay, http}."""
    if backend == "oracle":
        return OracleScorer(kwargs["models"])
    if backend == "replay":
        return ReplayStore(kwargs["path"])
    if backend == "http":
        return HttpScorer(
            endpoint=kwargs.get("endpoint"),
            model_ids=kwargs.get("model_ids"),
        )
    raise NotFound(f"unknown backend {backend!r}")


def tokenize_response(text: str) -> list[str]:
    return tokenize(text)
