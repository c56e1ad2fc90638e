"""Pipeline configuration: one JSON document, unknown keys rejected."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .backends import SamplingConfig
from .errors import ConfigError, InputMissing
from .selection import ThresholdConfig

_TOP_LEVEL_KEYS = {
    "paths",
    "sampling",
    "thresholds",
    "tfidf_threshold",
    "seed",
    "backend",
    "http",
    "lambdas",
    "split_ratios",
}
_PATH_KEYS = {"conversations", "facts", "replay_store", "output_dir"}
_SAMPLING_KEYS = {"top_p", "temperature", "num_candidates", "max_tokens"}
_THRESHOLD_KEYS = {"pcmi_h_low", "pcmi_h_high", "pmi_acceptable_fraction"}
_HTTP_KEYS = {"endpoint", "model_ids"}
_BACKENDS = {"oracle", "replay", "http"}


@dataclass
class PipelineConfig:
    paths: dict = field(default_factory=dict)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    tfidf_threshold: float = 0.12
    seed: int = 0
    backend: str = "oracle"
    http: dict = field(default_factory=dict)
    lambdas: tuple[float, float, float] = (0.6, 0.3, 0.1)
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        def check_keys(d: dict, allowed: set, where: str) -> None:
            unknown = set(d) - allowed
            if unknown:
                raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")

        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        check_keys(raw, _TOP_LEVEL_KEYS, "config")
        paths = dict(raw.get("paths", {}))
        check_keys(paths, _PATH_KEYS, "paths")
        sampling_raw = dict(raw.get("sampling", {}))
        check_keys(sampling_raw, _SAMPLING_KEYS, "sampling")
        thresholds_raw = dict(raw.get("thresholds", {}))
        check_keys(thresholds_raw, _THRESHOLD_KEYS, "thresholds")
        http = dict(raw.get("http", {}))
        check_keys(http, _HTTP_KEYS, "http")

        backend = raw.get("backend", "oracle")
        if backend not in _BACKENDS:
            raise ConfigError(f"backend must be one of {sorted(_BACKENDS)}, got {backend!r}")
        tfidf_threshold = float(raw.get("tfidf_threshold", 0.12))
        if not 0.0 <= tfidf_threshold <= 1.0:
            raise ConfigError(f"tfidf_threshold must be in [0, 1], got {tfidf_threshold}")
        lambdas = tuple(float(x) for x in raw.get("lambdas", (0.6, 0.3, 0.1)))
        if len(lambdas) != 3 or abs(sum(lambdas) - 1.0) > 1e-9:
            raise ConfigError(f"lambdas must be 3 weights summing to 1, got {lambdas}")
        split_ratios = tuple(float(x) for x in raw.get("split_ratios", (0.8, 0.1, 0.1)))
        if len(split_ratios) != 3 or abs(sum(split_ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split_ratios must be 3 ratios summing to 1, got {split_ratios}")

        try:
            sampling = SamplingConfig(**sampling_raw)
            thresholds = ThresholdConfig(**thresholds_raw)
        except Exception as exc:
            raise ConfigError(str(exc)) from exc

        return cls(
            paths=paths,
            sampling=sampling,
            thresholds=thresholds,
            tfidf_threshold=tfidf_threshold,
            seed=int(raw.get("seed", 0)),
            backend=backend,
            http=http,
            lambdas=lambdas,
            split_ratios=split_ratios,
        )

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise InputMissing(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)
