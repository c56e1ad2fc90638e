"""Command-line pipeline orchestration.

Every command reads and writes the JSONL formats declared by the library
modules, so each step is individually re-runnable. Exit codes: 0 success,
1 validation error, 2 I/O error. Logs go to stderr as line-delimited JSON.
"""
from __future__ import annotations

import argparse
import json
import logging
import pickle
import sys
from pathlib import Path

from . import dataset as ds
from .backends import OracleScorer, ReplayStore, SamplingConfig, build_series
from .config import PipelineConfig
from .errors import ConfigError, InputMissing, PcmiError
from .experiments import (
    Annotation,
    ComparisonPair,
    aggregate,
    attribution_report,
    build_exp1_pairs,
    build_exp2_pairs,
    build_exp3_pairs,
    distribution_summary,
)
from .jsonl import read_jsonl, write_jsonl
from .ngram import ALL_SPECS
from .plots import box_plot_svg, histogram_csv, line_chart_svg, quartiles_csv
from .scoring import (
    ScoreBundle,
    SpanSet,
    TokenizedText,
    TokenScoreSeries,
    derive_bundle,
    token_series,
    token_series_csv,
)
from .selection import (
    CandidatePool,
    ThresholdConfig,
    calibrate_thresholds,
    fused_pcmi_select,
    max_pmi_select,
    selection_record,
)

logger = logging.getLogger("pcmi")


class _JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps({"level": record.levelname.lower(), "message": record.getMessage()})


def configure_logging(level: int = logging.INFO) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level)


def _load_config(args) -> PipelineConfig:
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def _parse_thresholds(args, config: PipelineConfig) -> ThresholdConfig:
    if getattr(args, "thresholds", None):
        low, high = (float(x) for x in args.thresholds.split(","))
        return ThresholdConfig(
            pcmi_h_low=low,
            pcmi_h_high=high,
            pmi_acceptable_fraction=getattr(args, "fraction", 0.5),
        )
    return config.thresholds


def load_pools(bundles_path: str | Path) -> list[CandidatePool]:
    """Group scored-candidate rows into per-instance pools."""
    rows = read_jsonl(bundles_path)
    by_instance: dict[str, list[dict]] = {}
    for row in rows:
        by_instance.setdefault(row["instance_id"], []).append(row)
    pools = []
    for instance_id in sorted(by_instance):
        rows = sorted(by_instance[instance_id], key=lambda r: int(r["candidate_id"]))
        candidates = []
        for row in rows:
            tokens = row.get("tokens", [])
            text = TokenizedText(tokens=list(tokens), token_ids=list(range(len(tokens)))) if tokens else TokenizedText(["?"], [0])
            candidates.append((text, ScoreBundle.from_dict(row)))
        pools.append(CandidatePool(instance_id=instance_id, candidates=candidates))
    return pools


def _load_annotations(path: str | Path) -> list[Annotation]:
    # accepts both plain annotation JSONL and the service event log
    annotations = []
    for rec in read_jsonl(path):
        if rec.get("type") == "assignment":
            continue
        annotations.append(Annotation.from_dict(rec))
    return annotations


def cmd_build_dataset(args) -> int:
    config = _load_config(args)
    conversations_path = args.conversations or config.paths.get("conversations")
    facts_path = args.facts or config.paths.get("facts")
    if not conversations_path or not facts_path:
        raise ConfigError("conversations and facts paths are required")
    threshold = args.threshold if args.threshold is not None else config.tfidf_threshold
    conversations, facts = ds.load_topical_chat(conversations_path, facts_path)
    instances = ds.extract_instances(conversations, facts, threshold=threshold)
    out_dir = Path(args.out)
    ds.write_instances(instances, out_dir / "instances.jsonl")
    train, validation, test = ds.split_by_entity(instances, config.split_ratios, seed=config.seed)
    for name, part in (("train", train), ("validation", validation), ("test", test)):
        ds.write_instances(part, out_dir / f"{name}.jsonl")
    logger.info(
        "built %d instances (train=%d validation=%d test=%d)",
        len(instances), len(train), len(validation), len(test),
    )
    return 0


def cmd_train_oracle(args) -> int:
    config = _load_config(args)
    corpus = ds.read_instances(args.train)
    scorer = OracleScorer.train(corpus, lambdas=config.lambdas)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("wb") as fh:
        pickle.dump(scorer.models, fh)
    logger.info("trained 4 oracle models on %d instances -> %s", len(corpus), out)
    return 0


def _load_oracle(path: str | Path) -> OracleScorer:
    path = Path(path)
    if not path.exists():
        raise InputMissing(f"oracle model file not found: {path}")
    with path.open("rb") as fh:
        return OracleScorer(pickle.load(fh))


def cmd_sample(args) -> int:
    config = _load_config(args)
    scorer = _load_oracle(args.oracle)
    instances = ds.read_instances(args.instances)
    sampling = SamplingConfig(
        top_p=args.top_p if args.top_p is not None else config.sampling.top_p,
        temperature=args.temperature if args.temperature is not None else config.sampling.temperature,
        num_candidates=args.n if args.n is not None else config.sampling.num_candidates,
        max_tokens=args.max_tokens if args.max_tokens is not None else config.sampling.max_tokens,
    )
    records = []
    for i, inst in enumerate(instances):
        samples = scorer.sample(inst.h, inst.k, sampling, seed=config.seed + i)
        for cid, tokens in enumerate(samples):
            records.append({"instance_id": inst.id, "candidate_id": cid, "tokens": tokens})
    write_jsonl(records, args.out)
    logger.info("sampled %d candidates for %d instances", len(records), len(instances))
    return 0


def cmd_score(args) -> int:
    instances = {inst.id: inst for inst in ds.read_instances(args.instances)}
    candidates = read_jsonl(args.candidates)
    replay = ReplayStore(args.replay_out) if args.replay_out else None

    if args.backend == "replay":
        store = ReplayStore(args.replay)
        def series_for(inst, cand):
            return store.series(cand["instance_id"], cand["candidate_id"])
    else:
        scorer = _load_oracle(args.oracle)
        def series_for(inst, cand):
            per_spec = {
                spec.name: scorer.score(spec, inst.h, inst.k, cand["tokens"])
                for spec in ALL_SPECS
            }
            if replay is not None:
                for name, logprobs in per_spec.items():
                    replay.put(cand["instance_id"], str(cand["candidate_id"]), name, cand["tokens"], logprobs)
            return build_series(per_spec)

    rows = []
    for cand in candidates:
        inst = instances.get(cand["instance_id"])
        series = series_for(inst, cand)
        bundle = derive_bundle(series)
        rows.append(
            {
                "instance_id": cand["instance_id"],
                "candidate_id": cand["candidate_id"],
                "tokens": cand["tokens"],
                **bundle.to_dict(),
            }
        )
    write_jsonl(rows, args.out)
    logger.info("scored %d candidates", len(rows))
    return 0


def cmd_calibrate(args) -> int:
    bundles = [ScoreBundle.from_dict(r) for r in read_jsonl(args.bundles)]
    thresholds = calibrate_thresholds(bundles, pmi_acceptable_fraction=args.fraction)
    print(
        json.dumps(
            {
                "pcmi_h_low": thresholds.pcmi_h_low,
                "pcmi_h_high": thresholds.pcmi_h_high,
                "pmi_acceptable_fraction": thresholds.pmi_acceptable_fraction,
            }
        )
    )
    return 0


def cmd_select(args) -> int:
    config = _load_config(args)
    thresholds = _parse_thresholds(args, config)
    pools = load_pools(args.bundles)
    records = []
    for pool in pools:
        if args.method == "max":
            index = max_pmi_select(pool)
            records.append(selection_record(pool, "max_pmi", index, "default"))
        else:
            index, trace = fused_pcmi_select(pool, thresholds)
            records.append(selection_record(pool, "fused_pcmi", index, trace))
    write_jsonl(records, args.out)
    logger.info("selected from %d pools with method=%s", len(pools), args.method)
    return 0


def cmd_make_pairs(args) -> int:
    config = _load_config(args)
    thresholds = _parse_thresholds(args, config)
    pools = load_pools(args.bundles)
    pairs: list[ComparisonPair] = []
    experiment = args.experiment
    if experiment in ("exp1", "all"):
        pairs += build_exp1_pairs(pools, seed=config.seed)
    if experiment in ("exp2", "all"):
        exp2_pairs, median_dk = build_exp2_pairs(pools, delta_h_min=args.delta_h_min, seed=config.seed)
        pairs += exp2_pairs
        if median_dk is not None:
            logger.info("exp2 median |delta pcmi_k| = %.4f over %d pairs", median_dk, len(exp2_pairs))
    if experiment in ("exp3", "all"):
        pairs += build_exp3_pairs(pools, thresholds, seed=config.seed)
    write_jsonl([p.to_dict() for p in pairs], args.out)
    logger.info("built %d comparison pairs (%s)", len(pairs), experiment)
    return 0


def cmd_aggregate(args) -> int:
    pairs = [ComparisonPair.from_dict(r) for r in read_jsonl(args.pairs)]
    annotations = _load_annotations(args.annotations)
    results = [r.to_dict() for r in aggregate(pairs, annotations)]
    output = json.dumps({"results": results}, indent=2)
    if args.out:
        Path(args.out).write_text(output + "\n")
    print(output)
    return 0


def cmd_report(args) -> int:
    config = _load_config(args)
    report: dict = {}
    if args.pairs and args.annotations:
        pairs = [ComparisonPair.from_dict(r) for r in read_jsonl(args.pairs)]
        annotations = _load_annotations(args.annotations)
        report["results"] = [r.to_dict() for r in aggregate(pairs, annotations)]
    if args.bundles:
        thresholds = _parse_thresholds(args, config)
        pools = load_pools(args.bundles)
        groups = {
            "ALL": [b for pool in pools for _, b in pool.candidates],
            "MAXPMI": [pool.bundle(max_pmi_select(pool)) for pool in pools],
            "FUSED": [pool.bundle(fused_pcmi_select(pool, thresholds)[0]) for pool in pools],
        }
        summary = distribution_summary(groups)
        report["distribution"] = {"quartiles": summary["quartiles"]}
    output = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(output + "\n")
    print(output)
    return 0


def cmd_export_plot_data(args) -> int:
    config = _load_config(args)
    thresholds = _parse_thresholds(args, config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    pools = load_pools(args.bundles)
    groups = {
        "ALL": [b for pool in pools for _, b in pool.candidates],
        "MAXPMI": [pool.bundle(max_pmi_select(pool)) for pool in pools],
        "FUSED": [pool.bundle(fused_pcmi_select(pool, thresholds)[0]) for pool in pools],
    }
    summary = distribution_summary(groups)
    (out_dir / "quartiles.csv").write_text(quartiles_csv(summary))
    for group in groups:
        (out_dir / f"hist_{group.lower()}.csv").write_text(histogram_csv(summary, group))
    for score in ("pcmi_h", "pcmi_k"):
        (out_dir / f"box_{score}.svg").write_text(box_plot_svg(summary, score))

    if args.replay and args.series:
        store = ReplayStore(args.replay)
        instance_id, candidate_id = args.series.split(":")
        record = store.get(instance_id, candidate_id, "FULL")
        tokens = record["tokens"]
        series = store.series(instance_id, candidate_id)
        g = TokenizedText(tokens=tokens, token_ids=list(range(len(tokens))))
        (out_dir / "token_series.csv").write_text(token_series_csv(g, series))
        decomp = token_series(series)
        (out_dir / "token_series.svg").write_text(line_chart_svg(decomp, labels=tokens))

    if args.pairs and args.annotations and args.replay:
        store = ReplayStore(args.replay)
        pairs = {p.pair_id: p for p in (ComparisonPair.from_dict(r) for r in read_jsonl(args.pairs))}
        records = []
        for ann in _load_annotations(args.annotations):
            pair = pairs.get(ann.pair_id)
            if pair is None or not ann.spans or ann.choice not in ("A", "B"):
                continue
            intervals = ann.spans.get(ann.choice)
            if not intervals:
                continue
            candidate = pair.side_a if ann.choice == "A" else pair.side_b
            try:
                series = store.series(pair.instance_id, str(candidate))
            except PcmiError:
                continue
            records.append((series, SpanSet(intervals)))
        if records:
            from .plots import attribution_csv

            ratios = attribution_report(records, positive_part=args.positive_part)
            (out_dir / "attribution.csv").write_text(attribution_csv(ratios))
    logger.info("exported plot data to %s", out_dir)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import AnnotationStore, create_app, load_pair_displays

    config = _load_config(args)
    displays = load_pair_displays(args.pairs, args.instances, args.candidates)
    store = AnnotationStore(displays, args.log, seed=config.seed)
    app = create_app(store, static_dir=args.static_dir)
    logger.info("serving %d pairs on port %d", len(displays), args.port)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcmi", description=__doc__)
    parser.add_argument("--config", help="pipeline config JSON", default=None)
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dataset", help="extract rephrasing instances and split by entity")
    p.add_argument("--conversations")
    p.add_argument("--facts")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train-oracle", help="train the four n-gram ablation models")
    p.add_argument("--train", required=True, help="training instances JSONL")
    p.add_argument("--out", required=True, help="oracle model pickle path")
    p.set_defaults(func=cmd_train_oracle)

    p = sub.add_parser("sample", help="sample candidate responses per instance")
    p.add_argument("--instances", required=True)
    p.add_argument("--oracle", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--top-p", type=float, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--max-tokens", type=int, default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("score", help="score candidates under the four context specs")
    p.add_argument("--instances", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--backend", choices=["oracle", "replay"], default="oracle")
    p.add_argument("--oracle")
    p.add_argument("--replay", help="replay store to read from (backend=replay)")
    p.add_argument("--replay-out", help="write per-token scores to this replay store")
    p.add_argument("--out", required=True, help="bundles JSONL")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("calibrate", help="quartile thresholds from validation bundles")
    p.add_argument("--bundles", required=True)
    p.add_argument("--fraction", type=float, default=0.5)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("select", help="select responses via max-pmi or fused-pcmi")
    p.add_argument("--bundles", required=True)
    p.add_argument("--method", choices=["max", "fused"], default="fused")
    p.add_argument("--thresholds", help="low,high pcmi_h thresholds")
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("make-pairs", help="build comparison pairs for the experiments")
    p.add_argument("--bundles", required=True)
    p.add_argument("--experiment", choices=["exp1", "exp2", "exp3", "all"], default="all")
    p.add_argument("--thresholds")
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--delta-h-min", type=float, default=15.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_pairs)

    p = sub.add_parser("aggregate", help="fold an annotation log into result rows")
    p.add_argument("--pairs", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("report", help="results table plus distribution summary")
    p.add_argument("--pairs")
    p.add_argument("--annotations")
    p.add_argument("--bundles")
    p.add_argument("--thresholds")
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export-plot-data", help="CSV/SVG exports for the figures")
    p.add_argument("--bundles", required=True)
    p.add_argument("--thresholds")
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--replay")
    p.add_argument("--series", help="instance_id:candidate_id for the token-level chart")
    p.add_argument("--pairs")
    p.add_argument("--annotations")
    p.add_argument("--positive-part", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_export_plot_data)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--pairs", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--log", required=True, help="append-only annotation log JSONL")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static-dir", default=None, help="built webapp to host under /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputMissing, OSError) as exc:
        logger.error("i/o error: %s", exc)
        return 2
    except (PcmiError, ValueError) as exc:
        logger.error("validation error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
