"""Command-line front end.

Exit codes: 0 on success, 1 on I/O errors, 2 on validation errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

from dualvad import __version__
from dualvad._io import write_atomic
from dualvad.allocation import (
    STRATEGIES,
    AllocationConfig,
    AllocationError,
    plan_from_json,
    plan_to_json,
    plan_video,
)
from dualvad.benchmark import HTTPQAGenerator, build_image_manifest, build_video_manifest, template_qa
from dualvad.evaluation import (
    AGGREGATORS,
    EvaluationError,
    EvaluationReport,
    compare_strategies,
    frame_level_eval,
    load_frame_predictions,
    load_segment_predictions,
    video_level_eval,
)
from dualvad.scoring import DEFAULT_THRESHOLD, ScoredTimeline, attach_scores, load_scores
from dualvad.simulation import CorpusSpec, run_ablation
from dualvad.timeline import AnomalyAnnotation, iter_timelines, parse_annotations

EXIT_OK, EXIT_IO, EXIT_VALIDATION = 0, 1, 2


class UsageError(ValueError):
    pass


# -- argument parsing -------------------------------------------------------


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return value


def _float_list(text: str) -> list[float]:
    values = [float(x) for x in text.split(",") if x.strip()]
    if not values or any(not v > 0 for v in values):
        raise argparse.ArgumentTypeError("temperatures must be positive")
    return values


def _strategy_list(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def _cap(text: str) -> str | int:
    if text == "len":
        return "len"
    return _positive_int(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--segments", type=Path, help="segments JSON-lines file")
    common.add_argument("--scores", type=Path, help="segment scores JSON-lines file")
    common.add_argument("--annotations", type=Path, help="ground-truth annotations file")
    common.add_argument("--out", type=Path, help="output file or directory")
    common.add_argument("--seed", type=_u64, default=None, help="global seed (default 0)")
    common.add_argument("--threshold", type=_probability, default=DEFAULT_THRESHOLD)
    common.add_argument("--workers", type=_positive_int, default=1, help="per-video worker threads")
    common.add_argument("--log-level", default="WARNING")

    alloc = argparse.ArgumentParser(add_help=False)
    alloc.add_argument("--frames", type=_positive_int, help="frame budget N per video")
    alloc.add_argument("--temperature", type=_float_list, default=[1.0], help="softmax temperature(s), comma separated")
    alloc.add_argument("--max-per-segment", type=_cap, default="len", help="'len' or an integer cap")
    alloc.add_argument("--uniform-mode", choices=("global", "per_segment"), default="global")

    parser = argparse.ArgumentParser(prog="dualvad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dualvad {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", parents=[common, alloc], help="write one frame plan per video")
    p.add_argument("--strategy", default="anomaly", choices=("anomaly", *STRATEGIES))
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("build-benchmark", parents=[common], help="write an image or video QA manifest")
    p.add_argument("--kind", required=True, choices=("image", "video"))
    p.add_argument("--samples-per-segment", type=_positive_int, default=1)
    p.add_argument("--aggregator", choices=AGGREGATORS, default="max")
    p.add_argument("--qa-endpoint", help="URL of a remote QA generator (default: offline templates)")
    p.set_defaults(func=cmd_build_benchmark)

    p = sub.add_parser("evaluate", parents=[common], help="frame- and video-level AUC")
    p.add_argument("--predictions", type=Path, help="frame-level predictions JSON-lines file")
    p.add_argument("--segment-predictions", type=Path, help="segment-level predictions JSON-lines file")
    p.add_argument("--plans", type=Path, help="directory of plan files naming the sampled frames")
    p.add_argument("--frame-mode", choices=("sampled", "all"), default="sampled")
    p.add_argument("--aggregator", choices=AGGREGATORS, default="max")
    p.add_argument("--topk", type=_positive_int, default=3)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare-sampling", parents=[common, alloc], help="coverage and AUC per sampling strategy")
    p.add_argument("--strategy", "--strategies", dest="strategies", type=_strategy_list, default=list(STRATEGIES))
    p.add_argument("--predictions", type=Path, help="frame-level predictions (default: segment scores)")
    p.add_argument("--aggregator", choices=AGGREGATORS, default="max")
    p.add_argument("--clamp-budget", action="store_true", help="raise N to M for videos with N < M")
    p.set_defaults(func=cmd_compare_sampling)

    p = sub.add_parser("simulate", parents=[common], help="sampling ablation on a synthetic corpus")
    p.add_argument("--spec", type=Path, help="corpus spec JSON (default: built-in desk-scale spec)")
    p.add_argument("--frames", type=_positive_int, default=16)
    p.add_argument("--temperature", type=_float_list, default=[0.5])
    p.add_argument("--repetitions", type=_positive_int, default=20)
    p.add_argument("--strategy", "--strategies", dest="strategies", type=_strategy_list, default=list(STRATEGIES))
    p.set_defaults(func=cmd_simulate)
    return parser


# -- helpers ----------------------------------------------------------------


def _need(args, name: str) -> Path:
    value = getattr(args, name)
    if value is None:
        raise UsageError(f"--{name.replace('_', '-')} is required for {args.command}")
    return value


def _read(path: Path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _lines(path: Path) -> Iterable[str]:
    with open(path, encoding="utf-8") as fh:
        yield from fh


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _provenance(args, **extra) -> dict:
    return {"tool": "dualvad", "version": __version__, "command": args.command, "seed": _seed(args), **extra}


def _map_videos(func: Callable, items: Sequence, workers: int) -> list:
    """Apply ``func`` per video; results come back in input order."""
    if workers <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _scored_corpus(args) -> list[ScoredTimeline]:
    table = load_scores(_lines(_need(args, "scores")))
    return [attach_scores(tl, table, args.threshold) for tl in iter_timelines(_lines(_need(args, "segments")))]


def _annotations(args) -> dict[str, AnomalyAnnotation]:
    return parse_annotations(_read(_need(args, "annotations")))


def _safe_name(video_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", video_id)


def _alloc_config(args, strategy: str, temperature: float) -> AllocationConfig:
    if args.frames is None:
        raise UsageError("--frames is required")
    if args.max_per_segment == "len":
        policy, cap = "length", None
    else:
        policy, cap = "length_capped", args.max_per_segment
    return AllocationConfig(
        budget=args.frames,
        temperature=temperature,
        cap_policy=policy,
        cap=cap,
        strategy=strategy,
        seed=_seed(args),
        uniform_mode=args.uniform_mode,
    )


def _write_report(path: Path | None, json_text: str, table: str) -> None:
    sys.stdout.write(table)
    if path is not None:
        write_atomic(path, json_text)
        write_atomic(path.with_suffix(".txt"), table)


# -- subcommands ------------------------------------------------------------


def cmd_allocate(args) -> int:
    if len(args.temperature) != 1:
        raise UsageError("allocate takes a single --temperature")
    config = _alloc_config(args, args.strategy, args.temperature[0])
    out = _need(args, "out")
    corpus = _scored_corpus(args)

    def run(scored: ScoredTimeline):
        try:
            return plan_video(scored, config)
        except AllocationError as exc:
            raise AllocationError(f"video {scored.video_id}: {exc}") from None

    plans = _map_videos(run, corpus, args.workers)
    provenance = _provenance(
        args,
        strategy=config.strategy,
        max_per_segment=args.max_per_segment,
        threshold=args.threshold,
        config=config.to_dict(),
    )
    _map_videos(
        lambda plan: write_atomic(out / f"{_safe_name(plan.video_id)}.plan.json", plan_to_json(plan, provenance)),
        plans,
        args.workers,
    )
    print(f"videos={len(plans)} frames={sum(len(p.frames) for p in plans)}")
    return EXIT_OK


def cmd_build_benchmark(args) -> int:
    out = _need(args, "out")
    generator = HTTPQAGenerator(args.qa_endpoint) if args.qa_endpoint else template_qa
    corpus = _scored_corpus(args)
    seed = _seed(args)
    if args.kind == "image":
        manifest = build_image_manifest(corpus, generator, seed)
    else:
        manifest = build_video_manifest(corpus, generator, args.samples_per_segment, seed, args.aggregator)
    manifest.provenance["threshold"] = args.threshold
    manifest.provenance["tool"] = "dualvad"
    write_atomic(out, manifest.to_json())
    print(f"kind={manifest.kind} samples={len(manifest.samples)} scoring_tasks={len(manifest.scoring_tasks)}")
    return EXIT_OK


def _sampled_frames(plans_dir: Path) -> dict[str, list[int]]:
    frames = {}
    paths = sorted(Path(plans_dir).glob("*.plan.json"))
    if not paths:
        raise FileNotFoundError(f"no plan files in {plans_dir}")
    for path in paths:
        plan, _ = plan_from_json(_read(path))
        frames[plan.video_id] = list(plan.frames)
    return frames


def cmd_evaluate(args) -> int:
    if args.predictions is None and args.segment_predictions is None:
        raise UsageError("evaluate needs --predictions and/or --segment-predictions")
    annotations = _annotations(args)
    report = EvaluationReport(provenance=_provenance(args, aggregator=args.aggregator, frame_mode=args.frame_mode))

    if args.predictions is not None:
        preds = load_frame_predictions(_lines(args.predictions))
        if args.frame_mode == "sampled":
            sampled = _sampled_frames(_need(args, "plans"))
        else:
            sampled = {}
            for vid, f in preds:
                sampled.setdefault(vid, []).append(f)
        auc, pos, neg = frame_level_eval(preds, annotations, sampled)
        report.frame_auc = auc
        report.counts["frame"] = {"positives": pos, "negatives": neg}

    if args.segment_predictions is not None:
        seg_preds = load_segment_predictions(_lines(args.segment_predictions))
        missing = [v for v in seg_preds if v not in annotations]
        if missing:
            raise EvaluationError(f"{missing[0]}: no ground-truth annotation")
        labels = {v: int(annotations[v].is_abnormal) for v in seg_preds}
        auc, pos, neg = video_level_eval(seg_preds, labels, args.aggregator, args.topk)
        report.video_auc = auc
        report.counts["video"] = {"positives": pos, "negatives": neg}

    report.provenance["created_at"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    _write_report(args.out, report.to_json(), report.to_table())
    return EXIT_OK


def cmd_compare_sampling(args) -> int:
    annotations = _annotations(args)
    corpus = []
    for scored in _scored_corpus(args):
        if scored.video_id not in annotations:
            raise EvaluationError(f"{scored.video_id}: no ground-truth annotation")
        corpus.append((scored, annotations[scored.video_id].with_frame_count(scored.timeline.frame_count)))
    preds = load_frame_predictions(_lines(args.predictions)) if args.predictions is not None else None
    configs = [_alloc_config(args, "anomaly_focused", t) for t in args.temperature]
    report = compare_strategies(corpus, args.strategies, configs, preds, args.aggregator, args.clamp_budget)
    report.provenance = _provenance(
        args, strategies=args.strategies, temperatures=args.temperature, budget=args.frames, aggregator=args.aggregator
    )
    _write_report(args.out, report.to_json(), report.to_table())
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = CorpusSpec.from_dict(json.loads(_read(args.spec))) if args.spec else CorpusSpec()
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    report = run_ablation(spec, args.strategies, args.frames, args.temperature, args.repetitions)
    report.provenance["tool"] = "dualvad"
    _write_report(args.out, report.to_json(), report.to_table())
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
