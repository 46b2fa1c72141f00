"""Frame- and video-level ROC-AUC, prediction files and comparison reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from dualvad import kernels
from dualvad.allocation import plan_video
from dualvad._io import FormatError, dumps_doc, dumps_line, iter_jsonl, require
from dualvad.timeline import AnomalyAnnotation, frame_label

AGGREGATORS = ("max", "mean", "topk")


class EvaluationError(ValueError):
    pass


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """ROC-AUC as the Mann-Whitney statistic with midranks for ties.

    Raises :class:`EvaluationError` when only one class is present.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.shape != y.shape or s.ndim != 1:
        raise EvaluationError("scores and labels must be 1-D and aligned")
    if not np.all(np.isfinite(s)):
        raise EvaluationError("scores must be finite")
    if np.any((y != 0) & (y != 1)):
        raise EvaluationError("labels must be 0 or 1")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise EvaluationError(f"AUC undefined: need both classes (positives={n_pos}, negatives={len(y) - n_pos})")
    return float(kernels.midrank_auc(s, y))


def aggregate(scores: Sequence[float], method: str = "max", k: int = 3) -> float:
    """Collapse segment scores of one video into a single video score."""
    if len(scores) == 0:
        raise EvaluationError("cannot aggregate an empty score set")
    if method == "max":
        return float(max(scores))
    if method == "mean":
        return math.fsum(scores) / len(scores)
    if method == "topk":
        if k < 1:
            raise EvaluationError("top-k needs k >= 1")
        top = sorted(scores, reverse=True)[:k]
        return math.fsum(top) / len(top)
    raise EvaluationError(f"unknown aggregator {method!r}; expected one of {', '.join(AGGREGATORS)}")


# -- prediction files -------------------------------------------------------


def _check_score(score: float, where: str, lineno: int | None = None) -> float:
    score = float(score)
    if not math.isfinite(score) or not 0.0 <= score <= 1.0:
        raise FormatError(f"score out of range for {where}: {score}", lineno)
    return score


def load_frame_predictions(lines: Iterable[str] | str) -> dict[tuple[str, int], float]:
    """Frame-level predictions ``{"video_id", "frame", "score"}`` keyed by ``(video_id, frame)``."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    out: dict[tuple[str, int], float] = {}
    for lineno, obj in iter_jsonl(lines):
        key = (require(obj, "video_id", str, lineno), require(obj, "frame", int, lineno))
        score = _check_score(require(obj, "score", (int, float), lineno), f"{key}", lineno)
        if key in out:
            raise FormatError(f"duplicate prediction for {key}", lineno)
        out[key] = score
    return out


def load_segment_predictions(lines: Iterable[str] | str) -> dict[str, dict[int, float]]:
    """Segment-level predictions ``{"video_id", "segment", "score"}`` grouped by video."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    out: dict[str, dict[int, float]] = {}
    for lineno, obj in iter_jsonl(lines):
        vid = require(obj, "video_id", str, lineno)
        seg = require(obj, "segment", int, lineno)
        score = _check_score(require(obj, "score", (int, float), lineno), f"({vid}, {seg})", lineno)
        per_video = out.setdefault(vid, {})
        if seg in per_video:
            raise FormatError(f"duplicate prediction for ({vid}, {seg})", lineno)
        per_video[seg] = score
    return out


def serialize_frame_predictions(preds: Mapping[tuple[str, int], float]) -> str:
    return "".join(dumps_line({"video_id": v, "frame": f, "score": s}) + "\n" for (v, f), s in preds.items())


def serialize_segment_predictions(preds: Mapping[str, Mapping[int, float]]) -> str:
    return "".join(
        dumps_line({"video_id": v, "segment": seg, "score": s}) + "\n"
        for v, per in preds.items()
        for seg, s in per.items()
    )


# -- protocols --------------------------------------------------------------


def frame_level_eval(
    predictions: Mapping[tuple[str, int], float],
    annotations: Mapping[str, AnomalyAnnotation],
    sampled_frames: Mapping[str, Iterable[int]],
) -> tuple[float, int, int]:
    """AUC pooled over the sampled frames of every video.

    Returns ``(auc, positives, negatives)``.
    """
    scores: list[float] = []
    labels: list[int] = []
    for vid, frames in sampled_frames.items():
        if vid not in annotations:
            raise EvaluationError(f"{vid}: no ground-truth annotation")
        ann = annotations[vid]
        for f in frames:
            key = (vid, int(f))
            if key not in predictions:
                raise EvaluationError(f"missing prediction for sampled frame {f} of {vid}")
            scores.append(predictions[key])
            labels.append(frame_label(ann, int(f)))
    pos = sum(labels)
    return roc_auc(scores, labels), pos, len(labels) - pos


def video_scores(
    segment_predictions: Mapping[str, Mapping[int, float] | Sequence[float]], aggregator: str = "max", k: int = 3
) -> dict[str, float]:
    out = {}
    for vid, per in segment_predictions.items():
        values = list(per.values()) if isinstance(per, Mapping) else list(per)
        if not values:
            raise EvaluationError(f"{vid}: no segment predictions")
        out[vid] = aggregate(values, aggregator, k)
    return out


def video_level_eval(
    segment_predictions: Mapping[str, Mapping[int, float] | Sequence[float]],
    video_labels: Mapping[str, int],
    aggregator: str = "max",
    k: int = 3,
) -> tuple[float, int, int]:
    """AUC over videos scored by aggregating their segment predictions.

    Returns ``(auc, positives, negatives)``.
    """
    per_video = video_scores(segment_predictions, aggregator, k)
    scores, labels = [], []
    for vid, label in video_labels.items():
        if vid not in per_video:
            raise EvaluationError(f"{vid}: no segment predictions")
        scores.append(per_video[vid])
        labels.append(int(label))
    pos = sum(labels)
    return roc_auc(scores, labels), pos, len(labels) - pos


# -- reports ----------------------------------------------------------------


@dataclass
class ReportRow:
    label: str
    frame_auc: float | None = None
    video_auc: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label, "frame_auc": self.frame_auc, "video_auc": self.video_auc, "extra": self.extra}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ReportRow":
        return cls(d["label"], d.get("frame_auc"), d.get("video_auc"), dict(d.get("extra", {})))


@dataclass
class EvaluationReport:
    frame_auc: float | None = None
    video_auc: float | None = None
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    rows: list[ReportRow] = field(default_factory=list)
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("frame_auc", "video_auc"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise EvaluationError(f"{name} outside [0, 1]: {v}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "frame_auc": self.frame_auc,
            "video_auc": self.video_auc,
            "counts": self.counts,
            "rows": [r.to_dict() for r in self.rows],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EvaluationReport":
        return cls(
            frame_auc=d.get("frame_auc"),
            video_auc=d.get("video_auc"),
            counts={k: dict(v) for k, v in d.get("counts", {}).items()},
            rows=[ReportRow.from_dict(r) for r in d.get("rows", [])],
            provenance=dict(d.get("provenance", {})),
        )

    def to_json(self) -> str:
        return dumps_doc(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        return cls.from_dict(json.loads(text))

    def to_table(self) -> str:
        lines = []
        if self.frame_auc is not None or self.video_auc is not None:
            lines.append(f"frame-level AUC: {_fmt(self.frame_auc)}")
            lines.append(f"video-level AUC: {_fmt(self.video_auc)}")
            for level, c in sorted(self.counts.items()):
                lines.append(f"{level}: positives={c.get('positives', 0)} negatives={c.get('negatives', 0)}")
        if self.rows:
            extra_keys = sorted({k for r in self.rows for k in r.extra})
            header = ["configuration", "frame AUC", "video AUC", *extra_keys]
            body = [
                [r.label, _fmt(r.frame_auc), _fmt(r.video_auc), *(_fmt(r.extra.get(k)) for k in extra_keys)]
                for r in self.rows
            ]
            if lines:
                lines.append("")
            lines.extend(format_table(header, body))
        return "\n".join(lines) + "\n"


def _fmt(v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def format_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    """Left-align the first column, right-align the rest."""
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]

    def line(cells):
        parts = [str(cells[0]).ljust(widths[0])]
        parts += [str(c).rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join(parts).rstrip()

    return [line(header), "  ".join("-" * w for w in widths), *(line(r) for r in rows)]


# -- sampling comparison ----------------------------------------------------


@dataclass(frozen=True)
class CoverageMetric:
    """Share of sampled frames that fall inside ground-truth abnormal intervals."""

    sampled_total: int
    sampled_abnormal: int

    @property
    def coverage(self) -> float | None:
        if self.sampled_total == 0:
            return None
        return self.sampled_abnormal / self.sampled_total

    def __add__(self, other: "CoverageMetric") -> "CoverageMetric":
        return CoverageMetric(self.sampled_total + other.sampled_total, self.sampled_abnormal + other.sampled_abnormal)


def coverage(frames: Sequence[int], annotation: AnomalyAnnotation) -> CoverageMetric:
    frames = sorted(int(f) for f in frames)
    hits = kernels.count_in_intervals(frames, list(annotation.intervals)) if annotation.intervals else 0
    return CoverageMetric(len(frames), int(hits))


@dataclass
class StrategyResult:
    """Pooled outcome of running one sampling configuration over a corpus."""

    coverage: CoverageMetric
    frame_auc: float | None
    video_auc: float | None
    plans: dict[str, Any]


def run_strategy(
    corpus,
    config,
    frame_predictions: Mapping[tuple[str, int], float] | None = None,
    aggregator: str = "max",
    k: int = 3,
    clamp_budget: bool = False,
) -> StrategyResult:
    """Sample every video of ``corpus`` under ``config`` and score the selection.

    ``corpus`` is a sequence of ``(ScoredTimeline, AnomalyAnnotation)``. Without
    explicit frame predictions, a frame inherits the score of its segment.
    With ``clamp_budget`` the budget of a video is raised to its segment count
    instead of failing.
    """
    cov = CoverageMetric(0, 0)
    f_scores: list[float] = []
    f_labels: list[int] = []
    v_scores: list[float] = []
    v_labels: list[int] = []
    plans = {}
    for scored, ann in corpus:
        tl = scored.timeline
        cfg = config
        if clamp_budget and cfg.budget < len(tl):
            cfg = replace(cfg, budget=len(tl))
        plan = plan_video(scored, cfg)
        plans[tl.video_id] = plan
        cov = cov + coverage(plan.frames, ann)
        seg_scores = scored.values()
        preds = []
        for f in plan.frames:
            if frame_predictions is not None:
                key = (tl.video_id, f)
                if key not in frame_predictions:
                    raise EvaluationError(f"missing prediction for sampled frame {f} of {tl.video_id}")
                p = frame_predictions[key]
            else:
                p = seg_scores[tl.segment_of(f)]
            preds.append(p)
            f_scores.append(p)
            f_labels.append(frame_label(ann, f))
        if preds:
            v_scores.append(aggregate(preds, aggregator, k))
            v_labels.append(int(ann.is_abnormal))

    return StrategyResult(cov, _auc_or_none(f_scores, f_labels), _auc_or_none(v_scores, v_labels), plans)


def _auc_or_none(scores, labels) -> float | None:
    if 0 < sum(labels) < len(labels):
        return roc_auc(scores, labels)
    return None


def compare_strategies(
    corpus,
    strategies: Sequence[str],
    configs: Sequence[Any],
    frame_predictions: Mapping[tuple[str, int], float] | None = None,
    aggregator: str = "max",
    clamp_budget: bool = False,
) -> EvaluationReport:
    """One report row per (strategy, config) with coverage and both AUCs.

    ``configs`` holds :class:`~dualvad.allocation.AllocationConfig` objects;
    each one's strategy is overridden by the strategies being compared.
    """
    corpus = list(corpus)
    if not corpus:
        raise EvaluationError("no videos")
    if not strategies:
        raise EvaluationError("no strategies")
    rows = []
    for cfg in configs:
        for strategy in strategies:
            c = replace(cfg, strategy=strategy)
            res = run_strategy(corpus, c, frame_predictions, aggregator, clamp_budget=clamp_budget)
            rows.append(
                ReportRow(
                    label=f"{c.strategy} N={c.budget} tau={c.temperature:g}",
                    frame_auc=res.frame_auc,
                    video_auc=res.video_auc,
                    extra={
                        "coverage": res.coverage.coverage,
                        "sampled_total": res.coverage.sampled_total,
                        "sampled_abnormal": res.coverage.sampled_abnormal,
                    },
                )
            )
    return EvaluationReport(rows=rows)
