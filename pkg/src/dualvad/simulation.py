"""Synthetic corpora with planted anomalies, for checking sampling strategies.

Each abnormal video carries one contiguous abnormal interval. A noisy scorer
stands in for a learned anomaly model: a segment's score is the fraction of
its frames inside the interval plus clamped Gaussian noise. Coverage (the
share of sampled frames that land inside an abnormal interval) measures how
well a strategy finds the anomalies.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from dualvad import __version__
from dualvad._io import dumps_doc
from dualvad._seeding import check_seed, derive_seed, rng_for
from dualvad.allocation import AllocationConfig, normalize_strategy
from dualvad.evaluation import CoverageMetric, format_table, run_strategy
from dualvad.scoring import SegmentScore, attach_scores
from dualvad.timeline import AnomalyAnnotation, Segment, SegmentTimeline, VideoMeta

__all__ = [
    "CorpusSpec",
    "CoverageMetric",
    "AblationReport",
    "generate_corpus",
    "noisy_scorer",
    "score_corpus",
    "run_ablation",
]


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusSpec:
    video_count: int = 100
    frame_count_range: tuple[int, int] = (300, 900)
    segment_length_range: tuple[int, int] = (30, 90)
    abnormal_video_fraction: float = 0.5
    abnormal_interval_fraction: float = 0.1
    scorer_noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "frame_count_range", tuple(self.frame_count_range))
        object.__setattr__(self, "segment_length_range", tuple(self.segment_length_range))
        if self.video_count < 0:
            raise SimulationError("video_count must be >= 0")
        for name in ("frame_count_range", "segment_length_range"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise SimulationError(f"{name} must satisfy 1 <= min <= max, got ({lo}, {hi})")
        if self.segment_length_range[0] > self.frame_count_range[0]:
            raise SimulationError("minimum segment length exceeds the shortest video")
        if not 0.0 <= self.abnormal_video_fraction <= 1.0:
            raise SimulationError("abnormal_video_fraction must lie in [0, 1]")
        if not 0.0 < self.abnormal_interval_fraction <= 1.0:
            raise SimulationError("abnormal_interval_fraction must lie in (0, 1]")
        if not self.scorer_noise_sigma >= 0:
            raise SimulationError("scorer_noise_sigma must be >= 0")
        check_seed(self.seed)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["frame_count_range"] = list(self.frame_count_range)
        d["segment_length_range"] = list(self.segment_length_range)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CorpusSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise SimulationError(f"unknown spec fields: {', '.join(sorted(unknown))}")
        return cls(**d)


Corpus = list[tuple[SegmentTimeline, AnomalyAnnotation]]


def _tile(frame_count: int, lo: int, hi: int, rng: np.random.Generator) -> list[Segment]:
    segments = []
    start = 0
    while start < frame_count:
        length = int(rng.integers(lo, hi + 1))
        end = min(start + length, frame_count) - 1
        segments.append(Segment(len(segments), start, end))
        start = end + 1
    return segments


def generate_corpus(spec: CorpusSpec) -> Corpus:
    """Deterministic corpus of tiled videos and their ground truth."""
    n_abnormal = int(math.floor(spec.abnormal_video_fraction * spec.video_count + 0.5))
    order = rng_for(spec.seed, "abnormal-videos").permutation(spec.video_count)
    abnormal = set(int(i) for i in order[:n_abnormal])

    corpus = []
    for i in range(spec.video_count):
        rng = rng_for(spec.seed, "video", i)
        vid = f"sim{i:05d}"
        t = int(rng.integers(spec.frame_count_range[0], spec.frame_count_range[1] + 1))
        timeline = SegmentTimeline(VideoMeta(vid, t), tuple(_tile(t, *spec.segment_length_range, rng)))
        if i in abnormal:
            span = max(1, min(t, int(math.floor(spec.abnormal_interval_fraction * t + 0.5))))
            start = int(rng.integers(0, t - span + 1))
            ann = AnomalyAnnotation(vid, ((start, start + span - 1),), t)
        else:
            ann = AnomalyAnnotation(vid, (), t)
        corpus.append((timeline, ann))
    return corpus


def overlap_fraction(segment: Segment, annotation: AnomalyAnnotation) -> float:
    inside = 0
    for a, b in annotation.intervals:
        lo, hi = max(a, segment.start_frame), min(b, segment.end_frame)
        if lo <= hi:
            inside += hi - lo + 1
    return inside / segment.length


def noisy_scorer(
    timeline: SegmentTimeline, annotation: AnomalyAnnotation, sigma: float, seed: int
) -> list[SegmentScore]:
    if sigma < 0:
        raise SimulationError("sigma must be >= 0")
    m = len(timeline)
    if sigma > 0:
        noise = rng_for(seed, "scorer", timeline.video_id).normal(0.0, sigma, m)
    else:
        noise = np.zeros(m)
    return [
        SegmentScore(seg.index, float(min(1.0, max(0.0, overlap_fraction(seg, annotation) + noise[seg.index]))))
        for seg in timeline.segments
    ]


def score_corpus(corpus: Corpus, sigma: float, seed: int, threshold: float = 0.5):
    """Attach noisy scores to every video; returns ``[(ScoredTimeline, annotation)]``."""
    out = []
    for tl, ann in corpus:
        values = [s.score for s in noisy_scorer(tl, ann, sigma, seed)]
        out.append((attach_scores(tl, lambda _tl, v=values: v, threshold), ann))
    return out


# -- ablation ---------------------------------------------------------------


def _summary(values: Sequence[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return float(arr.mean()), std


@dataclass
class AblationReport:
    rows: list[dict[str, Any]] = field(default_factory=list)
    provenance: dict[str, Any] = field(default_factory=dict)

    def row(self, strategy: str, temperature: float | None = None) -> dict[str, Any]:
        for r in self.rows:
            if r["strategy"] == strategy and (temperature is None or r["temperature"] == temperature):
                return r
        raise KeyError(strategy)

    def to_dict(self) -> dict[str, Any]:
        return {"rows": self.rows, "provenance": self.provenance}

    def to_json(self) -> str:
        return dumps_doc(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "AblationReport":
        d = json.loads(text)
        return cls(list(d["rows"]), dict(d.get("provenance", {})))

    def to_table(self) -> str:
        def f(v):
            return "-" if v is None else f"{v:.4f}"

        header = ["strategy", "mean coverage", "stddev", "frame AUC"]
        body = []
        for r in self.rows:
            name = r["strategy"] if r["temperature"] is None else f"{r['strategy']} (tau={r['temperature']:g})"
            body.append([name, f(r["coverage_mean"]), f(r["coverage_std"]), f(r["frame_auc_mean"])])
        return "\n".join(format_table(header, body)) + "\n"


def repetition_seed(seed: int, rep: int) -> int:
    return int(derive_seed(seed, "repetition", rep).generate_state(1, np.uint64)[0])


def run_ablation(
    spec: CorpusSpec,
    strategies: Sequence[str],
    budget: int,
    temperature: float | Sequence[float] = 1.0,
    repetitions: int = 1,
    cap_policy: str = "length",
    cap: int | None = None,
) -> AblationReport:
    """Mean and spread of coverage and frame AUC per strategy over fresh corpora.

    Every repetition draws a new corpus and new scorer noise from a seed
    derived from ``(spec.seed, repetition)``. Videos with more segments than
    ``budget`` are sampled with one frame per segment instead.
    Baselines ignore temperature and get one row; the anomaly-focused
    strategy gets one row per temperature.
    """
    if repetitions < 1:
        raise SimulationError("repetitions must be >= 1")
    strategies = [normalize_strategy(s) for s in strategies]
    if not strategies:
        raise SimulationError("no strategies")
    temps = [float(temperature)] if isinstance(temperature, (int, float)) else [float(t) for t in temperature]
    if not temps:
        raise SimulationError("no temperatures")

    configs: list[tuple[str, float | None]] = []
    for s in strategies:
        if s == "anomaly_focused":
            configs.extend((s, t) for t in temps)
        else:
            configs.append((s, None))

    cov: dict[tuple, list[float]] = {c: [] for c in configs}
    auc: dict[tuple, list[float]] = {c: [] for c in configs}
    for rep in range(repetitions):
        rep_seed = repetition_seed(spec.seed, rep)
        corpus = generate_corpus(CorpusSpec(**{**spec.to_dict(), "seed": rep_seed}))
        scored = score_corpus(corpus, spec.scorer_noise_sigma, rep_seed)
        for strategy, tau in configs:
            cfg = AllocationConfig(
                budget=budget,
                temperature=tau if tau is not None else temps[0],
                cap_policy=cap_policy,
                cap=cap,
                strategy=strategy,
                seed=rep_seed,
            )
            res = run_strategy(scored, cfg, clamp_budget=True)
            c = res.coverage.coverage
            cov[(strategy, tau)].append(0.0 if c is None else c)
            if res.frame_auc is not None:
                auc[(strategy, tau)].append(res.frame_auc)

    rows = []
    for strategy, tau in configs:
        cm, cs = _summary(cov[(strategy, tau)])
        am, asd = _summary(auc[(strategy, tau)])
        rows.append(
            {
                "strategy": strategy,
                "temperature": tau,
                "coverage_mean": cm,
                "coverage_std": cs,
                "frame_auc_mean": am,
                "frame_auc_std": asd,
                "repetitions": repetitions,
                "coverage_per_repetition": cov[(strategy, tau)],
            }
        )
    provenance = {
        "spec": spec.to_dict(),
        "budget": budget,
        "temperatures": temps,
        "repetitions": repetitions,
        "cap_policy": cap_policy,
        "cap": cap,
        "versions": {"dualvad": __version__},
    }
    return AblationReport(rows, provenance)
