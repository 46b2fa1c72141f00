"""Per-segment anomaly scores and abnormal/normal labels."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence, Union

from dualvad._io import FormatError, dumps_line, iter_jsonl, require
from dualvad.timeline import SegmentTimeline

DEFAULT_THRESHOLD = 0.5


class ScoreError(ValueError):
    pass


@dataclass(frozen=True)
class SegmentScore:
    segment_index: int
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ScoreError(f"segment {self.segment_index}: score is not finite")
        if not 0.0 <= self.score <= 1.0:
            raise ScoreError(f"segment {self.segment_index}: score out of range: {self.score}")


@dataclass(frozen=True)
class ScoredTimeline:
    timeline: SegmentTimeline
    scores: tuple[SegmentScore, ...]
    labels: tuple[int, ...]
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        m = len(self.timeline)
        if len(self.scores) != m or len(self.labels) != m:
            raise ScoreError(f"{self.timeline.video_id}: expected {m} scores and labels")
        for i, (sc, lab) in enumerate(zip(self.scores, self.labels)):
            if sc.segment_index != i:
                raise ScoreError(f"{self.timeline.video_id}: score at position {i} is for segment {sc.segment_index}")
            if lab != int(sc.score >= self.threshold):
                raise ScoreError(f"{self.timeline.video_id}: label of segment {i} disagrees with threshold")

    @property
    def video_id(self) -> str:
        return self.timeline.video_id

    def values(self) -> list[float]:
        return [s.score for s in self.scores]


# A score source is one of:
#   * a mapping keyed by (video_id, segment_index), e.g. from load_scores
#   * a callable (timeline) -> sequence of floats, e.g. a synthetic scorer
#   * a single float applied to every segment
ScorerSource = Union[Mapping[tuple[str, int], float], Callable[[SegmentTimeline], Sequence[float]], float]


def constant_scorer(value: float) -> Callable[[SegmentTimeline], list[float]]:
    return lambda timeline: [value] * len(timeline)


def _resolve(timeline: SegmentTimeline, source: ScorerSource) -> list[float]:
    vid = timeline.video_id
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        values = [float(source)] * len(timeline)
    elif isinstance(source, Mapping):
        values = []
        for seg in timeline.segments:
            key = (vid, seg.index)
            if key not in source:
                raise ScoreError(f"{vid}: missing score for segment {seg.index}")
            values.append(float(source[key]))
    elif callable(source):
        values = [float(v) for v in source(timeline)]
        if len(values) != len(timeline):
            raise ScoreError(f"{vid}: scorer returned {len(values)} scores for {len(timeline)} segments")
    else:
        raise TypeError(f"unsupported score source: {type(source).__name__}")
    for i, v in enumerate(values):
        if math.isnan(v):
            raise ScoreError(f"{vid}: NaN score for segment {i}")
        if not 0.0 <= v <= 1.0:
            raise ScoreError(f"{vid}: score out of range for segment {i}: {v}")
    return values


def attach_scores(
    timeline: SegmentTimeline, source: ScorerSource, threshold: float = DEFAULT_THRESHOLD
) -> ScoredTimeline:
    """Score every segment and label it abnormal when ``score >= threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ScoreError(f"threshold must lie in [0, 1], got {threshold}")
    values = _resolve(timeline, source)
    return ScoredTimeline(
        timeline=timeline,
        scores=tuple(SegmentScore(i, v) for i, v in enumerate(values)),
        labels=tuple(int(v >= threshold) for v in values),
        threshold=threshold,
    )


def load_scores(lines: Iterable[str] | str) -> dict[tuple[str, int], float]:
    """Read a scores JSON-lines file into a table keyed by ``(video_id, segment)``."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    table: dict[tuple[str, int], float] = {}
    for lineno, obj in iter_jsonl(lines):
        vid = require(obj, "video_id", str, lineno)
        seg = require(obj, "segment", int, lineno)
        score = float(require(obj, "score", (int, float), lineno))
        if not math.isfinite(score):
            raise FormatError(f"non-finite score for ({vid}, {seg})", lineno)
        if not 0.0 <= score <= 1.0:
            raise FormatError(f"score out of range for ({vid}, {seg}): {score}", lineno)
        key = (vid, seg)
        if key in table:
            raise FormatError(f"duplicate score for ({vid}, {seg})", lineno)
        table[key] = score
    return table


def serialize_scores(table: Mapping[tuple[str, int], float]) -> str:
    return "".join(
        dumps_line({"video_id": vid, "segment": seg, "score": score}) + "\n" for (vid, seg), score in table.items()
    )
