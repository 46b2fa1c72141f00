"""Shot-segment timelines and ground-truth anomaly annotations.

Frames are 0-based indices and every range is inclusive on both ends. A
timeline must tile its video exactly: segment 0 starts at frame 0, each
segment starts right after the previous one ends, and the last one ends at
``frame_count - 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from dualvad._io import FormatError, dumps_line, iter_jsonl, require


class TimelineError(ValueError):
    """A timeline or annotation violates its structural invariants."""


@dataclass(frozen=True)
class VideoMeta:
    video_id: str
    frame_count: int
    fps: float | None = None

    def __post_init__(self):
        if not self.video_id:
            raise TimelineError("video_id must be non-empty")
        if self.frame_count < 1:
            raise TimelineError(f"{self.video_id}: frame_count must be >= 1, got {self.frame_count}")
        if self.fps is not None and not self.fps > 0:
            raise TimelineError(f"{self.video_id}: fps must be positive")


@dataclass(frozen=True)
class Segment:
    index: int
    start_frame: int
    end_frame: int

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1

    def contains(self, frame: int) -> bool:
        return self.start_frame <= frame <= self.end_frame


@dataclass(frozen=True)
class SegmentTimeline:
    video: VideoMeta
    segments: tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        _check_tiling(self.video, self.segments)

    @property
    def video_id(self) -> str:
        return self.video.video_id

    @property
    def frame_count(self) -> int:
        return self.video.frame_count

    def __len__(self) -> int:
        return len(self.segments)

    def lengths(self) -> list[int]:
        return [s.length for s in self.segments]

    def segment_of(self, frame: int) -> int:
        """Index of the segment containing ``frame`` (binary search)."""
        if not 0 <= frame < self.frame_count:
            raise TimelineError(f"{self.video_id}: frame {frame} outside [0, {self.frame_count - 1}]")
        lo, hi = 0, len(self.segments) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.segments[mid].start_frame <= frame:
                lo = mid
            else:
                hi = mid - 1
        return lo


def _check_tiling(video: VideoMeta, segments: Sequence[Segment]) -> None:
    vid = video.video_id
    if not segments:
        raise TimelineError(f"{vid}: timeline has no segments")
    expected_start = 0
    for pos, seg in enumerate(segments):
        if seg.index != pos:
            raise TimelineError(f"{vid}: segment at position {pos} has index {seg.index}")
        if seg.start_frame > seg.end_frame:
            raise TimelineError(f"{vid}: segment {seg.index} ends before it starts")
        if seg.start_frame > expected_start:
            raise TimelineError(f"{vid}: gap between segments at frame {expected_start}")
        if seg.start_frame < expected_start:
            raise TimelineError(f"{vid}: overlap between segments at frame {seg.start_frame}")
        if seg.end_frame >= video.frame_count:
            raise TimelineError(
                f"{vid}: segment {seg.index} ends at {seg.end_frame}, beyond frame_count {video.frame_count}"
            )
        expected_start = seg.end_frame + 1
    if expected_start != video.frame_count:
        raise TimelineError(f"{vid}: segments end at frame {expected_start - 1}, video ends at {video.frame_count - 1}")


def segment_from_fixed_window(video: VideoMeta, window: int) -> SegmentTimeline:
    """Cut ``video`` into consecutive windows of ``window`` frames; the last may be shorter."""
    if window < 1:
        raise TimelineError("window must be >= 1")
    segments = []
    for i, start in enumerate(range(0, video.frame_count, window)):
        segments.append(Segment(i, start, min(start + window, video.frame_count) - 1))
    return SegmentTimeline(video, tuple(segments))


# -- segments file ----------------------------------------------------------


def _build_timeline(video_id, frame_count, fps, rows, first_line) -> SegmentTimeline:
    rows = sorted(rows, key=lambda r: r[1])
    seen = set()
    for index, _, _, lineno in rows:
        if index in seen:
            raise FormatError(f"{video_id}: duplicate segment index {index}", lineno)
        seen.add(index)
    try:
        video = VideoMeta(video_id, frame_count, fps)
        segs = [Segment(index, start, end) for index, start, end, _ in rows]
        for pos, seg in enumerate(segs):
            if seg.index != pos:
                raise TimelineError(
                    f"{video_id}: segment indices must be 0..M-1 in start order (found {seg.index} at position {pos})"
                )
        return SegmentTimeline(video, tuple(segs))
    except TimelineError as exc:
        raise FormatError(str(exc), first_line) from None


def iter_timelines(lines: Iterable[str]) -> Iterator[SegmentTimeline]:
    """Stream timelines from a segments JSON-lines file.

    Rows of one video must be contiguous; a video_id that reappears after
    another video's rows is reported as a duplicate.
    """
    done: set[str] = set()
    current = None
    rows: list[tuple[int, int, int, int]] = []
    frame_count = fps = first_line = None

    for lineno, obj in iter_jsonl(lines):
        vid = require(obj, "video_id", str, lineno)
        fc = require(obj, "frame_count", int, lineno)
        index = require(obj, "segment", int, lineno)
        start = require(obj, "start", int, lineno)
        end = require(obj, "end", int, lineno)
        row_fps = obj.get("fps")
        if row_fps is not None and (isinstance(row_fps, bool) or not isinstance(row_fps, (int, float))):
            raise FormatError("field 'fps' has wrong type", lineno)
        if not vid:
            raise FormatError("empty video_id", lineno)
        if start < 0 or end < start:
            raise FormatError(f"{vid}: invalid segment range ({start}, {end})", lineno)
        if end >= fc:
            raise FormatError(f"{vid}: segment {index} ends at {end}, beyond frame_count {fc}", lineno)

        if vid != current:
            if current is not None:
                yield _build_timeline(current, frame_count, fps, rows, first_line)
            if vid in done:
                raise FormatError(f"duplicate video_id {vid!r}", lineno)
            done.add(vid)
            current, rows, frame_count, fps, first_line = vid, [], fc, row_fps, lineno
        elif fc != frame_count:
            raise FormatError(f"{vid}: inconsistent frame_count ({fc} vs {frame_count})", lineno)
        rows.append((index, start, end, lineno))

    if current is not None:
        yield _build_timeline(current, frame_count, fps, rows, first_line)


def parse_timeline(lines: Iterable[str] | str) -> list[SegmentTimeline]:
    if isinstance(lines, str):
        lines = lines.splitlines()
    return list(iter_timelines(lines))


def serialize_timelines(timelines: Iterable[SegmentTimeline]) -> str:
    out = []
    for tl in timelines:
        for seg in tl.segments:
            row = {
                "video_id": tl.video_id,
                "frame_count": tl.frame_count,
                "segment": seg.index,
                "start": seg.start_frame,
                "end": seg.end_frame,
            }
            if tl.video.fps is not None:
                row["fps"] = tl.video.fps
            out.append(dumps_line(row) + "\n")
    return "".join(out)


# -- annotations ------------------------------------------------------------


def _normalize(intervals: Iterable[Sequence[int]]) -> tuple[tuple[int, int], ...]:
    merged: list[list[int]] = []
    for start, end in sorted((int(a), int(b)) for a, b in intervals):
        if merged and start <= merged[-1][1] + 1:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return tuple((a, b) for a, b in merged)


@dataclass(frozen=True)
class AnomalyAnnotation:
    """Abnormal frame ranges of one video; an empty tuple means fully normal.

    ``frame_count`` is optional and only used for range checks.
    """

    video_id: str
    intervals: tuple[tuple[int, int], ...] = field(default_factory=tuple)
    frame_count: int | None = None

    def __post_init__(self):
        for a, b in self.intervals:
            if a < 0 or b < a:
                raise TimelineError(f"{self.video_id}: invalid interval ({a}, {b})")
            if self.frame_count is not None and b >= self.frame_count:
                raise TimelineError(f"{self.video_id}: interval ({a}, {b}) beyond frame_count {self.frame_count}")
        object.__setattr__(self, "intervals", _normalize(self.intervals))

    @property
    def is_abnormal(self) -> bool:
        return bool(self.intervals)

    def with_frame_count(self, frame_count: int) -> "AnomalyAnnotation":
        return AnomalyAnnotation(self.video_id, self.intervals, frame_count)


def frame_label(annotation: AnomalyAnnotation, frame: int) -> int:
    """1 if ``frame`` lies inside an abnormal interval, else 0."""
    if frame < 0 or (annotation.frame_count is not None and frame >= annotation.frame_count):
        raise TimelineError(f"{annotation.video_id}: frame {frame} out of range")
    for a, b in annotation.intervals:
        if a <= frame <= b:
            return 1
        if a > frame:
            break
    return 0


def parse_annotations(text: str) -> dict[str, AnomalyAnnotation]:
    """Parse an annotations file: a JSON array, a single object, or JSON lines."""
    stripped = text.strip()
    if not stripped:
        return {}
    records: list[tuple[int | None, dict]]
    try:
        doc = json.loads(stripped)
    except json.JSONDecodeError:
        records = list(iter_jsonl(text.splitlines()))
    else:
        if isinstance(doc, dict):
            records = [(None, doc)]
        elif isinstance(doc, list):
            records = [(None, d) for d in doc]
        else:
            raise FormatError("annotations must be an object or a list of objects")

    out: dict[str, AnomalyAnnotation] = {}
    for lineno, obj in records:
        if not isinstance(obj, dict):
            raise FormatError("annotation entries must be objects", lineno)
        vid = require(obj, "video_id", str, lineno)
        spans = require(obj, "abnormal", list, lineno)
        if vid in out:
            raise FormatError(f"duplicate video_id {vid!r}", lineno)
        pairs = []
        for span in spans:
            if (
                not isinstance(span, list)
                or len(span) != 2
                or not all(isinstance(x, int) and not isinstance(x, bool) for x in span)
            ):
                raise FormatError(f"{vid}: intervals must be [start, end] integer pairs", lineno)
            pairs.append(tuple(span))
        fc = obj.get("frame_count")
        try:
            out[vid] = AnomalyAnnotation(vid, tuple(pairs), fc)
        except TimelineError as exc:
            raise FormatError(str(exc), lineno) from None
    return out


def serialize_annotations(annotations: Iterable[AnomalyAnnotation]) -> str:
    docs = []
    for ann in annotations:
        d: dict = {"video_id": ann.video_id, "abnormal": [[a, b] for a, b in ann.intervals]}
        if ann.frame_count is not None:
            d["frame_count"] = ann.frame_count
        docs.append(d)
    return json.dumps(docs, indent=2) + "\n"
