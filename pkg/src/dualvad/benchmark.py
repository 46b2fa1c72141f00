"""Image-level and video-level QA benchmark manifests.

Question text comes from a pluggable generator. A generator is any callable
taking a request dict::

    {"media": {...}, "question_type": "anomaly_detection",
     "context": {"label": 1, "score": 0.91}}

and returning ``{"question": str, "options": [str] | absent, "answer": str}``.
:func:`template_qa` is the offline default; :class:`HTTPQAGenerator` posts
the same request to a remote service.
"""

from __future__ import annotations

import enum
import json
import logging
import time
import urllib.request
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from dualvad import __version__
from dualvad._io import dumps_doc
from dualvad.allocation import heuristic_extract, select_frames
from dualvad.evaluation import aggregate
from dualvad.scoring import ScoredTimeline

logger = logging.getLogger(__name__)


class QuestionType(str, enum.Enum):
    MULTIPLE_CHOICE = "multiple_choice"
    TRUE_FALSE = "true_false"
    SHORT_ANSWER = "short_answer"
    ACTION_CLASSIFICATION = "action_classification"
    OBJECT_EXISTENCE = "object_existence"
    SPATIAL_REASONING = "spatial_reasoning"
    ANOMALY_DETECTION = "anomaly_detection"
    CRIME_TYPE_MATCHING = "crime_type_matching"
    TEMPORAL_REASONING = "temporal_reasoning"
    SECURITY_RESPONSE = "security_response"


QUESTION_TYPES: tuple[QuestionType, ...] = tuple(QuestionType)

TEMPLATE_QUESTIONS = {
    QuestionType.MULTIPLE_CHOICE: "What is this person doing?",
    QuestionType.TRUE_FALSE: "Was this scene captured in a restricted area?",
    QuestionType.SHORT_ANSWER: "What should the security officer do in this situation?",
    QuestionType.ACTION_CLASSIFICATION: "What is the person in the red shirt doing?",
    QuestionType.OBJECT_EXISTENCE: "Is there a firearm visible in the frame?",
    QuestionType.SPATIAL_REASONING: "Is the person located on the left side of the frame?",
    QuestionType.ANOMALY_DETECTION: "Does this scene appear to be abnormal?",
    QuestionType.CRIME_TYPE_MATCHING: "If abnormal, what type of crime does this indicate?",
    QuestionType.TEMPORAL_REASONING: "Was this scene captured during nighttime hours?",
    QuestionType.SECURITY_RESPONSE: "What is the most appropriate security response in this situation?",
}

PLACEHOLDER_OPTIONS = ["option A", "option B", "option C", "option D"]
PLACEHOLDER_ANSWER = "unspecified"

QAGenerator = Callable[[dict[str, Any]], dict[str, Any]]


class ManifestError(ValueError):
    pass


# -- media references -------------------------------------------------------


@dataclass(frozen=True)
class FrameRef:
    video_id: str
    frame_index: int

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "frame", "video_id": self.video_id, "frame_index": self.frame_index}


@dataclass(frozen=True)
class SegmentRef:
    video_id: str
    segment_index: int
    start: int
    end: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "segment",
            "video_id": self.video_id,
            "segment_index": self.segment_index,
            "start": self.start,
            "end": self.end,
        }


def media_from_dict(d: dict[str, Any]) -> FrameRef | SegmentRef:
    if d.get("kind") == "frame":
        return FrameRef(d["video_id"], d["frame_index"])
    if d.get("kind") == "segment":
        return SegmentRef(d["video_id"], d["segment_index"], d["start"], d["end"])
    raise ManifestError(f"unknown media kind {d.get('kind')!r}")


# -- samples ----------------------------------------------------------------


@dataclass(frozen=True)
class QASample:
    sample_id: str
    media: FrameRef | SegmentRef
    question_type: QuestionType
    question: str
    answer: str
    anomaly_score: float
    label: int
    options: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "question_type", QuestionType(self.question_type))
        if self.options is not None:
            object.__setattr__(self, "options", tuple(self.options))
        validate_qa(self.question_type, self.options, self.answer)
        if not 0.0 <= self.anomaly_score <= 1.0:
            raise ManifestError(f"{self.sample_id}: anomaly_score outside [0, 1]")
        if self.label not in (0, 1):
            raise ManifestError(f"{self.sample_id}: label must be 0 or 1")

    def to_dict(self) -> dict[str, Any]:
        d = {
            "sample_id": self.sample_id,
            "media": self.media.to_dict(),
            "question_type": self.question_type.value,
            "question": self.question,
            "answer": self.answer,
            "anomaly_score": self.anomaly_score,
            "label": self.label,
        }
        if self.options is not None:
            d["options"] = list(self.options)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "QASample":
        return cls(
            sample_id=d["sample_id"],
            media=media_from_dict(d["media"]),
            question_type=QuestionType(d["question_type"]),
            question=d["question"],
            answer=d["answer"],
            anomaly_score=d["anomaly_score"],
            label=d["label"],
            options=tuple(d["options"]) if d.get("options") is not None else None,
        )


def validate_qa(qtype: QuestionType, options: Sequence[str] | None, answer: str) -> None:
    if qtype is QuestionType.MULTIPLE_CHOICE:
        if options is None or len(options) != 4:
            raise ManifestError("multiple-choice questions need exactly 4 options")
        if answer not in options:
            raise ManifestError("multiple-choice answer must be one of the options")
    elif qtype is QuestionType.TRUE_FALSE and answer not in ("yes", "no"):
        raise ManifestError("true/false answers must be 'yes' or 'no'")


@dataclass(frozen=True)
class AbnormalityScoringTask:
    sample_id: str
    video_id: str
    target: float

    def __post_init__(self):
        if not 0.0 <= self.target <= 1.0:
            raise ManifestError(f"{self.sample_id}: target outside [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {"sample_id": self.sample_id, "video_id": self.video_id, "target": self.target}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AbnormalityScoringTask":
        return cls(d["sample_id"], d["video_id"], d["target"])


@dataclass
class BenchmarkManifest:
    kind: str
    samples: list[QASample] = field(default_factory=list)
    scoring_tasks: list[AbnormalityScoringTask] = field(default_factory=list)
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("image", "video"):
            raise ManifestError(f"unknown manifest kind {self.kind!r}")
        if self.kind == "image" and self.scoring_tasks:
            raise ManifestError("image manifests carry no scoring tasks")
        want = FrameRef if self.kind == "image" else SegmentRef
        ids = set()
        for s in [*self.samples, *self.scoring_tasks]:
            if s.sample_id in ids:
                raise ManifestError(f"duplicate sample_id {s.sample_id!r}")
            ids.add(s.sample_id)
        for s in self.samples:
            if not isinstance(s.media, want):
                raise ManifestError(f"{s.sample_id}: media kind does not match a {self.kind} manifest")

    def type_counts(self) -> dict[str, int]:
        counts = {qt.value: 0 for qt in QUESTION_TYPES}
        for s in self.samples:
            counts[s.question_type.value] += 1
        return counts

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "samples": [s.to_dict() for s in self.samples],
            "scoring_tasks": [t.to_dict() for t in self.scoring_tasks],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BenchmarkManifest":
        return cls(
            kind=d["kind"],
            samples=[QASample.from_dict(s) for s in d.get("samples", [])],
            scoring_tasks=[AbnormalityScoringTask.from_dict(t) for t in d.get("scoring_tasks", [])],
            provenance=dict(d.get("provenance", {})),
        )

    def to_json(self) -> str:
        return dumps_doc(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "BenchmarkManifest":
        return cls.from_dict(json.loads(text))


# -- generators -------------------------------------------------------------


def template_qa(request: dict[str, Any]) -> dict[str, Any]:
    """Offline QA generator: fixed question per type, answer from the label where possible."""
    qtype = QuestionType(request["question_type"])
    label = int(request["context"]["label"])
    out: dict[str, Any] = {"question": TEMPLATE_QUESTIONS[qtype]}
    if qtype is QuestionType.MULTIPLE_CHOICE:
        out["options"] = list(PLACEHOLDER_OPTIONS)
        out["answer"] = PLACEHOLDER_OPTIONS[0]
    elif qtype in (QuestionType.ANOMALY_DETECTION, QuestionType.TRUE_FALSE):
        out["answer"] = "yes" if label else "no"
    else:
        out["answer"] = PLACEHOLDER_ANSWER
    return out


class HTTPQAGenerator:
    """Send generator requests as JSON POST bodies to ``url``."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def __call__(self, request: dict[str, Any]) -> dict[str, Any]:
        body = json.dumps(request).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, headers={"Content-Type": "application/json"}, method="POST")
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))


def _make_sample(generator, sample_id, media, qtype, score, label) -> QASample | None:
    request = {"media": media.to_dict(), "question_type": qtype.value, "context": {"label": label, "score": score}}
    try:
        resp = generator(request)
        options = resp.get("options")
        return QASample(
            sample_id=sample_id,
            media=media,
            question_type=qtype,
            question=str(resp["question"]),
            answer=str(resp["answer"]),
            anomaly_score=score,
            label=label,
            options=tuple(options) if options is not None else None,
        )
    except Exception as exc:  # noqa: BLE001 - any generator failure skips the sample
        logger.warning("skipping %s: %s", sample_id, exc)
        return None


def _provenance(kind: str, seed: int, extra: dict[str, Any], skipped: int) -> dict[str, Any]:
    return {
        "builder": f"{kind}-manifest",
        "seed": seed,
        "config": extra,
        "skipped": skipped,
        "versions": {"dualvad": __version__},
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


def build_image_manifest(
    corpus: Iterable[ScoredTimeline], qa_generator: QAGenerator = template_qa, seed: int = 0
) -> BenchmarkManifest:
    """One frame sample per frame picked by the 3/1 heuristic.

    Question types cycle through all ten, starting at ``seed % 10``.
    """
    samples = []
    skipped = 0
    position = seed
    for scored in corpus:
        tl = scored.timeline
        for frame in select_frames(heuristic_extract(scored), tl, "even"):
            seg = tl.segment_of(frame)
            score, label = scored.scores[seg].score, scored.labels[seg]
            qtype = QUESTION_TYPES[position % len(QUESTION_TYPES)]
            position += 1
            sid = f"{tl.video_id}:f{frame}:{qtype.value}"
            sample = _make_sample(qa_generator, sid, FrameRef(tl.video_id, frame), qtype, score, label)
            if sample is None:
                skipped += 1
            else:
                samples.append(sample)
    return BenchmarkManifest("image", samples, [], _provenance("image", seed, {}, skipped))


def build_video_manifest(
    corpus: Iterable[ScoredTimeline],
    qa_generator: QAGenerator = template_qa,
    samples_per_segment: int = 1,
    seed: int = 0,
    aggregator: str = "max",
) -> BenchmarkManifest:
    """``samples_per_segment`` QA samples per segment plus one scoring task per video."""
    if samples_per_segment < 1:
        raise ManifestError("samples_per_segment must be >= 1")
    samples = []
    tasks = []
    skipped = 0
    position = seed
    for scored in corpus:
        tl = scored.timeline
        for seg, sc, label in zip(tl.segments, scored.scores, scored.labels):
            ref = SegmentRef(tl.video_id, seg.index, seg.start_frame, seg.end_frame)
            for k in range(samples_per_segment):
                qtype = QUESTION_TYPES[position % len(QUESTION_TYPES)]
                position += 1
                sid = f"{tl.video_id}:s{seg.index}:{k}:{qtype.value}"
                sample = _make_sample(qa_generator, sid, ref, qtype, sc.score, label)
                if sample is None:
                    skipped += 1
                else:
                    samples.append(sample)
        tasks.append(AbnormalityScoringTask(f"{tl.video_id}:score", tl.video_id, aggregate(scored.values(), aggregator)))
    config = {"samples_per_segment": samples_per_segment, "aggregator": aggregator}
    return BenchmarkManifest("video", samples, tasks, _provenance("video", seed, config, skipped))

