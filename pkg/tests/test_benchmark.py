import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import timeline_from_lengths
from dualvad.benchmark import (
    PLACEHOLDER_OPTIONS,
    QUESTION_TYPES,
    AbnormalityScoringTask,
    BenchmarkManifest,
    FrameRef,
    HTTPQAGenerator,
    ManifestError,
    QASample,
    QuestionType,
    SegmentRef,
    build_image_manifest,
    build_video_manifest,
    template_qa,
)
from dualvad.scoring import attach_scores


def scored(vid, lengths, scores):
    return attach_scores(timeline_from_lengths(vid, lengths), lambda _t: scores)


def without_timestamp(manifest):
    d = manifest.to_dict()
    d["provenance"] = {k: v for k, v in d["provenance"].items() if k != "created_at"}
    return json.dumps(d, sort_keys=True)


def test_ten_question_types():
    assert len(QUESTION_TYPES) == 10
    assert QuestionType("anomaly_detection") is QuestionType.ANOMALY_DETECTION


# -- image manifests --------------------------------------------------------


def test_image_manifest_three_plus_one():
    m = build_image_manifest([scored("v", [10, 10], [0.8, 0.2])])
    assert m.kind == "image" and len(m.samples) == 4 and not m.scoring_tasks
    assert [s.media.frame_index for s in m.samples] == [0, 5, 9, 14]
    assert [s.label for s in m.samples] == [1, 1, 1, 0]


def test_image_manifest_all_normal():
    m = build_image_manifest([scored("v", [4, 4, 4, 4, 4], [0.1] * 5)])
    assert len(m.samples) == 5


def test_image_manifest_empty_corpus():
    m = build_image_manifest([])
    assert m.samples == [] and m.kind == "image"


@st.composite
def scored_corpora(draw):
    corpus = []
    for i in range(draw(st.integers(0, 5))):
        lengths = draw(st.lists(st.integers(1, 12), min_size=1, max_size=6))
        scores = draw(st.lists(st.sampled_from([0.0, 0.3, 0.5, 0.7, 1.0]), min_size=len(lengths), max_size=len(lengths)))
        corpus.append(scored(f"v{i}", lengths, scores))
    return corpus


@given(scored_corpora(), st.integers(0, 2**64 - 1))
@settings(deadline=None)
def test_image_size_law_and_uniqueness(corpus, seed):
    m = build_image_manifest(corpus, seed=seed)
    expected = sum(
        min(3, seg.length) if lab else 1 for sc in corpus for seg, lab in zip(sc.timeline.segments, sc.labels)
    )
    assert len(m.samples) == expected
    assert len({s.sample_id for s in m.samples}) == expected
    assert len({(s.media.video_id, s.media.frame_index) for s in m.samples}) == expected
    assert sum(m.type_counts().values()) == expected
    assert without_timestamp(build_image_manifest(corpus, seed=seed)) == without_timestamp(m)


def test_image_question_types_follow_seed():
    corpus = [scored("v", [3] * 4, [0.1] * 4)]
    assert [s.question_type for s in build_image_manifest(corpus, seed=0).samples] == list(QUESTION_TYPES[:4])
    assert [s.question_type for s in build_image_manifest(corpus, seed=12).samples] == list(QUESTION_TYPES[2:6])


# -- video manifests --------------------------------------------------------


def test_video_manifest_counts_and_target():
    m = build_video_manifest([scored("v", [5, 5, 5], [0.9, 0.2, 0.4])])
    assert len(m.samples) == 3 and len(m.scoring_tasks) == 1
    assert m.scoring_tasks[0].target == 0.9
    assert all(isinstance(s.media, SegmentRef) for s in m.samples)
    assert m.samples[1].media == SegmentRef("v", 1, 5, 9)


def test_video_manifest_aggregator_and_multiplicity():
    m = build_video_manifest([scored("v", [5, 5], [0.9, 0.2])], samples_per_segment=3, aggregator="mean")
    assert len(m.samples) == 6
    assert m.scoring_tasks[0].target == pytest.approx(0.55)
    with pytest.raises(ManifestError):
        build_video_manifest([], samples_per_segment=0)


def test_round_robin_balance():
    m = build_video_manifest([scored("v", [2] * 25, [0.5] * 25)])
    counts = m.type_counts()
    assert sum(counts.values()) == 25
    assert max(counts.values()) - min(counts.values()) <= 1


# -- generators -------------------------------------------------------------


def request_for(qtype, label):
    return {"media": FrameRef("v", 0).to_dict(), "question_type": qtype.value, "context": {"label": label, "score": 0.5}}


def test_template_qa():
    r = template_qa(request_for(QuestionType.ANOMALY_DETECTION, 1))
    assert r == {"question": "Does this scene appear to be abnormal?", "answer": "yes"}
    assert template_qa(request_for(QuestionType.TRUE_FALSE, 0))["answer"] == "no"
    mc = template_qa(request_for(QuestionType.MULTIPLE_CHOICE, 0))
    assert mc["options"] == PLACEHOLDER_OPTIONS and mc["answer"] == "option A"
    for qt in QUESTION_TYPES:
        assert template_qa(request_for(qt, 1)) == template_qa(request_for(qt, 1))


def test_failing_generator_skips_samples():
    calls = []

    def flaky(request):
        calls.append(request)
        if len(calls) % 2 == 0:
            raise RuntimeError("service down")
        return template_qa(request)

    m = build_image_manifest([scored("v", [2] * 4, [0.1] * 4)], qa_generator=flaky)
    assert len(m.samples) == 2
    assert m.provenance["skipped"] == 2


def test_invalid_generator_output_is_skipped():
    m = build_image_manifest([scored("v", [2], [0.1])], qa_generator=lambda r: {"question": "q?", "answer": "maybe"}, seed=1)
    # seed 1 picks true_false, which only accepts yes/no
    assert m.samples == [] and m.provenance["skipped"] == 1


@pytest.fixture
def qa_server():
    received = []

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            received.append(body)
            out = json.dumps(template_qa(body)).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(out)))
            self.end_headers()
            self.wfile.write(out)

        def log_message(self, *args):
            pass

    server = HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/qa", received
    server.shutdown()
    server.server_close()


def test_http_generator_contract(qa_server):
    url, received = qa_server
    corpus = [scored("v", [4, 4], [0.9, 0.1])]
    remote = build_image_manifest(corpus, qa_generator=HTTPQAGenerator(url, timeout=5))
    local = build_image_manifest(corpus)
    assert without_timestamp(remote) == without_timestamp(local)
    assert len(received) == 4
    assert set(received[0]) == {"media", "question_type", "context"}
    assert set(received[0]["context"]) == {"label", "score"}


# -- schema -----------------------------------------------------------------


def test_manifest_roundtrip():
    for m in (
        build_image_manifest([scored("a", [6, 6], [0.7, 0.1])], seed=3),
        build_video_manifest([scored("a", [6, 6], [0.7, 0.1]), scored("b", [3], [0.2])], samples_per_segment=2),
    ):
        text = m.to_json()
        parsed = BenchmarkManifest.from_json(text)
        assert parsed == m
        assert parsed.to_json() == text


def test_manifest_invariants():
    sample = QASample("x", FrameRef("v", 0), QuestionType.SHORT_ANSWER, "q", "a", 0.2, 0)
    with pytest.raises(ManifestError, match="duplicate"):
        BenchmarkManifest("image", [sample, sample])
    with pytest.raises(ManifestError, match="media kind"):
        BenchmarkManifest("video", [sample])
    with pytest.raises(ManifestError):
        BenchmarkManifest("image", [], [AbnormalityScoringTask("t", "v", 0.3)])
    with pytest.raises(ManifestError):
        QASample("y", FrameRef("v", 0), QuestionType.MULTIPLE_CHOICE, "q", "e", 0.2, 0, ("a", "b", "c", "d"))
    with pytest.raises(ManifestError):
        AbnormalityScoringTask("t", "v", 1.3)
