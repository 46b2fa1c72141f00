import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dualvad import _pykernels, kernels  # noqa: E402
from dualvad.timeline import Segment, SegmentTimeline, VideoMeta  # noqa: E402


def make_timeline(video_id, bounds, frame_count=None):
    """Timeline from a list of inclusive (start, end) pairs."""
    segs = tuple(Segment(i, a, b) for i, (a, b) in enumerate(bounds))
    return SegmentTimeline(VideoMeta(video_id, frame_count or bounds[-1][1] + 1), segs)


def timeline_from_lengths(video_id, lengths):
    bounds, start = [], 0
    for n in lengths:
        bounds.append((start, start + n - 1))
        start += n
    return make_timeline(video_id, bounds)


@pytest.fixture(params=["python", "compiled"])
def backend(request, monkeypatch):
    """Run a test once per kernel backend."""
    if request.param == "compiled":
        if kernels.BACKEND != "cython":
            pytest.skip("compiled kernels not built")
        return kernels
    for name in ("apportion", "midrank_auc", "count_in_intervals"):
        monkeypatch.setattr(kernels, name, getattr(_pykernels, name))
    return _pykernels


def write_pipeline_inputs(root):
    """Two videos on disk: ``a`` (abnormal, 3 segments) and ``b`` (normal, 2 segments)."""
    root.mkdir(parents=True, exist_ok=True)
    segs = [
        ("a", 90, [(0, 29), (30, 59), (60, 89)]),
        ("b", 60, [(0, 29), (30, 59)]),
    ]
    lines = [
        json.dumps({"video_id": v, "frame_count": t, "segment": i, "start": s, "end": e})
        for v, t, bounds in segs
        for i, (s, e) in enumerate(bounds)
    ]
    (root / "segments.jsonl").write_text("\n".join(lines) + "\n")
    scores = {("a", 0): 0.1, ("a", 1): 0.9, ("a", 2): 0.3, ("b", 0): 0.2, ("b", 1): 0.1}
    (root / "scores.jsonl").write_text(
        "".join(json.dumps({"video_id": v, "segment": i, "score": s}) + "\n" for (v, i), s in scores.items())
    )
    anns = [{"video_id": "a", "abnormal": [[30, 59]]}, {"video_id": "b", "abnormal": []}]
    (root / "annotations.json").write_text(json.dumps(anns))
    # frame predictions equal to ground truth, for every frame
    preds = [
        {"video_id": v, "frame": f, "score": float(v == "a" and 30 <= f <= 59)}
        for v, t in (("a", 90), ("b", 60))
        for f in range(t)
    ]
    (root / "frame_preds.jsonl").write_text("".join(json.dumps(p) + "\n" for p in preds))
    (root / "segment_preds.jsonl").write_text(
        "".join(json.dumps({"video_id": v, "segment": i, "score": s}) + "\n" for (v, i), s in scores.items())
    )
    return root


@pytest.fixture
def pipeline_inputs(tmp_path):
    return write_pipeline_inputs(tmp_path / "in")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
