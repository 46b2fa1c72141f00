import math
from fractions import Fraction

import numpy as np
import pytest

from dualvad.allocation import AllocationConfig
from dualvad.evaluation import run_strategy
from dualvad.simulation import (
    AblationReport,
    CorpusSpec,
    SimulationError,
    generate_corpus,
    noisy_scorer,
    overlap_fraction,
    run_ablation,
    score_corpus,
)
from dualvad.timeline import AnomalyAnnotation, VideoMeta, segment_from_fixed_window
from oracles import allocation_oracle, round_half_up_spacing, softmax_mp

SMALL = dict(video_count=12, frame_count_range=(120, 240), segment_length_range=(20, 40))


def test_empty_and_all_normal_corpora():
    assert generate_corpus(CorpusSpec(video_count=0)) == []
    corpus = generate_corpus(CorpusSpec(abnormal_video_fraction=0.0, **SMALL))
    assert len(corpus) == 12 and not any(ann.is_abnormal for _, ann in corpus)


def test_corpus_shape():
    spec = CorpusSpec(abnormal_video_fraction=0.5, abnormal_interval_fraction=0.1, **SMALL)
    corpus = generate_corpus(spec)
    abnormal = [ann for _, ann in corpus if ann.is_abnormal]
    assert len(abnormal) == 6
    for tl, ann in corpus:
        assert 120 <= tl.frame_count <= 240
        assert sum(tl.lengths()) == tl.frame_count
        assert all(n <= 40 for n in tl.lengths())
        if ann.is_abnormal:
            [(a, b)] = ann.intervals
            assert b - a + 1 == math.floor(0.1 * tl.frame_count + 0.5)


def test_corpus_deterministic():
    spec = CorpusSpec(seed=77, **SMALL)
    assert generate_corpus(spec) == generate_corpus(spec)
    assert generate_corpus(spec) != generate_corpus(CorpusSpec(seed=78, **SMALL))


def test_spec_validation():
    with pytest.raises(SimulationError):
        CorpusSpec(frame_count_range=(100, 50))
    with pytest.raises(SimulationError):
        CorpusSpec(frame_count_range=(20, 50), segment_length_range=(30, 40))
    with pytest.raises(SimulationError):
        CorpusSpec(abnormal_interval_fraction=0.0)
    with pytest.raises(SimulationError, match="unknown spec fields"):
        CorpusSpec.from_dict({"videos": 3})
    assert CorpusSpec.from_dict(CorpusSpec(seed=5).to_dict()) == CorpusSpec(seed=5)


def test_noiseless_scorer_examples():
    tl = segment_from_fixed_window(VideoMeta("v", 30), 10)
    ann = AnomalyAnnotation("v", ((10, 24),), 30)
    assert [s.score for s in noisy_scorer(tl, ann, 0.0, 0)] == [0.0, 1.0, 0.5]
    assert overlap_fraction(tl.segments[2], ann) == 0.5


def test_noisy_scorer_clamped_and_seeded():
    tl = segment_from_fixed_window(VideoMeta("v", 500), 10)
    ann = AnomalyAnnotation("v", ((0, 99),), 500)
    a = noisy_scorer(tl, ann, 0.5, 9)
    assert a == noisy_scorer(tl, ann, 0.5, 9)
    assert a != noisy_scorer(tl, ann, 0.5, 10)
    assert all(0.0 <= s.score <= 1.0 for s in a)
    with pytest.raises(SimulationError):
        noisy_scorer(tl, ann, -0.1, 0)


# -- fixed tiny corpus with an enumerated expectation -----------------------


def tiny_corpus():
    tl = segment_from_fixed_window(VideoMeta("tiny", 100), 10)
    return [(tl, AnomalyAnnotation("tiny", ((40, 49),), 100))]


def expected_coverage_tiny(budget, tau):
    tl, ann = tiny_corpus()[0]
    scores = [1.0 if i == 4 else 0.0 for i in range(10)]
    raw = [budget * p for p in softmax_mp(scores, tau)]
    counts = allocation_oracle(raw, tl.lengths(), budget)
    focused = []
    for seg, c in zip(tl.segments, counts):
        focused += round_half_up_spacing(seg.start_frame, seg.end_frame, c)
    uniform = [round(Fraction(k * 99, budget - 1)) for k in range(budget)]
    inside = lambda frames: sum(40 <= f <= 49 for f in frames) / budget  # noqa: E731
    return inside(focused), inside(uniform)


def test_anomaly_focused_beats_uniform_on_tiny_corpus():
    focused_exp, uniform_exp = expected_coverage_tiny(16, 0.1)
    assert (focused_exp, uniform_exp) == (7 / 16, 2 / 16)
    scored = score_corpus(tiny_corpus(), 0.0, 0)
    got = {
        s: run_strategy(scored, AllocationConfig(16, 0.1, strategy=s)).coverage.coverage
        for s in ("anomaly_focused", "uniform")
    }
    assert got == {"anomaly_focused": focused_exp, "uniform": uniform_exp}


def test_ablation_tiny_ordering_and_all_normal():
    spec = CorpusSpec(abnormal_interval_fraction=0.1, scorer_noise_sigma=0.0, seed=3, **SMALL)
    report = run_ablation(spec, ["uniform", "random", "anomaly_focused"], budget=16, temperature=0.1, repetitions=3)
    assert report.row("anomaly_focused")["coverage_mean"] > report.row("uniform")["coverage_mean"]

    normal = CorpusSpec(abnormal_video_fraction=0.0, **SMALL)
    report = run_ablation(normal, ["uniform", "random", "anomaly_focused"], budget=16, temperature=0.5, repetitions=2)
    for row in report.rows:
        assert row["coverage_mean"] == 0.0
        assert row["frame_auc_mean"] is None


def test_infinite_temperature_matches_per_segment_uniform():
    # 8 segments, budgets divisible by 8 so the large-temperature limit is exact
    corpus = []
    for i, interval in enumerate([(5, 30), (70, 79), (0, 159)]):
        tl = segment_from_fixed_window(VideoMeta(f"w{i}", 160), 20)
        corpus.append((tl, AnomalyAnnotation(f"w{i}", (interval,), 160)))
    scored = score_corpus(corpus, 0.3, 5)
    for budget in (8, 16, 40):
        focused = run_strategy(scored, AllocationConfig(budget, 1e6))
        uniform = run_strategy(scored, AllocationConfig(budget, strategy="uniform", uniform_mode="per_segment"))
        assert focused.coverage == uniform.coverage
        assert focused.coverage.sampled_total == 3 * budget


def test_noise_monotonicity():
    base = dict(SMALL, video_count=20)
    means, ses = [], []
    for sigma in (0.0, 0.2, 0.5):
        spec = CorpusSpec(scorer_noise_sigma=sigma, seed=11, **base)
        row = run_ablation(spec, ["anomaly_focused"], budget=16, temperature=0.5, repetitions=50).rows[0]
        means.append(row["coverage_mean"])
        ses.append(row["coverage_std"] / math.sqrt(50))
    for i in range(2):
        assert means[i] >= means[i + 1] - math.hypot(ses[i], ses[i + 1])


def test_ablation_deterministic_and_roundtrip():
    spec = CorpusSpec(seed=123, **SMALL)
    a = run_ablation(spec, ["uniform", "anomaly"], budget=8, temperature=[0.5, 2.0], repetitions=3)
    b = run_ablation(spec, ["uniform", "anomaly"], budget=8, temperature=[0.5, 2.0], repetitions=3)
    assert a.to_json() == b.to_json()
    assert [(r["strategy"], r["temperature"]) for r in a.rows] == [
        ("uniform", None),
        ("anomaly_focused", 0.5),
        ("anomaly_focused", 2.0),
    ]
    assert len(a.row("uniform")["coverage_per_repetition"]) == 3
    assert np.std(a.row("uniform")["coverage_per_repetition"], ddof=1) == pytest.approx(a.row("uniform")["coverage_std"])
    text = a.to_json()
    assert AblationReport.from_json(text).to_json() == text
    table = a.to_table()
    assert table.splitlines()[0].split() == ["strategy", "mean", "coverage", "stddev", "frame", "AUC"]
    assert "anomaly_focused (tau=0.5)" in table


def test_ablation_errors():
    with pytest.raises(SimulationError):
        run_ablation(CorpusSpec(**SMALL), ["uniform"], budget=8, repetitions=0)
    with pytest.raises(SimulationError):
        run_ablation(CorpusSpec(**SMALL), [], budget=8)
