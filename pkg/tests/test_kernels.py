"""The compiled and pure-Python kernels must agree bit for bit."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualvad import _pykernels, kernels

pytestmark = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")


@st.composite
def apportion_cases(draw):
    m = draw(st.integers(1, 40))
    caps = draw(st.lists(st.integers(1, 50), min_size=m, max_size=m))
    budget = draw(st.integers(m, sum(caps)))
    weights = draw(st.lists(st.floats(0.001, 1.0), min_size=m, max_size=m))
    total = sum(weights)
    raw = [budget * w / total for w in weights]
    return raw, caps, budget


@given(apportion_cases())
@settings(max_examples=400, deadline=None)
def test_apportion_backends_agree(case):
    raw, caps, budget = case
    a = _pykernels.apportion(raw, caps, budget)
    b = kernels.apportion(raw, caps, budget)
    assert a == b
    assert sum(a) == budget


def test_apportion_ties_identical():
    raw = [2.5, 2.5, 2.5, 2.5]
    assert _pykernels.apportion(raw, [9] * 4, 10) == kernels.apportion(raw, [9] * 4, 10) == [3, 3, 2, 2]
    raw = [8.0, 0.5, 0.5, 0.5, 0.5]
    assert _pykernels.apportion(raw, [9] * 5, 8) == kernels.apportion(raw, [9] * 5, 8) == [4, 1, 1, 1, 1]


@given(
    st.lists(st.tuples(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.9, 1.0]), st.integers(0, 1)), min_size=1, max_size=60)
)
@settings(max_examples=300, deadline=None)
def test_midrank_auc_backends_agree(pairs):
    s = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    a = _pykernels.midrank_auc(s, y)
    b = kernels.midrank_auc(s, y)
    assert (math.isnan(a) and math.isnan(b)) or a == b


@given(
    st.lists(st.integers(0, 200), max_size=40, unique=True),
    st.lists(st.tuples(st.integers(0, 200), st.integers(0, 20)), max_size=5),
)
def test_count_in_intervals_backends_agree(frames, spans):
    frames = sorted(frames)
    ivs, cursor = [], 0
    for start, width in sorted(spans):
        start = max(start, cursor)
        ivs.append((start, start + width))
        cursor = start + width + 2
    expected = sum(any(a <= f <= b for a, b in ivs) for f in frames)
    assert _pykernels.count_in_intervals(frames, ivs) == expected
    assert kernels.count_in_intervals(frames, ivs) == expected
