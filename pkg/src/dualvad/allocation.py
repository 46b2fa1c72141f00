"""Frame-budget allocation across shot segments.

The anomaly-focused strategy turns segment scores into softmax weights,
scales them by the budget, floors the result, clamps every segment to
``[1, max_i]`` and then hands out (or takes back) the residual one frame at a
time by the gap between the real-valued target and the current count.

Uniform and random baselines share the same plan type so that downstream
code can compare strategies directly.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

from dualvad import kernels
from dualvad._io import dumps_doc
from dualvad._seeding import check_seed, rng_for
from dualvad.scoring import ScoredTimeline
from dualvad.timeline import SegmentTimeline

MIN_TEMPERATURE = 1e-6

STRATEGIES = ("anomaly_focused", "uniform", "random")
CAP_POLICIES = ("length", "fixed", "length_capped")
UNIFORM_MODES = ("global", "per_segment")

_STRATEGY_ALIASES = {"anomaly": "anomaly_focused", "anomaly-focused": "anomaly_focused"}


class AllocationError(ValueError):
    pass


def normalize_strategy(name: str) -> str:
    name = _STRATEGY_ALIASES.get(name, name)
    if name not in STRATEGIES:
        raise AllocationError(f"unknown strategy {name!r}; expected one of {', '.join(STRATEGIES)}")
    return name


@dataclass(frozen=True)
class AllocationConfig:
    budget: int
    temperature: float = 1.0
    cap_policy: str = "length"
    cap: int | None = None
    strategy: str = "anomaly_focused"
    seed: int = 0
    uniform_mode: str = "global"

    def __post_init__(self):
        object.__setattr__(self, "strategy", normalize_strategy(self.strategy))
        if isinstance(self.budget, bool) or not isinstance(self.budget, int) or self.budget < 1:
            raise AllocationError(f"budget must be a positive integer, got {self.budget!r}")
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise AllocationError(f"temperature must be positive and finite, got {self.temperature!r}")
        if self.cap_policy not in CAP_POLICIES:
            raise AllocationError(f"unknown cap policy {self.cap_policy!r}")
        if self.cap_policy != "length" and (self.cap is None or self.cap < 1):
            raise AllocationError(f"cap policy {self.cap_policy!r} needs a cap >= 1")
        if self.uniform_mode not in UNIFORM_MODES:
            raise AllocationError(f"unknown uniform mode {self.uniform_mode!r}")
        check_seed(self.seed)

    def caps(self, lengths: Sequence[int]) -> list[int]:
        if self.cap_policy == "length":
            return [int(n) for n in lengths]
        if self.cap_policy == "fixed":
            return [int(self.cap)] * len(lengths)
        return [min(int(n), int(self.cap)) for n in lengths]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class AllocationPlan:
    """Per-segment weights, targets and integer counts, plus the chosen frames.

    ``frames`` is empty for a counts-only plan as returned by :func:`allocate`.
    """

    weights: tuple[float, ...]
    raw: tuple[float, ...]
    counts: tuple[int, ...]
    config: AllocationConfig
    frames: tuple[int, ...] = ()
    video_id: str = ""
    strategy_used: str = field(default="")

    def __post_init__(self):
        if not self.strategy_used:
            object.__setattr__(self, "strategy_used", self.config.strategy)

    def to_dict(self) -> dict[str, Any]:
        cfg = self.config
        return {
            "video_id": self.video_id,
            "strategy": self.strategy_used,
            "budget": cfg.budget,
            "temperature": cfg.temperature,
            "seed": cfg.seed,
            "cap_policy": cfg.cap_policy,
            "cap": cfg.cap,
            "uniform_mode": cfg.uniform_mode,
            "weights": list(self.weights),
            "raw": list(self.raw),
            "counts": list(self.counts),
            "frames": list(self.frames),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AllocationPlan":
        cfg = AllocationConfig(
            budget=d["budget"],
            temperature=d["temperature"],
            cap_policy=d.get("cap_policy", "length"),
            cap=d.get("cap"),
            strategy=d["strategy"],
            seed=d.get("seed", 0),
            uniform_mode=d.get("uniform_mode", "global"),
        )
        return cls(
            weights=tuple(d.get("weights", ())),
            raw=tuple(d.get("raw", ())),
            counts=tuple(d["counts"]),
            config=cfg,
            frames=tuple(d["frames"]),
            video_id=d["video_id"],
            strategy_used=d["strategy"],
        )


def softmax_weights(scores: Sequence[float], temperature: float) -> list[float]:
    """Softmax of ``scores / temperature`` with max-subtraction.

    Temperatures below ``MIN_TEMPERATURE`` are raised to it. For very small
    temperatures and widely separated scores the trailing weights can
    underflow to 0.0.
    """
    if len(scores) == 0:
        raise AllocationError("empty score list")
    if not temperature > 0:
        raise AllocationError(f"temperature must be positive, got {temperature}")
    tau = max(float(temperature), MIN_TEMPERATURE)
    xs = []
    for s in scores:
        s = float(s)
        if not math.isfinite(s):
            raise AllocationError(f"non-finite score {s}")
        xs.append(s / tau)
    top = max(xs)
    exps = [math.exp(x - top) for x in xs]
    total = math.fsum(exps)
    return [e / total for e in exps]


def _check_feasible(m: int, budget: int, caps: Sequence[int]) -> None:
    if m < 1:
        raise AllocationError("no segments")
    if budget < m:
        raise AllocationError(f"budget below segment count ({budget} < {m})")
    if min(caps) < 1:
        raise AllocationError("every segment needs capacity >= 1")
    capacity = sum(caps)
    if capacity < budget:
        raise AllocationError(f"budget exceeds capacity ({budget} > {capacity})")


def allocate(scores: Sequence[float], lengths: Sequence[int], config: AllocationConfig) -> AllocationPlan:
    """Anomaly-focused counts for one video (no frame selection)."""
    if len(scores) != len(lengths):
        raise AllocationError("scores and lengths must be aligned")
    caps = config.caps(lengths)
    _check_feasible(len(scores), config.budget, caps)
    weights = softmax_weights(scores, config.temperature)
    raw = [config.budget * p for p in weights]
    counts = kernels.apportion(raw, caps, config.budget)
    return AllocationPlan(tuple(weights), tuple(raw), tuple(int(c) for c in counts), config)


def heuristic_extract(scored: ScoredTimeline) -> list[int]:
    """Frames per segment for the image benchmark: 3 if abnormal, else 1.

    Abnormal segments shorter than 3 frames give every frame they have.
    """
    return [min(3, seg.length) if label else 1 for seg, label in zip(scored.timeline.segments, scored.labels)]


# -- frame selection --------------------------------------------------------


def _round_half_up(num: int, den: int) -> int:
    return (2 * num + den) // (2 * den)


def _round_half_even(num: int, den: int) -> int:
    q, r = divmod(num, den)
    if 2 * r > den or (2 * r == den and q % 2 == 1):
        q += 1
    return q


def _dedupe_right(values: list[int], upper: int) -> list[int]:
    out: list[int] = []
    for v in values:
        if out and v <= out[-1]:
            v = out[-1] + 1
        if v > upper:
            raise AllocationError("not enough distinct frames")
        out.append(v)
    return out


def even_positions(start: int, end: int, count: int) -> list[int]:
    """``count`` evenly spaced frames in ``[start, end]``; one frame goes to the midpoint."""
    length = end - start + 1
    if not 1 <= count <= length:
        raise AllocationError(f"cannot pick {count} distinct frames from a segment of {length}")
    if count == 1:
        return [(start + end) // 2]
    vals = [start + _round_half_up(k * (length - 1), count - 1) for k in range(count)]
    return _dedupe_right(vals, end)


def select_frames(
    counts: Sequence[int], timeline: SegmentTimeline, strategy: str = "even", seed: int = 0
) -> list[int]:
    """Pick ``counts[i]`` distinct frames inside each segment.

    ``strategy`` is ``"even"`` for deterministic spacing or ``"random"`` for a
    draw without replacement keyed by ``(seed, video_id, segment_index)``.
    """
    if len(counts) != len(timeline):
        raise AllocationError("counts must align with segments")
    frames: list[int] = []
    for seg, c in zip(timeline.segments, counts):
        c = int(c)
        if c > seg.length:
            raise AllocationError(
                f"{timeline.video_id}: segment {seg.index} has {seg.length} frames, {c} requested"
            )
        if c <= 0:
            continue
        if strategy == "even":
            frames.extend(even_positions(seg.start_frame, seg.end_frame, c))
        elif strategy == "random":
            rng = rng_for(seed, timeline.video_id, seg.index)
            picks = rng.choice(seg.length, size=c, replace=False)
            frames.extend(int(seg.start_frame + p) for p in picks)
        else:
            raise AllocationError(f"unknown selection strategy {strategy!r}")
    frames.sort()
    return frames


# -- baselines --------------------------------------------------------------


def uniform_global_frames(frame_count: int, budget: int) -> list[int]:
    """``budget`` frames evenly spread over ``[0, frame_count - 1]``.

    Positions are ``k * (T - 1) / (N - 1)`` rounded half to even, the same
    rounding as ``np.round(np.linspace(0, T - 1, N))`` but in exact integers.
    """
    if budget > frame_count:
        raise AllocationError(f"budget exceeds capacity ({budget} > {frame_count})")
    if budget == 1:
        return [(frame_count - 1) // 2]
    vals = [_round_half_even(k * (frame_count - 1), budget - 1) for k in range(budget)]
    return _dedupe_right(vals, frame_count - 1)


def counts_from_frames(frames: Sequence[int], timeline: SegmentTimeline) -> list[int]:
    starts = [s.start_frame for s in timeline.segments]
    counts = [0] * len(timeline)
    for f in frames:
        counts[bisect.bisect_right(starts, f) - 1] += 1
    return counts


def allocate_uniform(lengths: Sequence[int], budget: int, mode: str = "global", caps: Sequence[int] | None = None):
    """Uniform baseline counts (and global frames in ``"global"`` mode).

    ``"global"`` spaces the budget over the whole video and ignores segment
    boundaries, so a segment can receive zero frames. ``"per_segment"``
    splits the budget equally over segments with the same min-1 and cap
    rules as the anomaly-focused strategy.

    Returns ``(counts, frames)``; ``frames`` is ``None`` in per-segment mode.
    """
    lengths = [int(n) for n in lengths]
    caps = list(caps) if caps is not None else lengths
    if mode == "global":
        total = sum(lengths)
        frames = uniform_global_frames(total, budget)
        starts = [0]
        for n in lengths[:-1]:
            starts.append(starts[-1] + n)
        counts = [0] * len(lengths)
        for f in frames:
            counts[bisect.bisect_right(starts, f) - 1] += 1
        return counts, frames
    if mode == "per_segment":
        _check_feasible(len(lengths), budget, caps)
        raw = [budget / len(lengths)] * len(lengths)
        return [int(c) for c in kernels.apportion(raw, caps, budget)], None
    raise AllocationError(f"unknown uniform mode {mode!r}")


def allocate_random(lengths: Sequence[int], budget: int, seed: int, caps: Sequence[int] | None = None, key: str = "") -> list[int]:
    """Random baseline counts: one frame per segment, the rest spread by length.

    The remaining ``budget - M`` frames are drawn without replacement from the
    pool of still-unused capacity, i.e. a multivariate hypergeometric draw
    proportional to segment sizes that never exceeds a cap.
    """
    caps = list(caps) if caps is not None else [int(n) for n in lengths]
    _check_feasible(len(lengths), budget, caps)
    extra = budget - len(lengths)
    if extra == 0:
        return [1] * len(lengths)
    rng = rng_for(seed, "random-counts", key)
    draw = rng.multivariate_hypergeometric([c - 1 for c in caps], extra)
    return [1 + int(x) for x in draw]


def plan_video(scored: ScoredTimeline, config: AllocationConfig) -> AllocationPlan:
    """Full plan (counts and frames) for one scored video under ``config.strategy``."""
    tl = scored.timeline
    lengths = tl.lengths()
    caps = config.caps(lengths)
    vid = tl.video_id

    if config.strategy == "anomaly_focused":
        plan = allocate(scored.values(), lengths, config)
        frames = select_frames(plan.counts, tl, "even")
        weights, raw, counts = plan.weights, plan.raw, plan.counts
    else:
        total = tl.frame_count
        weights = tuple(n / total for n in lengths)
        raw = tuple(config.budget * w for w in weights)
        if config.strategy == "uniform":
            counts, frames = allocate_uniform(lengths, config.budget, config.uniform_mode, caps)
            if frames is None:
                frames = select_frames(counts, tl, "even")
        else:
            counts = allocate_random(lengths, config.budget, config.seed, caps, key=vid)
            frames = select_frames(counts, tl, "random", config.seed)
        counts = tuple(counts)

    return AllocationPlan(
        weights=tuple(weights),
        raw=tuple(raw),
        counts=tuple(int(c) for c in counts),
        config=config,
        frames=tuple(frames),
        video_id=vid,
    )


def plan_to_json(plan: AllocationPlan, provenance: dict[str, Any] | None = None) -> str:
    d = plan.to_dict()
    if provenance is not None:
        d["provenance"] = provenance
    return dumps_doc(d)


def plan_from_json(text: str) -> tuple[AllocationPlan, dict[str, Any] | None]:
    d = json.loads(text)
    return AllocationPlan.from_dict(d), d.get("provenance")
