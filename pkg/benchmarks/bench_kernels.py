"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--seed 0]
"""

import argparse
import timeit

import numpy as np

from dualvad import _pykernels, kernels


def cases(rng):
    m = 64
    caps = rng.integers(5, 60, size=m).tolist()
    budget = 1024
    w = rng.random(m) ** 4
    raw = (budget * w / w.sum()).tolist()
    yield "apportion M=64 N=1024", "apportion", (raw, caps, budget)

    m = 16
    caps = [200] * m
    w = np.exp(rng.random(m) / 0.05)
    raw = (16 * w / w.sum()).tolist()
    yield "apportion M=16 N=16 (removals)", "apportion", (raw, caps, 16)

    n = 20_000
    scores = rng.random(n).round(2)
    labels = rng.integers(0, 2, size=n)
    yield "midrank_auc n=20000", "midrank_auc", (scores, labels)

    frames = np.sort(rng.choice(200_000, size=5_000, replace=False)).tolist()
    starts = np.sort(rng.choice(np.arange(0, 200_000, 500), size=100, replace=False))
    intervals = [(int(s), int(s) + 200) for s in starts]
    yield "count_in_intervals 5000 frames", "count_in_intervals", (frames, intervals)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if kernels.BACKEND != "cython":
        raise SystemExit("compiled kernels are not built; reinstall without DUALVAD_NO_EXT")

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':34} {'python (ms)':>12} {'cython (ms)':>12} {'speedup':>8}")
    for name, fn, call_args in cases(rng):
        py = getattr(_pykernels, fn)
        cy = getattr(kernels, fn)
        assert py(*call_args) == cy(*call_args), name
        number = 20
        t_py = min(timeit.repeat(lambda: py(*call_args), number=number, repeat=args.repeat)) / number
        t_cy = min(timeit.repeat(lambda: cy(*call_args), number=number, repeat=args.repeat)) / number
        print(f"{name:34} {t_py * 1e3:12.3f} {t_cy * 1e3:12.3f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
