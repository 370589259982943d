"""Timing comparison of the three pair-counting paths.

Runs the grid-indexed correlogram with the compiled extension, with the pure
NumPy fallback, and the brute-force per-center oracle, over a range of point
counts, and prints a table of per-video times plus speedups.  All three paths
are checked to produce identical values on every size before timing.

Usage:
    python3 benchmarks/bench_backends.py [--sizes 200,1000,5000] [--repeat 5]
"""

import argparse
import importlib
import time

import numpy as np

from stcooc import KernelSet, LabeledVideo, brute_force_correlogram

cg_mod = importlib.import_module("stcooc.correlogram")


def make_video(rng, n, k=10, extent=(160.0, 120.0, 90.0)):
    w, h, f = extent
    pts = [
        (float(rng.uniform(0, w)), float(rng.uniform(0, h)),
         float(rng.uniform(0, f)), 1.0, [0.0])
        for _ in range(n)
    ]
    labels = rng.integers(1, k + 1, size=n)
    return LabeledVideo.from_points(
        video_id=f"bench-{n}", extent=(w, h, f), points=pts, labels=labels)


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="200,500,1000,2000,5000",
                        help="comma-separated point counts per video")
    parser.add_argument("--repeat", type=int, default=3,
                        help="timed repetitions; best of N is reported")
    parser.add_argument("--words", type=int, default=10)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    kernels = KernelSet(((4.0, 4.0, 3.0), (10.0, 10.0, 7.0), (22.0, 22.0, 15.0)))
    rng = np.random.default_rng(7)

    have_compiled = cg_mod.counting_backend() == "compiled"
    if not have_compiled:
        print("note: compiled extension unavailable; 'compiled' column omitted")

    header = f"{'points':>8} {'brute (ms)':>12} {'pure (ms)':>12}"
    if have_compiled:
        header += f" {'compiled (ms)':>14} {'pure/comp':>10}"
    header += f" {'brute/pure':>11}"
    print(header)
    print("-" * len(header))

    saved = cg_mod._backend
    try:
        for n in sizes:
            video = make_video(rng, n, k=args.words)

            t_brute, ref = timed(
                lambda: brute_force_correlogram(video, kernels, args.words),
                args.repeat)

            cg_mod._backend = cg_mod._pure_backend
            t_pure, pure = timed(
                lambda: cg_mod.correlogram(video, kernels, args.words),
                args.repeat)
            assert np.array_equal(pure.values, ref.values), "pure backend diverged"

            row = f"{n:>8} {t_brute * 1e3:>12.2f} {t_pure * 1e3:>12.2f}"
            if have_compiled:
                cg_mod._backend = saved
                t_comp, comp = timed(
                    lambda: cg_mod.correlogram(video, kernels, args.words),
                    args.repeat)
                assert np.array_equal(comp.values, ref.values), \
                    "compiled backend diverged"
                row += f" {t_comp * 1e3:>14.2f} {t_pure / t_comp:>9.1f}x"
            row += f" {t_brute / t_pure:>10.1f}x"
            print(row)
    finally:
        cg_mod._backend = saved


if __name__ == "__main__":
    main()
