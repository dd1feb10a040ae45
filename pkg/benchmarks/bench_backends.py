#!/usr/bin/env python3
"""Time the numpy kernels against the compiled ones.

Covers the three kernels individually plus a full fixture evaluation per
backend. Run from the repository root:

    python3 benchmarks/bench_backends.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from sparsekit import _kernels_py  # noqa: E402

try:
    from sparsekit import _kernels_cy
except ImportError:
    _kernels_cy = None

FIXTURE = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures", "lenet")


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_kernels(repeat: int) -> list[tuple[str, float, float | None]]:
    rng = np.random.default_rng(0)
    flat = rng.normal(0, 1, 2_000_000).astype(np.float32)
    x = rng.normal(0, 1, (32, 8, 28, 28)).astype(np.float32)
    w = rng.normal(0, 0.3, (16, 8, 3, 3)).astype(np.float32)
    xs = rng.normal(0, 1, (128, 1, 16, 16)).astype(np.float32)
    ws = rng.normal(0, 0.3, (8, 1, 3, 3)).astype(np.float32)

    cases = [
        ("apply_threshold 2M", lambda k: k.apply_threshold(flat, 0.5)),
        ("conv2d 32x8x28x28 / 16f", lambda k: k.conv2d_valid(x, w, 1)),
        ("conv2d 128x1x16x16 / 8f", lambda k: k.conv2d_valid(xs, ws, 1)),
        ("maxpool2d 2/2", lambda k: k.maxpool2d(x, 2, 2)),
    ]
    rows = []
    for name, call in cases:
        py = best_of(lambda: call(_kernels_py), repeat)
        cy = best_of(lambda: call(_kernels_cy), repeat) if _kernels_cy else None
        rows.append((name, py, cy))
    return rows


def bench_evaluate(repeat: int) -> list[tuple[str, float, float | None]]:
    code = (
        "import time, sparsekit as sk;"
        f"m=sk.read_model({FIXTURE + '.spwt'!r});"
        f"a=sk.load_manifest({FIXTURE + '.manifest.json'!r});"
        f"d=sk.read_dataset({FIXTURE + '.spds'!r});"
        "sk.evaluate(m,a,d);"  # warm caches before timing
        "t=time.perf_counter();"
        "[sk.evaluate(m,a,d) for _ in range(5)];"
        "print((time.perf_counter()-t)/5)")

    def run(backend: str) -> float:
        samples = []
        for _ in range(repeat):
            out = subprocess.run(
                [sys.executable, "-c", code], capture_output=True, text=True,
                env=dict(os.environ, SPARSEKIT_BACKEND=backend))
            if out.returncode != 0:
                raise RuntimeError(out.stderr)
            samples.append(float(out.stdout))
        return statistics.median(samples)

    py = run("python")
    cy = run("cython") if _kernels_cy else None
    return [("evaluate lenet fixture (128)", py, cy)]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if _kernels_cy is None:
        print("note: compiled kernels not built, timing the numpy backend only")

    rows = bench_kernels(args.repeat) + bench_evaluate(max(3, args.repeat // 2))
    width = max(len(r[0]) for r in rows)
    print(f"{'case'.ljust(width)}  {'python':>10}  {'cython':>10}  {'speedup':>8}")
    for name, py, cy in rows:
        if cy is None:
            print(f"{name.ljust(width)}  {py * 1e3:9.2f}ms  {'-':>10}  {'-':>8}")
        else:
            print(f"{name.ljust(width)}  {py * 1e3:9.2f}ms  {cy * 1e3:9.2f}ms  "
                  f"{py / cy:7.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
