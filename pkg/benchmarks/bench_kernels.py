"""Compare the compiled and reference pixel kernels on realistic inputs.

Usage: python3 benchmarks/bench_kernels.py [--reps N]
"""

import argparse
import importlib
import time

import numpy as np


def best_of(fn, reps: int) -> float:
    best = float("inf")
    for _ in range(reps):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def page_boxes(rng, count: int, height: int, width: int) -> np.ndarray:
    left = rng.integers(-10, width - 20, size=count)
    top = rng.integers(-10, height - 10, size=count)
    return np.stack([left, top,
                     left + rng.integers(20, 200, size=count),
                     top + rng.integers(8, 40, size=count)], axis=1)


def blob_mask(rng, height: int, width: int) -> np.ndarray:
    # sparse speckle dilated into blobs, a rough stand-in for word pixels
    mask = rng.random((height, width)) < 0.02
    grown = mask.copy()
    grown[1:, :] |= mask[:-1, :]
    grown[:, 1:] |= mask[:, :-1]
    return grown


def cases(rng) -> list[tuple[str, str, tuple]]:
    out = []
    for height, width in ((1000, 760),):
        boxes = page_boxes(rng, 60, height, width)
        out.append((f"fill_boxes      {height}x{width}, 60 boxes",
                    "fill_boxes",
                    (np.full((height, width), 3, dtype=np.uint8), boxes, 0)))
    for side in (112, 448):
        out.append((f"label_components {side}x{side} blobs",
                    "label_components", (blob_mask(rng, side, side),)))
    for side in (112, 448):
        a = rng.integers(0, 4, size=(side, side)).astype(np.uint8)
        b = rng.integers(0, 4, size=(side, side)).astype(np.uint8)
        out.append((f"confusion_matrix {side}x{side}, 4 classes",
                    "confusion_matrix", (a, b, 4)))
    return out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=30,
                        help="repetitions per case; best time wins")
    args = parser.parse_args()

    ref = importlib.import_module("formkv.kernels._ref")
    try:
        fast = importlib.import_module("formkv.kernels._fast")
    except ImportError:
        fast = None
        print("compiled backend unavailable; timing the reference only\n")

    rng = np.random.default_rng(11)
    header = f"{'case':<36}{'reference':>12}{'compiled':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, kernel, template in cases(rng):
        def run(module, kernel=kernel, template=template):
            args_copy = tuple(a.copy() if isinstance(a, np.ndarray) else a
                              for a in template)
            getattr(module, kernel)(*args_copy)

        ref_ms = best_of(lambda: run(ref), args.reps) * 1e3
        if fast is None:
            print(f"{name:<36}{ref_ms:>10.2f}ms{'-':>12}{'-':>9}")
            continue
        fast_ms = best_of(lambda: run(fast), args.reps) * 1e3
        print(f"{name:<36}{ref_ms:>10.2f}ms{fast_ms:>10.2f}ms"
              f"{ref_ms / fast_ms:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
