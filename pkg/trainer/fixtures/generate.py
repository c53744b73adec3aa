"""Regenerate the loss fixtures from the reference implementation.

Run from the repository root with the formkv package installed:

    python3 trainer/fixtures/generate.py

The trainer's loss port is tested against these numbers, so the two
implementations can only drift if somebody edits one side and forgets
to rerun this script.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from formkv.metrics import (
    LossConfig,
    combined_loss,
    dice_loss,
    weighted_cross_entropy,
)

HERE = Path(__file__).resolve().parent
CONFIG = LossConfig()


def one_hot(classes: np.ndarray) -> np.ndarray:
    return np.eye(4, dtype=np.float64)[classes]


def case(name: str, prob: np.ndarray, classes: np.ndarray) -> dict:
    hot = one_hot(classes)
    return {
        "name": name,
        "height": int(prob.shape[0]),
        "width": int(prob.shape[1]),
        "prob": [round(float(v), 17) for v in prob.ravel()],
        "target_classes": [int(v) for v in classes.ravel()],
        "dice": dice_loss(prob, hot, CONFIG),
        "wce": weighted_cross_entropy(prob, hot, CONFIG),
        "combined": combined_loss(prob, hot, CONFIG),
    }


def random_prob(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    raw = rng.random((h, w, 4)) + 0.01
    return raw / raw.sum(axis=2, keepdims=True)


def confident_prob(classes: np.ndarray, peak: float) -> np.ndarray:
    rest = (1.0 - peak) / 3.0
    prob = np.full(classes.shape + (4,), rest, dtype=np.float64)
    for c in range(4):
        prob[classes == c, c] = peak
    return prob


def main() -> None:
    rng = np.random.default_rng(20240915)

    cases = []
    classes = rng.integers(0, 4, (6, 5))
    cases.append(case("random_small", random_prob(rng, 6, 5), classes))

    classes = rng.integers(0, 4, (8, 8))
    cases.append(case("confident_right", confident_prob(classes, 0.97), classes))

    classes = rng.integers(0, 4, (7, 9))
    wrong = (classes + 1) % 4
    cases.append(case("confident_wrong", confident_prob(wrong, 0.999), classes))

    classes = rng.integers(0, 4, (4, 4))
    cases.append(case("uniform_prob", np.full((4, 4, 4), 0.25), classes))

    # mostly background, stressing the low class-3 weight and the
    # absent-channel dice path
    classes = np.full((9, 6), 3, dtype=np.int64)
    classes[rng.random((9, 6)) < 0.1] = rng.integers(0, 3)
    cases.append(case("background_heavy", random_prob(rng, 9, 6), classes))

    (HERE / "loss_parity.json").write_text(json.dumps(cases, indent=1))

    # a fresh model with a zeroed head emits exactly 0.25 per class, so
    # its first loss against this target must match the stored value
    size = 64
    classes = np.full((size, size), 3, dtype=np.int64)
    box_rng = np.random.default_rng(7)
    for cls in (0, 1, 2):
        for _ in range(6):
            y = int(box_rng.integers(0, size - 8))
            x = int(box_rng.integers(0, size - 8))
            classes[y : y + 6, x : x + 10] = cls
    uniform = {
        "size": size,
        "target_classes": [int(v) for v in classes.ravel()],
        "combined": combined_loss(np.full((size, size, 4), 0.25), one_hot(classes), CONFIG),
    }
    (HERE / "uniform_loss.json").write_text(json.dumps(uniform))

    for c in cases:
        print(f"{c['name']:>17}: dice={c['dice']:.12f} wce={c['wce']:.12f} combined={c['combined']:.12f}")
    print(f"     uniform_loss: combined={uniform['combined']:.12f}")


if __name__ == "__main__":
    main()
