"""Segmentation metrics and the training loss.

Probability maps are plain ``(H, W, 4)`` float arrays whose channels sum
to 1 per pixel (see :func:`validate_prob_map`); class maps are ``(H, W)``
index arrays or :class:`~formkv.raster.ClassMask`.

The loss combines a soft dice term over the three foreground channels
with a class-weighted categorical cross-entropy, as
``4 * dice + 0.5 + 0.5 * wce``. The stray additive constant is kept
verbatim from the formula this reproduces; it contributes nothing to
gradients and :class:`LossConfig` can switch it off. Cross-entropy class
weights are proportional to [1, 1, 1, 0.3], normalized to sum 1, so the
background weighs roughly a third of the foreground classes.

IoU is computed on argmax class maps, per class, with the absent-class
convention IoU = 1 when a class appears in neither mask. Dataset-level
evaluation pools intersections and unions over all pixels (micro
aggregation) before dividing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .kernels import confusion_matrix
from .raster import NUM_CLASSES, ClassMask

FOREGROUND_CHANNELS = (0, 1, 2)
CLASS_NAMES = ("key", "value", "other", "background")


@dataclass(frozen=True)
class LossConfig:
    """Weights and constants of the combined loss."""

    dice_weight: float = 4.0
    ce_weight: float = 0.5
    constant: float = 0.5
    ce_class_weights: tuple[float, ...] = (1.0, 1.0, 1.0, 0.3)
    dice_channels: tuple[int, ...] = FOREGROUND_CHANNELS
    dice_smooth: float = 1.0
    prob_floor: float = 1e-7

    def normalized_ce_weights(self) -> np.ndarray:
        weights = np.asarray(self.ce_class_weights, dtype=np.float64)
        return weights / weights.sum()

    def combine(self, dice: float, wce: float) -> float:
        return self.dice_weight * dice + self.constant + self.ce_weight * wce


DEFAULT_LOSS = LossConfig()


@dataclass
class MetricReport:
    """Per-class IoU plus the two mean-IoU flavours; loss values optional."""

    per_class_iou: tuple[float, float, float, float]
    miou: float
    miou_no_background: float
    dice: float | None = None
    wce: float | None = None
    combined: float | None = None

    def to_dict(self) -> dict:
        out = {
            "iou": {name: value for name, value in zip(CLASS_NAMES, self.per_class_iou)},
            "miou": self.miou,
            "miou_no_background": self.miou_no_background,
        }
        for key in ("dice", "wce", "combined"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    def to_text(self, include_background: bool = True) -> str:
        lines = [f"IoU ({name}): {value:.4f}"
                 for name, value in zip(CLASS_NAMES, self.per_class_iou)]
        if include_background:
            lines.append(f"Mean IoU: {self.miou:.4f}")
        lines.append(f"Mean IoU (without background): {self.miou_no_background:.4f}")
        if self.combined is not None:
            lines.append(f"dice: {self.dice:.4f}  wce: {self.wce:.4f}  "
                         f"loss: {self.combined:.4f}")
        return "\n".join(lines)


def _as_classes(mask) -> np.ndarray:
    array = mask.classes if isinstance(mask, ClassMask) else np.asarray(mask)
    if array.ndim != 2:
        raise ValueError(f"class map must be 2-D, got shape {array.shape}")
    return array


def validate_prob_map(prob: np.ndarray, tolerance: float = 1e-5) -> np.ndarray:
    """Check shape (H, W, 4), non-negativity, and per-pixel sum 1."""
    prob = np.asarray(prob)
    if prob.ndim != 3 or prob.shape[2] != NUM_CLASSES:
        raise ValueError(f"probability map must be (H, W, {NUM_CLASSES}), "
                         f"got shape {prob.shape}")
    if prob.size:
        if prob.min() < 0:
            raise ValueError("probability map has negative entries")
        sums = prob.sum(axis=2)
        worst = float(np.abs(sums - 1.0).max())
        if worst > tolerance:
            raise ValueError(f"per-pixel probabilities sum to 1 +/- {worst:.2e}")
    return prob


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# IoU
# ---------------------------------------------------------------------------

def _iou_from_confusion(confusion: np.ndarray) -> np.ndarray:
    intersection = np.diag(confusion).astype(np.float64)
    union = (confusion.sum(axis=0) + confusion.sum(axis=1)).astype(np.float64) - intersection
    iou = np.ones(NUM_CLASSES, dtype=np.float64)
    present = union > 0
    iou[present] = intersection[present] / union[present]
    return iou


def iou_per_class(pred, target) -> np.ndarray:
    """Per-class IoU of two class maps; absent classes score 1."""
    pred = _as_classes(pred)
    target = _as_classes(target)
    _check_same_shape(pred, target)
    return _iou_from_confusion(confusion_matrix(target, pred, NUM_CLASSES))


def mean_iou(pred, target, include_background: bool = True) -> float:
    iou = iou_per_class(pred, target)
    return float(iou.mean() if include_background else iou[:len(FOREGROUND_CHANNELS)].mean())


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def dice_loss(prob: np.ndarray, target_one_hot: np.ndarray,
              config: LossConfig = DEFAULT_LOSS) -> float:
    """Soft dice over the foreground channels, averaged.

    Per channel c: 1 - (2 * sum(p_c t_c) + eps) / (sum p_c + sum t_c + eps).
    """
    prob = np.asarray(prob, dtype=np.float64)
    target = np.asarray(target_one_hot, dtype=np.float64)
    _check_same_shape(prob, target)
    eps = config.dice_smooth
    total = 0.0
    for channel in config.dice_channels:
        p = prob[:, :, channel]
        t = target[:, :, channel]
        total += 1.0 - (2.0 * float((p * t).sum()) + eps) / (float(p.sum()) + float(t.sum()) + eps)
    return total / len(config.dice_channels)


def dice_loss_grad(prob: np.ndarray, target_one_hot: np.ndarray,
                   config: LossConfig = DEFAULT_LOSS) -> np.ndarray:
    """Analytic d(dice)/d(prob), same shape as ``prob``."""
    prob = np.asarray(prob, dtype=np.float64)
    target = np.asarray(target_one_hot, dtype=np.float64)
    _check_same_shape(prob, target)
    eps = config.dice_smooth
    grad = np.zeros_like(prob)
    scale = 1.0 / len(config.dice_channels)
    for channel in config.dice_channels:
        p = prob[:, :, channel]
        t = target[:, :, channel]
        numerator = 2.0 * (p * t).sum() + eps
        denominator = p.sum() + t.sum() + eps
        grad[:, :, channel] = scale * (numerator / denominator ** 2 - 2.0 * t / denominator)
    return grad


def weighted_cross_entropy(prob: np.ndarray, target_one_hot: np.ndarray,
                           config: LossConfig = DEFAULT_LOSS) -> float:
    """Mean over pixels of -w[class] * ln p[true class], probabilities floored."""
    prob = np.asarray(prob, dtype=np.float64)
    target = np.asarray(target_one_hot, dtype=np.float64)
    _check_same_shape(prob, target)
    weights = config.normalized_ce_weights()
    clipped = np.clip(prob, config.prob_floor, 1.0)
    pixel_weight = target @ weights
    true_prob = (clipped * target).sum(axis=2)
    # pixels are one-hot, so true_prob is the floored probability at the true class
    return float((-pixel_weight * np.log(np.where(true_prob > 0, true_prob, 1.0))).mean())


def weighted_cross_entropy_grad(prob: np.ndarray, target_one_hot: np.ndarray,
                                config: LossConfig = DEFAULT_LOSS) -> np.ndarray:
    """Analytic d(wce)/d(prob); zero outside the clip range."""
    prob = np.asarray(prob, dtype=np.float64)
    target = np.asarray(target_one_hot, dtype=np.float64)
    _check_same_shape(prob, target)
    weights = config.normalized_ce_weights()
    inside = (prob > config.prob_floor) & (prob < 1.0)
    clipped = np.clip(prob, config.prob_floor, 1.0)
    count = prob.shape[0] * prob.shape[1]
    grad = -target * weights.reshape(1, 1, -1) / clipped / count
    return np.where(inside, grad, 0.0)


def combined_loss(prob: np.ndarray, target_one_hot: np.ndarray,
                  config: LossConfig = DEFAULT_LOSS) -> float:
    """``dice_weight * dice + constant + ce_weight * wce``."""
    return config.combine(dice_loss(prob, target_one_hot, config),
                          weighted_cross_entropy(prob, target_one_hot, config))


def combined_loss_grad(prob: np.ndarray, target_one_hot: np.ndarray,
                       config: LossConfig = DEFAULT_LOSS) -> np.ndarray:
    """Gradient of the combined loss; the additive constant drops out."""
    return (config.dice_weight * dice_loss_grad(prob, target_one_hot, config)
            + config.ce_weight * weighted_cross_entropy_grad(prob, target_one_hot, config))


# ---------------------------------------------------------------------------
# dataset-level evaluation
# ---------------------------------------------------------------------------

def evaluate_pair(pred, target) -> MetricReport:
    iou = iou_per_class(pred, target)
    return MetricReport(per_class_iou=tuple(iou.tolist()),
                        miou=float(iou.mean()),
                        miou_no_background=float(iou[:3].mean()))


def evaluate_dataset(preds: Mapping[str, object],
                     targets: Mapping[str, object]) -> MetricReport:
    """Micro-aggregated IoU over aligned prediction/target class maps.

    Intersections and unions are pooled over every pixel of every pair
    before dividing, so the result equals the single-image IoU when one
    pair is given and is invariant under duplicating pairs.
    """
    missing = sorted(set(preds) ^ set(targets))
    if missing:
        raise ValueError("prediction/target ids do not align; unmatched: "
                         + ", ".join(missing))
    if not preds:
        raise ValueError("no prediction/target pairs given")
    pooled = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for source_id in sorted(preds):
        pred = _as_classes(preds[source_id])
        target = _as_classes(targets[source_id])
        _check_same_shape(pred, target)
        pooled += confusion_matrix(target, pred, NUM_CLASSES)
    iou = _iou_from_confusion(pooled)
    return MetricReport(per_class_iou=tuple(iou.tolist()),
                        miou=float(iou.mean()),
                        miou_no_background=float(iou[:3].mean()))
