/**
 * Training loss and IoU metrics, kept numerically in step with the
 * Python package: soft dice over the three foreground channels plus a
 * class-weighted cross entropy, combined as
 * `4 * dice + 0.5 + 0.5 * wce`. The committed parity fixtures pin the
 * two implementations together to 1e-5.
 */

import * as tf from '@tensorflow/tfjs';

export const NUM_CLASSES = 4;
export const CLASS_NAMES = ['key', 'value', 'other', 'background'] as const;

export interface LossConfig {
  diceWeight: number;
  ceWeight: number;
  constant: number;
  ceClassWeights: [number, number, number, number];
  diceChannels: number[];
  diceSmooth: number;
  probFloor: number;
}

export const DEFAULT_LOSS: LossConfig = {
  diceWeight: 4.0,
  ceWeight: 0.5,
  constant: 0.5,
  ceClassWeights: [1.0, 1.0, 1.0, 0.3],
  diceChannels: [0, 1, 2],
  diceSmooth: 1.0,
  probFloor: 1e-7,
};

export function normalizedCeWeights(cfg: LossConfig = DEFAULT_LOSS): number[] {
  const total = cfg.ceClassWeights.reduce((a, b) => a + b, 0);
  return cfg.ceClassWeights.map((w) => w / total);
}

/** Soft dice on [B,H,W,4] probabilities vs one-hot targets. */
export function diceLoss(
  prob: tf.Tensor4D,
  targetOneHot: tf.Tensor4D,
  cfg: LossConfig = DEFAULT_LOSS,
): tf.Scalar {
  return tf.tidy(() => {
    const terms: tf.Scalar[] = [];
    for (const channel of cfg.diceChannels) {
      const p = prob.slice([0, 0, 0, channel], [-1, -1, -1, 1]);
      const t = targetOneHot.slice([0, 0, 0, channel], [-1, -1, -1, 1]);
      const inter = tf.sum(tf.mul(p, t));
      const denom = tf.add(tf.sum(p), tf.sum(t)).add(cfg.diceSmooth);
      terms.push(
        tf.sub(1, tf.div(inter.mul(2).add(cfg.diceSmooth), denom)) as tf.Scalar,
      );
    }
    return tf.div(tf.addN(terms), cfg.diceChannels.length) as tf.Scalar;
  });
}

/** Mean over pixels of -w[class] * ln(p at true class), floored. */
export function weightedCrossEntropy(
  prob: tf.Tensor4D,
  targetOneHot: tf.Tensor4D,
  cfg: LossConfig = DEFAULT_LOSS,
): tf.Scalar {
  return tf.tidy(() => {
    const weights = tf.tensor1d(normalizedCeWeights(cfg));
    const clipped = tf.clipByValue(prob, cfg.probFloor, 1.0);
    const pixelWeight = tf.sum(tf.mul(targetOneHot, weights), 3);
    // targets are one-hot, so this picks the floored true-class probability
    const trueProb = tf.sum(tf.mul(clipped, targetOneHot), 3);
    return tf.mean(tf.mul(tf.neg(pixelWeight), tf.log(trueProb))) as tf.Scalar;
  });
}

export function combine(dice: number, wce: number, cfg?: LossConfig): number;
export function combine(dice: tf.Scalar, wce: tf.Scalar, cfg?: LossConfig): tf.Scalar;
export function combine(
  dice: tf.Scalar | number,
  wce: tf.Scalar | number,
  cfg: LossConfig = DEFAULT_LOSS,
): tf.Scalar | number {
  if (typeof dice === 'number' && typeof wce === 'number') {
    // evaluated left to right, matching the tensor branch
    return dice * cfg.diceWeight + cfg.constant + wce * cfg.ceWeight;
  }
  return tf.tidy(
    () =>
      tf.add(
        tf.add((dice as tf.Scalar).mul(cfg.diceWeight), cfg.constant),
        (wce as tf.Scalar).mul(cfg.ceWeight),
      ) as tf.Scalar,
  );
}

export function combinedLoss(
  prob: tf.Tensor4D,
  targetOneHot: tf.Tensor4D,
  cfg: LossConfig = DEFAULT_LOSS,
): tf.Scalar {
  return tf.tidy(() =>
    combine(
      diceLoss(prob, targetOneHot, cfg),
      weightedCrossEntropy(prob, targetOneHot, cfg),
      cfg,
    ),
  );
}

// ---------------------------------------------------------------------------
// IoU on argmax class maps
// ---------------------------------------------------------------------------

/** 4x4 confusion counts, rows = target class, columns = predicted. */
export function confusionAdd(
  counts: Float64Array,
  pred: Int32Array | Uint8Array,
  target: Int32Array | Uint8Array,
): void {
  if (pred.length !== target.length) {
    throw new Error(`class map length mismatch: ${pred.length} vs ${target.length}`);
  }
  for (let i = 0; i < pred.length; i++) {
    counts[target[i] * NUM_CLASSES + pred[i]] += 1;
  }
}

export interface IouSummary {
  perClass: number[];
  miou: number;
  miouNoBackground: number;
}

/** Per-class IoU with the absent-class convention IoU = 1. */
export function iouFromConfusion(counts: Float64Array): IouSummary {
  const perClass: number[] = [];
  for (let c = 0; c < NUM_CLASSES; c++) {
    let row = 0;
    let col = 0;
    for (let k = 0; k < NUM_CLASSES; k++) {
      row += counts[c * NUM_CLASSES + k];
      col += counts[k * NUM_CLASSES + c];
    }
    const inter = counts[c * NUM_CLASSES + c];
    const union = row + col - inter;
    perClass.push(union > 0 ? inter / union : 1.0);
  }
  const miou = perClass.reduce((a, b) => a + b, 0) / NUM_CLASSES;
  const miouNoBackground = (perClass[0] + perClass[1] + perClass[2]) / 3;
  return { perClass, miou, miouNoBackground };
}

export function iouOfMaps(
  pred: Int32Array | Uint8Array,
  target: Int32Array | Uint8Array,
): IouSummary {
  const counts = new Float64Array(NUM_CLASSES * NUM_CLASSES);
  confusionAdd(counts, pred, target);
  return iouFromConfusion(counts);
}

/** Argmax over the channel axis of a [B,H,W,4] probability tensor. */
export function argmaxClasses(prob: tf.Tensor4D): Int32Array {
  const flat = tf.tidy(() => tf.argMax(prob, 3).flatten());
  const data = flat.dataSync() as Int32Array;
  flat.dispose();
  return data;
}
