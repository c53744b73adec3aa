/**
 * Single-process training loop: Adam, batch size 1, early stopping on
 * validation mean IoU (foreground classes) with best-weights restore.
 * All randomness flows from one integer seed, so identical configs give
 * identical runs.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { UNet } from './arch';
import { disposeDataset, Example } from './data';
import {
  argmaxClasses,
  combinedLoss,
  confusionAdd,
  DEFAULT_LOSS,
  iouFromConfusion,
  IouSummary,
  LossConfig,
  NUM_CLASSES,
} from './loss';
import { configHash, seededShuffle } from './util';

export interface TrainConfig {
  learningRate: number;
  batchSize: 1;
  maxEpochs: number;
  patience: number;
  l2: number;
  seed: number;
  loss: LossConfig;
}

export const DEFAULT_TRAIN: TrainConfig = {
  learningRate: 1e-4,
  batchSize: 1,
  maxEpochs: 200,
  patience: 20,
  l2: 0.01,
  seed: 0,
  loss: DEFAULT_LOSS,
};

export interface EpochRecord {
  epoch: number;
  trainLoss: number;
  valMiou: number;
  valMiouNoBackground: number;
}

export interface ExperimentResult {
  epochsRun: number;
  bestEpoch: number;
  bestMiou: number;
  bestMiouNoBackground: number;
  perClassIou: number[];
  configHash: string;
  history: EpochRecord[];
}

/**
 * Stop when the watched metric has not improved for `patience` epochs.
 * With a constant metric the best epoch is the first, so training ends
 * at epoch best + patience + 1 at the latest.
 */
export class EarlyStopper {
  best = -Infinity;
  bestEpoch = 0;
  private sinceBest = 0;

  constructor(
    readonly patience: number,
    readonly minDelta = 0,
  ) {}

  /** Returns 'improved', 'continue', or 'stop' for the given epoch. */
  update(epoch: number, metric: number): 'improved' | 'continue' | 'stop' {
    if (metric > this.best + this.minDelta) {
      this.best = metric;
      this.bestEpoch = epoch;
      this.sinceBest = 0;
      return 'improved';
    }
    this.sinceBest += 1;
    return this.sinceBest >= this.patience ? 'stop' : 'continue';
  }
}

export function evaluateModel(model: UNet, examples: Example[]): IouSummary {
  const counts = new Float64Array(NUM_CLASSES * NUM_CLASSES);
  for (const example of examples) {
    const prob = model.forward(example.input, false);
    confusionAdd(counts, argmaxClasses(prob), example.targetClasses);
    prob.dispose();
  }
  return iouFromConfusion(counts);
}

export interface TrainCallbacks {
  onEpoch?: (record: EpochRecord) => void;
  /** Optional second stopping rule, e.g. a target metric for smoke runs. */
  stopWhen?: (record: EpochRecord) => boolean;
}

export function trainModel(
  model: UNet,
  trainSet: Example[],
  valSet: Example[],
  cfg: TrainConfig = DEFAULT_TRAIN,
  callbacks: TrainCallbacks = {},
): ExperimentResult {
  if (trainSet.length === 0) {
    throw new Error('empty training set');
  }
  const optimizer = tf.train.adam(cfg.learningRate);
  const trainables = model.trainables();
  const stopper = new EarlyStopper(cfg.patience);
  const history: EpochRecord[] = [];
  let bestWeights: Map<string, tf.Tensor> | null = null;
  let bestSummary: IouSummary | null = null;

  const evalSet = valSet.length > 0 ? valSet : trainSet;
  try {
    for (let epoch = 1; epoch <= cfg.maxEpochs; epoch++) {
      const order = seededShuffle(
        trainSet.map((_, index) => index),
        cfg.seed * 100003 + epoch,
      );
      let lossSum = 0;
      for (const index of order) {
        const example = trainSet[index];
        const { value, grads } = tf.variableGrads(() => {
          const prob = model.forward(example.input, true);
          const data = combinedLoss(prob, example.targetOneHot, cfg.loss);
          return tf.add(data, model.l2Penalty(cfg.l2)) as tf.Scalar;
        }, trainables);
        const loss = value.dataSync()[0];
        value.dispose();
        if (!Number.isFinite(loss)) {
          Object.values(grads).forEach((g) => g.dispose());
          throw new Error(
            `loss became ${loss} at epoch ${epoch} on form ${example.id}`,
          );
        }
        // variableGrads hands back plain tensors keyed by variable name,
        // which applyGradients accepts at runtime despite its type
        optimizer.applyGradients(grads as unknown as Record<string, tf.Variable>);
        Object.values(grads).forEach((g) => g.dispose());
        lossSum += loss;
      }

      const summary = evaluateModel(model, evalSet);
      const record: EpochRecord = {
        epoch,
        trainLoss: lossSum / trainSet.length,
        valMiou: summary.miou,
        valMiouNoBackground: summary.miouNoBackground,
      };
      history.push(record);
      callbacks.onEpoch?.(record);

      const verdict = stopper.update(epoch, summary.miouNoBackground);
      if (verdict === 'improved') {
        if (bestWeights) {
          for (const tensor of bestWeights.values()) tensor.dispose();
        }
        bestWeights = model.snapshot();
        bestSummary = summary;
      }
      if (verdict === 'stop' || callbacks.stopWhen?.(record)) {
        break;
      }
    }
  } finally {
    optimizer.dispose();
  }

  if (bestWeights) {
    model.restore(bestWeights);
    for (const tensor of bestWeights.values()) tensor.dispose();
  }
  const summary = bestSummary ?? evaluateModel(model, evalSet);
  return {
    epochsRun: history.length,
    bestEpoch: stopper.bestEpoch,
    bestMiou: summary.miou,
    bestMiouNoBackground: summary.miouNoBackground,
    perClassIou: summary.perClass,
    configHash: configHash({ arch: model.cfg, train: cfg }),
    history,
  };
}

// ---------------------------------------------------------------------------
// checkpoints: flat binary of all weights plus a JSON spec
// ---------------------------------------------------------------------------

export function saveCheckpoint(model: UNet, dir: string): void {
  fs.mkdirSync(dir, { recursive: true });
  const spec: { name: string; shape: number[]; offset: number; length: number }[] = [];
  const chunks: Float32Array[] = [];
  let offset = 0;
  for (const [name, variable] of model.variables) {
    const data = variable.dataSync() as Float32Array;
    spec.push({ name, shape: variable.shape, offset, length: data.length });
    chunks.push(data);
    offset += data.length;
  }
  const blob = new Float32Array(offset);
  spec.forEach((entry, index) => blob.set(chunks[index], entry.offset));
  fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(blob.buffer));
  fs.writeFileSync(
    path.join(dir, 'weights.json'),
    JSON.stringify({ arch: model.cfg, weights: spec }, null, 2),
  );
}

export function loadCheckpoint(dir: string): UNet {
  const parsed = JSON.parse(
    fs.readFileSync(path.join(dir, 'weights.json'), 'utf-8'),
  ) as { arch: UNet['cfg']; weights: { name: string; shape: number[]; offset: number; length: number }[] };
  const raw = fs.readFileSync(path.join(dir, 'weights.bin'));
  const blob = new Float32Array(raw.buffer, raw.byteOffset, raw.byteLength / 4);
  const model = new UNet(parsed.arch);
  for (const entry of parsed.weights) {
    const slice = blob.slice(entry.offset, entry.offset + entry.length);
    const tensor = tf.tensor(slice, entry.shape);
    model.variables.get(entry.name)!.assign(tensor);
    tensor.dispose();
  }
  return model;
}

export { disposeDataset };
